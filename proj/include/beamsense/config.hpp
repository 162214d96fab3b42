#ifndef BEAMSENSE_CONFIG_HPP
#define BEAMSENSE_CONFIG_HPP

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace beamsense::config {

/// Plain-text `key = value` configuration with `[section]` headers.
/// Comments start with '#' or ';'. Lists are comma separated. Keys before
/// any section header are top-level and addressed with an empty section
/// name (or a dotted override without a dot prefix).
class ConfigMap {
 public:
  static ConfigMap parse(const std::string& text);
  static ConfigMap parse_file(const std::string& path);

  /// Applies an override like "dqn.gamma=0.9" or "budgets=0.1,0.3".
  void set_override(const std::string& assignment);

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key,
                    double fallback) const;
  long long get_int(const std::string& section, const std::string& key,
                    long long fallback) const;
  std::uint64_t get_uint64(const std::string& section, const std::string& key,
                           std::uint64_t fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;

  std::vector<double> get_double_list(const std::string& section, const std::string& key,
                                      const std::vector<double>& fallback) const;
  std::vector<long long> get_int_list(const std::string& section, const std::string& key,
                                      const std::vector<long long>& fallback) const;
  std::vector<std::uint64_t> get_uint64_list(
      const std::string& section, const std::string& key,
      const std::vector<std::uint64_t>& fallback) const;
  std::vector<std::string> get_string_list(const std::string& section,
                                           const std::string& key,
                                           const std::vector<std::string>& fallback) const;

  /// Rejects any (section, key) pair not present in `allowed`, which maps
  /// section name -> list of known keys. Throws naming the offending token.
  void check_known_keys(
      const std::map<std::string, std::vector<std::string>>& allowed) const;

  /// Canonical text form (sorted sections/keys) for run manifests.
  std::string render() const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  const std::string* find(const std::string& section, const std::string& key) const;

  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace beamsense::config

#endif
