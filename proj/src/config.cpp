#include "beamsense/config.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "beamsense/util.hpp"

namespace beamsense::config {

ConfigMap ConfigMap::parse(const std::string& text) {
  ConfigMap cfg;
  cfg.sections_[""];
  std::string section;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']' || t.size() < 3) {
        throw std::runtime_error("config line " + std::to_string(line_no) +
                                 ": malformed section header '" + t + "'");
      }
      section = trim(t.substr(1, t.size() - 2));
      cfg.sections_[section];
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": expected key = value, got '" + t + "'");
    }
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty()) {
      throw std::runtime_error("config line " + std::to_string(line_no) + ": empty key");
    }
    if (cfg.sections_[section].count(key) > 0) {
      throw std::runtime_error("config line " + std::to_string(line_no) +
                               ": duplicate key '" + key + "'");
    }
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

ConfigMap ConfigMap::parse_file(const std::string& path) {
  return parse(read_file(path));
}

void ConfigMap::set_override(const std::string& assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw std::invalid_argument("override must look like key=value, got '" + assignment +
                                "'");
  }
  const std::string dotted = trim(assignment.substr(0, eq));
  const std::string value = trim(assignment.substr(eq + 1));
  if (dotted.empty()) {
    throw std::invalid_argument("override has an empty key: '" + assignment + "'");
  }
  const std::size_t dot = dotted.find('.');
  if (dot == std::string::npos) {
    sections_[""][dotted] = value;
  } else {
    sections_[dotted.substr(0, dot)][dotted.substr(dot + 1)] = value;
  }
}

const std::string* ConfigMap::find(const std::string& section, const std::string& key) const {
  auto sit = sections_.find(section);
  if (sit == sections_.end()) return nullptr;
  auto kit = sit->second.find(key);
  if (kit == sit->second.end()) return nullptr;
  return &kit->second;
}

bool ConfigMap::has(const std::string& section, const std::string& key) const {
  return find(section, key) != nullptr;
}

namespace {
std::string dotted(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}
}  // namespace

std::string ConfigMap::get_string(const std::string& section, const std::string& key,
                                  const std::string& fallback) const {
  const std::string* v = find(section, key);
  return v != nullptr ? *v : fallback;
}

double ConfigMap::get_double(const std::string& section, const std::string& key,
                             double fallback) const {
  const std::string* v = find(section, key);
  return v != nullptr ? parse_double(*v, dotted(section, key)) : fallback;
}

long long ConfigMap::get_int(const std::string& section, const std::string& key,
                             long long fallback) const {
  const std::string* v = find(section, key);
  return v != nullptr ? parse_int(*v, dotted(section, key)) : fallback;
}

std::uint64_t ConfigMap::get_uint64(const std::string& section, const std::string& key,
                                    std::uint64_t fallback) const {
  const std::string* v = find(section, key);
  if (v == nullptr) return fallback;
  const long long parsed = parse_int(*v, dotted(section, key));
  if (parsed < 0) {
    throw std::runtime_error(dotted(section, key) + " must be non-negative");
  }
  return static_cast<std::uint64_t>(parsed);
}

bool ConfigMap::get_bool(const std::string& section, const std::string& key,
                         bool fallback) const {
  const std::string* v = find(section, key);
  if (v == nullptr) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes" || *v == "on") return true;
  if (*v == "false" || *v == "0" || *v == "no" || *v == "off") return false;
  throw std::runtime_error(dotted(section, key) + " must be a boolean, got '" + *v + "'");
}

namespace {
std::vector<std::string> list_items(const std::string& value) {
  std::vector<std::string> items;
  for (const std::string& piece : split(value, ',')) {
    const std::string t = trim(piece);
    if (!t.empty()) items.push_back(t);
  }
  return items;
}
}  // namespace

std::vector<double> ConfigMap::get_double_list(const std::string& section,
                                               const std::string& key,
                                               const std::vector<double>& fallback) const {
  const std::string* v = find(section, key);
  if (v == nullptr) return fallback;
  std::vector<double> out;
  for (const std::string& item : list_items(*v)) {
    out.push_back(parse_double(item, dotted(section, key)));
  }
  return out;
}

std::vector<long long> ConfigMap::get_int_list(const std::string& section,
                                               const std::string& key,
                                               const std::vector<long long>& fallback) const {
  const std::string* v = find(section, key);
  if (v == nullptr) return fallback;
  std::vector<long long> out;
  for (const std::string& item : list_items(*v)) {
    out.push_back(parse_int(item, dotted(section, key)));
  }
  return out;
}

std::vector<std::uint64_t> ConfigMap::get_uint64_list(
    const std::string& section, const std::string& key,
    const std::vector<std::uint64_t>& fallback) const {
  const std::string* v = find(section, key);
  if (v == nullptr) return fallback;
  std::vector<std::uint64_t> out;
  for (const std::string& item : list_items(*v)) {
    const long long parsed = parse_int(item, dotted(section, key));
    if (parsed < 0) {
      throw std::runtime_error(dotted(section, key) + " entries must be non-negative");
    }
    out.push_back(static_cast<std::uint64_t>(parsed));
  }
  return out;
}

std::vector<std::string> ConfigMap::get_string_list(
    const std::string& section, const std::string& key,
    const std::vector<std::string>& fallback) const {
  const std::string* v = find(section, key);
  return v != nullptr ? list_items(*v) : fallback;
}

void ConfigMap::check_known_keys(
    const std::map<std::string, std::vector<std::string>>& allowed) const {
  for (const auto& [section, keys] : sections_) {
    auto ait = allowed.find(section);
    if (ait == allowed.end()) {
      throw std::runtime_error("unknown config section '[" + section + "]'");
    }
    for (const auto& [key, value] : keys) {
      if (std::find(ait->second.begin(), ait->second.end(), key) == ait->second.end()) {
        throw std::runtime_error("unknown config key '" + dotted(section, key) + "'");
      }
    }
  }
}

std::string ConfigMap::render() const {
  std::ostringstream out;
  for (const auto& [section, keys] : sections_) {
    if (!section.empty()) {
      out << '[' << section << "]\n";
    }
    for (const auto& [key, value] : keys) {
      out << key << " = " << value << '\n';
    }
  }
  return out.str();
}

}  // namespace beamsense::config
