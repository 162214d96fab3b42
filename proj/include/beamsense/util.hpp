#ifndef BEAMSENSE_UTIL_HPP
#define BEAMSENSE_UTIL_HPP

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace beamsense {

inline constexpr const char* kProjectVersion = "0.1.0";

/// Formats a double with enough digits to round-trip exactly through
/// from_chars (shortest form would also work, printf %.17g is portable).
std::string format_double(double value);

/// Strict locale-free numeric parsing. Throws std::runtime_error with
/// `context` in the message on any trailing garbage or empty input.
double parse_double(std::string_view text, std::string_view context);
long long parse_int(std::string_view text, std::string_view context);

/// SplitMix64 step; used to derive independent sub-seeds from a master seed.
std::uint64_t splitmix64(std::uint64_t& state);

/// Derives a named sub-seed, e.g. derive_seed(master, "scenario").
std::uint64_t derive_seed(std::uint64_t master, std::string_view tag);

/// FNV-1a 64-bit hash of a byte buffer, hex-encoded. Used for output
/// manifests, not for security.
std::string fnv1a_hex(const std::string& bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

/// Splits on a delimiter, keeping empty fields.
std::vector<std::string> split(std::string_view line, char delim);

std::string trim(std::string_view s);

}  // namespace beamsense

#endif
