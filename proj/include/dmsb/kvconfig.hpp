#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace dmsb::kv {

/// Ordered key = value pairs from a plain-text config file. Lines starting
/// with '#' (and inline '#' tails) are comments; blank lines are skipped.
struct Config {
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const;
  const std::string& get(const std::string& key) const;  // throws if missing
  std::string get_or(const std::string& key, const std::string& fallback) const;
};

Config parse_file(const std::string& path);
Config parse_text(const std::string& text);

double to_double(const std::string& value, const std::string& key);
long long to_int(const std::string& value, const std::string& key);
std::uint64_t to_u64(const std::string& value, const std::string& key);
std::vector<std::string> to_list(const std::string& value);  // comma separated
std::vector<double> to_double_list(const std::string& value, const std::string& key);

}  // namespace dmsb::kv
