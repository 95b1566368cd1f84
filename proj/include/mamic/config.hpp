#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mamic {

// Flat TOML-style config: [section] headers, key = value lines, # comments.
// Values are strings, numbers or booleans; errors always name section.key.
class ConfigFile {
 public:
  static ConfigFile parse_file(const std::string& path);
  static ConfigFile parse_string(const std::string& text, const std::string& origin);

  bool has(const std::string& section, const std::string& key) const;

  std::string get_string(const std::string& section, const std::string& key,
                         std::optional<std::string> fallback = std::nullopt) const;
  double get_double(const std::string& section, const std::string& key,
                    std::optional<double> fallback = std::nullopt) const;
  long long get_int(const std::string& section, const std::string& key,
                    std::optional<long long> fallback = std::nullopt) const;
  bool get_bool(const std::string& section, const std::string& key,
                std::optional<bool> fallback = std::nullopt) const;

  const std::map<std::string, std::map<std::string, std::string>>& sections() const {
    return sections_;
  }

 private:
  std::string raw(const std::string& section, const std::string& key) const;
  [[noreturn]] static void fail(const std::string& section, const std::string& key,
                                const std::string& what);

  std::string origin_;
  std::map<std::string, std::map<std::string, std::string>> sections_;
};

}  // namespace mamic
