#include "mamic/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace mamic {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

ConfigFile ConfigFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_string(ss.str(), path);
}

ConfigFile ConfigFile::parse_string(const std::string& text, const std::string& origin) {
  ConfigFile cfg;
  cfg.origin_ = origin;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                                 ": unterminated section header");
      section = trim(line.substr(1, line.size() - 2));
      cfg.sections_[section];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) +
                               ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && value.front() == '"' && value.back() == '"')
      value = value.substr(1, value.size() - 2);
    cfg.sections_[section][key] = value;
  }
  return cfg;
}

bool ConfigFile::has(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  return s != sections_.end() && s->second.count(key) > 0;
}

void ConfigFile::fail(const std::string& section, const std::string& key,
                      const std::string& what) {
  throw std::runtime_error("config field [" + section + "] " + key + ": " + what);
}

std::string ConfigFile::raw(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end() || !s->second.count(key)) fail(section, key, "missing");
  return s->second.at(key);
}

std::string ConfigFile::get_string(const std::string& section, const std::string& key,
                                   std::optional<std::string> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    fail(section, key, "missing");
  }
  return raw(section, key);
}

double ConfigFile::get_double(const std::string& section, const std::string& key,
                              std::optional<double> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    fail(section, key, "missing");
  }
  const std::string v = raw(section, key);
  char* end = nullptr;
  const double d = std::strtod(v.c_str(), &end);
  if (end == v.c_str() || *end != '\0') fail(section, key, "not a number: " + v);
  return d;
}

long long ConfigFile::get_int(const std::string& section, const std::string& key,
                              std::optional<long long> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    fail(section, key, "missing");
  }
  const std::string v = raw(section, key);
  char* end = nullptr;
  const long long i = std::strtoll(v.c_str(), &end, 10);
  if (end == v.c_str() || *end != '\0') fail(section, key, "not an integer: " + v);
  return i;
}

bool ConfigFile::get_bool(const std::string& section, const std::string& key,
                          std::optional<bool> fallback) const {
  if (!has(section, key)) {
    if (fallback) return *fallback;
    fail(section, key, "missing");
  }
  const std::string v = raw(section, key);
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(section, key, "not a boolean: " + v);
}

}  // namespace mamic
