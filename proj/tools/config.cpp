#include "config.hpp"

#include <cctype>
#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace psicalc::cli {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool valid_name(const std::string& s) {
  if (s.empty()) return false;
  for (char c : s) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) return false;
  }
  return true;
}

std::string where(const std::string& source, int line) {
  return line > 0 ? source + ":" + std::to_string(line) : source;
}

}  // namespace

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : std::runtime_error(where(source, line) + ": " + message), line_(line) {}

Config Config::parse(std::istream& in, const std::string& source) {
  Config c;
  c.source_ = source;
  std::string section;
  std::string raw_line;
  int line = 0;
  while (std::getline(in, raw_line)) {
    ++line;
    std::string text = raw_line;
    const auto hash = text.find('#');
    if (hash != std::string::npos) text.erase(hash);
    text = trim(text);
    if (text.empty() || text[0] == ';') continue;
    if (text.front() == '[') {
      if (text.back() != ']') throw ConfigError(source, line, "malformed section header '" + text + "'");
      section = trim(text.substr(1, text.size() - 2));
      if (!valid_name(section)) throw ConfigError(source, line, "invalid section name '" + section + "'");
      if (c.sections_.count(section)) {
        throw ConfigError(source, line, "section [" + section + "] repeated (first at line " +
                                            std::to_string(c.sections_[section]) + ")");
      }
      c.sections_[section] = line;
      continue;
    }
    const auto eq = text.find('=');
    if (eq == std::string::npos) throw ConfigError(source, line, "expected 'key = value', got '" + text + "'");
    if (section.empty()) throw ConfigError(source, line, "key outside of any [section]");
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (!valid_name(key)) throw ConfigError(source, line, "invalid key '" + key + "'");
    const auto id = std::make_pair(section, key);
    if (auto it = c.entries_.find(id); it != c.entries_.end()) {
      throw ConfigError(source, line, section + "." + key + " repeated (first at line " +
                                          std::to_string(it->second.line) + ")");
    }
    c.entries_[id] = {value, line};
  }
  return c;
}

Config Config::parse_string(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  return parse(in, source);
}

Config Config::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path, 0, "cannot open config file");
  return parse(in, path);
}

bool Config::has(const std::string& section, const std::string& key) const {
  return entries_.count({section, key}) != 0;
}

int Config::line_of(const std::string& section, const std::string& key) const {
  if (auto it = entries_.find({section, key}); it != entries_.end()) return it->second.line;
  if (auto it = sections_.find(section); it != sections_.end()) return it->second;
  return 0;
}

std::optional<std::string> Config::raw(const std::string& section, const std::string& key) const {
  if (auto it = entries_.find({section, key}); it != entries_.end()) return it->second.value;
  return std::nullopt;
}

void Config::fail(const std::string& section, const std::string& key, const std::string& message) const {
  throw ConfigError(source_, line_of(section, key), section + "." + key + ": " + message);
}

std::string Config::get_string(const std::string& section, const std::string& key, const std::string& fallback) const {
  return raw(section, key).value_or(fallback);
}

double Config::get_double(const std::string& section, const std::string& key, double fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  errno = 0;
  char* end = nullptr;
  const double d = std::strtod(v->c_str(), &end);
  if (v->empty() || *end != '\0' || errno != 0 || !std::isfinite(d)) fail(section, key, "expected a number, got '" + *v + "'");
  return d;
}

int Config::get_int(const std::string& section, const std::string& key, int fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  errno = 0;
  char* end = nullptr;
  const long n = std::strtol(v->c_str(), &end, 10);
  if (v->empty() || *end != '\0' || errno != 0 || n < -1000000000L || n > 1000000000L) {
    fail(section, key, "expected an integer, got '" + *v + "'");
  }
  return static_cast<int>(n);
}

bool Config::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "yes" || *v == "1") return true;
  if (*v == "false" || *v == "no" || *v == "0") return false;
  fail(section, key, "expected true or false, got '" + *v + "'");
}

std::vector<std::string> Config::get_list(const std::string& section, const std::string& key,
                                          const std::vector<std::string>& fallback) const {
  const auto v = raw(section, key);
  if (!v) return fallback;
  std::string s = *v;
  for (char& c : s) {
    if (c == ',') c = ' ';
  }
  std::istringstream in(s);
  std::vector<std::string> out;
  for (std::string item; in >> item;) out.push_back(item);
  return out;
}

std::vector<double> Config::get_doubles(const std::string& section, const std::string& key,
                                        const std::vector<double>& fallback) const {
  if (!has(section, key)) return fallback;
  std::vector<double> out;
  for (const auto& item : get_list(section, key, {})) {
    char* end = nullptr;
    const double d = std::strtod(item.c_str(), &end);
    if (*end != '\0' || !std::isfinite(d)) fail(section, key, "expected numbers, got '" + item + "'");
    out.push_back(d);
  }
  return out;
}

double Config::require_double(const std::string& section, const std::string& key, const std::string& why) const {
  if (!has(section, key)) fail(section, key, "missing (required " + why + ")");
  return get_double(section, key, 0.0);
}

void Config::set(const std::string& section, const std::string& key, const std::string& value) {
  auto& e = entries_[{section, key}];
  e.value = value;
}

void Config::require_known(const std::map<std::string, std::set<std::string>>& allowed) const {
  for (const auto& [name, line] : sections_) {
    if (!allowed.count(name)) throw ConfigError(source_, line, "unknown section [" + name + "]");
  }
  for (const auto& [id, entry] : entries_) {
    const auto it = allowed.find(id.first);
    if (it == allowed.end() || !it->second.count(id.second)) {
      throw ConfigError(source_, entry.line, "unknown key " + id.first + "." + id.second);
    }
  }
}

std::string Config::canonical() const {
  std::string out;
  for (const auto& [id, entry] : entries_) out += id.first + "." + id.second + " = " + entry.value + "\n";
  return out;
}

std::uint64_t fnv1a64(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace psicalc::cli
