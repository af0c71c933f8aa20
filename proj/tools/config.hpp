#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace psicalc::cli {

/// Parse or validation failure; `line` is 0 when no single line is at fault.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Flat `key = value` text grouped in `[section]` blocks.  `#` starts a comment.
class Config {
 public:
  static Config parse(std::istream& in, const std::string& source);
  static Config parse_string(const std::string& text, const std::string& source);
  static Config load(const std::string& path);

  const std::string& source() const noexcept { return source_; }
  bool has(const std::string& section, const std::string& key) const;
  /// Line of a key, or of its section header when the key is absent (0 if neither).
  int line_of(const std::string& section, const std::string& key) const;

  std::optional<std::string> raw(const std::string& section, const std::string& key) const;
  std::string get_string(const std::string& section, const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& section, const std::string& key, double fallback) const;
  int get_int(const std::string& section, const std::string& key, int fallback) const;
  bool get_bool(const std::string& section, const std::string& key, bool fallback) const;
  /// Items separated by commas and/or whitespace.
  std::vector<std::string> get_list(const std::string& section, const std::string& key,
                                    const std::vector<std::string>& fallback) const;
  std::vector<double> get_doubles(const std::string& section, const std::string& key,
                                  const std::vector<double>& fallback) const;

  double require_double(const std::string& section, const std::string& key, const std::string& why) const;

  /// Overrides (or adds) a value; used by sweeps.
  void set(const std::string& section, const std::string& key, const std::string& value);

  /// Rejects keys outside `allowed` (section -> keys) with their line numbers.
  void require_known(const std::map<std::string, std::set<std::string>>& allowed) const;

  /// Sorted `section.key = value` lines; independent of layout and comments.
  std::string canonical() const;

  [[noreturn]] void fail(const std::string& section, const std::string& key, const std::string& message) const;

 private:
  struct Entry {
    std::string value;
    int line = 0;
  };
  std::string source_;
  std::map<std::pair<std::string, std::string>, Entry> entries_;
  std::map<std::string, int> sections_;
};

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace psicalc::cli
