#pragma once

#include <complex>
#include <string>
#include <utility>
#include <vector>

namespace psicalc::cli {

std::string fmt(double v);
std::string fmt(std::complex<double> v);
std::string fmt(bool v);

/// Line-oriented report: `[section]` headers followed by `key = value` lines, in
/// insertion order.
class Report {
 public:
  using Lines = std::vector<std::pair<std::string, std::string>>;

  /// Appends to the section, creating it at the end when new.
  void put(const std::string& section, const std::string& key, const std::string& value);
  void put(const std::string& section, const std::string& key, double value) { put(section, key, fmt(value)); }
  void put(const std::string& section, const std::string& key, int value) { put(section, key, std::to_string(value)); }

  const std::vector<std::pair<std::string, Lines>>& sections() const noexcept { return sections_; }
  std::string render() const;

 private:
  std::vector<std::pair<std::string, Lines>> sections_;
};

/// Report text without the `timestamp = ...` line.
std::string strip_timestamp(const std::string& text);

/// Current UTC time, ISO 8601.
std::string utc_timestamp();

}  // namespace psicalc::cli
