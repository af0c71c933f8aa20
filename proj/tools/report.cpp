#include "report.hpp"

#include <chrono>
#include <cstdio>
#include <ctime>
#include <sstream>

namespace psicalc::cli {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fmt(std::complex<double> v) { return fmt(v.real()) + " " + fmt(v.imag()); }

std::string fmt(bool v) { return v ? "true" : "false"; }

void Report::put(const std::string& section, const std::string& key, const std::string& value) {
  for (auto& [name, lines] : sections_) {
    if (name == section) {
      lines.emplace_back(key, value);
      return;
    }
  }
  sections_.push_back({section, {{key, value}}});
}

std::string Report::render() const {
  std::string out;
  for (std::size_t i = 0; i < sections_.size(); ++i) {
    if (i > 0) out += "\n";
    out += "[" + sections_[i].first + "]\n";
    for (const auto& [k, v] : sections_[i].second) out += k + " = " + v + "\n";
  }
  return out;
}

std::string strip_timestamp(const std::string& text) {
  std::istringstream in(text);
  std::string out;
  for (std::string line; std::getline(in, line);) {
    if (line.rfind("timestamp = ", 0) == 0) continue;
    out += line + "\n";
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace psicalc::cli
