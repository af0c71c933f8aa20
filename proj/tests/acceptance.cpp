// One PASS/FAIL line per acceptance criterion; exit status 1 when any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "config.hpp"
#include "psicalc/projection.hpp"
#include "psicalc/residue.hpp"
#include "report.hpp"
#include "scenario.hpp"

using namespace psicalc;
using namespace psicalc::cli;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string scenario_path(const std::string& name) { return std::string(PSICALC_SCENARIOS) + "/" + name + ".cfg"; }

Outcome run_file(const std::string& name, const std::vector<std::pair<std::string, std::string>>& overrides = {}) {
  Config c = Config::load(scenario_path(name));
  for (const auto& [key, value] : overrides) {
    const auto dot = key.find('.');
    c.set(key.substr(0, dot), key.substr(dot + 1), value);
  }
  return run_scenario(load_scenario(c));
}

std::string lookup(const Report& r, const std::string& section, const std::string& key) {
  for (const auto& [name, lines] : r.sections()) {
    if (name != section) continue;
    for (const auto& [k, v] : lines)
      if (k == key) return v;
  }
  return {};
}

double number(const Report& r, const std::string& section, const std::string& key) {
  const auto v = lookup(r, section, key);
  return v.empty() ? std::numeric_limits<double>::quiet_NaN() : std::strtod(v.c_str(), nullptr);
}

bool passed(const Outcome& o) { return o.exit_code == kExitPass; }

std::string g(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

int failures = 0;

void verdict(int id, bool ok, const std::string& detail) {
  std::printf("criterion %2d %s  %s\n", id, ok ? "PASS" : "FAIL", detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

void guarded(int id, const std::function<void()>& body) {
  try {
    body();
  } catch (const std::exception& e) {
    verdict(id, false, std::string("exception: ") + e.what());
  }
}

std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

int shell(const std::string& command) {
  const int raw = std::system(command.c_str());
  return WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
}

SingularGreenSymbolSample kernel(double (*k)(double)) {
  SingularGreenSymbolSample s;
  s.kernel = [k](double t) {
    Mat a(1, 1);
    a(0, 0) = k(t);
    return a;
  };
  s.decay = 2.0;
  return s;
}

}  // namespace

int main() {
  const auto suite_start = Clock::now();

  guarded(1, [] {
    const auto t0 = Clock::now();
    const auto o = run_file("lemma_a1");
    const double elapsed = seconds_since(t0);
    const auto& r = o.report;
    const double err = number(r, "check.lemma-a1", "max_error");
    const double shrink = std::min(number(r, "check.lemma-a1", "ratio_4_8"), number(r, "check.lemma-a1", "ratio_8_16"));
    verdict(1, passed(o) && err <= 1e-12 && shrink >= 10 && elapsed < 1.0,
            "lemma-a1 max_error=" + g(err) + " min_doubling_ratio=" + g(shrink) + " time=" + g(elapsed) + "s");
  });

  // Criteria 2 to 4 share the seeded vanishing runs.
  struct Run {
    int dim;
    int seed;
    Outcome outcome;
  };
  std::vector<Run> runs;
  double vanishing_time = 0.0;
  guarded(2, [&] {
    const auto t0 = Clock::now();
    for (int seed = 1; seed <= 5; ++seed)
      runs.push_back({1, seed, run_file("vanishing_n1", {{"field.seed", std::to_string(seed)}})});
    for (int seed = 1; seed <= 3; ++seed)
      runs.push_back({2, seed, run_file("vanishing_n2", {{"field.seed", std::to_string(seed)}})});
    vanishing_time = seconds_since(t0);
    double worst = 0.0;
    bool ok = true;
    for (const auto& run : runs) {
      const auto& r = run.outcome.report;
      const double e = number(r, "check.pi0", "max_error");
      ok = ok && lookup(r, "check.pi0", "status") == "pass" && e <= 1e-10;
      worst = std::max(worst, e);
    }
    verdict(2, ok && vanishing_time < 30.0,
            "pi0 fields=" + std::to_string(runs.size()) + " max_error=" + g(worst) + " time=" + g(vanishing_time) + "s");
  });

  guarded(3, [&] {
    bool ok = runs.size() == 8;
    double worst = 0.0;
    for (const auto& run : runs) {
      const auto& r = run.outcome.report;
      const double e = number(r, "check.idempotency", "max_error");
      const int order = static_cast<int>(number(r, "check.idempotency", "order"));
      ok = ok && lookup(r, "check.idempotency", "status") == "pass" && e <= 1e-8 && order == (run.dim == 1 ? 4 : 3);
      worst = std::max(worst, e);
    }
    verdict(3, ok, "pi#pi - pi at J=4 (n=1), J=3 (n=2) max=" + g(worst));
  });

  guarded(4, [&] {
    bool ok = runs.size() == 8;
    double worst[2] = {0.0, 0.0};
    for (const auto& run : runs) {
      const auto& r = run.outcome.report;
      const double a = number(r, "check.residue", "abs_total");
      ok = ok && lookup(r, "check.residue", "status") == "pass" && lookup(r, "check.residue", "bitwise_equal") == "true" &&
           a <= (run.dim == 1 ? 1e-8 : 1e-6);
      worst[run.dim - 1] = std::max(worst[run.dim - 1], a);
    }
    verdict(4, ok, "|res| n=1 max=" + g(worst[0]) + " n=2 max=" + g(worst[1]) + " X and closed sums bitwise equal");
  });

  guarded(5, [] {
    const auto a = run_file("commutator_n1");
    const auto b = run_file("commutator_n2");
    const double ma = number(a.report, "check.commutator", "max_abs");
    const double mb = number(b.report, "check.commutator", "max_abs");
    const bool ok = passed(a) && passed(b) && number(a.report, "check.commutator", "pairs") == 20 &&
                    number(b.report, "check.commutator", "pairs") == 20 && std::max(ma, mb) <= 1e-9;
    verdict(5, ok, "20 pairs per dimension, max |res[p,q]| n=1 " + g(ma) + " n=2 " + g(mb));
  });

  guarded(6, [] {
    bool ok = true;
    int count = 0;
    for (int dim : {1, 2}) {
      auto m = dim == 1 ? ModelManifold::circle(64) : ModelManifold::torus(32, 32);
      for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const auto p = band_limited_symbol(m, 0, 0, 2, 2, dim == 2 ? 1 : 0, 100 + seed);
        const auto r = residue_green(p, {}, nullptr);
        ok = ok && r.total == cd(0.0) && r.interior == cd(0.0);
        ++count;
      }
    }
    verdict(6, ok, std::to_string(count) + " multiplication operators, residue exactly 0");
  });

  guarded(7, [] {
    const auto o = run_file("oracle_n1");
    const auto& r = o.report;
    const double agree = number(r, "check.oracle", "method_agreement");
    verdict(7, passed(o) && agree <= 1e-8 && lookup(r, "check.oracle", "monotone") == "true",
            "errors J=0,1,2: " + g(number(r, "check.oracle", "error_J0")) + " " + g(number(r, "check.oracle", "error_J1")) +
                " " + g(number(r, "check.oracle", "error_J2")) + ", method agreement " + g(agree));
  });

  guarded(8, [] {
    const auto margin = run_file("truncation_margin");
    const auto loose = run_file("truncation_nomargin");
    const int order = static_cast<int>(number(margin.report, "scenario", "order"));
    double worst_margin = 0.0;
    double least_loose = std::numeric_limits<double>::infinity();
    for (int j = 0; j <= order; ++j) {
      const auto key = "leftover_J" + std::to_string(j);
      worst_margin = std::max(worst_margin, number(margin.report, "check.truncation", key));
      least_loose = std::min(least_loose, number(loose.report, "check.truncation", key));
    }
    const double ratio = least_loose / worst_margin;
    verdict(8, passed(margin) && passed(loose) && ratio >= 100,
            "margin leftover max=" + g(worst_margin) + " no-margin leftover min=" + g(least_loose) + " ratio=" + g(ratio));
  });

  guarded(9, [] {
    const double half = normal_trace(kernel([](double t) { return 1.0 / (1.0 + t * t); })).value(0, 0).real();
    const double zero =
        std::abs(normal_trace(kernel([](double t) { return t / ((1.0 + t * t) * (1.0 + t * t)); })).value(0, 0));
    verdict(9, std::abs(half - 0.5) <= 1e-10 && zero <= 1e-10, "tr_n = " + g(half) + ", " + g(zero));
  });

  guarded(10, [&] {
    const auto dir = std::filesystem::temp_directory_path() / "psicalc_acceptance";
    std::filesystem::remove_all(dir);
    const std::string cmd = std::string(PSICALC_BIN) + " --out " + dir.string() + " run " +
                            scenario_path("vanishing_n1") + " " + scenario_path("lemma_a1") + " > /dev/null 2>&1";
    bool same = true;
    std::string first[2];
    for (int pass = 0; pass < 2; ++pass) {
      same = same && shell(cmd) == kExitPass;
      int i = 0;
      for (const char* stem : {"vanishing_n1", "lemma_a1"}) {
        const auto body = strip_timestamp(read_file(dir / (std::string(stem) + ".report")));
        if (pass == 0) first[i] = body;
        same = same && !body.empty() && body == first[i];
        ++i;
      }
    }
    const double elapsed = seconds_since(suite_start);
    verdict(10, same && elapsed <= 120.0, "acceptance suite " + g(elapsed) + "s, two CLI runs identical after timestamp");
  });

  std::printf("%s: %d criteria failed\n", failures == 0 ? "PASS" : "FAIL", failures);
  return failures == 0 ? 0 : 1;
}
