#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "config.hpp"
#include "psicalc/io.hpp"
#include "psicalc/oracle.hpp"
#include "report.hpp"
#include "scenario.hpp"

namespace fs = std::filesystem;
using namespace psicalc;
using namespace psicalc::cli;

namespace {

struct Job {
  std::string label;  // file stem used for output names
  Config config;
};

struct Options {
  int jobs = 1;
  std::string out;
  double tol_scale = 1.0;
};

std::string default_out() {
  const char* env = std::getenv("PSICALC_OUT");
  return env ? env : "";
}

std::string stem_of(const std::string& path) { return fs::path(path).stem().string(); }

/// Runs `count` tasks on up to `jobs` threads; each task owns its state.
template <class F>
void parallel_for(int count, int jobs, F&& task) {
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int i = next++; i < count; i = next++) task(i);
  };
  const int n = std::max(1, std::min(jobs, count));
  std::vector<std::thread> pool;
  for (int t = 1; t < n; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f << text;
}

struct Result {
  Outcome outcome;
  std::string error;  // config error text
};

Result execute(const Config& cfg, double tol_scale) {
  Result r;
  try {
    const Scenario s = load_scenario(cfg);
    r.outcome = run_scenario(s, tol_scale);
  } catch (const ConfigError& e) {
    r.error = e.what();
    r.outcome.exit_code = kExitConfig;
  }
  return r;
}

int run_jobs(const std::vector<Job>& jobs, const Options& opt) {
  std::vector<Result> results(jobs.size());
  parallel_for(static_cast<int>(jobs.size()), opt.jobs,
               [&](int i) { results[static_cast<std::size_t>(i)] = execute(jobs[static_cast<std::size_t>(i)].config, opt.tol_scale); });
  int code = kExitPass;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    const Result& r = results[i];
    code = std::max(code, r.outcome.exit_code);
    if (!r.error.empty()) {
      std::cerr << "error: " << r.error << "\n";
      continue;
    }
    const std::string text = r.outcome.report.render();
    if (opt.out.empty()) {
      std::cout << text;
      if (i + 1 < jobs.size()) std::cout << "\n";
    } else {
      const fs::path path = fs::path(opt.out) / (jobs[i].label + ".report");
      write_file(path, text);
      std::cout << jobs[i].label << ": exit " << r.outcome.exit_code << " -> " << path.string() << "\n";
    }
  }
  return code;
}

const std::map<std::string, std::pair<std::string, std::string>>& param_aliases() {
  static const std::map<std::string, std::pair<std::string, std::string>> a = {
      {"J", {"projection", "order"}},   {"M", {"projection", "contour_nodes"}}, {"N", {"manifold", "grid"}},
      {"K", {"manifold", "directions"}}, {"Nf", {"manifold", "nf"}},           {"seed", {"field", "seed"}},
      {"eps", {"field", "epsilon"}},
  };
  return a;
}

struct SweepParam {
  std::string name;
  std::string section;
  std::string key;
  std::vector<std::string> values;
};

/// `J=0..4`, `M=32,64,128` or `field.sigma=1,3`.
SweepParam parse_param(const std::string& text) {
  const auto eq = text.find('=');
  if (eq == std::string::npos || eq == 0) throw CLI::ValidationError("--param", "expected NAME=VALUES, got '" + text + "'");
  SweepParam p;
  p.name = text.substr(0, eq);
  const std::string values = text.substr(eq + 1);
  if (const auto it = param_aliases().find(p.name); it != param_aliases().end()) {
    p.section = it->second.first;
    p.key = it->second.second;
  } else if (const auto dot = p.name.find('.'); dot != std::string::npos) {
    p.section = p.name.substr(0, dot);
    p.key = p.name.substr(dot + 1);
  } else {
    throw CLI::ValidationError("--param", "unknown parameter '" + p.name + "' (use section.key)");
  }
  if (const auto dots = values.find(".."); dots != std::string::npos) {
    try {
      const int lo = std::stoi(values.substr(0, dots));
      const int hi = std::stoi(values.substr(dots + 2));
      if (hi < lo) throw std::invalid_argument("empty range");
      for (int v = lo; v <= hi; ++v) p.values.push_back(std::to_string(v));
    } catch (const std::exception&) {
      throw CLI::ValidationError("--param", "bad integer range '" + values + "'");
    }
  } else {
    std::stringstream ss(values);
    for (std::string item; std::getline(ss, item, ',');)
      if (!item.empty()) p.values.push_back(item);
  }
  if (p.values.empty()) throw CLI::ValidationError("--param", "no values in '" + text + "'");
  return p;
}

bool is_number(const std::string& s) {
  if (s.empty()) return false;
  char* end = nullptr;
  std::strtod(s.c_str(), &end);
  return end == s.c_str() + s.size();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string q = "\"";
  for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
  return q + "\"";
}

int run_sweep(const std::string& path, const std::vector<std::string>& param_text, const Options& opt) {
  std::vector<SweepParam> params;
  for (const auto& t : param_text) params.push_back(parse_param(t));
  const Config base = Config::load(path);

  std::vector<std::vector<std::string>> points{{}};
  for (const auto& p : params) {
    std::vector<std::vector<std::string>> next;
    for (const auto& pt : points)
      for (const auto& v : p.values) {
        auto q = pt;
        q.push_back(v);
        next.push_back(std::move(q));
      }
    points = std::move(next);
  }

  std::vector<Result> results(points.size());
  parallel_for(static_cast<int>(points.size()), opt.jobs, [&](int i) {
    Config cfg = base;
    const auto& pt = points[static_cast<std::size_t>(i)];
    for (std::size_t k = 0; k < params.size(); ++k) cfg.set(params[k].section, params[k].key, pt[k]);
    results[static_cast<std::size_t>(i)] = execute(cfg, opt.tol_scale);
  });

  std::vector<std::string> columns;
  std::vector<std::map<std::string, std::string>> rows(points.size());
  for (std::size_t i = 0; i < results.size(); ++i) {
    for (const auto& [section, lines] : results[i].outcome.report.sections()) {
      if (section.rfind("check.", 0) != 0) continue;
      for (const auto& [key, value] : lines) {
        if (!is_number(value)) continue;
        const std::string col = section.substr(6) + "." + key;
        if (std::find(columns.begin(), columns.end(), col) == columns.end()) columns.push_back(col);
        rows[i][col] = value;
      }
    }
  }

  std::ostringstream csv;
  for (const auto& p : params) csv << csv_field(p.name) << ",";
  csv << "exit_code";
  for (const auto& c : columns) csv << "," << csv_field(c);
  csv << "\n";
  int code = kExitPass;
  for (std::size_t i = 0; i < points.size(); ++i) {
    for (const auto& v : points[i]) csv << csv_field(v) << ",";
    csv << results[i].outcome.exit_code;
    for (const auto& c : columns) {
      const auto it = rows[i].find(c);
      csv << "," << (it == rows[i].end() ? "" : it->second);
    }
    csv << "\n";
    code = std::max(code, results[i].outcome.exit_code);
    if (!results[i].error.empty()) std::cerr << "error: " << results[i].error << "\n";
  }
  if (opt.out.empty()) {
    std::cout << csv.str();
  } else {
    const fs::path out = fs::path(opt.out) / (stem_of(path) + "_sweep.csv");
    write_file(out, csv.str());
    std::cout << "sweep: " << points.size() << " runs -> " << out.string() << "\n";
  }
  return code;
}

ClassicalSymbol projection_of(const Scenario& s) {
  const auto m = scenario_manifold(s);
  return build_projection(scenario_field(s, m), s.order, s.contour);
}

int export_symbol(const std::string& path, const Options& opt) {
  const Scenario s = load_scenario(Config::load(path));
  const std::string text = symbol_to_json(projection_of(s));
  if (opt.out.empty()) {
    std::cout << text << "\n";
  } else {
    const fs::path out = fs::path(opt.out) / (stem_of(path) + ".symbol.json");
    write_file(out, text + "\n");
    std::cout << out.string() << "\n";
  }
  return kExitPass;
}

int export_operator(const std::string& path, const std::string& which, const Options& opt) {
  if (opt.out.empty()) {
    std::cerr << "error: export-operator writes binary data; pass --out <dir> or set PSICALC_OUT\n";
    return kExitConfig;
  }
  const Scenario s = load_scenario(Config::load(path));
  const auto m = scenario_manifold(s);
  const auto field = scenario_field(s, m);
  QuantizeOptions q;
  q.bandwidth_tol = s.tol.quantize_bandwidth;
  GridOperator op = which == "symbol"      ? quantize(build_projection(field, s.order, s.contour), s.nf, q)
                    : which == "auxiliary" ? quantize(auxiliary_symbol(field), s.nf, q)
                                           : sectorial_projection_matrix(quantize(auxiliary_symbol(field), s.nf, q),
                                                                         ProjectionMethod::EigenSplit);
  std::ostringstream bytes;
  export_operator(op, bytes);
  const fs::path out = fs::path(opt.out) / (stem_of(path) + "." + which + ".psiop");
  write_file(out, bytes.str());
  std::cout << out.string() << "\n";
  return kExitPass;
}

int refusal(const std::exception& e) {
  std::cerr << "refused: " << e.what() << "\n";
  return kExitRefused;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Symbol calculus and residue checks for projections on model manifolds", "psicalc"};
  app.set_version_flag("--version", kToolVersion);
  app.require_subcommand(1);

  Options opt;
  opt.out = default_out();
  app.add_option("--jobs", opt.jobs, "Scenarios run concurrently")->check(CLI::Range(1, 256));
  app.add_option("--out", opt.out, "Output directory (default: $PSICALC_OUT, else stdout)");
  app.add_option("--tol-scale", opt.tol_scale, "Multiply every tolerance by this factor")
      ->check(CLI::PositiveNumber);

  std::vector<std::string> run_paths;
  auto* run = app.add_subcommand("run", "Run scenario configs");
  run->add_option("configs", run_paths, "Config files")->required()->check(CLI::ExistingFile);

  std::string sweep_path;
  std::vector<std::string> sweep_params;
  auto* sweep = app.add_subcommand("sweep", "Run a config over parameter values and write a CSV table");
  sweep->add_option("config", sweep_path, "Config file")->required()->check(CLI::ExistingFile);
  sweep->add_option("--param", sweep_params, "NAME=a..b or NAME=v1,v2 (J, M, N, K, Nf, seed, eps or section.key)")
      ->required();

  auto* demo = app.add_subcommand("demo", "Run a bundled scenario");
  demo->require_subcommand(1);
  demo->add_subcommand("lemma-a1", "Contour reproduction of idempotent matrices");
  int demo_dim = 1;
  auto* vanishing = demo->add_subcommand("vanishing", "Residue of a seeded projection");
  vanishing->add_option("--dim", demo_dim, "Manifold dimension")->check(CLI::IsMember({1, 2}));

  std::string export_path;
  auto* xsym = app.add_subcommand("export-symbol", "Write the projection symbol of a config as JSON");
  xsym->add_option("config", export_path, "Config file")->required()->check(CLI::ExistingFile);
  std::string which = "symbol";
  auto* xop = app.add_subcommand("export-operator", "Write a quantized operator as a binary matrix");
  xop->add_option("config", export_path, "Config file")->required()->check(CLI::ExistingFile);
  xop->add_option("--operator", which, "symbol, auxiliary or projection")
      ->check(CLI::IsMember({"symbol", "auxiliary", "projection"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      std::vector<Job> jobs;
      for (const auto& p : run_paths) jobs.push_back({stem_of(p), Config::load(p)});
      return run_jobs(jobs, opt);
    }
    if (*sweep) return run_sweep(sweep_path, sweep_params, opt);
    if (*demo) {
      const std::string name = demo->got_subcommand("lemma-a1") ? "lemma_a1" : "vanishing_n" + std::to_string(demo_dim);
      return run_jobs({{name, Config::parse_string(builtin_config(name), "<builtin:" + name + ">")}}, opt);
    }
    if (*xsym) return export_symbol(export_path, opt);
    if (*xop) return export_operator(export_path, which, opt);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CLI::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const SpectralGapError& e) {
    return refusal(e);
  } catch (const DomainError& e) {
    return refusal(e);
  } catch (const RejectedInput& e) {
    return refusal(e);
  } catch (const ShapeMismatch& e) {
    return refusal(e);
  }
  return kExitPass;
}
