#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "config.hpp"
#include "psicalc/projection.hpp"
#include "report.hpp"

namespace psicalc::cli {

inline constexpr const char* kToolVersion = "1.0.0";

inline constexpr int kExitPass = 0;
inline constexpr int kExitFail = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitRefused = 3;

/// Checks run in this order whatever order the config lists them in.
enum class Check { LemmaA1, Pi0, Idempotency, Residue, Oracle, Truncation, Commutator };

const char* check_name(Check c);

struct FieldRecipe {
  int fiber = 2;
  std::vector<int> beta;  // diagonal of beta, entries 0 or 1
  double epsilon = 0.2;
  int bandwidth = 2;
  int angular_bandwidth = 1;
  bool uniform = false;
  CutoffProfile bump;
  double min_margin = 2.0;
  bool enforce_margin = true;
  std::uint64_t seed = 0;
};

struct Tolerances {
  double lemma_a1 = 1e-12;
  double lemma_a1_shrink = 10.0;
  double pi0 = 1e-10;
  double idempotency = 1e-8;
  double residue = 1e-8;
  double agreement = 1e-8;
  double oracle_slack = 1.5;
  double truncation = 1e-6;
  double commutator = 1e-9;
  double quantize_bandwidth = 1e-6;
};

struct Scenario {
  std::string name;
  std::string source;
  std::string canonical;  // normalized config text, hashed into the report
  std::vector<Check> checks;

  int dim = 1;
  int grid = 64;
  int directions = 32;
  int nf = 32;

  FieldRecipe field;
  int order = 4;
  Contour contour;

  int lemma_matrices = 10;
  std::uint64_t lemma_seed = 0;
  std::vector<double> lemma_distances{1.0, 3.0};
  int lemma_nodes = 64;
  std::vector<int> lemma_doubling{4, 8, 16};

  std::vector<int> oracle_orders{0, 1, 2};

  bool expect_leftover = false;

  int pairs = 20;
  std::uint64_t commutator_seed = 0;
  int commutator_fiber = 1;
  int leading_p = 1;
  int leading_q = 0;
  int commutator_bandwidth = 2;

  Tolerances tol;
};

/// Validates every value; throws ConfigError naming the offending key and line.
Scenario load_scenario(const Config& c);

struct Outcome {
  Report report;
  int exit_code = kExitPass;
};

/// Runs the requested checks; numerical refusals end the run with kExitRefused.
/// `tol_scale` multiplies every absolute tolerance.
Outcome run_scenario(const Scenario& s, double tol_scale = 1.0);

ManifoldPtr scenario_manifold(const Scenario& s);
IdempotentSymbolField scenario_field(const Scenario& s, const ManifoldPtr& m);

/// Config text of a bundled scenario ("lemma_a1", "vanishing_n1", "vanishing_n2").
std::string builtin_config(const std::string& name);

}  // namespace psicalc::cli
