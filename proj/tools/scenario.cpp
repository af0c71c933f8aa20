#include "scenario.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>

#include "psicalc/oracle.hpp"
#include "psicalc/residue.hpp"

namespace psicalc::cli {

namespace {

constexpr Check kAllChecks[] = {Check::LemmaA1,    Check::Pi0,        Check::Idempotency, Check::Residue,
                                Check::Oracle,     Check::Truncation, Check::Commutator};

const std::map<std::string, std::set<std::string>>& allowed_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"scenario", {"name", "checks"}},
      {"manifold", {"dim", "grid", "directions", "nf"}},
      {"field",
       {"fiber", "beta", "epsilon", "bandwidth", "angular_bandwidth", "profile", "center", "half_width", "sigma",
        "min_margin", "enforce_margin", "seed"}},
      {"projection", {"order", "contour_radius", "contour_nodes"}},
      {"lemma-a1", {"matrices", "seed", "nodes", "distances", "doubling"}},
      {"oracle", {"orders"}},
      {"truncation", {"expect"}},
      {"commutator", {"pairs", "seed", "fiber", "leading_p", "leading_q", "bandwidth"}},
      {"tolerances",
       {"lemma_a1", "lemma_a1_shrink", "pi0", "idempotency", "residue", "agreement", "oracle_slack", "truncation",
        "commutator", "quantize_bandwidth"}},
  };
  return keys;
}

std::uint64_t get_seed(const Config& c, const std::string& section, const std::string& why) {
  const auto raw = c.raw(section, "seed");
  if (!raw) c.fail(section, "seed", "missing; " + why + " needs an explicit seed");
  std::size_t used = 0;
  unsigned long long v = 0;
  try {
    if (!raw->empty() && (*raw)[0] == '-') throw std::invalid_argument("negative");
    v = std::stoull(*raw, &used, 0);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != raw->size()) c.fail(section, "seed", "expected a non-negative integer, got '" + *raw + "'");
  return static_cast<std::uint64_t>(v);
}

int get_int_in(const Config& c, const std::string& section, const std::string& key, int fallback, int lo, int hi) {
  const int v = c.get_int(section, key, fallback);
  if (v < lo || v > hi)
    c.fail(section, key, "must lie in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " + std::to_string(v));
  return v;
}

double get_positive(const Config& c, const std::string& section, const std::string& key, double fallback) {
  const double v = c.get_double(section, key, fallback);
  if (!(v > 0.0) || !std::isfinite(v)) c.fail(section, key, "must be positive and finite");
  return v;
}

std::vector<int> get_ints(const Config& c, const std::string& section, const std::string& key,
                          const std::vector<int>& fallback, int lo, int hi) {
  if (!c.has(section, key)) return fallback;
  std::vector<int> out;
  for (double d : c.get_doubles(section, key, {})) {
    if (d != std::floor(d) || d < lo || d > hi)
      c.fail(section, key, "entries must be integers in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]");
    out.push_back(static_cast<int>(d));
  }
  if (out.empty()) c.fail(section, key, "must not be empty");
  return out;
}

bool uses_field(Check k) {
  return k == Check::Pi0 || k == Check::Idempotency || k == Check::Residue || k == Check::Oracle ||
         k == Check::Truncation;
}

bool has_check(const Scenario& s, Check k) { return std::find(s.checks.begin(), s.checks.end(), k) != s.checks.end(); }

std::string join(const std::vector<std::string>& v, const char* sep = " ") {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
  return out;
}

template <class T>
std::string join_num(const std::vector<T>& v) {
  std::vector<std::string> s;
  for (const T& x : v) {
    if constexpr (std::is_integral_v<T>)
      s.push_back(std::to_string(x));
    else
      s.push_back(fmt(static_cast<double>(x)));
  }
  return join(s);
}

std::string hex64(std::uint64_t v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016" PRIx64, v);
  return buf;
}

Mat beta_matrix(const FieldRecipe& f) {
  Mat b = Mat::Zero(f.fiber, f.fiber);
  for (int i = 0; i < f.fiber; ++i) b(i, i) = static_cast<double>(f.beta[static_cast<std::size_t>(i)]);
  return b;
}

int projection_order(const Scenario& s) {
  int j = s.order;
  if (has_check(s, Check::Oracle)) j = std::max(j, *std::max_element(s.oracle_orders.begin(), s.oracle_orders.end()));
  return j;
}

ClassicalSymbol head(const ClassicalSymbol& p, int order) {
  std::vector<HomogeneousTerm> t(p.terms().begin(), p.terms().begin() + order + 1);
  return ClassicalSymbol(std::move(t));
}

}  // namespace

const char* check_name(Check c) {
  switch (c) {
    case Check::LemmaA1: return "lemma-a1";
    case Check::Pi0: return "pi0";
    case Check::Idempotency: return "idempotency";
    case Check::Residue: return "residue";
    case Check::Oracle: return "oracle";
    case Check::Truncation: return "truncation";
    case Check::Commutator: return "commutator";
  }
  return "?";
}

Scenario load_scenario(const Config& c) {
  c.require_known(allowed_keys());
  Scenario s;
  s.source = c.source();
  s.canonical = c.canonical();
  s.name = c.get_string("scenario", "name", "unnamed");

  std::set<Check> wanted;
  for (const auto& item : c.get_list("scenario", "checks", {})) {
    bool found = false;
    for (Check k : kAllChecks) {
      if (item == check_name(k)) {
        wanted.insert(k);
        found = true;
      }
    }
    if (!found) c.fail("scenario", "checks", "unknown check '" + item + "'");
  }
  for (Check k : kAllChecks)
    if (wanted.count(k)) s.checks.push_back(k);

  s.dim = get_int_in(c, "manifold", "dim", 1, 1, 2);
  s.grid = c.get_int("manifold", "grid", s.dim == 1 ? 64 : 32);
  if (s.grid < 8 || s.grid > 4096 || !is_power_of_two(s.grid))
    c.fail("manifold", "grid", "must be a power of two in [8, 4096]");
  if (s.dim == 1) {
    s.directions = 2;
    if (c.has("manifold", "directions") && c.get_int("manifold", "directions", 2) != 2)
      c.fail("manifold", "directions", "the cosphere of the circle has exactly 2 directions");
  } else {
    s.directions = c.get_int("manifold", "directions", 32);
    if (s.directions < 4 || s.directions > 1024 || !is_power_of_two(s.directions))
      c.fail("manifold", "directions", "must be a power of two in [4, 1024]");
  }
  s.nf = get_int_in(c, "manifold", "nf", std::min(s.dim == 1 ? 32 : 8, s.grid / 2), 1, s.grid / 2);

  FieldRecipe& f = s.field;
  f.fiber = get_int_in(c, "field", "fiber", 2, 1, kMaxFiber);
  {
    const auto items = c.get_list("field", "beta", {});
    if (items.empty()) {
      f.beta.assign(static_cast<std::size_t>(f.fiber), 0);
      f.beta[0] = 1;
    } else {
      if (items[0] != "diag") c.fail("field", "beta", "expected 'diag' followed by the diagonal entries");
      if (static_cast<int>(items.size()) != f.fiber + 1)
        c.fail("field", "beta", "needs exactly " + std::to_string(f.fiber) + " diagonal entries");
      for (std::size_t i = 1; i < items.size(); ++i) {
        if (items[i] != "0" && items[i] != "1") c.fail("field", "beta", "diagonal entries must be 0 or 1");
        f.beta.push_back(items[i] == "1" ? 1 : 0);
      }
    }
  }
  f.epsilon = c.get_double("field", "epsilon", 0.2);
  if (!(f.epsilon >= 0.0) || f.epsilon >= 0.5) c.fail("field", "epsilon", "must lie in [0, 0.5)");
  f.bandwidth = get_int_in(c, "field", "bandwidth", 2, 0, 16);
  f.angular_bandwidth = get_int_in(c, "field", "angular_bandwidth", 1, 0, 16);
  const std::string profile = c.get_string("field", "profile", "bump");
  if (profile != "bump" && profile != "uniform") c.fail("field", "profile", "expected 'bump' or 'uniform'");
  f.uniform = profile == "uniform";
  if (f.uniform) {
    for (const char* k : {"center", "half_width", "sigma"})
      if (c.has("field", k)) c.fail("field", k, "not used by the uniform profile");
    f.bump = CutoffProfile::uniform();
  } else {
    f.bump.center = c.get_double("field", "center", kPi / 2);
    f.bump.half_width = get_positive(c, "field", "half_width", s.dim == 1 ? 1.2 : 1.15);
    if (f.bump.half_width >= kPi) c.fail("field", "half_width", "must be below pi");
    f.bump.sigma = get_positive(c, "field", "sigma", s.dim == 1 ? 1.0 : 3.0);
  }
  f.min_margin = c.get_double("field", "min_margin", 2.0);
  if (!(f.min_margin >= 0.0)) c.fail("field", "min_margin", "must be non-negative");
  f.enforce_margin = c.get_bool("field", "enforce_margin", !f.uniform);

  s.order = get_int_in(c, "projection", "order", 4, 0, 6);
  s.contour.radius = c.get_double("projection", "contour_radius", 0.5);
  if (!(s.contour.radius > 0.0 && s.contour.radius < 1.0))
    c.fail("projection", "contour_radius", "must lie in (0, 1)");
  s.contour.nodes = c.get_int("projection", "contour_nodes", 64);
  if (s.contour.nodes < 32 || s.contour.nodes > 4096 || !is_power_of_two(s.contour.nodes))
    c.fail("projection", "contour_nodes", "must be a power of two in [32, 4096]");

  s.lemma_matrices = get_int_in(c, "lemma-a1", "matrices", 10, 1, 1000);
  s.lemma_nodes = get_int_in(c, "lemma-a1", "nodes", 64, 1, 1 << 16);
  s.lemma_distances = c.get_doubles("lemma-a1", "distances", {1.0, 3.0});
  if (s.lemma_distances.empty()) c.fail("lemma-a1", "distances", "must not be empty");
  for (double d : s.lemma_distances)
    if (!(d > 0.0) || !std::isfinite(d)) c.fail("lemma-a1", "distances", "entries must be positive");
  s.lemma_doubling = get_ints(c, "lemma-a1", "doubling", {4, 8, 16}, 1, 1 << 16);
  for (std::size_t i = 1; i < s.lemma_doubling.size(); ++i)
    if (s.lemma_doubling[i] != 2 * s.lemma_doubling[i - 1])
      c.fail("lemma-a1", "doubling", "each node count must double the previous one");

  s.oracle_orders = get_ints(c, "oracle", "orders", {0, 1, 2}, 0, 6);
  for (std::size_t i = 1; i < s.oracle_orders.size(); ++i)
    if (s.oracle_orders[i] <= s.oracle_orders[i - 1]) c.fail("oracle", "orders", "must be strictly increasing");

  const std::string expect = c.get_string("truncation", "expect", "idempotent");
  if (expect != "idempotent" && expect != "leftover") c.fail("truncation", "expect", "expected 'idempotent' or 'leftover'");
  s.expect_leftover = expect == "leftover";

  s.pairs = get_int_in(c, "commutator", "pairs", 20, 1, 1000);
  s.commutator_fiber = get_int_in(c, "commutator", "fiber", 1, 1, kMaxFiber);
  s.leading_p = get_int_in(c, "commutator", "leading_p", 1, -4, 4);
  s.leading_q = get_int_in(c, "commutator", "leading_q", 0, -4, 4);
  s.commutator_bandwidth = get_int_in(c, "commutator", "bandwidth", 2, 0, 16);
  if (s.leading_p + s.leading_q + s.dim > kMaxJetOrder)
    c.fail("commutator", "leading_p", "leading_p + leading_q + n exceeds the supported expansion order");
  if (s.leading_p + s.leading_q + s.dim < 0)
    c.fail("commutator", "leading_p", "leading_p + leading_q + n must be non-negative");

  Tolerances& t = s.tol;
  t.lemma_a1 = get_positive(c, "tolerances", "lemma_a1", t.lemma_a1);
  t.lemma_a1_shrink = get_positive(c, "tolerances", "lemma_a1_shrink", t.lemma_a1_shrink);
  t.pi0 = get_positive(c, "tolerances", "pi0", t.pi0);
  t.idempotency = get_positive(c, "tolerances", "idempotency", t.idempotency);
  t.residue = get_positive(c, "tolerances", "residue", s.dim == 1 ? 1e-8 : 1e-6);
  t.agreement = get_positive(c, "tolerances", "agreement", t.agreement);
  t.oracle_slack = get_positive(c, "tolerances", "oracle_slack", t.oracle_slack);
  t.truncation = get_positive(c, "tolerances", "truncation", t.truncation);
  t.commutator = get_positive(c, "tolerances", "commutator", t.commutator);
  t.quantize_bandwidth = get_positive(c, "tolerances", "quantize_bandwidth", t.quantize_bandwidth);

  const bool field_needed = std::any_of(s.checks.begin(), s.checks.end(), uses_field);
  if (field_needed) {
    if (f.epsilon > 0.0) f.seed = get_seed(c, "field", "a random perturbation field");
    if (f.uniform && f.enforce_margin)
      c.fail("field", "enforce_margin", "the uniform profile has no margin; set enforce_margin = false");
    if (f.enforce_margin) {
      const auto m = scenario_manifold(s);
      const double margin = f.bump.margin_cells(*m);
      if (margin < f.min_margin) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "bump support leaves %.3g grid cells to the boundary of X, need %.3g",
                      margin, f.min_margin);
        c.fail("field", c.has("field", "half_width") ? "half_width" : "center", buf);
      }
    }
    if (projection_order(s) > kMaxJetOrder)
      c.fail("projection", "order", "exceeds the supported jet order " + std::to_string(kMaxJetOrder));
  }
  if (has_check(s, Check::LemmaA1)) s.lemma_seed = get_seed(c, "lemma-a1", "the random idempotents");
  if (has_check(s, Check::Commutator)) s.commutator_seed = get_seed(c, "commutator", "the random symbol pairs");
  return s;
}

ManifoldPtr scenario_manifold(const Scenario& s) {
  return s.dim == 1 ? ModelManifold::circle(s.grid) : ModelManifold::torus(s.grid, s.directions);
}

IdempotentSymbolField scenario_field(const Scenario& s, const ManifoldPtr& m) {
  const FieldRecipe& f = s.field;
  BandLimitedField v(s.dim, f.fiber, {});
  if (f.epsilon > 0.0) {
    const auto v0 = BandLimitedField::random(s.dim, f.fiber, f.bandwidth, f.angular_bandwidth, f.seed);
    const double norm = v0.max_sample_norm(*m);
    if (norm > 0.0) v = v0.scaled(f.epsilon / norm);
  }
  FieldOptions opt;
  opt.min_margin_cells = f.min_margin;
  opt.enforce_margin = f.enforce_margin;
  opt.jet_order = projection_order(s);
  return make_idempotent_field(m, beta_matrix(f), v, f.bump, opt);
}

namespace {

/// Lazily built objects shared by the checks of one run.
class Pipeline {
 public:
  Pipeline(const Scenario& s, Report& r) : s_(s), report_(r) {}

  const ManifoldPtr& manifold() {
    if (!manifold_) manifold_ = scenario_manifold(s_);
    return manifold_;
  }
  const IdempotentSymbolField& field() {
    if (!field_) {
      field_ = scenario_field(s_, manifold());
      report_.put("field", "margin_cells", field_->margin_cells);
      report_.put("field", "refinement_nodes", field_->refinement_nodes);
      report_.put("field", "constant_samples",
                  static_cast<int>(std::count(field_->constant.begin(), field_->constant.end(), 1)));
    }
    return *field_;
  }
  const ClassicalSymbol& projection() {
    if (!pi_) pi_ = build_projection(field(), projection_order(s_), s_.contour);
    return *pi_;
  }
  QuantizeOptions quantize_options() const {
    QuantizeOptions q;
    q.bandwidth_tol = s_.tol.quantize_bandwidth;
    return q;
  }
  const GridOperator& auxiliary_operator() {
    if (!aux_) aux_ = quantize(auxiliary_symbol(field()), s_.nf, quantize_options());
    return *aux_;
  }
  const GridOperator& matrix_projection() {
    if (!pmat_) pmat_ = sectorial_projection_matrix(auxiliary_operator(), ProjectionMethod::EigenSplit);
    return *pmat_;
  }

 private:
  const Scenario& s_;
  Report& report_;
  ManifoldPtr manifold_;
  std::optional<IdempotentSymbolField> field_;
  std::optional<ClassicalSymbol> pi_;
  std::optional<GridOperator> aux_;
  std::optional<GridOperator> pmat_;
};

struct CheckContext {
  const Scenario& s;
  Pipeline& pipe;
  Report& report;
  double scale;
  std::string section;

  void put(const std::string& k, const std::string& v) { report.put(section, k, v); }
  void put(const std::string& k, double v) { report.put(section, k, v); }
  void put(const std::string& k, int v) { report.put(section, k, v); }
};

Mat random_complex(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat a(n, n);
  for (int j = 0; j < n; ++j)
    for (int i = 0; i < n; ++i) a(i, j) = cd(u(rng), u(rng));
  return a;
}

struct TestIdempotent {
  Mat m;
  int rank = 0;
  bool self_adjoint = false;
  double condition = 1.0;
};

/// Even indices: Q D Q* with Q unitary.  Odd indices: S D S^-1 with cond(S) <= 10.
std::vector<TestIdempotent> random_idempotents(int count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<TestIdempotent> out;
  for (int i = 0; i < count; ++i) {
    const int n = 1 + i % 4;
    TestIdempotent t;
    t.rank = static_cast<int>(rng() % static_cast<std::uint64_t>(n + 1));
    t.self_adjoint = i % 2 == 0;
    Mat d = Mat::Zero(n, n);
    for (int k = 0; k < t.rank; ++k) d(k, k) = 1.0;
    if (t.self_adjoint) {
      Eigen::HouseholderQR<Eigen::MatrixXcd> qr(Eigen::MatrixXcd(random_complex(rng, n)));
      const Mat q = Mat(qr.householderQ());
      t.m = q * d * q.adjoint();
    } else {
      for (;;) {
        const Mat s = identity_mat(n) + 0.5 * random_complex(rng, n);
        const Eigen::MatrixXcd sd = s;
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(sd);
        const auto sv = svd.singularValues();
        t.condition = sv(0) / sv(n - 1);
        if (t.condition <= 10.0) {
          t.m = s * d * s.inverse();
          break;
        }
      }
    }
    out.push_back(std::move(t));
  }
  return out;
}

bool check_lemma_a1(CheckContext& cx) {
  const Scenario& s = cx.s;
  const auto mats = random_idempotents(s.lemma_matrices, s.lemma_seed);
  auto max_error = [&](int nodes, int which) {
    double e = 0.0;
    for (std::size_t i = 0; i < mats.size(); ++i) {
      if (which >= 0 && static_cast<int>(i) != which) continue;
      for (double d : s.lemma_distances)
        e = std::max(e, max_abs(lemma_a1_contour(mats[i].m, d, d / 2, nodes) - mats[i].m));
    }
    return e;
  };
  const double tol = s.tol.lemma_a1 * cx.scale;
  cx.put("matrices", s.lemma_matrices);
  cx.put("distances", join_num(s.lemma_distances));
  cx.put("radius", "d/2");
  cx.put("nodes", s.lemma_nodes);
  cx.put("tolerance", tol);
  for (std::size_t i = 0; i < mats.size(); ++i) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "size %d rank %d %s error %s", static_cast<int>(mats[i].m.rows()), mats[i].rank,
                  mats[i].self_adjoint ? "self_adjoint" : "similar", fmt(max_error(s.lemma_nodes, static_cast<int>(i))).c_str());
    cx.put("matrix_" + std::to_string(i), buf);
  }
  const double err = max_error(s.lemma_nodes, -1);
  cx.put("max_error", err);
  bool ok = err <= tol;

  std::vector<int> sweep = s.lemma_doubling;
  for (int m = sweep.back() * 2; m <= s.lemma_nodes; m *= 2) sweep.push_back(m);
  std::vector<double> errs;
  for (int m : sweep) {
    errs.push_back(max_error(m, -1));
    cx.put("error_nodes_" + std::to_string(m), errs.back());
  }
  for (std::size_t i = 1; i < s.lemma_doubling.size(); ++i) {
    const double ratio = errs[i] > 0.0 ? errs[i - 1] / errs[i] : INFINITY;
    const std::string key = "ratio_" + std::to_string(sweep[i - 1]) + "_" + std::to_string(sweep[i]);
    cx.put(key, ratio);
    if (!(ratio >= s.tol.lemma_a1_shrink)) ok = false;
  }
  cx.put("min_ratio_required", s.tol.lemma_a1_shrink);
  return ok;
}

bool check_pi0(CheckContext& cx) {
  auto& pipe = cx.pipe;
  const auto& f = pipe.field();
  const auto& pi = pipe.projection();
  const auto& m = *pipe.manifold();
  const HomogeneousTerm& p0 = pi.term(0);
  double err = 0.0;
  for (int p = 0; p < m.points(); ++p)
    for (int d = 0; d < m.directions(); ++d) err = std::max(err, max_abs(p0.value(p, d) - f.p_tilde.value(p, d)));
  const double tol = cx.s.tol.pi0 * cx.scale;
  cx.put("max_error", err);
  cx.put("tolerance", tol);

  // Where p~ equals beta the lower terms vanish identically.
  double beta_dev = 0.0;
  double lower = 0.0;
  int points = 0;
  for (int p = 0; p < m.points(); ++p) {
    if (!f.constant[static_cast<std::size_t>(p)]) continue;
    ++points;
    for (int d = 0; d < m.directions(); ++d) {
      beta_dev = std::max(beta_dev, max_abs(p0.value(p, d) - f.beta));
      for (int j = 1; j <= pi.order(); ++j) lower = std::max(lower, max_abs(pi.term(j).value(p, d)));
    }
  }
  cx.put("constant_points", points);
  cx.put("constant_pi0_minus_beta", beta_dev);
  cx.put("constant_lower_terms_max", lower);
  return err <= tol && beta_dev <= tol && lower == 0.0;
}

bool check_idempotency(CheckContext& cx) {
  const auto& pi = cx.pipe.projection();
  const int order = cx.s.order;
  const auto p = head(pi, order);
  const auto dist = componentwise_distance(compose(p, p, order), p);
  const double tol = cx.s.tol.idempotency * cx.scale;
  double worst = 0.0;
  for (const auto& [deg, v] : dist) {
    cx.put("degree_" + std::to_string(deg), v);
    worst = std::max(worst, v);
  }
  cx.put("order", order);
  cx.put("max_error", worst);
  cx.put("tolerance", tol);
  return worst <= tol;
}

bool check_residue(CheckContext& cx) {
  const auto& pi = cx.pipe.projection();
  const int n = cx.s.dim;
  if (pi.order() < n) throw RejectedInput("residue needs projection order >= n");
  const auto p = head(pi, std::max(cx.s.order, n));
  const ResidueReport r = residue_green(p, BoundaryGreenData{}, nullptr);
  const cd closed = residue_interior(p, Domain::Closed);
  const bool bitwise = r.interior.real() == closed.real() && r.interior.imag() == closed.imag();
  const double tol = cx.s.tol.residue * cx.scale;
  std::istringstream rec(to_record(r));
  for (std::string line; std::getline(rec, line);) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) cx.put(line.substr(0, eq), line.substr(eq + 3));
  }
  cx.put("closed_interior", fmt(closed));
  cx.put("bitwise_equal", fmt(bitwise));
  cx.put("abs_total", std::abs(r.total));
  cx.put("tolerance", tol);
  return std::abs(r.total) <= tol && bitwise;
}

bool check_oracle(CheckContext& cx) {
  auto& pipe = cx.pipe;
  const Scenario& s = cx.s;
  const GridOperator& c = pipe.auxiliary_operator();
  const GridOperator& pe = pipe.matrix_projection();
  const GridOperator pc = sectorial_projection_matrix(c, ProjectionMethod::Contour);
  const double agree = (pe.matrix - pc.matrix).cwiseAbs().maxCoeff();
  const double idem = compare_operator_norm(pe * pe, pe);
  const double comm = compare_operator_norm(pe * c, c * pe) / operator_norm(c);
  const double tol = s.tol.agreement * cx.scale;
  cx.put("basis_modes_per_axis", 2 * s.nf);
  cx.put("matrix_size", static_cast<int>(c.matrix.rows()));
  cx.put("method_agreement", agree);
  cx.put("projection_idempotency", idem);
  cx.put("projection_commutator_relative", comm);
  cx.put("tolerance", tol);
  bool ok = agree <= tol && idem <= tol && comm <= tol;

  const auto& pi = pipe.projection();
  const auto pez = without_zero_frequency(pe);
  std::vector<double> errs;
  for (int j : s.oracle_orders) {
    const auto q = quantize(head(pi, j), s.nf, pipe.quantize_options());
    cx.put("full_error_J" + std::to_string(j), compare_operator_norm(q, pe));
    errs.push_back(compare_operator_norm(without_zero_frequency(q), pez));
    cx.put("error_J" + std::to_string(j), errs.back());
  }
  bool monotone = true;
  for (std::size_t i = 1; i < errs.size(); ++i) monotone = monotone && errs[i] <= s.tol.oracle_slack * errs[i - 1];
  cx.put("slack", s.tol.oracle_slack);
  cx.put("monotone", fmt(monotone));
  return ok && monotone;
}

bool check_truncation(CheckContext& cx) {
  auto& pipe = cx.pipe;
  const Scenario& s = cx.s;
  const auto& pi = pipe.projection();
  const double tol = s.tol.truncation * cx.scale;
  cx.put("expect", s.expect_leftover ? "leftover" : "idempotent");
  cx.put("tolerance", tol);
  bool all_small = true;
  bool all_large = true;
  std::optional<TruncationMask> mask;
  for (int j = 0; j <= s.order; ++j) {
    const auto a = quantize(head(pi, j), s.nf, pipe.quantize_options());
    if (!mask) mask = TruncationMask::for_operator(a);
    const auto p = truncate(riesz_refine(a), *mask);
    const double norm = operator_norm(p);
    const double defect = compare_operator_norm(p * p, p);
    const double bound = tol * (1.0 + norm * norm);
    const std::string sj = "_J" + std::to_string(j);
    cx.put("defect" + sj, defect);
    cx.put("bound" + sj, bound);
    cx.put("leftover" + sj, operator_norm(leftover(a, a, *mask)));
    all_small = all_small && defect <= bound;
    all_large = all_large && defect > bound;
  }
  const auto pm = truncate(pipe.matrix_projection(), *mask);
  cx.put("exact_matrix_projection_defect", compare_operator_norm(pm * pm, pm));
  return s.expect_leftover ? all_large : all_small;
}

bool check_commutator(CheckContext& cx) {
  const Scenario& s = cx.s;
  const auto m = cx.pipe.manifold();
  const int order = s.leading_p + s.leading_q + s.dim;
  const double tol = s.tol.commutator * cx.scale;
  cx.put("pairs", s.pairs);
  cx.put("expansion_order", order);
  cx.put("tolerance", tol);
  double worst = 0.0;
  bool self_zero = true;
  for (int i = 0; i < s.pairs; ++i) {
    const std::uint64_t base = s.commutator_seed * 1000003ULL + 2ULL * static_cast<std::uint64_t>(i);
    const auto p = band_limited_symbol(m, s.leading_p, order, s.commutator_fiber, s.commutator_bandwidth,
                                       s.commutator_bandwidth, base, order);
    const auto q = band_limited_symbol(m, s.leading_q, order, s.commutator_fiber, s.commutator_bandwidth,
                                       s.commutator_bandwidth, base + 1, order);
    const cd r = residue_commutator(p, q, order);
    cx.put("pair_" + std::to_string(i), fmt(r));
    worst = std::max(worst, std::abs(r));
    if (i == 0) {
      const auto& low = s.leading_p <= s.leading_q ? p : q;
      self_zero = residue_commutator(low, low, order) == cd(0.0);
    }
  }
  cx.put("max_abs", worst);
  cx.put("self_commutator_zero", fmt(self_zero));
  return worst <= tol && self_zero;
}

}  // namespace

Outcome run_scenario(const Scenario& s, double tol_scale) {
  Outcome out;
  Report& r = out.report;
  r.put("meta", "tool", "psicalc");
  r.put("meta", "tool_version", kToolVersion);
  r.put("meta", "config", s.source);
  r.put("meta", "config_hash", "fnv1a64:" + hex64(fnv1a64(s.canonical)));
  r.put("meta", "timestamp", utc_timestamp());
  if (s.checks.empty()) return out;

  std::vector<std::string> names;
  for (Check k : s.checks) names.push_back(check_name(k));
  r.put("scenario", "name", s.name);
  r.put("scenario", "checks", join(names));
  r.put("scenario", "dim", s.dim);
  r.put("scenario", "grid", s.grid);
  r.put("scenario", "directions", s.directions);
  r.put("scenario", "nf", s.nf);
  r.put("scenario", "tol_scale", tol_scale);
  if (std::any_of(s.checks.begin(), s.checks.end(), uses_field)) {
    const FieldRecipe& f = s.field;
    r.put("scenario", "fiber", f.fiber);
    r.put("scenario", "beta", "diag " + join_num(f.beta));
    r.put("scenario", "epsilon", f.epsilon);
    r.put("scenario", "bandwidth", f.bandwidth);
    if (s.dim == 2) r.put("scenario", "angular_bandwidth", f.angular_bandwidth);
    r.put("scenario", "profile", f.uniform ? "uniform" : "bump");
    if (!f.uniform) {
      r.put("scenario", "center", f.bump.center);
      r.put("scenario", "half_width", f.bump.half_width);
      r.put("scenario", "sigma", f.bump.sigma);
    }
    r.put("scenario", "min_margin", f.min_margin);
    r.put("scenario", "enforce_margin", fmt(f.enforce_margin));
    r.put("scenario", "field_seed", std::to_string(f.seed));
    r.put("scenario", "order", s.order);
    r.put("scenario", "projection_order", projection_order(s));
    r.put("scenario", "contour_radius", s.contour.radius);
    r.put("scenario", "contour_nodes", s.contour.nodes);
    r.put("scenario", "quantize_bandwidth_tol", s.tol.quantize_bandwidth);
  }
  if (has_check(s, Check::Oracle)) r.put("scenario", "oracle_orders", join_num(s.oracle_orders));
  if (has_check(s, Check::LemmaA1)) r.put("scenario", "lemma_seed", std::to_string(s.lemma_seed));
  if (has_check(s, Check::Commutator)) {
    r.put("scenario", "commutator_seed", std::to_string(s.commutator_seed));
    r.put("scenario", "commutator_fiber", s.commutator_fiber);
    r.put("scenario", "leading_p", s.leading_p);
    r.put("scenario", "leading_q", s.leading_q);
    r.put("scenario", "commutator_bandwidth", s.commutator_bandwidth);
  }

  Pipeline pipe(s, r);
  int passed = 0;
  int failed = 0;
  for (Check k : s.checks) {
    CheckContext cx{s, pipe, r, tol_scale, std::string("check.") + check_name(k)};
    bool ok = false;
    try {
      switch (k) {
        case Check::LemmaA1: ok = check_lemma_a1(cx); break;
        case Check::Pi0: ok = check_pi0(cx); break;
        case Check::Idempotency: ok = check_idempotency(cx); break;
        case Check::Residue: ok = check_residue(cx); break;
        case Check::Oracle: ok = check_oracle(cx); break;
        case Check::Truncation: ok = check_truncation(cx); break;
        case Check::Commutator: ok = check_commutator(cx); break;
      }
    } catch (const std::exception& e) {
      const char* kind = dynamic_cast<const SpectralGapError*>(&e)     ? "spectral_gap"
                         : dynamic_cast<const UnsupportedDimension*>(&e) ? "unsupported_dimension"
                         : dynamic_cast<const DomainError*>(&e)          ? "domain"
                         : dynamic_cast<const ShapeMismatch*>(&e)        ? "shape_mismatch"
                         : dynamic_cast<const RejectedInput*>(&e)        ? "rejected_input"
                                                                         : nullptr;
      if (!kind) throw;
      cx.put("status", "refused");
      r.put("refusal", "check", check_name(k));
      r.put("refusal", "kind", kind);
      r.put("refusal", "message", e.what());
      r.put("summary", "passed", passed);
      r.put("summary", "failed", failed);
      r.put("summary", "status", "refused");
      out.exit_code = kExitRefused;
      return out;
    }
    cx.put("status", ok ? "pass" : "fail");
    (ok ? passed : failed) += 1;
  }
  r.put("summary", "passed", passed);
  r.put("summary", "failed", failed);
  r.put("summary", "status", failed == 0 ? "pass" : "fail");
  out.exit_code = failed == 0 ? kExitPass : kExitFail;
  return out;
}

std::string builtin_config(const std::string& name) {
  if (name == "lemma_a1") {
    return "[scenario]\nname = lemma_a1\nchecks = lemma-a1\n\n"
           "[lemma-a1]\nmatrices = 10\nseed = 20240611\nnodes = 64\ndistances = 1, 3\ndoubling = 4, 8, 16\n";
  }
  if (name == "vanishing_n1") {
    return "[scenario]\nname = vanishing_n1\nchecks = pi0, idempotency, residue\n\n"
           "[manifold]\ndim = 1\ngrid = 64\n\n"
           "[field]\nfiber = 2\nbeta = diag 1 0\nepsilon = 0.2\nbandwidth = 2\nprofile = bump\n"
           "half_width = 1.2\nsigma = 1\nseed = 7\n\n"
           "[projection]\norder = 4\n";
  }
  if (name == "vanishing_n2") {
    return "[scenario]\nname = vanishing_n2\nchecks = pi0, idempotency, residue\n\n"
           "[manifold]\ndim = 2\ngrid = 32\ndirections = 32\n\n"
           "[field]\nfiber = 2\nbeta = diag 1 0\nepsilon = 0.2\nbandwidth = 2\nangular_bandwidth = 1\n"
           "profile = bump\nhalf_width = 1.15\nsigma = 3\nseed = 1\n\n"
           "[projection]\norder = 3\n";
  }
  throw std::invalid_argument("no bundled scenario named '" + name + "'");
}

}  // namespace psicalc::cli
