#include "psicalc/projection.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>

#include <Eigen/Eigenvalues>

namespace psicalc {

// ---------------------------------------------------------------- cutoff

std::vector<double> CutoffProfile::derivatives(double xn, int order) const {
  std::vector<double> out(static_cast<std::size_t>(order + 1), 0.0);
  if (std::isinf(half_width)) {
    out[0] = 1.0;
    return out;
  }
  const double t0 = std::remainder(xn - center, kTwoPi);
  const double s0 = t0 / half_width;
  if (std::abs(s0) >= 1.0) return out;
  // Taylor coefficients in t = x - xn of u = 1 - s^2, v = 1/u, b = exp(sigma (1 - v)).
  const int n = order + 1;
  std::vector<double> u(static_cast<std::size_t>(n), 0.0);
  std::vector<double> v(static_cast<std::size_t>(n), 0.0);
  std::vector<double> b(static_cast<std::size_t>(n), 0.0);
  u[0] = 1.0 - s0 * s0;
  if (n > 1) u[1] = -2.0 * s0 / half_width;
  if (n > 2) u[2] = -1.0 / (half_width * half_width);
  v[0] = 1.0 / u[0];
  for (int k = 1; k < n; ++k) {
    double acc = 0.0;
    for (int i = 1; i <= std::min(k, 2); ++i) acc += u[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(k - i)];
    v[static_cast<std::size_t>(k)] = -acc * v[0];
  }
  b[0] = std::exp(sigma * (1.0 - v[0]));
  for (int k = 1; k < n; ++k) {
    double acc = 0.0;
    for (int i = 1; i <= k; ++i) acc += i * (-sigma * v[static_cast<std::size_t>(i)]) * b[static_cast<std::size_t>(k - i)];
    b[static_cast<std::size_t>(k)] = acc / k;
  }
  double fact = 1.0;
  for (int k = 0; k < n; ++k) {
    if (k > 0) fact *= k;
    out[static_cast<std::size_t>(k)] = fact * b[static_cast<std::size_t>(k)];
  }
  return out;
}

double CutoffProfile::margin_cells(const ModelManifold& m) const {
  const double lo = center - half_width;
  const double hi = center + half_width;
  return std::min(lo, kPi - hi) / m.spacing();
}

// ---------------------------------------------------------------- band-limited fields

BandLimitedField::BandLimitedField(int dim, int fiber, std::vector<FourierMode> modes)
    : dim_(dim), fiber_(fiber), modes_(std::move(modes)) {
  if (dim != 1 && dim != 2) throw RejectedInput("BandLimitedField: dimension must be 1 or 2");
  for (const auto& md : modes_) {
    if (md.coeff.rows() != fiber || md.coeff.cols() != fiber) throw ShapeMismatch("BandLimitedField: coefficient size");
    if (dim == 1 && (md.k2 != 0 || md.l != 0)) throw RejectedInput("BandLimitedField: n = 1 modes use k1 and dir only");
    if (dim == 2 && md.dir >= 0) throw RejectedInput("BandLimitedField: n = 2 modes use l, not dir");
  }
}

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

cd random_entry(std::mt19937_64& rng) {
  const double re = 2.0 * uniform01(rng) - 1.0;
  const double im = 2.0 * uniform01(rng) - 1.0;
  return {re, im};
}

Mat random_mat(std::mt19937_64& rng, int m) {
  Mat a(m, m);
  for (int j = 0; j < m; ++j) {
    for (int i = 0; i < m; ++i) a(i, j) = random_entry(rng);
  }
  return a;
}

}  // namespace

BandLimitedField BandLimitedField::random(int dim, int fiber, int bandwidth, int angular_bandwidth,
                                          std::uint64_t seed) {
  if (bandwidth < 0 || angular_bandwidth < 0) throw RejectedInput("BandLimitedField: negative bandwidth");
  std::mt19937_64 rng(seed);
  std::vector<FourierMode> modes;
  if (dim == 1) {
    for (int dir = 0; dir < 2; ++dir) {
      for (int k = -bandwidth; k <= bandwidth; ++k) {
        // Geometric decay keeps the field smooth at every bandwidth.
        const double damp = std::pow(0.5, std::abs(k));
        modes.push_back({k, 0, 0, dir, damp * random_mat(rng, fiber)});
      }
    }
  } else {
    for (int k1 = -bandwidth; k1 <= bandwidth; ++k1) {
      for (int k2 = -bandwidth; k2 <= bandwidth; ++k2) {
        for (int l = -angular_bandwidth; l <= angular_bandwidth; ++l) {
          const double damp = std::pow(0.5, std::abs(k1) + std::abs(k2) + std::abs(l));
          modes.push_back({k1, k2, l, -1, damp * random_mat(rng, fiber)});
        }
      }
    }
  }
  return BandLimitedField(dim, fiber, std::move(modes));
}

MatJet BandLimitedField::jet(const ModelManifold& m, int point, int dir, int order) const {
  MatJet out(dim_, order, fiber_);
  const auto x = m.coordinates(point);
  const double theta = dim_ == 2 ? m.direction_angle(dir) : 0.0;
  for (const auto& md : modes_) {
    if (md.dir >= 0 && md.dir != dir) continue;
    const cd phase = std::polar(1.0, md.k1 * x[0] + md.k2 * x[1] + md.l * theta);
    std::array<cd, kMaxJetOrder + 1> p1;
    std::array<cd, kMaxJetOrder + 1> p2;
    p1[0] = p2[0] = 1.0;
    for (int a = 1; a <= order; ++a) {
      p1[static_cast<std::size_t>(a)] = p1[static_cast<std::size_t>(a - 1)] * cd(0.0, md.k1);
      p2[static_cast<std::size_t>(a)] = p2[static_cast<std::size_t>(a - 1)] * cd(0.0, md.k2);
    }
    for (int j = 0; j < out.count(); ++j) {
      const MultiIndex g = jet_multi_index(dim_, j);
      const cd f = p1[static_cast<std::size_t>(g.a1)] * p2[static_cast<std::size_t>(g.a2)] * phase;
      if (f != cd(0.0)) out[j].noalias() += f * md.coeff;
    }
  }
  return out;
}

double BandLimitedField::max_sample_norm(const ModelManifold& m) const {
  double best = 0.0;
  for (int p = 0; p < m.points(); ++p) {
    for (int d = 0; d < m.directions(); ++d) {
      const Mat v = jet(m, p, d, 0).value();
      best = std::max(best, Eigen::JacobiSVD<Mat>(v).singularValues()(0));
    }
  }
  return best;
}

BandLimitedField BandLimitedField::scaled(double s) const {
  auto modes = modes_;
  for (auto& md : modes) md.coeff *= s;
  return BandLimitedField(dim_, fiber_, std::move(modes));
}

ClassicalSymbol band_limited_symbol(ManifoldPtr m, int leading, int order, int fiber, int bandwidth,
                                    int angular_bandwidth, std::uint64_t seed, int jet_order) {
  if (order < 0) throw RejectedInput("band_limited_symbol: negative order");
  std::vector<HomogeneousTerm> terms;
  for (int j = 0; j <= order; ++j) {
    const auto field = BandLimitedField::random(m->dim(), fiber, bandwidth, angular_bandwidth,
                                                seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(j));
    HomogeneousTerm t(m, leading - j, fiber, jet_order);
    for (int p = 0; p < m->points(); ++p) {
      for (int d = 0; d < m->directions(); ++d) t.set_jet(p, d, field.jet(*m, p, d, jet_order));
    }
    terms.push_back(std::move(t));
  }
  return ClassicalSymbol(std::move(terms));
}

// ---------------------------------------------------------------- contour

void Contour::validate() const {
  if (!(radius > 0.0 && radius < 1.0)) throw RejectedInput("contour radius must lie in (0, 1)");
  if (nodes < 32 || !is_power_of_two(nodes)) throw RejectedInput("contour node count must be a power of two >= 32");
}

cd Contour::node(int l) const { return 1.0 + std::polar(radius, kTwoPi * l / nodes); }

cd Contour::weight(int l) const {
  // lambda = 1 + r e^{i phi}, dlambda = i r e^{i phi} dphi
  return -(radius / nodes) * std::polar(1.0, kTwoPi * l / nodes);
}

bool is_idempotent(const Mat& m, double tol) {
  if (m.rows() != m.cols()) return false;
  const double s = max_abs(m);
  return max_abs(m * m - m) <= tol * (1.0 + s * s);
}

// ---------------------------------------------------------------- field refinement

namespace {

std::string describe_point(const ModelManifold& m, int point, int dir) {
  const auto ij = m.indices(point);
  char buf[160];
  if (m.dim() == 1) {
    std::snprintf(buf, sizeof buf, "grid point i=%d (x=%.6f), direction %d", ij[0], m.coordinates(point)[0], dir);
  } else {
    std::snprintf(buf, sizeof buf, "grid point (i1=%d, i2=%d), direction %d", ij[0], ij[1], dir);
  }
  return buf;
}

MatJet bump_jet(const ModelManifold& m, const std::vector<double>& db, int order, int fiber) {
  MatJet b(m.dim(), order, fiber);
  const int axis = m.dim() == 1 ? 0 : 1;
  for (int k = 0; k <= order; ++k) {
    const int slot = axis == 0 ? jet_index(m.dim(), k, 0) : jet_index(m.dim(), 0, k);
    b[slot] = db[static_cast<std::size_t>(k)] * Mat::Identity(fiber, fiber);
  }
  return b;
}

}  // namespace

IdempotentSymbolField make_idempotent_field(ManifoldPtr m, const Mat& beta, const BandLimitedField& v,
                                            const CutoffProfile& bump, const FieldOptions& options) {
  const int fiber = static_cast<int>(beta.rows());
  if (beta.rows() != beta.cols() || fiber < 1 || fiber > kMaxFiber) throw ShapeMismatch("beta must be square, size 1..4");
  if (!is_idempotent(beta, 1e-14)) throw RejectedInput("beta is not idempotent");
  if (v.fiber() != fiber || v.dim() != m->dim()) throw ShapeMismatch("perturbation does not match beta / manifold");
  if (!(bump.half_width > 0.0 && (bump.half_width < kPi || std::isinf(bump.half_width)))) {
    throw RejectedInput("bump half width must lie in (0, pi)");
  }
  const double margin = bump.margin_cells(*m);
  if (options.enforce_margin && margin < options.min_margin_cells) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "bump support is %.3f grid cells from the boundary of X; at least %.3f required",
                  margin, options.min_margin_cells);
    throw RejectedInput(buf);
  }
  const int order = options.jet_order;
  const int pts = m->points();
  const int dirs = m->directions();

  // Pass 1: sample A = beta + b V, check the spectral gap, pick node counts.
  const std::size_t samples = static_cast<std::size_t>(pts) * static_cast<std::size_t>(dirs);
  std::vector<MatJet> a(samples);
  std::vector<int> sample_nodes(samples, 0);
  std::vector<std::uint8_t> constant(static_cast<std::size_t>(pts), 1);
  for (int p = 0; p < pts; ++p) {
    const auto db = bump.derivatives(m->normal_coordinate(p), order);
    const bool zero = std::all_of(db.begin(), db.end(), [](double x) { return x == 0.0; });
    if (zero || v.modes().empty()) continue;
    constant[static_cast<std::size_t>(p)] = 0;
    const MatJet b = bump_jet(*m, db, order, fiber);
    for (int d = 0; d < dirs; ++d) {
      MatJet aj = b * v.jet(*m, p, d, order);
      aj.value() += beta;
      const Eigen::ComplexEigenSolver<Mat> es(aj.value(), false);
      double rho = 0.0;
      for (int i = 0; i < fiber; ++i) {
        const cd z = es.eigenvalues()(i);
        const double near = std::min(std::abs(z), std::abs(z - 1.0));
        if (near > 0.4) {
          char buf[200];
          std::snprintf(buf, sizeof buf, "spectral gap check failed at %s: eigenvalue %.6g%+.6gi is %.4f from {0, 1}",
                        describe_point(*m, p, d).c_str(), z.real(), z.imag(), near);
          throw SpectralGapError(buf, 0.5 - near);
        }
        // Trapezoid convergence factor for the circle |lambda - 1| = 1/2.
        rho = std::max(rho, std::abs(z - 1.0) < 0.5 ? std::abs(z - 1.0) / 0.5 : 0.5 / std::abs(z - 1.0));
      }
      int nodes = 32;
      while (nodes < 4096 && std::pow(rho, nodes) > 1e-18) nodes *= 2;
      const std::size_t s = static_cast<std::size_t>(p) * static_cast<std::size_t>(dirs) + static_cast<std::size_t>(d);
      sample_nodes[s] = nodes;
      a[s] = std::move(aj);
    }
  }

  // Pass 2: p~ = (1 / 2 pi i) oint (lambda - A)^{-1} dlambda on jets.
  HomogeneousTerm pt(m, 0, fiber, order);
  int max_nodes = 0;
  for (int p = 0; p < pts; ++p) {
    for (int d = 0; d < dirs; ++d) {
      if (constant[static_cast<std::size_t>(p)]) {
        pt.set_sample(0, p, d, beta);
        continue;
      }
      const std::size_t s = static_cast<std::size_t>(p) * static_cast<std::size_t>(dirs) + static_cast<std::size_t>(d);
      const MatJet& aj = a[s];
      const Contour riesz{0.5, sample_nodes[s]};
      max_nodes = std::max(max_nodes, riesz.nodes);
      MatJet acc(m->dim(), order, fiber);
      MatJet shifted = aj;
      for (int l = 0; l < riesz.nodes; ++l) {
        shifted.value() = aj.value() - riesz.node(l) * Mat::Identity(fiber, fiber);
        acc.add_scaled(inverse(shifted), riesz.weight(l));
      }
      const Mat& val = acc.value();
      if (!is_idempotent(val, 1e-12)) {
        throw SpectralGapError("refined field is not idempotent at " + describe_point(*m, p, d), 0.0);
      }
      pt.set_jet(p, d, acc);
    }
  }
  return {std::move(pt), beta, margin, std::move(constant), max_nodes};
}

ClassicalSymbol auxiliary_symbol(const IdempotentSymbolField& f) {
  HomogeneousTerm c = scale(f.p_tilde, 2.0);
  const auto& m = *c.manifold();
  const Mat id = Mat::Identity(c.fiber(), c.fiber());
  for (int p = 0; p < m.points(); ++p) {
    for (int d = 0; d < m.directions(); ++d) c.set_sample(0, p, d, c.value(p, d) - id);
  }
  HomogeneousTerm c2(c.manifold(), 2, c.fiber(), c.jet_order());
  std::copy_n(c.data(), c.offset(jet_count(m.dim(), c.jet_order()), 0, 0), c2.data());
  return ClassicalSymbol::single(std::move(c2));
}

// ---------------------------------------------------------------- parametrix

namespace {

struct XiDerivative {
  int k = 0;  // c_{2-k}
  MultiIndex alpha;
  cd coeff;
  HomogeneousTerm term;
};

// d_xi^alpha c_{2-k} for |alpha| + k <= order, with the composition weight.
std::vector<XiDerivative> xi_derivatives(const ClassicalSymbol& c, int order) {
  const int dim = c.manifold()->dim();
  std::vector<XiDerivative> out;
  for (int k = 0; k <= std::min(order, c.order()); ++k) {
    const HomogeneousTerm base = c.term(k).jet_order() >= order ? c.term(k) : with_jets(c.term(k), order);
    for (int a = 0; a + k <= order; ++a) {
      for (const MultiIndex& alpha : multi_indices_of_order(dim, a)) {
        HomogeneousTerm t = base;
        for (int i = 0; i < alpha.a1; ++i) t = differentiate_xi(t, 0);
        for (int i = 0; i < alpha.a2; ++i) t = differentiate_xi(t, 1);
        out.push_back({k, alpha, std::pow(cd(0.0, -1.0), a) / multi_factorial(alpha), std::move(t)});
      }
    }
  }
  return out;
}

// Per-sample parametrix terms q_{-2-j}, j = 0..order, at one contour node.
class SampleKernel {
 public:
  SampleKernel(const std::vector<XiDerivative>& derivs, int point, int dir, int order)
      : order_(order) {
    for (const auto& d : derivs) {
      const int need = order - d.k - d.alpha.order();
      parts_.push_back({d.k, d.alpha, d.coeff, d.term.jet(point, dir).truncated(std::max(need, 0))});
    }
    c2_ = parts_.front().jet;
    fiber_ = c2_.fiber();
    flat_ = true;
    for (const auto& d : parts_) {
      if (d.k > 0 && !d.jet.value().isZero(0.0)) flat_ = false;
      for (int i = 1; i < d.jet.count(); ++i) {
        if (!d.jet[i].isZero(0.0)) flat_ = false;
      }
    }
  }

  /// True when every x-derivative vanishes: all lower terms are then exactly zero.
  bool flat() const noexcept { return flat_; }

  void evaluate(cd lambda, std::vector<MatJet>& q) const {
    q.assign(static_cast<std::size_t>(order_ + 1), MatJet());
    if (flat_) {
      // Vanishing x-jets: q_{-2} is x-constant and every lower term is zero.
      const Mat shifted = c2_.value() - lambda * Mat::Identity(fiber_, fiber_);
      q[0] = MatJet(c2_.dim(), order_, fiber_);
      q[0].value() = shifted.partialPivLu().inverse();
      for (int j = 1; j <= order_; ++j) q[static_cast<std::size_t>(j)] = MatJet(c2_.dim(), order_ - j, fiber_);
      return;
    }
    MatJet shifted = c2_;
    shifted.value() -= lambda * Mat::Identity(fiber_, fiber_);
    q[0] = inverse(shifted);
    for (int j = 1; j <= order_; ++j) {
      const int ord = order_ - j;
      MatJet sum(c2_.dim(), ord, fiber_);
      for (const auto& d : parts_) {
        const int j2 = j - d.k - d.alpha.order();
        if (j2 < 0 || j2 >= j) continue;
        MatJet term = d.jet.truncated(ord) * shift(q[static_cast<std::size_t>(j2)], d.alpha).truncated(ord);
        sum.add_scaled(term, d.coeff);
      }
      MatJet qj = q[0].truncated(ord) * sum;
      qj *= -1.0;
      q[static_cast<std::size_t>(j)] = std::move(qj);
    }
  }

 private:
  struct Part {
    int k;
    MultiIndex alpha;
    cd coeff;
    MatJet jet;
  };
  int order_;
  int fiber_ = 1;
  bool flat_ = false;
  MatJet c2_;
  std::vector<Part> parts_;
};

void check_auxiliary(const ClassicalSymbol& c, int order, const Contour& contour) {
  contour.validate();
  if (order < 0 || order > kMaxJetOrder) throw RejectedInput("parametrix order out of range");
  if (c.leading_degree() != 2) throw RejectedInput("auxiliary symbol must have leading degree 2");
}

}  // namespace

ParametrixTable::ParametrixTable(ManifoldPtr m, int fiber, int order, Contour contour)
    : manifold_(std::move(m)), fiber_(fiber), order_(order), contour_(contour) {
  const std::size_t n = static_cast<std::size_t>(order + 1) * static_cast<std::size_t>(contour.nodes) *
                        static_cast<std::size_t>(manifold_->points()) *
                        static_cast<std::size_t>(manifold_->directions()) * static_cast<std::size_t>(fiber * fiber);
  data_.assign(n, cd(0.0));
}

std::size_t ParametrixTable::offset(int j, int node, int point, int dir) const noexcept {
  const auto pts = static_cast<std::size_t>(manifold_->points());
  const auto dirs = static_cast<std::size_t>(manifold_->directions());
  const auto nodes = static_cast<std::size_t>(contour_.nodes);
  return (((static_cast<std::size_t>(j) * nodes + static_cast<std::size_t>(node)) * pts +
           static_cast<std::size_t>(point)) *
              dirs +
          static_cast<std::size_t>(dir)) *
         static_cast<std::size_t>(fiber_ * fiber_);
}

Mat ParametrixTable::value(int j, int node, int point, int dir) const {
  Mat m(fiber_, fiber_);
  std::copy_n(data_.data() + offset(j, node, point, dir), fiber_ * fiber_, m.data());
  return m;
}

void ParametrixTable::set_value(int j, int node, int point, int dir, const Mat& v) {
  std::copy_n(v.data(), fiber_ * fiber_, data_.data() + offset(j, node, point, dir));
}

ParametrixTable parametrix_recursion(const ClassicalSymbol& c, const Contour& contour, int order) {
  check_auxiliary(c, order, contour);
  const auto derivs = xi_derivatives(c, order);
  const auto& m = *c.manifold();
  ParametrixTable table(c.manifold(), c.fiber(), order, contour);
  std::vector<MatJet> q;
  for (int p = 0; p < m.points(); ++p) {
    for (int d = 0; d < m.directions(); ++d) {
      const SampleKernel kernel(derivs, p, d, order);
      for (int l = 0; l < contour.nodes; ++l) {
        kernel.evaluate(contour.node(l), q);
        for (int j = 0; j <= order; ++j) table.set_value(j, l, p, d, q[static_cast<std::size_t>(j)].value());
      }
    }
  }
  return table;
}

ClassicalSymbol contour_integrate_projection(const ParametrixTable& table) {
  const auto& m = *table.manifold();
  const Contour& contour = table.contour();
  std::vector<HomogeneousTerm> terms;
  for (int j = 0; j <= table.order(); ++j) {
    HomogeneousTerm t(table.manifold(), -j, table.fiber(), 0);
    for (int p = 0; p < m.points(); ++p) {
      for (int d = 0; d < m.directions(); ++d) {
        Mat acc = Mat::Zero(table.fiber(), table.fiber());
        for (int l = 0; l < contour.nodes; ++l) acc += contour.weight(l) * table.value(j, l, p, d);
        t.set_sample(0, p, d, acc);
      }
    }
    terms.push_back(std::move(t));
  }
  return ClassicalSymbol(std::move(terms));
}

namespace {

// Polynomial in lambda with jet coefficients.
using JetPoly = std::vector<MatJet>;

void poly_add_scaled(JetPoly& acc, const JetPoly& p, cd s, int order) {
  if (acc.size() < p.size()) {
    const int dim = p.front().dim();
    const int fiber = p.front().fiber();
    while (acc.size() < p.size()) acc.emplace_back(dim, order, fiber);
  }
  for (std::size_t b = 0; b < p.size(); ++b) acc[b].add_scaled(p[b], s);
}

// p * (1 - lambda^2)
JetPoly times_one_minus_square(const JetPoly& p) {
  JetPoly out(p.size() + 2, MatJet(p.front().dim(), p.front().order(), p.front().fiber()));
  for (std::size_t b = 0; b < p.size(); ++b) {
    out[b] += p[b];
    out[b + 2] -= p[b];
  }
  return out;
}

// When c_2 = S |xi|^2 with S^2 = I, (S - lambda)^{-1} = (S + lambda) u with
// u = 1 / (1 - lambda^2), and q_{-2-j} = u^{j+1} N_j(lambda) for a polynomial
// N_j.  The trapezoid sum then reduces to the scalars W_{j,b} = sum_l w_l u_l^{j+1} lambda_l^b.
class InvolutionKernel {
 public:
  InvolutionKernel(const std::vector<XiDerivative>& derivs, int order, const Contour& contour)
      : derivs_(derivs), order_(order) {
    weights_.assign(static_cast<std::size_t>(order + 1), {});
    for (int j = 0; j <= order; ++j) {
      auto& w = weights_[static_cast<std::size_t>(j)];
      w.assign(static_cast<std::size_t>(2 * j + 2), cd(0.0));
      for (int l = 0; l < contour.nodes; ++l) {
        const cd lam = contour.node(l);
        const cd u = 1.0 / (1.0 - lam * lam);
        cd f = contour.weight(l) * std::pow(u, j + 1);
        for (auto& wb : w) {
          wb += f;
          f *= lam;
        }
      }
    }
  }

  void integrate(int point, int dir, std::vector<MatJet>& pi) const {
    const int dim = derivs_.front().term.dim();
    const MatJet s = derivs_.front().term.jet(point, dir).truncated(order_);
    const int fiber = s.fiber();
    bool flat = true;
    for (int i = 1; i < s.count(); ++i) flat = flat && s[i].isZero(0.0);
    std::vector<JetPoly> n(static_cast<std::size_t>(order_ + 1));
    n[0] = {s, MatJet::constant(dim, order_, Mat::Identity(fiber, fiber))};
    for (int j = 1; j <= order_; ++j) {
      if (flat) {
        n[static_cast<std::size_t>(j)] = {MatJet(dim, order_ - j, fiber)};
        continue;
      }
      const int ord = order_ - j;
      JetPoly r;
      for (int j2 = 0; j2 < j; ++j2) {
        JetPoly t;
        for (const auto& d : derivs_) {
          if (d.alpha.order() != j - j2 || d.alpha.order() == 0) continue;
          const MatJet dj = d.term.jet(point, dir).truncated(ord);
          JetPoly prod;
          for (const auto& nb : n[static_cast<std::size_t>(j2)]) prod.push_back(dj * shift(nb, d.alpha).truncated(ord));
          poly_add_scaled(t, prod, d.coeff, ord);
        }
        if (t.empty()) continue;
        for (int e = 0; e < j - 1 - j2; ++e) t = times_one_minus_square(t);
        poly_add_scaled(r, t, 1.0, ord);
      }
      // N_j = -(S + lambda) R
      JetPoly nj(r.size() + 1, MatJet(dim, ord, fiber));
      const MatJet so = s.truncated(ord);
      for (std::size_t b = 0; b < r.size(); ++b) {
        nj[b] -= so * r[b];
        nj[b + 1] -= r[b];
      }
      n[static_cast<std::size_t>(j)] = std::move(nj);
    }
    pi.assign(static_cast<std::size_t>(order_ + 1), MatJet());
    for (int j = 0; j <= order_; ++j) {
      MatJet acc(dim, order_ - j, fiber);
      const auto& w = weights_[static_cast<std::size_t>(j)];
      const auto& nj = n[static_cast<std::size_t>(j)];
      for (std::size_t b = 0; b < nj.size(); ++b) acc.add_scaled(nj[b], w.at(b));
      pi[static_cast<std::size_t>(j)] = std::move(acc);
    }
  }

 private:
  const std::vector<XiDerivative>& derivs_;
  int order_;
  std::vector<std::vector<cd>> weights_;
};

bool is_involution(const HomogeneousTerm& c2) {
  const auto& m = *c2.manifold();
  const Mat id = Mat::Identity(c2.fiber(), c2.fiber());
  for (int p = 0; p < m.points(); ++p) {
    for (int d = 0; d < m.directions(); ++d) {
      const Mat v = c2.value(p, d);
      if (max_abs(v * v - id) > 1e-12) return false;
    }
  }
  return true;
}

}  // namespace

ClassicalSymbol build_projection(const ClassicalSymbol& c, int order, const Contour& contour) {
  check_auxiliary(c, order, contour);
  const auto derivs = xi_derivatives(c, order);
  const auto& m = *c.manifold();
  const int fiber = c.fiber();
  std::vector<HomogeneousTerm> terms;
  for (int j = 0; j <= order; ++j) terms.emplace_back(c.manifold(), -j, fiber, order - j);
  std::vector<MatJet> q;
  std::vector<MatJet> acc(static_cast<std::size_t>(order + 1));
  const bool involution = c.order() == 0 && is_involution(c.term(0));
  const InvolutionKernel fast(derivs, order, contour);
  for (int p = 0; p < m.points(); ++p) {
    for (int d = 0; d < m.directions(); ++d) {
      if (involution) {
        fast.integrate(p, d, acc);
      } else {
        const SampleKernel kernel(derivs, p, d, order);
        const int active = kernel.flat() ? 0 : order;
        for (int j = 0; j <= order; ++j) acc[static_cast<std::size_t>(j)] = MatJet(m.dim(), order - j, fiber);
        for (int l = 0; l < contour.nodes; ++l) {
          kernel.evaluate(contour.node(l), q);
          const cd w = contour.weight(l);
          for (int j = 0; j <= active; ++j) acc[static_cast<std::size_t>(j)].add_scaled(q[static_cast<std::size_t>(j)], w);
        }
      }
      for (int j = 0; j <= order; ++j) terms[static_cast<std::size_t>(j)].set_jet(p, d, acc[static_cast<std::size_t>(j)]);
    }
  }
  return ClassicalSymbol(std::move(terms));
}

ClassicalSymbol build_projection(const IdempotentSymbolField& f, int order, const Contour& contour) {
  if (f.p_tilde.jet_order() < order) throw RejectedInput("field carries fewer x-jets than the requested order");
  return build_projection(auxiliary_symbol(f), order, contour);
}

// ---------------------------------------------------------------- appendix identity

Mat resolvent_reflection(const Mat& m, double d, cd lambda) {
  if (m.rows() != m.cols()) throw ShapeMismatch("resolvent_reflection: matrix must be square");
  if (!(d > 0.0)) throw DomainError("resolvent_reflection: d must be positive");
  if (!is_idempotent(m)) throw RejectedInput("resolvent_reflection: matrix is not idempotent");
  if (std::abs(lambda - d) <= 1e-14 * d || std::abs(lambda + d) <= 1e-14 * d) {
    throw DomainError("resolvent_reflection: lambda is a pole (+-d)");
  }
  const Mat id = Mat::Identity(m.rows(), m.cols());
  return m / (d - lambda) - (id - m) / (d + lambda);
}

Mat lemma_a1_contour(const Mat& m, double d, double r, int nodes) {
  if (!(d > 0.0)) throw DomainError("lemma_a1_contour: d must be positive");
  if (!(r > 0.0) || r >= d) throw DomainError("lemma_a1_contour: radius must satisfy 0 < r < d");
  if (nodes < 1) throw RejectedInput("lemma_a1_contour: node count must be positive");
  Mat acc = Mat::Zero(m.rows(), m.cols());
  for (int l = 0; l < nodes; ++l) {
    const cd e = std::polar(1.0, kTwoPi * l / nodes);
    acc += (-(r / nodes) * e) * resolvent_reflection(m, d, d + r * e);
  }
  return acc;
}

}  // namespace psicalc
