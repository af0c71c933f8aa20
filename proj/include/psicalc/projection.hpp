#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "psicalc/symbol.hpp"

namespace psicalc {

/// Smooth bump b(x) = exp(sigma (1 - 1/(1 - s^2))), s = (x_n - center) / half_width,
/// in the coordinate normal to the boundary of X.  b(center) = 1, b = 0 for |s| >= 1.
struct CutoffProfile {
  double center = kPi / 2;
  double half_width = 1.0;
  double sigma = 1.0;

  /// b = 1 everywhere (infinite half width); never satisfies a margin.
  static CutoffProfile uniform() { return {kPi / 2, std::numeric_limits<double>::infinity(), 1.0}; }

  /// b and its first `order` derivatives at the normal coordinate x_n.
  std::vector<double> derivatives(double xn, int order) const;
  /// Grid cells between the support and the nearer boundary point of X.
  double margin_cells(const ModelManifold& m) const;
};

/// Matrix field sum_modes coeff * exp(i (k . x + l theta)), restricted to one
/// direction index when `dir >= 0` (used for the two-point cosphere of n = 1).
struct FourierMode {
  int k1 = 0;
  int k2 = 0;
  int l = 0;
  int dir = -1;
  Mat coeff;
};

class BandLimitedField {
 public:
  BandLimitedField(int dim, int fiber, std::vector<FourierMode> modes);

  /// Random complex coefficients for |k_i| <= bandwidth (and |l| <= angular_bandwidth
  /// for n = 2), from a 64-bit Mersenne twister seeded with `seed`.
  static BandLimitedField random(int dim, int fiber, int bandwidth, int angular_bandwidth, std::uint64_t seed);

  int dim() const noexcept { return dim_; }
  int fiber() const noexcept { return fiber_; }
  const std::vector<FourierMode>& modes() const noexcept { return modes_; }

  /// Exact x-jet at a grid point and direction.
  MatJet jet(const ModelManifold& m, int point, int dir, int order) const;
  /// Largest spectral norm over the grid samples.
  double max_sample_norm(const ModelManifold& m) const;
  BandLimitedField scaled(double s) const;

 private:
  int dim_;
  int fiber_;
  std::vector<FourierMode> modes_;
};

/// Symbol with terms of degrees leading, leading - 1, ..., leading - order; every
/// term is a random band-limited field (seed derived from `seed` and the term
/// index) with exact x-jets of order `jet_order`.
ClassicalSymbol band_limited_symbol(ManifoldPtr m, int leading, int order, int fiber, int bandwidth,
                                    int angular_bandwidth, std::uint64_t seed, int jet_order = 0);

struct FieldOptions {
  /// Required clearance between the bump support and the boundary of X.
  double min_margin_cells = 2.0;
  bool enforce_margin = true;
  /// Jet order carried by p~ (the projection of order J needs J).
  int jet_order = 4;
};

/// Degree-0 idempotent field p~ = beta + (bump-localized correction).
struct IdempotentSymbolField {
  HomogeneousTerm p_tilde;
  Mat beta;
  double margin_cells = 0.0;
  /// 1 where p~ = beta exactly (value and all jets, every direction).
  std::vector<std::uint8_t> constant;
  /// Contour nodes used by the refinement.
  int refinement_nodes = 0;
};

/// Riesz refinement of beta + b(x) V(x, w) around the eigenvalues near 1.
IdempotentSymbolField make_idempotent_field(ManifoldPtr m, const Mat& beta, const BandLimitedField& v,
                                            const CutoffProfile& bump, const FieldOptions& options = {});

/// Circle |lambda - 1| = radius on the reduced sphere, traversed counterclockwise.
struct Contour {
  double radius = 0.5;
  int nodes = 64;

  void validate() const;
  cd node(int l) const;
  /// Trapezoid weight w_l with (i / 2 pi) oint f dlambda ~ sum_l w_l f(lambda_l).
  cd weight(int l) const;
};

/// c_2 = (2 p~ - I) |xi|^2 with the jets of p~.
ClassicalSymbol auxiliary_symbol(const IdempotentSymbolField& f);

/// Values of q_{-2-j} on (contour node x grid point x direction).
class ParametrixTable {
 public:
  ParametrixTable(ManifoldPtr m, int fiber, int order, Contour contour);

  const ManifoldPtr& manifold() const noexcept { return manifold_; }
  int fiber() const noexcept { return fiber_; }
  int order() const noexcept { return order_; }
  const Contour& contour() const noexcept { return contour_; }

  Mat value(int j, int node, int point, int dir) const;
  void set_value(int j, int node, int point, int dir, const Mat& v);

 private:
  std::size_t offset(int j, int node, int point, int dir) const noexcept;

  ManifoldPtr manifold_;
  int fiber_;
  int order_;
  Contour contour_;
  std::vector<cd> data_;
};

/// q_{-2} = (c_2 - lambda)^{-1},
/// q_{-2-j} = -q_{-2} sum_{|alpha|+k+j2=j, j2<j} ((-i)^|alpha|/alpha!) d_xi^alpha c_{2-k} d_x^alpha q_{-2-j2}.
ParametrixTable parametrix_recursion(const ClassicalSymbol& c, const Contour& contour, int order);

/// pi_{-j} = (i / 2 pi) oint q_{-2-j} dlambda by the trapezoid rule.
ClassicalSymbol contour_integrate_projection(const ParametrixTable& table);

/// Recursion and contour integral in one pass; pi_{-j} carries exact x-jets of order J - j.
ClassicalSymbol build_projection(const ClassicalSymbol& c, int order, const Contour& contour = {});
ClassicalSymbol build_projection(const IdempotentSymbolField& f, int order, const Contour& contour = {});

/// M / (d - lambda) - (I - M) / (d + lambda) for an idempotent M.
Mat resolvent_reflection(const Mat& m, double d, cd lambda);

/// (i / 2 pi) oint_{|lambda - d| = r} [(2M - I) d - lambda]^{-1} dlambda with `nodes` trapezoid nodes.
Mat lemma_a1_contour(const Mat& m, double d, double r, int nodes);

/// ||M^2 - M||_max <= tol (1 + ||M||_max^2).
bool is_idempotent(const Mat& m, double tol = 1e-10);

}  // namespace psicalc
