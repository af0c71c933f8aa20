#pragma once

#include <array>
#include <functional>
#include <utility>
#include <vector>

#include "psicalc/common.hpp"
#include "psicalc/jet.hpp"
#include "psicalc/manifold.hpp"

namespace psicalc {

using Point = std::array<double, 2>;

/// Matrix-valued function on the cosphere bundle, extended to xi != 0 by
/// f(x, xi) = |xi|^d f(x, xi / |xi|).  Samples live on (base grid x directions)
/// and carry x-jets: every partial derivative d_x^gamma with |gamma| <= jet_order.
/// Jets are exact when supplied by the producer and spectral otherwise.
class HomogeneousTerm {
 public:
  HomogeneousTerm(ManifoldPtr manifold, int degree, int fiber, int jet_order = 0);

  /// Same matrix at every sample; all higher jets are zero.
  static HomogeneousTerm constant(ManifoldPtr manifold, int degree, const Mat& value, int jet_order = 0);
  /// Values of f(x, direction index); no jets beyond the values.
  static HomogeneousTerm sampled(ManifoldPtr manifold, int degree, int fiber,
                                 const std::function<Mat(const Point&, int)>& f);

  const ManifoldPtr& manifold() const noexcept { return manifold_; }
  int dim() const noexcept { return manifold_->dim(); }
  int degree() const noexcept { return degree_; }
  int fiber() const noexcept { return fiber_; }
  int jet_order() const noexcept { return jet_order_; }

  Mat value(int point, int dir) const { return sample(0, point, dir); }
  Mat sample(int jet, int point, int dir) const;
  void set_sample(int jet, int point, int dir, const Mat& v);
  MatJet jet(int point, int dir) const;
  void set_jet(int point, int dir, const MatJet& j);

  /// Largest |entry| over all value samples.
  double max_norm() const;
  bool is_zero() const;

  cd* data() noexcept { return data_.data(); }
  const cd* data() const noexcept { return data_.data(); }
  std::size_t offset(int jet, int point, int dir) const noexcept;

 private:
  ManifoldPtr manifold_;
  int degree_;
  int fiber_;
  int jet_order_;
  std::vector<cd> data_;
};

/// Value at (x, xi): |xi|^d times the direction sample (angular trigonometric
/// interpolation for n = 2); off-grid x uses trigonometric interpolation.
Mat evaluate(const HomogeneousTerm& term, const Point& x, const Point& xi);

/// d/dx_axis; shifts exact jets when present, spectral otherwise.
HomogeneousTerm differentiate_x(const HomogeneousTerm& term, int axis);
/// d/dxi_axis, degree drops by one.
HomogeneousTerm differentiate_xi(const HomogeneousTerm& term, int axis);
/// Term with jets of the requested order; missing orders are filled spectrally.
HomogeneousTerm with_jets(const HomogeneousTerm& term, int order);

HomogeneousTerm multiply(const HomogeneousTerm& f, const HomogeneousTerm& g);
HomogeneousTerm add(const HomogeneousTerm& f, const HomogeneousTerm& g);
HomogeneousTerm subtract(const HomogeneousTerm& f, const HomogeneousTerm& g);
HomogeneousTerm scale(const HomogeneousTerm& f, cd s);
/// Fiber trace; the result has fiber dimension 1.
HomogeneousTerm trace(const HomogeneousTerm& f);

/// Finite polyhomogeneous expansion p ~ p_{m0} + p_{m0-1} + ... + p_{m0-J}.
class ClassicalSymbol {
 public:
  explicit ClassicalSymbol(std::vector<HomogeneousTerm> terms);

  static ClassicalSymbol zero(ManifoldPtr manifold, int leading_degree, int fiber, int order);
  static ClassicalSymbol identity(ManifoldPtr manifold, int fiber);
  /// Single-term symbol.
  static ClassicalSymbol single(HomogeneousTerm term);

  const ManifoldPtr& manifold() const noexcept { return terms_.front().manifold(); }
  int fiber() const noexcept { return terms_.front().fiber(); }
  int leading_degree() const noexcept { return terms_.front().degree(); }
  int lowest_degree() const noexcept { return terms_.back().degree(); }
  /// Truncation order J (number of terms minus one).
  int order() const noexcept { return static_cast<int>(terms_.size()) - 1; }

  const HomogeneousTerm& term(int j) const { return terms_.at(static_cast<std::size_t>(j)); }
  const std::vector<HomogeneousTerm>& terms() const noexcept { return terms_; }
  /// Term of the given degree, or nullptr when the expansion does not reach it.
  const HomogeneousTerm* term_of_degree(int degree) const noexcept;

 private:
  std::vector<HomogeneousTerm> terms_;
};

Mat evaluate(const ClassicalSymbol& p, const Point& x, const Point& xi);

/// Left (Kohn-Nirenberg) composition with D_x = -i d_x:
///   (p # q)_{m_p+m_q-j} = sum_{|alpha|+j1+j2=j} ((-i)^|alpha| / alpha!) d_xi^alpha p_{m_p-j1} d_x^alpha q_{m_q-j2}
/// truncated after J orders.
ClassicalSymbol compose(const ClassicalSymbol& p, const ClassicalSymbol& q, int order);

// Degree-wise algebra.  add/subtract cover the union of both degree ranges.
ClassicalSymbol add(const ClassicalSymbol& p, const ClassicalSymbol& q);
ClassicalSymbol subtract(const ClassicalSymbol& p, const ClassicalSymbol& q);
ClassicalSymbol scale(const ClassicalSymbol& p, cd s);
/// Pointwise product, pairing terms whose degrees sum to each target degree.
ClassicalSymbol multiply(const ClassicalSymbol& p, const ClassicalSymbol& q, int order);
ClassicalSymbol trace(const ClassicalSymbol& p);

/// (degree, largest |entry| of p - q) for every degree in the union of both
/// ranges; a missing term counts as zero.
std::vector<std::pair<int, double>> componentwise_distance(const ClassicalSymbol& p,
                                                           const ClassicalSymbol& q);

}  // namespace psicalc
