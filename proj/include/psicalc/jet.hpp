#pragma once

#include <array>
#include <vector>

#include "psicalc/common.hpp"

namespace psicalc {

// x-jets: all partial derivatives d^gamma f of a fiber matrix with |gamma| <= order,
// stored in graded order (total degree, then a2).  The set for order L is a prefix
// of the set for any L' > L.

inline constexpr int kMaxJetOrder = 5;
inline constexpr int kMaxJetCount = (kMaxJetOrder + 1) * (kMaxJetOrder + 2) / 2;

struct MultiIndex {
  int a1 = 0;
  int a2 = 0;
  int order() const noexcept { return a1 + a2; }
};

constexpr int jet_count(int dim, int order) noexcept {
  return order < 0 ? 0 : (dim == 1 ? order + 1 : (order + 1) * (order + 2) / 2);
}

constexpr int jet_index(int dim, int a1, int a2) noexcept {
  if (dim == 1) return a1;
  const int t = a1 + a2;
  return t * (t + 1) / 2 + a2;
}

MultiIndex jet_multi_index(int dim, int index) noexcept;

/// Every multi-index with |alpha| == total, in graded order.
std::vector<MultiIndex> multi_indices_of_order(int dim, int total);

/// alpha! = a1! a2!
double multi_factorial(const MultiIndex& a) noexcept;

struct LeibnizTerm {
  int left;
  int right;
  double coeff;
};

/// table[gamma] lists (beta, gamma - beta, C(gamma, beta)) for every beta <= gamma,
/// up to kMaxJetOrder.
using LeibnizTable = std::vector<std::vector<LeibnizTerm>>;
const LeibnizTable& leibniz_table(int dim);

/// c += coeff a b for column-major m x m blocks.
void mul_acc(const cd* a, const cd* b, cd* c, int m, double coeff);

class MatJet {
 public:
  MatJet() = default;
  MatJet(int dim, int order, int fiber);

  static MatJet constant(int dim, int order, const Mat& value);

  int dim() const noexcept { return dim_; }
  int order() const noexcept { return order_; }
  int fiber() const noexcept { return fiber_; }
  int count() const noexcept { return jet_count(dim_, order_); }

  Mat& operator[](int i) noexcept { return d_[static_cast<std::size_t>(i)]; }
  const Mat& operator[](int i) const noexcept { return d_[static_cast<std::size_t>(i)]; }
  Mat& value() noexcept { return d_[0]; }
  const Mat& value() const noexcept { return d_[0]; }

  /// Same data, reduced to a lower order.
  MatJet truncated(int order) const;

  MatJet& operator+=(const MatJet& o);
  MatJet& operator-=(const MatJet& o);
  MatJet& operator*=(cd s);
  /// this += s * o over the common order.
  MatJet& add_scaled(const MatJet& o, cd s);

 private:
  int dim_ = 1;
  int order_ = 0;
  int fiber_ = 0;
  std::array<Mat, kMaxJetCount> d_{};
};

/// Leibniz product; the result has order min(f.order(), g.order()).
MatJet operator*(const MatJet& f, const MatJet& g);

/// Jet of the matrix inverse; throws DomainError when the value is singular.
MatJet inverse(const MatJet& a);

/// Jet of d^alpha f, of order f.order() - |alpha|.
MatJet shift(const MatJet& f, const MultiIndex& alpha);

}  // namespace psicalc
