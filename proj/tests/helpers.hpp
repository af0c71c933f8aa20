#pragma once

#include <algorithm>
#include <initializer_list>
#include <vector>

#include "psicalc/projection.hpp"
#include "psicalc/symbol.hpp"

namespace testing {

using namespace psicalc;

inline Mat scalar(cd v) {
  Mat a(1, 1);
  a(0, 0) = v;
  return a;
}

inline Mat diag(std::initializer_list<cd> v) {
  const int n = static_cast<int>(v.size());
  Mat a = Mat::Zero(n, n);
  int i = 0;
  for (cd x : v) a(i, i) = x, ++i;
  return a;
}

inline Mat mat2(cd a, cd b, cd c, cd d) {
  Mat m(2, 2);
  m << a, b, c, d;
  return m;
}

/// Largest |a - b| over all value samples.
inline double max_diff(const HomogeneousTerm& a, const HomogeneousTerm& b) {
  const auto& m = *a.manifold();
  double e = 0.0;
  for (int p = 0; p < m.points(); ++p)
    for (int d = 0; d < m.directions(); ++d) e = std::max(e, max_abs(a.value(p, d) - b.value(p, d)));
  return e;
}

inline double max_distance(const ClassicalSymbol& a, const ClassicalSymbol& b) {
  double e = 0.0;
  for (const auto& [deg, v] : componentwise_distance(a, b)) e = std::max(e, v);
  return e;
}

inline ClassicalSymbol head(const ClassicalSymbol& p, int order) {
  return ClassicalSymbol(std::vector<HomogeneousTerm>(p.terms().begin(), p.terms().begin() + order + 1));
}

/// Scalar term with exact jets from a single Fourier mode coeff * e^{i k x}.
inline HomogeneousTerm fourier_term(const ManifoldPtr& m, int degree, int k1, int k2, cd coeff, int jet_order) {
  BandLimitedField f(m->dim(), 1, {FourierMode{k1, k2, 0, -1, scalar(coeff)}});
  HomogeneousTerm t(m, degree, 1, jet_order);
  for (int p = 0; p < m->points(); ++p)
    for (int d = 0; d < m->directions(); ++d) t.set_jet(p, d, f.jet(*m, p, d, jet_order));
  return t;
}

/// |xi|^d sgn(xi)^s on the circle, as a constant-in-x term.
inline HomogeneousTerm circle_power(const ManifoldPtr& m, int degree, bool odd, int jet_order = 0) {
  HomogeneousTerm t(m, degree, 1, jet_order);
  for (int p = 0; p < m->points(); ++p) {
    t.set_sample(0, p, 0, scalar(1.0));
    t.set_sample(0, p, 1, scalar(odd ? -1.0 : 1.0));
  }
  return t;
}

}  // namespace testing
