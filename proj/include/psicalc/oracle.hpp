#pragma once

#include <cstdint>
#include <iosfwd>
#include <vector>

#include <Eigen/Dense>

#include "psicalc/symbol.hpp"

namespace psicalc {

using DenseMat = Eigen::MatrixXcd;

/// Dense operator on the Fourier modes k in [-nf, nf)^n, fiber-minor ordering:
/// row = mode_index * m + fiber_index, mode_index lexicographic (k1 major).
struct GridOperator {
  DenseMat matrix;
  int nf = 0;
  ManifoldPtr manifold;
  int fiber = 1;

  int modes_per_axis() const noexcept { return 2 * nf; }
  int modes() const noexcept;
  /// Frequency of a mode index along each axis.
  std::array<int, 2> frequency(int mode) const noexcept;
};

struct QuantizeOptions {
  /// Largest tolerated |p^(m)| / max |p^| for x-frequencies |m| >= N/2 - 1.
  double bandwidth_tol = 1e-6;
};

/// Matrix of u -> sum_xi e^{i x.xi} p(x, xi) u^(xi) on the truncated basis, with
/// x-frequencies of the symbol taken mod 2 nf (collocation on the basis grid).  At
/// xi = 0 the symbol is the plain average of the direction samples.
GridOperator quantize(const ClassicalSymbol& p, int nf, const QuantizeOptions& options = {});

GridOperator identity_operator(ManifoldPtr m, int nf, int fiber);
GridOperator operator*(const GridOperator& a, const GridOperator& b);
GridOperator operator-(const GridOperator& a, const GridOperator& b);

/// e+ r+ in frequency space: U* D U with U the unitary map to the spatial grid of
/// (2 nf)^n points and D the 0/1 indicator of X (boundary points included).
struct TruncationMask {
  DenseMat projector;
  std::vector<std::uint8_t> spatial;
  int nf = 0;
  int fiber = 1;

  static TruncationMask for_operator(const GridOperator& a);
};

GridOperator truncate(const GridOperator& a, const TruncationMask& mask);
/// L(P, Q) = (PQ)+ - P+ Q+.
GridOperator leftover(const GridOperator& p, const GridOperator& q, const TruncationMask& mask);

enum class ProjectionMethod { EigenSplit, Contour };

/// Spectral projection of C onto the eigenvalues with Re > 0.  Refuses when an
/// eigenvalue has |Re| <= 1e-8 ||C||_F.
GridOperator sectorial_projection_matrix(const GridOperator& c, ProjectionMethod method);

/// Projection onto the eigenvalues of A with Re > 1/2.
GridOperator riesz_refine(const GridOperator& a, ProjectionMethod method = ProjectionMethod::EigenSplit);

/// A with the rows and columns of the zero frequency cleared.  Symbols of negative
/// degree have no value at xi = 0, so symbol/matrix comparisons are made on the
/// complement.
GridOperator without_zero_frequency(const GridOperator& a);

/// Spectral-norm estimate of A - B by power iteration on (A-B)*(A-B).
double compare_operator_norm(const GridOperator& a, const GridOperator& b);
double operator_norm(const GridOperator& a);

/// Binary blob: "PSIOPMAT" magic, u32 version, u32 n, u32 m, u32 nf, u64 rows,
/// u64 cols, then rows * cols (re, im) little-endian doubles in row-major order.
void export_operator(const GridOperator& a, std::ostream& out);

}  // namespace psicalc
