#pragma once

#include <functional>
#include <string>
#include <vector>

#include "psicalc/symbol.hpp"

namespace psicalc {

/// Integration domain of the interior term: the compact piece X or the closed manifold.
enum class Domain { X, Closed };

/// int_X int_{S*_x} tr p_{-n}(x, xi) dS(xi) / (2 pi)^n dx, trapezoid in x and on the
/// cosphere.  Both domains sum the same sequence (masked points contribute an exact
/// zero), so the two results agree bitwise when p_{-n} vanishes outside X.
cd residue_interior(const ClassicalSymbol& p, Domain domain = Domain::X);

/// Boundary symbol of the cylinder: one circle-manifold symbol per boundary
/// component (x2 = 0 and x2 = pi), with cosphere {+1, -1}.
struct BoundarySymbol {
  ClassicalSymbol lower;
  ClassicalSymbol upper;
};

/// sum over both circles of int sum_{xi' = +-1} tr s_{-1}(x', xi') dx' / (2 pi).
/// Throws UnsupportedDimension for n = 1.
cd residue_boundary_psdo(const BoundarySymbol& s, const ModelManifold& m);

/// Diagonal symbol-kernel k(xi_n) of a singular Green symbol at one boundary sample.
struct SingularGreenSymbolSample {
  double x_prime = 0.0;
  int xi_prime = 1;
  std::function<Mat(double)> kernel;
  /// Declared decay rate rho > 1: |k(xi_n)| <= C (1 + |xi_n|)^{-rho}.
  double decay = 2.0;
};

struct NormalTrace {
  Mat value;
  double err = 0.0;
  int nodes = 0;
};

/// (1 / 2 pi) int_R k(xi_n) dxi_n with xi_n = tan u and the midpoint rule on
/// (-pi/2, pi/2), doubling the node count until the relative change is < 1e-10.
NormalTrace normal_trace(const SingularGreenSymbolSample& gs);

/// Degree (1 - n) normal-trace samples on the boundary circles: for circle c,
/// samples[c][i * 2 + s] is the kernel at x' = 2 pi i / N and xi' = (s == 0 ? +1 : -1).
struct BoundaryGreenData {
  std::vector<std::vector<SingularGreenSymbolSample>> circles;
};

struct ResidueReport {
  cd interior = 0.0;
  cd boundary_green = 0.0;
  cd boundary_psdo = 0.0;
  cd total = 0.0;
  double err_estimate = 0.0;
  double interior_normalization = 0.0;  // (2 pi)^n
  double boundary_normalization = 0.0;  // (2 pi)^(n-1)
};

/// Interior + boundary Green + boundary psdo terms over X.  Empty boundary data
/// contributes zero in any dimension; non-empty boundary data for n = 1 is refused.
ResidueReport residue_green(const ClassicalSymbol& p, const BoundaryGreenData& g, const BoundarySymbol* s);

/// `key = re im` lines with 17 significant digits.
std::string to_record(const ResidueReport& r);

/// residue_interior(p # q - q # p) over the closed manifold; refuses when J is
/// below m_p + m_q + n.
cd residue_commutator(const ClassicalSymbol& p, const ClassicalSymbol& q, int order);

}  // namespace psicalc
