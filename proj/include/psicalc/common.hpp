#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace psicalc {

using cd = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

/// Largest fiber (matrix) dimension supported by the symbol calculus.
inline constexpr int kMaxFiber = 4;

/// Fiber matrix with inline storage; never touches the heap.
using Mat = Eigen::Matrix<cd, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor, kMaxFiber, kMaxFiber>;

/// Argument outside the mathematical domain of an operation (xi = 0, a pole, r >= d, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Operation has no meaning in the manifold's dimension.
class UnsupportedDimension : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Incompatible grids, fiber sizes or matrix shapes.
class ShapeMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Input rejected because it violates a documented precondition.
class RejectedInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Numerical refusal: a spectral gap or cut condition does not hold.
class SpectralGapError : public std::runtime_error {
 public:
  SpectralGapError(const std::string& what, double gap) : std::runtime_error(what), gap_(gap) {}
  double gap() const noexcept { return gap_; }

 private:
  double gap_;
};

inline Mat identity_mat(int m) { return Mat::Identity(m, m); }

inline double max_abs(const Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace psicalc
