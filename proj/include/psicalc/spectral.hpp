#pragma once

#include <span>
#include <vector>

#include "psicalc/common.hpp"

namespace psicalc {

/// Pairwise (tree) sum; exact for equal entries when the length is a power of two.
cd pairwise_sum(std::span<const cd> v);

/// Fourier derivative of one period sampled at N equispaced points.  The
/// Nyquist mode is dropped; constant input yields exactly zero.
void periodic_derivative(std::span<const cd> in, std::span<cd> out);

/// Signed frequency of FFT bin q for length n.
inline int fft_frequency(int q, int n) noexcept { return q <= n / 2 - 1 ? q : q - n; }

/// Weights w_j with f(x) = sum_j w_j f(x_j) for the trigonometric interpolant
/// through x_j = 2 pi j / n (n even; the Nyquist mode enters as a cosine).
std::vector<double> trig_weights(int n, double x);

/// Forward DFT, sum_j v_j exp(-i k x_j), and its inverse scaled by 1/n.
void dft_forward(std::span<const cd> in, std::span<cd> out);
void dft_inverse(std::span<const cd> in, std::span<cd> out);

}  // namespace psicalc
