#include "psicalc/spectral.hpp"

#include <array>
#include <cmath>

#include <unsupported/Eigen/FFT>

namespace psicalc {

namespace {

Eigen::FFT<double>& fft_engine() {
  thread_local Eigen::FFT<double> fft;
  return fft;
}

}  // namespace

cd pairwise_sum(std::span<const cd> v) {
  if (v.empty()) return 0.0;
  if (v.size() == 1) return v[0];
  const std::size_t half = v.size() / 2;
  if (v.size() <= 64 && (v.size() & (v.size() - 1)) == 0) {
    // Iterative halving; same association as the recursion below.
    std::array<cd, 32> buf;
    for (std::size_t i = 0; i < half; ++i) buf[i] = v[2 * i] + v[2 * i + 1];
    for (std::size_t n = half; n > 1; n /= 2) {
      for (std::size_t i = 0; i < n / 2; ++i) buf[i] = buf[2 * i] + buf[2 * i + 1];
    }
    return buf[0];
  }
  return pairwise_sum(v.first(half)) + pairwise_sum(v.subspan(half));
}

void dft_forward(std::span<const cd> in, std::span<cd> out) {
  std::vector<cd> src(in.begin(), in.end());
  std::vector<cd> dst;
  fft_engine().fwd(dst, src);
  std::copy(dst.begin(), dst.end(), out.begin());
}

void dft_inverse(std::span<const cd> in, std::span<cd> out) {
  std::vector<cd> src(in.begin(), in.end());
  std::vector<cd> dst;
  fft_engine().inv(dst, src);
  std::copy(dst.begin(), dst.end(), out.begin());
}

void periodic_derivative(std::span<const cd> in, std::span<cd> out) {
  const int n = static_cast<int>(in.size());
  const cd mean = pairwise_sum(in) / static_cast<double>(n);
  std::vector<cd> centered(in.size());
  bool all_zero = true;
  for (std::size_t j = 0; j < in.size(); ++j) {
    centered[j] = in[j] - mean;
    all_zero = all_zero && centered[j] == cd(0.0);
  }
  if (all_zero) {
    std::fill(out.begin(), out.end(), cd(0.0));
    return;
  }
  std::vector<cd> coeffs;
  fft_engine().fwd(coeffs, centered);
  for (int q = 0; q < n; ++q) {
    const int k = (2 * q == n) ? 0 : fft_frequency(q, n);
    coeffs[static_cast<std::size_t>(q)] *= cd(0.0, k);
  }
  std::vector<cd> result;
  fft_engine().inv(result, coeffs);
  std::copy(result.begin(), result.end(), out.begin());
}

std::vector<double> trig_weights(int n, double x) {
  std::vector<double> w(static_cast<std::size_t>(n), 0.0);
  const double h = kTwoPi / n;
  for (int j = 0; j < n; ++j) {
    const double t = x - j * h;
    if (std::abs(std::remainder(t, kTwoPi)) < 1e-15) {
      std::fill(w.begin(), w.end(), 0.0);
      w[static_cast<std::size_t>(j)] = 1.0;
      return w;
    }
    // (1/n) [1 + 2 sum_{k=1}^{n/2-1} cos(k t) + cos(n t / 2)]
    double s = 1.0 + std::cos(0.5 * n * t);
    for (int k = 1; k < n / 2; ++k) s += 2.0 * std::cos(k * t);
    w[static_cast<std::size_t>(j)] = s / n;
  }
  return w;
}

}  // namespace psicalc
