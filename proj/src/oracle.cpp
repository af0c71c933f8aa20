#include "psicalc/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstring>
#include <ostream>
#include <string>

#include <boost/math/quadrature/gauss.hpp>
#include <Eigen/Eigenvalues>

#define LAPACK_COMPLEX_CUSTOM
#define lapack_complex_float std::complex<float>
#define lapack_complex_double std::complex<double>
#include <lapacke.h>

#include "psicalc/spectral.hpp"

namespace psicalc {

int GridOperator::modes() const noexcept {
  const int per = modes_per_axis();
  return manifold->dim() == 1 ? per : per * per;
}

std::array<int, 2> GridOperator::frequency(int mode) const noexcept {
  const int per = modes_per_axis();
  if (manifold->dim() == 1) return {mode - nf, 0};
  return {mode / per - nf, mode % per - nf};
}

namespace {

void require_compatible(const GridOperator& a, const GridOperator& b, const char* where) {
  require_same_manifold(*a.manifold, *b.manifold, where);
  if (a.nf != b.nf || a.fiber != b.fiber || a.matrix.rows() != b.matrix.rows() || a.matrix.cols() != b.matrix.cols()) {
    throw ShapeMismatch(std::string(where) + ": operator sizes differ");
  }
}

// In-place forward DFT along every axis of an N^n grid, scaled by 1/N^n.
void grid_dft(std::vector<cd>& v, int n, int dim) {
  std::vector<cd> line(static_cast<std::size_t>(n));
  std::vector<cd> out(static_cast<std::size_t>(n));
  const double scale = 1.0 / n;
  if (dim == 1) {
    dft_forward(v, out);
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = out[static_cast<std::size_t>(i)] * scale;
    return;
  }
  for (int axis = 0; axis < 2; ++axis) {
    for (int other = 0; other < n; ++other) {
      for (int i = 0; i < n; ++i) {
        const int idx = axis == 0 ? i * n + other : other * n + i;
        line[static_cast<std::size_t>(i)] = v[static_cast<std::size_t>(idx)];
      }
      dft_forward(line, out);
      for (int i = 0; i < n; ++i) {
        const int idx = axis == 0 ? i * n + other : other * n + i;
        v[static_cast<std::size_t>(idx)] = out[static_cast<std::size_t>(i)] * scale;
      }
    }
  }
}

int wrap(int q, int n) {
  const int r = q % n;
  return r < 0 ? r + n : r;
}

}  // namespace

GridOperator quantize(const ClassicalSymbol& p, int nf, const QuantizeOptions& options) {
  const ManifoldPtr& mp = p.manifold();
  const auto& man = *mp;
  const int n = man.grid();
  const int dim = man.dim();
  if (nf < 1 || 2 * nf > n) throw RejectedInput("quantize: need 1 <= nf <= N/2");
  const int m = p.fiber();
  GridOperator out{DenseMat::Zero(0, 0), nf, mp, m};
  const int modes = out.modes();
  out.matrix = DenseMat::Zero(static_cast<Eigen::Index>(modes) * m, static_cast<Eigen::Index>(modes) * m);

  const int pts = man.points();
  const int mm = m * m;
  // Symbol samples for one column frequency, entry-major: [entry][point].
  std::vector<std::vector<cd>> hat(static_cast<std::size_t>(mm), std::vector<cd>(static_cast<std::size_t>(pts)));
  // Symbol x-frequencies folded onto the periodic basis grid of (2 nf)^n points.
  const int ns = out.modes_per_axis();
  std::vector<std::vector<cd>> folded(static_cast<std::size_t>(mm), std::vector<cd>(static_cast<std::size_t>(out.modes())));
  double tail = 0.0;
  double peak = 0.0;
  for (int col = 0; col < modes; ++col) {
    const auto xi = out.frequency(col);
    const bool origin = xi[0] == 0 && xi[1] == 0;
    // Direction weights for this covector.
    std::vector<std::pair<int, double>> dir_w;
    double radius = 0.0;
    if (origin) {
      for (int d = 0; d < man.directions(); ++d) dir_w.emplace_back(d, 1.0 / man.directions());
    } else if (dim == 1) {
      dir_w.emplace_back(xi[0] > 0 ? 0 : 1, 1.0);
      radius = std::abs(xi[0]);
    } else {
      radius = std::hypot(static_cast<double>(xi[0]), static_cast<double>(xi[1]));
      double theta = std::atan2(static_cast<double>(xi[1]), static_cast<double>(xi[0]));
      if (theta < 0) theta += kTwoPi;
      const auto w = trig_weights(man.directions(), theta);
      for (int d = 0; d < man.directions(); ++d) {
        if (w[static_cast<std::size_t>(d)] != 0.0) dir_w.emplace_back(d, w[static_cast<std::size_t>(d)]);
      }
    }
    for (auto& h : hat) std::fill(h.begin(), h.end(), cd(0.0));
    for (const auto& t : p.terms()) {
      const double f = origin ? 1.0 : std::pow(radius, t.degree());
      for (int pt = 0; pt < pts; ++pt) {
        for (const auto& [d, w] : dir_w) {
          const cd* src = t.data() + t.offset(0, pt, d);
          for (int e = 0; e < mm; ++e) hat[static_cast<std::size_t>(e)][static_cast<std::size_t>(pt)] += (f * w) * src[e];
        }
      }
    }
    for (std::size_t e = 0; e < hat.size(); ++e) {
      auto& h = hat[e];
      grid_dft(h, n, dim);
      auto& fold = folded[e];
      std::fill(fold.begin(), fold.end(), cd(0.0));
      for (int idx = 0; idx < pts; ++idx) {
        const auto ij = man.indices(idx);
        const double a = std::abs(h[static_cast<std::size_t>(idx)]);
        peak = std::max(peak, a);
        const int f1 = std::abs(fft_frequency(ij[0], n));
        const int f2 = dim == 2 ? std::abs(fft_frequency(ij[1], n)) : 0;
        if (std::max(f1, f2) >= n / 2 - 1) tail = std::max(tail, a);
        const int q1 = wrap(fft_frequency(ij[0], n), ns);
        const int q2 = dim == 2 ? wrap(fft_frequency(ij[1], n), ns) : 0;
        fold[static_cast<std::size_t>(dim == 1 ? q1 : q1 * ns + q2)] += h[static_cast<std::size_t>(idx)];
      }
    }
    for (int row = 0; row < modes; ++row) {
      const auto k = out.frequency(row);
      const int q1 = wrap(k[0] - xi[0], ns);
      const int q2 = wrap(k[1] - xi[1], ns);
      const int idx = dim == 1 ? q1 : q1 * ns + q2;
      for (int b = 0; b < m; ++b) {
        for (int a = 0; a < m; ++a) {
          out.matrix(static_cast<Eigen::Index>(row) * m + a, static_cast<Eigen::Index>(col) * m + b) =
              folded[static_cast<std::size_t>(a + b * m)][static_cast<std::size_t>(idx)];
        }
      }
    }
  }
  if (peak > 0.0 && tail > options.bandwidth_tol * peak) {
    throw RejectedInput("quantize: symbol grid does not resolve the x-bandwidth (relative tail " +
                        std::to_string(tail / peak) + ")");
  }
  return out;
}

GridOperator identity_operator(ManifoldPtr m, int nf, int fiber) {
  GridOperator out{DenseMat(), nf, std::move(m), fiber};
  const Eigen::Index size = static_cast<Eigen::Index>(out.modes()) * fiber;
  out.matrix = DenseMat::Identity(size, size);
  return out;
}

GridOperator operator*(const GridOperator& a, const GridOperator& b) {
  require_compatible(a, b, "operator product");
  GridOperator out = a;
  out.matrix.noalias() = a.matrix * b.matrix;
  return out;
}

GridOperator operator-(const GridOperator& a, const GridOperator& b) {
  require_compatible(a, b, "operator difference");
  GridOperator out = a;
  out.matrix -= b.matrix;
  return out;
}

TruncationMask TruncationMask::for_operator(const GridOperator& a) {
  const auto& man = *a.manifold;
  const int ns = a.modes_per_axis();
  const int dim = man.dim();
  const int pts = dim == 1 ? ns : ns * ns;
  TruncationMask mask;
  mask.nf = a.nf;
  mask.fiber = a.fiber;
  mask.spatial.assign(static_cast<std::size_t>(pts), 0);
  std::vector<cd> hat(static_cast<std::size_t>(pts));
  for (int j = 0; j < pts; ++j) {
    const int normal = dim == 1 ? j : j % ns;
    const bool inside = 2 * normal <= ns;
    mask.spatial[static_cast<std::size_t>(j)] = inside ? 1 : 0;
    hat[static_cast<std::size_t>(j)] = inside ? 1.0 : 0.0;
  }
  grid_dft(hat, ns, dim);
  const int modes = a.modes();
  const int m = a.fiber;
  mask.projector = DenseMat::Zero(static_cast<Eigen::Index>(modes) * m, static_cast<Eigen::Index>(modes) * m);
  for (int r = 0; r < modes; ++r) {
    const auto k = a.frequency(r);
    for (int c = 0; c < modes; ++c) {
      const auto kk = a.frequency(c);
      const int q1 = wrap(k[0] - kk[0], ns);
      const int q2 = wrap(k[1] - kk[1], ns);
      const cd v = hat[static_cast<std::size_t>(dim == 1 ? q1 : q1 * ns + q2)];
      for (int e = 0; e < m; ++e) {
        mask.projector(static_cast<Eigen::Index>(r) * m + e, static_cast<Eigen::Index>(c) * m + e) = v;
      }
    }
  }
  return mask;
}

GridOperator truncate(const GridOperator& a, const TruncationMask& mask) {
  if (mask.projector.rows() != a.matrix.rows()) throw ShapeMismatch("truncate: mask does not match operator");
  GridOperator out = a;
  const DenseMat tmp = a.matrix * mask.projector;
  out.matrix.noalias() = mask.projector * tmp;
  return out;
}

GridOperator leftover(const GridOperator& p, const GridOperator& q, const TruncationMask& mask) {
  const GridOperator pq = truncate(p * q, mask);
  const GridOperator pp = truncate(p, mask);
  const GridOperator qp = truncate(q, mask);
  return pq - pp * qp;
}

namespace {

struct SchurSplit {
  DenseMat t;
  DenseMat q;
  Eigen::VectorXcd eigenvalues;
};

SchurSplit schur_of(const DenseMat& c) {
  Eigen::ComplexSchur<DenseMat> schur(c);
  if (schur.info() != Eigen::Success) throw SpectralGapError("Schur decomposition did not converge", 0.0);
  SchurSplit s{schur.matrixT(), schur.matrixU(), {}};
  s.eigenvalues = s.t.diagonal();
  return s;
}

void check_cut(const Eigen::VectorXcd& ev, const DenseMat& c) {
  const double norm = c.norm();
  double gap = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < ev.size(); ++i) gap = std::min(gap, std::abs(ev(i).real()));
  if (ev.size() > 0 && gap <= 1e-8 * norm) {
    throw SpectralGapError("eigenvalue within " + std::to_string(gap) + " of the imaginary axis (||C||_F = " +
                               std::to_string(norm) + ")",
                           gap);
  }
}

DenseMat eigen_split(const DenseMat& c) {
  const Eigen::Index n = c.rows();
  SchurSplit s = schur_of(c);
  check_cut(s.eigenvalues, c);
  std::vector<lapack_logical> select(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) select[static_cast<std::size_t>(i)] = s.eigenvalues(i).real() > 0.0;
  std::vector<std::complex<double>> w(static_cast<std::size_t>(n));
  lapack_int k = 0;
  lapack_int info = LAPACKE_ztrsen(LAPACK_COL_MAJOR, 'N', 'V', select.data(), static_cast<lapack_int>(n), s.t.data(),
                                   static_cast<lapack_int>(n), s.q.data(), static_cast<lapack_int>(n), w.data(), &k,
                                   nullptr, nullptr);
  if (info != 0) throw SpectralGapError("ztrsen failed to reorder the Schur form", 0.0);
  if (k == 0) return DenseMat::Zero(n, n);
  if (k == n) return DenseMat::Identity(n, n);
  // T11 X - X T22 = T12; the projector in Schur coordinates is [[I, X], [0, 0]].
  const Eigen::Index r = n - k;
  DenseMat x = s.t.topRightCorner(k, r);
  const DenseMat t11 = s.t.topLeftCorner(k, k);
  const DenseMat t22 = s.t.bottomRightCorner(r, r);
  double scale = 1.0;
  info = LAPACKE_ztrsyl(LAPACK_COL_MAJOR, 'N', 'N', -1, static_cast<lapack_int>(k), static_cast<lapack_int>(r),
                        t11.data(), static_cast<lapack_int>(k), t22.data(), static_cast<lapack_int>(r), x.data(),
                        static_cast<lapack_int>(k), &scale);
  if (info < 0) throw SpectralGapError("ztrsyl rejected its arguments", 0.0);
  x /= scale;
  DenseMat p = DenseMat::Zero(n, n);
  p.topLeftCorner(k, k).setIdentity();
  p.topRightCorner(k, r) = x;
  return s.q * p * s.q.adjoint();
}

double segment_distance(cd a, cd b, cd z) {
  const cd d = b - a;
  const double t = std::clamp(((z - a) * std::conj(d)).real() / std::norm(d), 0.0, 1.0);
  return std::abs(a + t * d - z);
}

// (i / 2 pi) oint lambda^{-1} C (C - lambda)^{-1} dlambda over a counterclockwise
// rectangle around the right-half-plane spectrum, Gauss-Legendre panels.
DenseMat contour_split(const DenseMat& c) {
  const Eigen::Index n = c.rows();
  const Eigen::VectorXcd ev = Eigen::ComplexEigenSolver<DenseMat>(c, false).eigenvalues();
  check_cut(ev, c);
  double gap = std::numeric_limits<double>::infinity();
  double rho = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    gap = std::min(gap, std::abs(ev(i).real()));
    rho = std::max(rho, std::abs(ev(i)));
  }
  const double left = gap / 2;
  const double big = 1.5 * rho + 1.0;
  const cd corners[4] = {{big, -big}, {big, big}, {left, big}, {left, -big}};

  using Rule = boost::math::quadrature::gauss<double, 20>;
  const auto& abscissa = Rule::abscissa();
  const auto& weights = Rule::weights();
  const DenseMat id = DenseMat::Identity(n, n);
  DenseMat acc = DenseMat::Zero(n, n);
  const auto nearest = [&ev](cd a, cd b) {
    double d = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < ev.size(); ++i) d = std::min(d, segment_distance(a, b, ev(i)));
    return d;
  };
  const auto panel = [&](cd a, cd b) {
    const cd mid = 0.5 * (a + b);
    const cd half = 0.5 * (b - a);
    for (std::size_t g = 0; g < abscissa.size(); ++g) {
      for (double sgn : {1.0, -1.0}) {
        if (abscissa[g] == 0.0 && sgn < 0) continue;
        const cd lam = mid + sgn * abscissa[g] * half;
        const DenseMat f = (c - lam * id).partialPivLu().solve(c) / lam;
        acc += (weights[g] * half) * f;
      }
    }
  };
  std::vector<std::pair<cd, cd>> stack;
  for (int e = 0; e < 4; ++e) stack.emplace_back(corners[e], corners[(e + 1) % 4]);
  while (!stack.empty()) {
    const auto [a, b] = stack.back();
    stack.pop_back();
    if (std::abs(b - a) > nearest(a, b) && std::abs(b - a) > 1e-12 * big) {
      const cd mid = 0.5 * (a + b);
      stack.emplace_back(mid, b);
      stack.emplace_back(a, mid);
      continue;
    }
    panel(a, b);
  }
  return acc * cd(0.0, 1.0 / kTwoPi);
}

}  // namespace

GridOperator sectorial_projection_matrix(const GridOperator& c, ProjectionMethod method) {
  GridOperator out = c;
  out.matrix = method == ProjectionMethod::EigenSplit ? eigen_split(c.matrix) : contour_split(c.matrix);
  return out;
}

GridOperator riesz_refine(const GridOperator& a, ProjectionMethod method) {
  GridOperator shifted = a;
  shifted.matrix -= 0.5 * DenseMat::Identity(a.matrix.rows(), a.matrix.cols());
  return sectorial_projection_matrix(shifted, method);
}

GridOperator without_zero_frequency(const GridOperator& a) {
  GridOperator out = a;
  const int per = a.modes_per_axis();
  const int mode = a.manifold->dim() == 1 ? a.nf : a.nf * per + a.nf;
  const Eigen::Index first = static_cast<Eigen::Index>(mode) * a.fiber;
  out.matrix.middleRows(first, a.fiber).setZero();
  out.matrix.middleCols(first, a.fiber).setZero();
  return out;
}

double operator_norm(const GridOperator& a) {
  const DenseMat& d = a.matrix;
  const Eigen::Index n = d.cols();
  if (n == 0) return 0.0;
  Eigen::VectorXcd v(n);
  for (Eigen::Index i = 0; i < n; ++i) v(i) = cd(1.0 + 0.01 * static_cast<double>(i % 17), 0.1 * static_cast<double>(i % 5));
  v.normalize();
  double lambda = 0.0;
  for (int it = 0; it < 200; ++it) {
    const Eigen::VectorXcd w = d.adjoint() * (d * v);
    const double next = w.norm();
    if (next == 0.0) return 0.0;
    v = w / next;
    const bool done = std::abs(next - lambda) <= 1e-12 * next;
    lambda = next;
    if (done) break;
  }
  return std::sqrt(lambda);
}

double compare_operator_norm(const GridOperator& a, const GridOperator& b) { return operator_norm(a - b); }

void export_operator(const GridOperator& a, std::ostream& out) {
  const char magic[8] = {'P', 'S', 'I', 'O', 'P', 'M', 'A', 'T'};
  out.write(magic, 8);
  const auto put32 = [&out](std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); };
  const auto put64 = [&out](std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); };
  put32(1);
  put32(static_cast<std::uint32_t>(a.manifold->dim()));
  put32(static_cast<std::uint32_t>(a.fiber));
  put32(static_cast<std::uint32_t>(a.nf));
  put64(static_cast<std::uint64_t>(a.matrix.rows()));
  put64(static_cast<std::uint64_t>(a.matrix.cols()));
  for (Eigen::Index i = 0; i < a.matrix.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.matrix.cols(); ++j) {
      const double re = a.matrix(i, j).real();
      const double im = a.matrix(i, j).imag();
      out.write(reinterpret_cast<const char*>(&re), 8);
      out.write(reinterpret_cast<const char*>(&im), 8);
    }
  }
}

}  // namespace psicalc
