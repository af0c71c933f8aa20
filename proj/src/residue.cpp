#include "psicalc/residue.hpp"

#include <cmath>
#include <cstdio>

#include "psicalc/spectral.hpp"

namespace psicalc {

namespace {

// Pairwise sum over points of (pairwise sum over directions of tr f), points
// outside `mask` replaced by an exact zero.
cd masked_density_sum(const HomogeneousTerm& f, const std::vector<std::uint8_t>* mask) {
  const auto& m = *f.manifold();
  std::vector<cd> per_point(static_cast<std::size_t>(m.points()), cd(0.0));
  std::vector<cd> per_dir(static_cast<std::size_t>(m.directions()));
  for (int p = 0; p < m.points(); ++p) {
    if (mask && !(*mask)[static_cast<std::size_t>(p)]) continue;
    for (int d = 0; d < m.directions(); ++d) per_dir[static_cast<std::size_t>(d)] = f.value(p, d).trace();
    per_point[static_cast<std::size_t>(p)] = pairwise_sum(per_dir);
  }
  return pairwise_sum(per_point);
}

double interior_normalization(int n) { return n == 1 ? kTwoPi : kTwoPi * kTwoPi; }

}  // namespace

cd residue_interior(const ClassicalSymbol& p, Domain domain) {
  const auto& m = *p.manifold();
  const HomogeneousTerm* t = p.term_of_degree(-m.dim());
  if (!t) return 0.0;
  const cd sum = masked_density_sum(*t, domain == Domain::X ? &m.x_mask() : nullptr);
  const double cell = m.dim() == 1 ? m.spacing() : m.spacing() * m.spacing();
  return sum * (cell * m.direction_weight() / interior_normalization(m.dim()));
}

cd residue_boundary_psdo(const BoundarySymbol& s, const ModelManifold& m) {
  if (m.dim() != 2) throw UnsupportedDimension("boundary psdo term needs n = 2: the boundary of an arc has no cosphere");
  cd total = 0.0;
  for (const ClassicalSymbol* c : {&s.lower, &s.upper}) {
    const auto& b = *c->manifold();
    if (b.dim() != 1 || b.grid() != m.grid()) throw ShapeMismatch("boundary symbol must live on the boundary circle grid");
    const HomogeneousTerm* t = c->term_of_degree(-1);
    if (!t) continue;
    total += masked_density_sum(*t, nullptr) * (b.spacing() / kTwoPi);
  }
  return total;
}

NormalTrace normal_trace(const SingularGreenSymbolSample& gs) {
  if (!gs.kernel) throw RejectedInput("normal_trace: missing kernel");
  if (!(gs.decay > 1.0)) throw RejectedInput("normal_trace: decay rate must exceed 1");
  // Declared decay, checked on both half-lines.
  for (double sign : {1.0, -1.0}) {
    const double k2 = max_abs(gs.kernel(sign * 1e2));
    const double k3 = max_abs(gs.kernel(sign * 1e3));
    const double need = std::pow(10.0, gs.decay - 0.5);
    if (!(std::isfinite(k2) && std::isfinite(k3)) || (k3 > 0.0 && k2 < need * k3)) {
      char buf[200];
      std::snprintf(buf, sizeof buf, "normal_trace: kernel decays by %.3g between |xi_n| = 1e2 and 1e3; declared rate %.3g needs %.3g",
                    k3 > 0.0 ? k2 / k3 : 0.0, gs.decay, need);
      throw RejectedInput(buf);
    }
  }
  const auto integrate = [&gs](int n, double& abs_sum) {
    const double h = kPi / n;
    Mat acc;
    abs_sum = 0.0;
    for (int i = 0; i < n; ++i) {
      const double u = -kPi / 2 + (i + 0.5) * h;
      const double c = std::cos(u);
      const Mat v = gs.kernel(std::tan(u)) * (h / (c * c));
      if (i == 0) {
        acc = v;
      } else {
        acc += v;
      }
      abs_sum += max_abs(v);
    }
    return Mat(acc / kTwoPi);
  };
  int n = 16;
  double scale = 0.0;
  Mat prev = integrate(n, scale);
  NormalTrace out;
  while (true) {
    n *= 2;
    Mat next = integrate(n, scale);
    const double change = max_abs(next - prev);
    const double ref = std::max(max_abs(next), scale / kTwoPi);
    out = {next, change, n};
    if (change <= 1e-10 * ref || ref == 0.0 || n >= (1 << 20)) break;
    prev = std::move(next);
  }
  return out;
}

ResidueReport residue_green(const ClassicalSymbol& p, const BoundaryGreenData& g, const BoundarySymbol* s) {
  const auto& m = *p.manifold();
  ResidueReport r;
  r.interior_normalization = interior_normalization(m.dim());
  r.boundary_normalization = m.dim() == 1 ? 1.0 : kTwoPi;
  r.interior = residue_interior(p, Domain::X);
  if (!g.circles.empty()) {
    if (m.dim() != 2) throw UnsupportedDimension("singular Green boundary term needs n = 2");
    if (g.circles.size() != 2) throw ShapeMismatch("singular Green data must cover both boundary circles");
    for (const auto& circle : g.circles) {
      if (circle.size() != static_cast<std::size_t>(2 * m.grid())) {
        throw ShapeMismatch("singular Green data must hold 2 N samples per circle");
      }
      std::vector<cd> values(circle.size());
      for (std::size_t i = 0; i < circle.size(); ++i) {
        const NormalTrace t = normal_trace(circle[i]);
        values[i] = t.value.trace();
        r.err_estimate += t.err * m.spacing() / kTwoPi;
      }
      r.boundary_green += pairwise_sum(values) * (m.spacing() / kTwoPi);
    }
  }
  if (s) r.boundary_psdo = residue_boundary_psdo(*s, m);
  r.total = r.interior + r.boundary_green + r.boundary_psdo;
  return r;
}

std::string to_record(const ResidueReport& r) {
  std::string out;
  char buf[128];
  const auto put = [&](const char* key, cd v) {
    std::snprintf(buf, sizeof buf, "%s = %.17g %.17g\n", key, v.real(), v.imag());
    out += buf;
  };
  put("interior", r.interior);
  put("boundary_green", r.boundary_green);
  put("boundary_psdo", r.boundary_psdo);
  put("total", r.total);
  std::snprintf(buf, sizeof buf, "err_estimate = %.17g\n", r.err_estimate);
  out += buf;
  std::snprintf(buf, sizeof buf, "interior_normalization = %.17g\n", r.interior_normalization);
  out += buf;
  std::snprintf(buf, sizeof buf, "boundary_normalization = %.17g\n", r.boundary_normalization);
  out += buf;
  return out;
}

cd residue_commutator(const ClassicalSymbol& p, const ClassicalSymbol& q, int order) {
  const int n = p.manifold()->dim();
  const int need = p.leading_degree() + q.leading_degree() + n;
  if (need < 0) return 0.0;
  if (order < need) {
    throw RejectedInput("residue_commutator: truncation order " + std::to_string(order) +
                        " does not reach degree -n; use J >= " + std::to_string(need));
  }
  const ClassicalSymbol c = subtract(compose(p, q, order), compose(q, p, order));
  return residue_interior(c, Domain::Closed);
}

}  // namespace psicalc
