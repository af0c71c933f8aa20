#include "psicalc/symbol.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>

#include "psicalc/spectral.hpp"

namespace psicalc {

namespace {

void require_compatible(const HomogeneousTerm& f, const HomogeneousTerm& g, const char* where) {
  require_same_manifold(*f.manifold(), *g.manifold(), where);
  if (f.fiber() != g.fiber()) throw ShapeMismatch(std::string(where) + ": fiber mismatch");
}

// Index of a grid coordinate when x lies on the grid, else -1.
int grid_slot(double x, int n) {
  const double h = kTwoPi / n;
  const double t = x / h;
  const double r = std::round(t);
  if (std::abs(t - r) > 1e-12) return -1;
  int i = static_cast<int>(r) % n;
  return i < 0 ? i + n : i;
}

// Interpolation weights for one coordinate: either a single grid index or the
// full trigonometric weight vector.
std::vector<std::pair<int, double>> axis_weights(double x, int n) {
  const int slot = grid_slot(x, n);
  if (slot >= 0) return {{slot, 1.0}};
  const auto w = trig_weights(n, x);
  std::vector<std::pair<int, double>> out;
  out.reserve(w.size());
  for (int j = 0; j < n; ++j) out.emplace_back(j, w[static_cast<std::size_t>(j)]);
  return out;
}

// Spectral derivative of jet slot `src` along base axis, written to slot `dst`.
void spectral_slot_derivative(HomogeneousTerm& t, int src, int dst, int axis) {
  const auto& man = *t.manifold();
  const int n = man.grid();
  const int dirs = man.directions();
  const int mm = t.fiber() * t.fiber();
  std::vector<cd> line(static_cast<std::size_t>(n));
  std::vector<cd> deriv(static_cast<std::size_t>(n));
  const int others = man.dim() == 1 ? 1 : n;
  for (int other = 0; other < others; ++other) {
    for (int d = 0; d < dirs; ++d) {
      for (int e = 0; e < mm; ++e) {
        for (int i = 0; i < n; ++i) {
          const int p = man.dim() == 1 ? i : (axis == 0 ? man.index(i, other) : man.index(other, i));
          line[static_cast<std::size_t>(i)] = t.data()[t.offset(src, p, d) + static_cast<std::size_t>(e)];
        }
        periodic_derivative(line, deriv);
        for (int i = 0; i < n; ++i) {
          const int p = man.dim() == 1 ? i : (axis == 0 ? man.index(i, other) : man.index(other, i));
          t.data()[t.offset(dst, p, d) + static_cast<std::size_t>(e)] = deriv[static_cast<std::size_t>(i)];
        }
      }
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- HomogeneousTerm

HomogeneousTerm::HomogeneousTerm(ManifoldPtr manifold, int degree, int fiber, int jet_order)
    : manifold_(std::move(manifold)), degree_(degree), fiber_(fiber), jet_order_(jet_order) {
  if (!manifold_) throw RejectedInput("HomogeneousTerm: null manifold");
  if (fiber < 1 || fiber > kMaxFiber) throw RejectedInput("fiber dimension must be in 1..4");
  if (jet_order < 0 || jet_order > kMaxJetOrder) throw RejectedInput("jet order out of range");
  const std::size_t n = static_cast<std::size_t>(jet_count(manifold_->dim(), jet_order)) *
                        static_cast<std::size_t>(manifold_->points()) *
                        static_cast<std::size_t>(manifold_->directions()) *
                        static_cast<std::size_t>(fiber * fiber);
  data_.assign(n, cd(0.0));
}

std::size_t HomogeneousTerm::offset(int jet, int point, int dir) const noexcept {
  const auto pts = static_cast<std::size_t>(manifold_->points());
  const auto dirs = static_cast<std::size_t>(manifold_->directions());
  const auto mm = static_cast<std::size_t>(fiber_ * fiber_);
  return ((static_cast<std::size_t>(jet) * pts + static_cast<std::size_t>(point)) * dirs +
          static_cast<std::size_t>(dir)) *
         mm;
}

HomogeneousTerm HomogeneousTerm::constant(ManifoldPtr manifold, int degree, const Mat& value, int jet_order) {
  HomogeneousTerm t(std::move(manifold), degree, static_cast<int>(value.rows()), jet_order);
  for (int p = 0; p < t.manifold()->points(); ++p) {
    for (int d = 0; d < t.manifold()->directions(); ++d) t.set_sample(0, p, d, value);
  }
  return t;
}

HomogeneousTerm HomogeneousTerm::sampled(ManifoldPtr manifold, int degree, int fiber,
                                         const std::function<Mat(const Point&, int)>& f) {
  HomogeneousTerm t(std::move(manifold), degree, fiber, 0);
  const auto& man = *t.manifold();
  for (int p = 0; p < man.points(); ++p) {
    const Point x = man.coordinates(p);
    for (int d = 0; d < man.directions(); ++d) {
      const Mat v = f(x, d);
      if (v.rows() != fiber || v.cols() != fiber) throw ShapeMismatch("sampled: wrong fiber size");
      t.set_sample(0, p, d, v);
    }
  }
  return t;
}

Mat HomogeneousTerm::sample(int jet, int point, int dir) const {
  Mat m(fiber_, fiber_);
  std::copy_n(data_.data() + offset(jet, point, dir), fiber_ * fiber_, m.data());
  return m;
}

void HomogeneousTerm::set_sample(int jet, int point, int dir, const Mat& v) {
  if (!v.allFinite()) throw RejectedInput("HomogeneousTerm: non-finite sample");
  std::copy_n(v.data(), fiber_ * fiber_, data_.data() + offset(jet, point, dir));
}

MatJet HomogeneousTerm::jet(int point, int dir) const {
  MatJet j(dim(), jet_order_, fiber_);
  for (int i = 0; i < j.count(); ++i) {
    std::copy_n(data_.data() + offset(i, point, dir), fiber_ * fiber_, j[i].data());
  }
  return j;
}

void HomogeneousTerm::set_jet(int point, int dir, const MatJet& j) {
  const int count = std::min(j.count(), jet_count(dim(), jet_order_));
  for (int i = 0; i < count; ++i) set_sample(i, point, dir, j[i]);
}

double HomogeneousTerm::max_norm() const {
  double m = 0.0;
  const std::size_t values = offset(1, 0, 0);
  for (std::size_t i = 0; i < values; ++i) m = std::max(m, std::abs(data_[i]));
  return m;
}

bool HomogeneousTerm::is_zero() const {
  return std::all_of(data_.begin(), data_.end(), [](const cd& v) { return v == cd(0.0); });
}

// ---------------------------------------------------------------- term operations

Mat evaluate(const HomogeneousTerm& term, const Point& x, const Point& xi) {
  const auto& man = *term.manifold();
  const double r = man.dim() == 1 ? std::abs(xi[0]) : std::hypot(xi[0], xi[1]);
  if (r == 0.0) throw DomainError("evaluate: xi = 0 is outside the domain of a homogeneous term");

  std::vector<std::pair<int, double>> dir_weights;
  if (man.dim() == 1) {
    dir_weights = {{xi[0] > 0 ? 0 : 1, 1.0}};
  } else {
    double theta = std::atan2(xi[1], xi[0]);
    if (theta < 0) theta += kTwoPi;
    dir_weights = axis_weights(theta, man.directions());
  }
  const auto w1 = axis_weights(x[0], man.grid());
  const auto w2 = man.dim() == 2 ? axis_weights(x[1], man.grid()) : std::vector<std::pair<int, double>>{{0, 1.0}};

  Mat acc = Mat::Zero(term.fiber(), term.fiber());
  for (const auto& [i1, a] : w1) {
    for (const auto& [i2, b] : w2) {
      const int p = man.index(i1, i2);
      for (const auto& [d, c] : dir_weights) acc += (a * b * c) * term.value(p, d);
    }
  }
  return std::pow(r, term.degree()) * acc;
}

HomogeneousTerm with_jets(const HomogeneousTerm& term, int order) {
  if (order > kMaxJetOrder) throw RejectedInput("with_jets: order exceeds kMaxJetOrder");
  HomogeneousTerm out(term.manifold(), term.degree(), term.fiber(), order);
  const int dim = term.dim();
  const int keep = std::min(order, term.jet_order());
  const std::size_t n_keep = term.offset(jet_count(dim, keep), 0, 0);
  std::copy_n(term.data(), n_keep, out.data());
  for (int j = jet_count(dim, keep); j < jet_count(dim, order); ++j) {
    const MultiIndex g = jet_multi_index(dim, j);
    if (g.a1 > 0) {
      spectral_slot_derivative(out, jet_index(dim, g.a1 - 1, g.a2), j, 0);
    } else {
      spectral_slot_derivative(out, jet_index(dim, g.a1, g.a2 - 1), j, 1);
    }
  }
  return out;
}

HomogeneousTerm differentiate_x(const HomogeneousTerm& term, int axis) {
  if (axis < 0 || axis >= term.dim()) throw RejectedInput("differentiate_x: axis out of range");
  const int dim = term.dim();
  if (term.jet_order() == 0) {
    HomogeneousTerm out(term.manifold(), term.degree(), term.fiber(), 0);
    std::copy_n(term.data(), term.offset(1, 0, 0), out.data());
    spectral_slot_derivative(out, 0, 0, axis);
    return out;
  }
  HomogeneousTerm out(term.manifold(), term.degree(), term.fiber(), term.jet_order() - 1);
  const std::size_t block = term.offset(1, 0, 0);
  for (int j = 0; j < jet_count(dim, out.jet_order()); ++j) {
    const MultiIndex g = jet_multi_index(dim, j);
    const int src = axis == 0 ? jet_index(dim, g.a1 + 1, g.a2) : jet_index(dim, g.a1, g.a2 + 1);
    std::copy_n(term.data() + term.offset(src, 0, 0), block, out.data() + out.offset(j, 0, 0));
  }
  return out;
}

HomogeneousTerm differentiate_xi(const HomogeneousTerm& term, int axis) {
  const auto& man = *term.manifold();
  if (axis < 0 || axis >= man.dim()) throw RejectedInput("differentiate_xi: axis out of range");
  HomogeneousTerm out(term.manifold(), term.degree() - 1, term.fiber(), term.jet_order());
  const double d = term.degree();
  const int jets = jet_count(man.dim(), term.jet_order());
  const int mm = term.fiber() * term.fiber();
  if (man.dim() == 1) {
    // d/dxi (|xi|^d c_+-) = d |xi|^(d-1) sgn(xi) c_+-
    for (int j = 0; j < jets; ++j) {
      for (int p = 0; p < man.points(); ++p) {
        for (int s = 0; s < 2; ++s) {
          const double f = s == 0 ? d : -d;
          const cd* src = term.data() + term.offset(j, p, s);
          cd* dst = out.data() + out.offset(j, p, s);
          for (int e = 0; e < mm; ++e) dst[e] = f * src[e];
        }
      }
    }
    return out;
  }
  // f = |xi|^d g(theta):
  //   d/dxi1 f = |xi|^(d-1) (d cos g - sin g'),  d/dxi2 f = |xi|^(d-1) (d sin g + cos g')
  const int k_count = man.directions();
  std::vector<cd> g(static_cast<std::size_t>(k_count));
  std::vector<cd> dg(static_cast<std::size_t>(k_count));
  for (int j = 0; j < jets; ++j) {
    for (int p = 0; p < man.points(); ++p) {
      for (int e = 0; e < mm; ++e) {
        for (int k = 0; k < k_count; ++k) g[static_cast<std::size_t>(k)] = term.data()[term.offset(j, p, k) + static_cast<std::size_t>(e)];
        periodic_derivative(g, dg);
        for (int k = 0; k < k_count; ++k) {
          const double c = man.cos_dir(k);
          const double s = man.sin_dir(k);
          const cd gk = g[static_cast<std::size_t>(k)];
          const cd dgk = dg[static_cast<std::size_t>(k)];
          out.data()[out.offset(j, p, k) + static_cast<std::size_t>(e)] =
              axis == 0 ? d * c * gk - s * dgk : d * s * gk + c * dgk;
        }
      }
    }
  }
  return out;
}

HomogeneousTerm multiply(const HomogeneousTerm& f, const HomogeneousTerm& g) {
  require_compatible(f, g, "multiply");
  const int order = std::min(f.jet_order(), g.jet_order());
  HomogeneousTerm out(f.manifold(), f.degree() + g.degree(), f.fiber(), order);
  const auto& man = *f.manifold();
  const auto& table = leibniz_table(man.dim());
  const int count = jet_count(man.dim(), order);
  const int m = f.fiber();
  for (int p = 0; p < man.points(); ++p) {
    for (int d = 0; d < man.directions(); ++d) {
      for (int gi = 0; gi < count; ++gi) {
        cd* acc = out.data() + out.offset(gi, p, d);
        for (const auto& t : table[static_cast<std::size_t>(gi)]) {
          mul_acc(f.data() + f.offset(t.left, p, d), g.data() + g.offset(t.right, p, d), acc, m, t.coeff);
        }
      }
    }
  }
  return out;
}

namespace {

HomogeneousTerm combine(const HomogeneousTerm& f, const HomogeneousTerm& g, cd sg, const char* where) {
  require_compatible(f, g, where);
  if (f.degree() != g.degree()) throw ShapeMismatch(std::string(where) + ": degree mismatch");
  const int order = std::min(f.jet_order(), g.jet_order());
  HomogeneousTerm out(f.manifold(), f.degree(), f.fiber(), order);
  const std::size_t n = out.offset(jet_count(f.dim(), order), 0, 0);
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = f.data()[i] + sg * g.data()[i];
  return out;
}

}  // namespace

HomogeneousTerm add(const HomogeneousTerm& f, const HomogeneousTerm& g) { return combine(f, g, 1.0, "add"); }

HomogeneousTerm subtract(const HomogeneousTerm& f, const HomogeneousTerm& g) {
  return combine(f, g, -1.0, "subtract");
}

HomogeneousTerm scale(const HomogeneousTerm& f, cd s) {
  HomogeneousTerm out = f;
  const std::size_t n = out.offset(jet_count(f.dim(), f.jet_order()), 0, 0);
  for (std::size_t i = 0; i < n; ++i) out.data()[i] *= s;
  return out;
}

HomogeneousTerm trace(const HomogeneousTerm& f) {
  HomogeneousTerm out(f.manifold(), f.degree(), 1, f.jet_order());
  const auto& man = *f.manifold();
  for (int j = 0; j < jet_count(f.dim(), f.jet_order()); ++j) {
    for (int p = 0; p < man.points(); ++p) {
      for (int d = 0; d < man.directions(); ++d) {
        out.data()[out.offset(j, p, d)] = f.sample(j, p, d).trace();
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------- ClassicalSymbol

ClassicalSymbol::ClassicalSymbol(std::vector<HomogeneousTerm> terms) : terms_(std::move(terms)) {
  if (terms_.empty()) throw RejectedInput("ClassicalSymbol: at least one term required");
  for (std::size_t j = 1; j < terms_.size(); ++j) {
    require_compatible(terms_[0], terms_[j], "ClassicalSymbol");
    if (terms_[j].degree() != terms_[0].degree() - static_cast<int>(j)) {
      throw ShapeMismatch("ClassicalSymbol: degrees must descend by one");
    }
  }
}

ClassicalSymbol ClassicalSymbol::zero(ManifoldPtr manifold, int leading_degree, int fiber, int order) {
  std::vector<HomogeneousTerm> terms;
  for (int j = 0; j <= order; ++j) terms.emplace_back(manifold, leading_degree - j, fiber, 0);
  return ClassicalSymbol(std::move(terms));
}

ClassicalSymbol ClassicalSymbol::identity(ManifoldPtr manifold, int fiber) {
  return single(HomogeneousTerm::constant(std::move(manifold), 0, Mat::Identity(fiber, fiber), 0));
}

ClassicalSymbol ClassicalSymbol::single(HomogeneousTerm term) {
  std::vector<HomogeneousTerm> terms;
  terms.push_back(std::move(term));
  return ClassicalSymbol(std::move(terms));
}

const HomogeneousTerm* ClassicalSymbol::term_of_degree(int degree) const noexcept {
  const int j = leading_degree() - degree;
  if (j < 0 || j > order()) return nullptr;
  return &terms_[static_cast<std::size_t>(j)];
}

Mat evaluate(const ClassicalSymbol& p, const Point& x, const Point& xi) {
  Mat acc = Mat::Zero(p.fiber(), p.fiber());
  for (const auto& t : p.terms()) acc += evaluate(t, x, xi);
  return acc;
}

namespace {

// d_xi^alpha of a term, memoized per term for one composition.
class XiDerivatives {
 public:
  explicit XiDerivatives(const HomogeneousTerm& base) { cache_.push_back({{0, 0}, base}); }

  const HomogeneousTerm& get(const MultiIndex& a) {
    for (const auto& [idx, t] : cache_) {
      if (idx.a1 == a.a1 && idx.a2 == a.a2) return t;
    }
    // Build from a neighbour of lower order.
    const MultiIndex prev = a.a1 > 0 ? MultiIndex{a.a1 - 1, a.a2} : MultiIndex{a.a1, a.a2 - 1};
    const int axis = a.a1 > 0 ? 0 : 1;
    HomogeneousTerm next = differentiate_xi(get(prev), axis);
    cache_.push_back({a, std::move(next)});
    return cache_.back().second;
  }

 private:
  std::vector<std::pair<MultiIndex, HomogeneousTerm>> cache_;
};

HomogeneousTerm shift_term(const HomogeneousTerm& t, const MultiIndex& a) {
  HomogeneousTerm out = t;
  for (int i = 0; i < a.a1; ++i) out = differentiate_x(out, 0);
  for (int i = 0; i < a.a2; ++i) out = differentiate_x(out, 1);
  return out;
}

}  // namespace

ClassicalSymbol compose(const ClassicalSymbol& p, const ClassicalSymbol& q, int order) {
  require_compatible(p.term(0), q.term(0), "compose");
  if (order < 0) throw RejectedInput("compose: negative truncation order");
  const int dim = p.manifold()->dim();
  const int m = p.fiber();
  const int lead = p.leading_degree() + q.leading_degree();

  // q terms need x-jets up to the order of the x-derivatives that hit them.
  std::vector<HomogeneousTerm> q_jets;
  for (int j2 = 0; j2 <= std::min(order, q.order()); ++j2) {
    const auto& t = q.term(j2);
    const int need = order - j2;
    q_jets.push_back(t.jet_order() >= need ? t : with_jets(t, need));
  }
  std::vector<XiDerivatives> p_xi;
  for (int j1 = 0; j1 <= std::min(order, p.order()); ++j1) p_xi.emplace_back(p.term(j1));

  std::vector<HomogeneousTerm> out;
  for (int j = 0; j <= order; ++j) {
    std::optional<HomogeneousTerm> acc;
    for (int a = 0; a <= j; ++a) {
      for (const MultiIndex& alpha : multi_indices_of_order(dim, a)) {
        const cd coeff = std::pow(cd(0.0, -1.0), a) / multi_factorial(alpha);
        for (int j1 = 0; j1 <= std::min(j - a, p.order()); ++j1) {
          const int j2 = j - a - j1;
          if (j2 > q.order()) continue;
          const HomogeneousTerm& dp = p_xi[static_cast<std::size_t>(j1)].get(alpha);
          const HomogeneousTerm dq = shift_term(q_jets[static_cast<std::size_t>(j2)], alpha);
          HomogeneousTerm prod = multiply(dp, dq);
          if (coeff != cd(1.0)) prod = scale(prod, coeff);
          acc = acc ? add(*acc, prod) : std::move(prod);
        }
      }
    }
    out.push_back(acc ? std::move(*acc) : HomogeneousTerm(p.manifold(), lead - j, m, 0));
  }
  return ClassicalSymbol(std::move(out));
}

namespace {

ClassicalSymbol combine(const ClassicalSymbol& p, const ClassicalSymbol& q, cd sg, const char* where) {
  require_compatible(p.term(0), q.term(0), where);
  const int hi = std::max(p.leading_degree(), q.leading_degree());
  const int lo = std::min(p.lowest_degree(), q.lowest_degree());
  std::vector<HomogeneousTerm> out;
  for (int d = hi; d >= lo; --d) {
    const auto* a = p.term_of_degree(d);
    const auto* b = q.term_of_degree(d);
    if (a && b) {
      out.push_back(combine(*a, *b, sg, where));
    } else if (a) {
      out.push_back(*a);
    } else if (b) {
      out.push_back(scale(*b, sg));
    } else {
      out.emplace_back(p.manifold(), d, p.fiber(), 0);
    }
  }
  return ClassicalSymbol(std::move(out));
}

}  // namespace

ClassicalSymbol add(const ClassicalSymbol& p, const ClassicalSymbol& q) { return combine(p, q, 1.0, "add"); }

ClassicalSymbol subtract(const ClassicalSymbol& p, const ClassicalSymbol& q) {
  return combine(p, q, -1.0, "subtract");
}

ClassicalSymbol scale(const ClassicalSymbol& p, cd s) {
  std::vector<HomogeneousTerm> out;
  for (const auto& t : p.terms()) out.push_back(scale(t, s));
  return ClassicalSymbol(std::move(out));
}

ClassicalSymbol multiply(const ClassicalSymbol& p, const ClassicalSymbol& q, int order) {
  require_compatible(p.term(0), q.term(0), "multiply");
  std::vector<HomogeneousTerm> out;
  for (int j = 0; j <= order; ++j) {
    std::optional<HomogeneousTerm> acc;
    for (int j1 = 0; j1 <= std::min(j, p.order()); ++j1) {
      const int j2 = j - j1;
      if (j2 > q.order()) continue;
      HomogeneousTerm prod = multiply(p.term(j1), q.term(j2));
      acc = acc ? add(*acc, prod) : std::move(prod);
    }
    out.push_back(acc ? std::move(*acc)
                      : HomogeneousTerm(p.manifold(), p.leading_degree() + q.leading_degree() - j, p.fiber(), 0));
  }
  return ClassicalSymbol(std::move(out));
}

ClassicalSymbol trace(const ClassicalSymbol& p) {
  std::vector<HomogeneousTerm> out;
  for (const auto& t : p.terms()) out.push_back(trace(t));
  return ClassicalSymbol(std::move(out));
}

std::vector<std::pair<int, double>> componentwise_distance(const ClassicalSymbol& p, const ClassicalSymbol& q) {
  const ClassicalSymbol diff = subtract(p, q);
  std::vector<std::pair<int, double>> out;
  for (const auto& t : diff.terms()) out.emplace_back(t.degree(), t.max_norm());
  return out;
}

}  // namespace psicalc
