#include "psicalc/jet.hpp"

#include <mutex>

namespace psicalc {

namespace {

double binomial(int n, int k) {
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

}  // namespace

const LeibnizTable& leibniz_table(int dim) {
  static LeibnizTable tables[2];
  static std::once_flag once[2];
  const int slot = dim - 1;
  std::call_once(once[slot], [dim, slot] {
    auto& table = tables[slot];
    const int count = jet_count(dim, kMaxJetOrder);
    table.resize(static_cast<std::size_t>(count));
    for (int g = 0; g < count; ++g) {
      const MultiIndex gamma = jet_multi_index(dim, g);
      for (int b1 = 0; b1 <= gamma.a1; ++b1) {
        for (int b2 = 0; b2 <= gamma.a2; ++b2) {
          table[static_cast<std::size_t>(g)].push_back(
              {jet_index(dim, b1, b2), jet_index(dim, gamma.a1 - b1, gamma.a2 - b2),
               binomial(gamma.a1, b1) * binomial(gamma.a2, b2)});
        }
      }
    }
  });
  return tables[slot];
}

void mul_acc(const cd* a, const cd* b, cd* c, int m, double coeff) {
  const double* pa = reinterpret_cast<const double*>(a);
  const double* pb = reinterpret_cast<const double*>(b);
  double* pc = reinterpret_cast<double*>(c);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k) {
      const double br = coeff * pb[2 * (k + j * m)];
      const double bi = coeff * pb[2 * (k + j * m) + 1];
      for (int i = 0; i < m; ++i) {
        const double ar = pa[2 * (i + k * m)];
        const double ai = pa[2 * (i + k * m) + 1];
        pc[2 * (i + j * m)] += ar * br - ai * bi;
        pc[2 * (i + j * m) + 1] += ar * bi + ai * br;
      }
    }
  }
}

namespace {

inline void mul_acc(const Mat& a, const Mat& b, Mat& c, double coeff) {
  psicalc::mul_acc(a.data(), b.data(), c.data(), static_cast<int>(a.rows()), coeff);
}

}  // namespace

MultiIndex jet_multi_index(int dim, int index) noexcept {
  if (dim == 1) return {index, 0};
  int t = 0;
  while ((t + 1) * (t + 2) / 2 <= index) ++t;
  const int a2 = index - t * (t + 1) / 2;
  return {t - a2, a2};
}

std::vector<MultiIndex> multi_indices_of_order(int dim, int total) {
  std::vector<MultiIndex> out;
  if (dim == 1) {
    out.push_back({total, 0});
    return out;
  }
  for (int a2 = 0; a2 <= total; ++a2) out.push_back({total - a2, a2});
  return out;
}

double multi_factorial(const MultiIndex& a) noexcept {
  double f = 1.0;
  for (int i = 2; i <= a.a1; ++i) f *= i;
  for (int i = 2; i <= a.a2; ++i) f *= i;
  return f;
}

MatJet::MatJet(int dim, int order, int fiber) : dim_(dim), order_(order), fiber_(fiber) {
  if (order > kMaxJetOrder) throw RejectedInput("jet order exceeds kMaxJetOrder");
  if (fiber < 1 || fiber > kMaxFiber) throw RejectedInput("fiber dimension must be in 1..4");
  for (int i = 0; i < count(); ++i) (*this)[i] = Mat::Zero(fiber, fiber);
}

MatJet MatJet::constant(int dim, int order, const Mat& value) {
  MatJet j(dim, order, static_cast<int>(value.rows()));
  j.value() = value;
  return j;
}

MatJet MatJet::truncated(int order) const {
  MatJet out(dim_, order, fiber_);
  for (int i = 0; i < out.count(); ++i) out[i] = (*this)[i];
  return out;
}

MatJet& MatJet::operator+=(const MatJet& o) { return add_scaled(o, 1.0); }

MatJet& MatJet::operator-=(const MatJet& o) { return add_scaled(o, -1.0); }

MatJet& MatJet::operator*=(cd s) {
  for (int i = 0; i < count(); ++i) (*this)[i] *= s;
  return *this;
}

MatJet& MatJet::add_scaled(const MatJet& o, cd s) {
  if (o.order_ < order_) order_ = o.order_;
  for (int i = 0; i < count(); ++i) (*this)[i].noalias() += s * o[i];
  return *this;
}

MatJet operator*(const MatJet& f, const MatJet& g) {
  const int order = std::min(f.order(), g.order());
  MatJet out(f.dim(), order, f.fiber());
  const auto& table = leibniz_table(f.dim());
  for (int gi = 0; gi < out.count(); ++gi) {
    Mat& acc = out[gi];
    for (const auto& t : table[static_cast<std::size_t>(gi)]) mul_acc(f[t.left], g[t.right], acc, t.coeff);
  }
  return out;
}

MatJet inverse(const MatJet& a) {
  const auto lu = a.value().partialPivLu();
  if (!(lu.rcond() > 1e-14)) throw DomainError("jet inverse: singular value matrix");
  const Mat inv0 = lu.inverse();
  MatJet r(a.dim(), a.order(), a.fiber());
  r.value() = inv0;
  const auto& table = leibniz_table(a.dim());
  // a r = I  =>  r_gamma = -r_0 sum_{0 != beta <= gamma} C(gamma,beta) a_beta r_{gamma-beta}
  for (int gi = 1; gi < r.count(); ++gi) {
    Mat acc = Mat::Zero(a.fiber(), a.fiber());
    for (const auto& t : table[static_cast<std::size_t>(gi)]) {
      if (t.left == 0) continue;
      mul_acc(a[t.left], r[t.right], acc, t.coeff);
    }
    mul_acc(inv0, acc, r[gi], -1.0);
  }
  return r;
}

MatJet shift(const MatJet& f, const MultiIndex& alpha) {
  const int order = f.order() - alpha.order();
  if (order < 0) throw RejectedInput("jet shift beyond available order");
  MatJet out(f.dim(), order, f.fiber());
  for (int i = 0; i < out.count(); ++i) {
    const MultiIndex g = jet_multi_index(f.dim(), i);
    out[i] = f[jet_index(f.dim(), g.a1 + alpha.a1, g.a2 + alpha.a2)];
  }
  return out;
}

}  // namespace psicalc
