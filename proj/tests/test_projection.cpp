#include <doctest.h>

#include <cmath>
#include <random>

#include "helpers.hpp"

using namespace psicalc;
using namespace testing;

namespace {

Mat beta10() { return diag({1.0, 0.0}); }

BandLimitedField off_diagonal_sin(double eps) {
  // eps sin(x) in the (0, 1) slot: (e^{ix} - e^{-ix}) / 2i
  Mat a = Mat::Zero(2, 2);
  a(0, 1) = eps / cd(0, 2);
  return BandLimitedField(1, 2, {FourierMode{1, 0, 0, -1, a}, FourierMode{-1, 0, 0, -1, -a}});
}

IdempotentSymbolField field_n1(std::uint64_t seed, int order = 4, double eps = 0.2) {
  auto m = ModelManifold::circle(64);
  const auto v0 = BandLimitedField::random(1, 2, 2, 0, seed);
  FieldOptions opt;
  opt.jet_order = order;
  return make_idempotent_field(m, beta10(), v0.scaled(eps / v0.max_sample_norm(*m)), CutoffProfile{kPi / 2, 1.2, 1.0}, opt);
}

}  // namespace

TEST_SUITE("idempotent field") {
  TEST_CASE("zero perturbation gives beta everywhere") {
    auto m = ModelManifold::circle(32);
    const auto f = make_idempotent_field(m, beta10(), BandLimitedField(1, 2, {}), CutoffProfile{kPi / 2, 0.5, 1.0});
    CHECK(max_diff(f.p_tilde, HomogeneousTerm::constant(m, 0, beta10())) == 0.0);
    for (auto c : f.constant) CHECK(c == 1);
  }

  TEST_CASE("off-diagonal sine perturbation refines to an idempotent") {
    auto m = ModelManifold::circle(64);
    const auto f = make_idempotent_field(m, beta10(), off_diagonal_sin(0.2), CutoffProfile{kPi / 2, 1.2, 1.0});
    double worst = 0.0;
    double outside = 0.0;
    for (int p = 0; p < m->points(); ++p) {
      for (int d = 0; d < 2; ++d) {
        const Mat v = f.p_tilde.value(p, d);
        worst = std::max(worst, max_abs(v * v - v));
        if (std::abs(m->normal_coordinate(p) - kPi / 2) >= 1.2) outside = std::max(outside, max_abs(v - beta10()));
      }
    }
    CHECK(worst < 1e-12);
    CHECK(outside == 0.0);
    CHECK(max_diff(f.p_tilde, HomogeneousTerm::constant(f.p_tilde.manifold(), 0, beta10())) > 0.1);
  }

  TEST_CASE("bump too close to the boundary is rejected") {
    auto m = ModelManifold::circle(64);
    CHECK_THROWS_AS(make_idempotent_field(m, beta10(), off_diagonal_sin(0.2), CutoffProfile{kPi / 2, 1.55, 1.0}),
                    RejectedInput);
    CHECK_THROWS_AS(make_idempotent_field(m, beta10(), off_diagonal_sin(0.2), CutoffProfile{0.3, 1.0, 1.0}),
                    RejectedInput);
  }

  TEST_CASE("non-idempotent beta is rejected") {
    auto m = ModelManifold::circle(16);
    CHECK_THROWS_AS(make_idempotent_field(m, diag({1.0, 0.5}), BandLimitedField(1, 2, {}), {}), RejectedInput);
  }

  TEST_CASE("bump profile values") {
    const CutoffProfile b{1.0, 0.5, 2.0};
    CHECK(b.derivatives(1.0, 0)[0] == doctest::Approx(1.0));
    CHECK(b.derivatives(1.5, 0)[0] == 0.0);
    const double s = 0.5;
    CHECK(b.derivatives(1.25, 0)[0] == doctest::Approx(std::exp(2.0 * (1.0 - 1.0 / (1.0 - s * s)))));
    // first derivative against a centred difference
    const double h = 1e-6;
    const double fd = (b.derivatives(1.1 + h, 0)[0] - b.derivatives(1.1 - h, 0)[0]) / (2 * h);
    CHECK(b.derivatives(1.1, 1)[1] == doctest::Approx(fd).epsilon(1e-7));
  }
}

TEST_SUITE("auxiliary symbol") {
  TEST_CASE("beta = diag(1, 0) gives diag(1, -1) |xi|^2") {
    auto m = ModelManifold::torus(16, 8);
    const auto f = make_idempotent_field(m, beta10(), BandLimitedField(2, 2, {}), CutoffProfile{kPi / 2, 0.5, 1.0});
    const auto c = auxiliary_symbol(f);
    CHECK(c.leading_degree() == 2);
    CHECK(max_diff(c.term(0), HomogeneousTerm::constant(m, 2, diag({1.0, -1.0}))) == 0.0);
    CHECK(max_abs(evaluate(c.term(0), {0.1, 0.2}, {3.0, 4.0}) - diag({25.0, -25.0})) < 1e-12);
  }

  TEST_CASE("p~ = I and p~ = 0") {
    auto m = ModelManifold::circle(16);
    const auto one = make_idempotent_field(m, identity_mat(2), BandLimitedField(1, 2, {}), {kPi / 2, 0.5, 1.0});
    const auto zero = make_idempotent_field(m, Mat::Zero(2, 2), BandLimitedField(1, 2, {}), {kPi / 2, 0.5, 1.0});
    CHECK(max_diff(auxiliary_symbol(one).term(0), HomogeneousTerm::constant(m, 2, identity_mat(2))) == 0.0);
    CHECK(max_diff(auxiliary_symbol(zero).term(0), HomogeneousTerm::constant(m, 2, -identity_mat(2))) == 0.0);
  }
}

TEST_SUITE("parametrix") {
  TEST_CASE("constant beta: q_-2 is the resolvent reflection, lower terms vanish") {
    auto m = ModelManifold::circle(16);
    const auto f = make_idempotent_field(m, beta10(), BandLimitedField(1, 2, {}), {kPi / 2, 0.5, 1.0});
    const Contour contour;
    const auto table = parametrix_recursion(auxiliary_symbol(f), contour, 3);
    for (int l : {0, 5, 17, 40}) {
      const cd lam = contour.node(l);
      const Mat expected = beta10() / (1.0 - lam) - (identity_mat(2) - beta10()) / (1.0 + lam);
      CHECK(max_abs(table.value(0, l, 3, 1) - expected) < 1e-15);
      for (int j = 1; j <= 3; ++j) CHECK(max_abs(table.value(j, l, 3, 1)) == 0.0);
    }
  }

  TEST_CASE("q_-2 inverts c_2 - lambda") {
    const auto f = field_n1(3, 2);
    const auto c = auxiliary_symbol(f);
    const Contour contour;
    const auto table = parametrix_recursion(c, contour, 2);
    double worst = 0.0;
    for (int l = 0; l < contour.nodes; l += 7)
      for (int p = 0; p < 64; p += 3)
        for (int d = 0; d < 2; ++d)
          worst = std::max(worst, max_abs(table.value(0, l, p, d) * (c.term(0).value(p, d) - contour.node(l) * identity_mat(2)) -
                                          identity_mat(2)));
    CHECK(worst < 1e-13);
  }

  TEST_CASE("scalar p~ = 1 gives 1 / (1 - lambda)") {
    auto m = ModelManifold::circle(16);
    const auto f = make_idempotent_field(m, scalar(1.0), BandLimitedField(1, 1, {}), {kPi / 2, 0.5, 1.0});
    const Contour contour;
    const auto table = parametrix_recursion(auxiliary_symbol(f), contour, 1);
    for (int l : {0, 9, 33}) CHECK(std::abs(table.value(0, l, 2, 0)(0, 0) - 1.0 / (1.0 - contour.node(l))) < 1e-15);
  }

  TEST_CASE("table path and fused path agree") {
    const auto f = field_n1(5, 3);
    const auto c = auxiliary_symbol(f);
    const Contour contour;
    const auto table = contour_integrate_projection(parametrix_recursion(c, contour, 3));
    const auto fused = build_projection(f, 3, contour);
    CHECK(max_distance(table, fused) < 1e-12);
  }

  TEST_CASE("contour parameters are validated") {
    CHECK_THROWS_AS((Contour{1.0, 64}.validate()), RejectedInput);
    CHECK_THROWS_AS((Contour{0.5, 48}.validate()), RejectedInput);
    CHECK_NOTHROW((Contour{0.25, 32}.validate()));
  }
}

TEST_SUITE("projection") {
  TEST_CASE("constant beta gives pi = beta exactly") {
    auto m = ModelManifold::torus(16, 8);
    const auto f = make_idempotent_field(m, beta10(), BandLimitedField(2, 2, {}), {kPi / 2, 0.5, 1.0});
    const auto pi = build_projection(f, 3);
    CHECK(max_diff(pi.term(0), HomogeneousTerm::constant(m, 0, beta10())) < 1e-15);
    for (int j = 1; j <= 3; ++j) CHECK(pi.term(j).is_zero());
  }

  TEST_CASE("principal symbol equals p~") {
    for (std::uint64_t seed : {1, 2, 3}) {
      const auto f = field_n1(seed, 2);
      CHECK(max_diff(build_projection(f, 2).term(0), f.p_tilde) < 1e-10);
    }
  }

  TEST_CASE("doubling the contour nodes changes pi by less than 1e-12") {
    const auto f = field_n1(7, 4);
    const auto a = build_projection(f, 4, Contour{0.5, 64});
    const auto b = build_projection(f, 4, Contour{0.5, 128});
    // Relative to each term: |pi_-4| is about 200 here and its rounding floor scales with it.
    for (const auto& [deg, diff] : componentwise_distance(a, b))
      CHECK(diff < 1e-12 * std::max(1.0, a.term_of_degree(deg)->max_norm()));
  }

  TEST_CASE("pi # pi - pi vanishes to the truncation order") {
    const auto f = field_n1(7, 4);
    const auto pi = build_projection(f, 4);
    CHECK(max_distance(compose(pi, pi, 4), pi) < 1e-10);
  }

  TEST_CASE("pi equals beta where p~ does") {
    const auto f = field_n1(2, 3);
    const auto pi = build_projection(f, 3);
    int constant = 0;
    for (int p = 0; p < 64; ++p) {
      if (!f.constant[static_cast<std::size_t>(p)]) continue;
      ++constant;
      for (int d = 0; d < 2; ++d) {
        CHECK(max_abs(pi.term(0).value(p, d) - beta10()) < 1e-15);
        for (int j = 1; j <= 3; ++j) CHECK(max_abs(pi.term(j).value(p, d)) == 0.0);
      }
    }
    CHECK(constant > 10);
  }

  TEST_CASE("exact model: eps e^{ix} in the corner") {
    // beta = diag(1, 0), V = eps e^{ix} E_01.  The matrix projection symbol is
    // 2 eps xi^2 / ((xi + 1)^2 + xi^2) e^{ix} = eps e^{ix} / (1 + t + t^2 / 2), t = 1 / xi.
    const double eps = 0.1;
    auto m = ModelManifold::circle(32);
    Mat a = Mat::Zero(2, 2);
    a(0, 1) = eps;
    FieldOptions opt;
    opt.enforce_margin = false;
    opt.jet_order = 5;
    const auto f = make_idempotent_field(m, beta10(), BandLimitedField(1, 2, {FourierMode{1, 0, 0, -1, a}}),
                                         CutoffProfile::uniform(), opt);
    const auto pi = build_projection(f, 5);
    std::vector<double> series{1.0, -1.0};
    for (int k = 2; k <= 5; ++k) series.push_back(-series[k - 1] - series[k - 2] / 2);
    for (int j = 0; j <= 5; ++j) {
      for (int p : {0, 5, 11}) {
        const cd phase = std::exp(cd(0, m->coordinates(p)[0]));
        // direction 0 is xi = +1, direction 1 is xi = -1 (t = -1)
        CHECK(std::abs(pi.term(j).value(p, 0)(0, 1) - eps * series[static_cast<std::size_t>(j)] * phase) < 1e-13);
        CHECK(std::abs(pi.term(j).value(p, 1)(0, 1) - eps * series[static_cast<std::size_t>(j)] * std::pow(-1.0, j) * phase) <
              1e-13);
      }
    }
  }
}

TEST_SUITE("lemma a1") {
  TEST_CASE("resolvent reflection examples") {
    const cd i(0, 1);
    CHECK(max_abs(resolvent_reflection(identity_mat(2), 1.0, i) - identity_mat(2) / (1.0 - i)) < 1e-15);
    CHECK(max_abs(resolvent_reflection(Mat::Zero(2, 2), 1.0, i) + identity_mat(2) / (1.0 + i)) < 1e-15);
    const Mat n = mat2(1.0, 1.0, 0.0, 0.0);
    const Mat r = resolvent_reflection(n, 2.0, 1.0);
    CHECK(max_abs(r * ((2.0 * n - identity_mat(2)) * 2.0 - identity_mat(2)) - identity_mat(2)) < 1e-15);
  }

  TEST_CASE("resolvent reflection matches a direct inverse") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
      const int n = 1 + trial % 4;
      Mat s(n, n);
      for (int j = 0; j < n; ++j)
        for (int k = 0; k < n; ++k) s(j, k) = cd(u(rng), u(rng)) + (j == k ? 2.0 : 0.0);
      Mat dg = Mat::Zero(n, n);
      for (int k = 0; k < n; k += 2) dg(k, k) = 1.0;
      const Mat idem = s * dg * s.inverse();
      const double d = 0.5 + trial * 0.25;
      const cd lam(u(rng), u(rng));
      const Mat direct = ((2.0 * idem - identity_mat(n)) * d - lam * identity_mat(n)).inverse();
      CHECK(max_abs(resolvent_reflection(idem, d, lam) - direct) < 1e-12);
    }
  }

  TEST_CASE("contour reproduces the idempotent") {
    CHECK(max_abs(lemma_a1_contour(beta10(), 1.0, 0.5, 64) - beta10()) < 1e-14);
    CHECK(max_abs(lemma_a1_contour(Mat::Zero(3, 3), 1.0, 0.5, 64)) < 1e-14);
    const Mat n = mat2(1.0, 1.0, 0.0, 0.0);
    CHECK(max_abs(lemma_a1_contour(n, 3.0, 1.0, 64) - n) < 1e-12);
  }

  TEST_CASE("trapezoid error follows the partial-fraction prediction") {
    // The pole at +d sits at the centre (exact for any M); the pole at -d gives
    // (I - M) (r / 2d)^M / (1 - (r / 2d)^M).
    const Mat n = mat2(1.0, 1.0, 0.0, 0.0);
    const double d = 1.0, r = 0.5;
    for (int nodes : {4, 8, 16}) {
      const double q = std::pow(r / (2 * d), nodes);
      const Mat predicted = n - (identity_mat(2) - n) * (q / (1.0 - q));
      CHECK(max_abs(lemma_a1_contour(n, d, r, nodes) - predicted) < 1e-14);
    }
  }

  TEST_CASE("domain errors") {
    CHECK_THROWS_AS(lemma_a1_contour(beta10(), 1.0, 1.0, 64), DomainError);
    CHECK_THROWS_AS(resolvent_reflection(beta10(), 1.0, 1.0), DomainError);
    CHECK_THROWS_AS(resolvent_reflection(diag({1.0, 0.5}), 1.0, 0.3), RejectedInput);
  }
}
