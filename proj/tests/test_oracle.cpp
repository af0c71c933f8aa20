#include <doctest.h>

#include <cmath>
#include <cstring>
#include <sstream>

#include "helpers.hpp"
#include "psicalc/oracle.hpp"

using namespace psicalc;
using namespace testing;

namespace {

GridOperator raw(const DenseMat& a) { return GridOperator{a, 1, ModelManifold::circle(8), 1}; }

DenseMat diag_dense(std::initializer_list<double> v) {
  Eigen::VectorXcd d(static_cast<Eigen::Index>(v.size()));
  int i = 0;
  for (double x : v) d(i++) = x;
  return d.asDiagonal();
}

int mode_row(int k, int nf, int fiber = 1, int f = 0) { return (k + nf) * fiber + f; }

}  // namespace

TEST_SUITE("quantize") {
  TEST_CASE("p = 1 gives the identity") {
    auto m = ModelManifold::torus(16, 8);
    const auto a = quantize(ClassicalSymbol::identity(m, 2), 4);
    CHECK(a.matrix.rows() == 8 * 8 * 2);
    CHECK((a.matrix - DenseMat::Identity(128, 128)).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("sgn xi is diagonal with a zero at k = 0") {
    auto m = ModelManifold::circle(32);
    const int nf = 8;
    const auto a = quantize(ClassicalSymbol::single(circle_power(m, 0, true)), nf);
    for (int k = -nf; k < nf; ++k) {
      const double expected = k > 0 ? 1.0 : (k < 0 ? -1.0 : 0.0);
      CHECK(std::abs(a.matrix(mode_row(k, nf), mode_row(k, nf)) - expected) < 1e-15);
    }
    CHECK((a.matrix - DenseMat(a.matrix.diagonal().asDiagonal())).cwiseAbs().maxCoeff() < 1e-15);
  }

  TEST_CASE("e^{ix} shifts k to k + 1, wrapping at the band edge") {
    auto m = ModelManifold::circle(32);
    const int nf = 8;
    const auto a = quantize(ClassicalSymbol::single(fourier_term(m, 0, 1, 0, 1.0, 0)), nf);
    DenseMat expected = DenseMat::Zero(16, 16);
    for (int k = -nf; k < nf; ++k) {
      const int to = k + 1 == nf ? -nf : k + 1;
      expected(mode_row(to, nf), mode_row(k, nf)) = 1.0;
    }
    CHECK((a.matrix - expected).cwiseAbs().maxCoeff() < 1e-14);
  }

  TEST_CASE("|xi|^2 on the torus is |k|^2, and the xi = 0 average is 1") {
    auto m = ModelManifold::torus(16, 16);
    const int nf = 4;
    const auto a = quantize(ClassicalSymbol::single(HomogeneousTerm::constant(m, 2, scalar(1.0))), nf);
    for (int i = 0; i < a.modes(); ++i) {
      const auto k = a.frequency(i);
      const double expected = k[0] == 0 && k[1] == 0 ? 1.0 : double(k[0] * k[0] + k[1] * k[1]);
      CHECK(std::abs(a.matrix(i, i) - expected) < 1e-12);
    }
  }

  TEST_CASE("under-resolved symbols are refused") {
    auto m = ModelManifold::circle(16);
    const auto p = ClassicalSymbol::single(fourier_term(m, 0, 7, 0, 1.0, 0));
    CHECK_THROWS_AS(quantize(p, 4), RejectedInput);
    CHECK_THROWS_AS(quantize(ClassicalSymbol::identity(m, 1), 9), RejectedInput);
  }

  TEST_CASE("zero-frequency removal") {
    auto m = ModelManifold::circle(16);
    const auto a = without_zero_frequency(identity_operator(m, 4, 2));
    CHECK(a.matrix.row(mode_row(0, 4, 2, 0)).norm() == 0.0);
    CHECK(a.matrix.col(mode_row(0, 4, 2, 1)).norm() == 0.0);
    CHECK(a.matrix.trace() == cd(14.0));
  }
}

TEST_SUITE("matrix projection") {
  TEST_CASE("diagonal examples") {
    for (auto method : {ProjectionMethod::EigenSplit, ProjectionMethod::Contour}) {
      CHECK((sectorial_projection_matrix(raw(diag_dense({1, -1})), method).matrix - diag_dense({1, 0})).cwiseAbs().maxCoeff() <
            1e-13);
      CHECK((sectorial_projection_matrix(raw(diag_dense({2, -3, 5})), method).matrix - diag_dense({1, 0, 1}))
                .cwiseAbs()
                .maxCoeff() < 1e-13);
    }
  }

  TEST_CASE("non-normal matrix: both methods agree with the spectral projector") {
    DenseMat c(3, 3);
    c << 2.0, 5.0, -1.0, 0.0, -1.0, 4.0, 0.0, 0.0, 3.0;
    const auto e = sectorial_projection_matrix(raw(c), ProjectionMethod::EigenSplit).matrix;
    const auto k = sectorial_projection_matrix(raw(c), ProjectionMethod::Contour).matrix;
    CHECK((e * e - e).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((e * c - c * e).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(std::abs(e.trace() - 2.0) < 1e-12);
    CHECK((e - k).cwiseAbs().maxCoeff() < 1e-10);
  }

  TEST_CASE("eigenvalue on the cut is refused") {
    CHECK_THROWS_AS(sectorial_projection_matrix(raw(diag_dense({1, 0})), ProjectionMethod::EigenSplit), SpectralGapError);
  }

  TEST_CASE("constant field: both methods give quantize(beta)") {
    auto m = ModelManifold::circle(32);
    const Mat beta = diag({1.0, 0.0});
    const auto f = make_idempotent_field(m, beta, BandLimitedField(1, 2, {}), CutoffProfile{kPi / 2, 0.5, 1.0});
    const auto c = quantize(auxiliary_symbol(f), 8);
    const auto expected = quantize(ClassicalSymbol::single(HomogeneousTerm::constant(m, 0, beta)), 8);
    for (auto method : {ProjectionMethod::EigenSplit, ProjectionMethod::Contour})
      CHECK((sectorial_projection_matrix(c, method).matrix - expected.matrix).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("riesz refinement of an idempotent is itself") {
    const auto p = raw(diag_dense({1, 0, 1, 0}));
    CHECK((riesz_refine(p).matrix - p.matrix).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_SUITE("truncation") {
  TEST_CASE("identity truncates to the mask projector, and truncation is idempotent") {
    auto m = ModelManifold::circle(32);
    const auto id = identity_operator(m, 8, 2);
    const auto mask = TruncationMask::for_operator(id);
    const auto t = truncate(id, mask);
    CHECK((t.matrix - mask.projector).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((truncate(t, mask).matrix - t.matrix).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((mask.projector * mask.projector - mask.projector).cwiseAbs().maxCoeff() < 1e-13);
  }

  TEST_CASE("multiplication supported inside X is unchanged") {
    auto m = ModelManifold::circle(64);
    const int nf = 32;
    const auto b = CutoffProfile{kPi / 2, 1.2, 1.0};
    const auto f = HomogeneousTerm::sampled(m, 0, 1, [&](const Point& x, int) {
      return scalar(b.derivatives(x[0], 0)[0] * cd(1.0, std::cos(x[0])));
    });
    const auto a = quantize(ClassicalSymbol::single(f), nf, QuantizeOptions{1.0});
    const auto mask = TruncationMask::for_operator(a);
    const auto t = truncate(a, mask);
    CHECK((mask.projector * a.matrix - a.matrix * mask.projector).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((t.matrix - a.matrix).cwiseAbs().maxCoeff() < 1e-12);
  }

  TEST_CASE("leftover with the identity vanishes") {
    auto m = ModelManifold::circle(32);
    const auto p = quantize(band_limited_symbol(m, 0, 0, 2, 2, 0, 3), 8);
    const auto mask = TruncationMask::for_operator(p);
    CHECK(leftover(p, identity_operator(m, 8, 2), mask).matrix.cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_SUITE("comparison") {
  TEST_CASE("equal operators are at distance 0") {
    auto m = ModelManifold::circle(32);
    const auto p = quantize(band_limited_symbol(m, 0, 0, 2, 2, 0, 3), 8);
    CHECK(compare_operator_norm(p, p) == 0.0);
  }

  TEST_CASE("2I against I is at distance 1") {
    const DenseMat id = DenseMat::Identity(5, 5);
    CHECK(std::abs(compare_operator_norm(raw(2.0 * id), raw(id)) - 1.0) < 1e-12);
    CHECK(std::abs(operator_norm(raw(2.0 * id)) - 2.0) < 1e-12);
  }

  TEST_CASE("incompatible operators are refused") {
    auto a = identity_operator(ModelManifold::circle(32), 8, 1);
    CHECK_THROWS_AS(compare_operator_norm(a, identity_operator(ModelManifold::circle(32), 4, 1)), ShapeMismatch);
    CHECK_THROWS_AS(compare_operator_norm(a, identity_operator(ModelManifold::circle(32), 4, 2)), ShapeMismatch);
    CHECK_THROWS_AS(compare_operator_norm(a, identity_operator(ModelManifold::torus(32, 8), 8, 1)), ShapeMismatch);
  }
}

TEST_SUITE("export") {
  TEST_CASE("binary header and payload") {
    auto m = ModelManifold::circle(16);
    auto a = identity_operator(m, 2, 2);
    a.matrix(1, 0) = cd(0.5, -0.25);
    std::ostringstream os;
    export_operator(a, os);
    const std::string s = os.str();
    REQUIRE(s.size() == 8 + 4 * 4 + 8 * 2 + 64 * 16);
    CHECK(s.substr(0, 8) == "PSIOPMAT");
    std::uint32_t u[4];
    std::memcpy(u, s.data() + 8, sizeof u);
    CHECK(u[0] == 1);
    CHECK(u[1] == 1);
    CHECK(u[2] == 2);
    CHECK(u[3] == 2);
    std::uint64_t rc[2];
    std::memcpy(rc, s.data() + 24, sizeof rc);
    CHECK(rc[0] == 8);
    CHECK(rc[1] == 8);
    double v[2];
    std::memcpy(v, s.data() + 40 + 16 * 8, sizeof v);
    CHECK(v[0] == 0.5);
    CHECK(v[1] == -0.25);
  }
}
