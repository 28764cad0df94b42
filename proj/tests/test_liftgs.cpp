#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "qbc/liftgs.hpp"
#include "support.hpp"

using namespace qbc;
using namespace qbc::liftgs;
using qbc::test::Rng;

namespace {

using V = Vector<cd>;
using M = Matrix<cd>;

V vec(std::initializer_list<cd> xs) {
  V v(static_cast<Index>(xs.size()));
  Index i = 0;
  for (cd x : xs) v(i++) = x;
  return v;
}

template <typename F>
Errc error_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an exception");
  return Errc::InvalidParams;
}

void check_blocks(const std::vector<OrthoBlock<cd>>& blocks, const std::vector<V>& inputs, const LiftingParams& p) {
  const double r = p.r;
  for (std::size_t a = 0; a < blocks.size(); ++a) {
    CHECK(std::abs(blocks[a].full.norm() - r) <= 1e-9 * r);
    CHECK((project(blocks[a].full, p) - inputs[a]).cwiseAbs().maxCoeff() <= 1e-12);
    for (std::size_t b = a + 1; b < blocks.size(); ++b)
      CHECK(std::abs(blocks[a].full.dot(blocks[b].full)) <= 1e-9 * r * r);
  }
}

}  // namespace

TEST_CASE("classic Gram-Schmidt") {
  SUBCASE("orthonormal input is a fixed point") {
    const auto out = classic_gram_schmidt<cd>({vec({1, 0}), vec({0, 1})});
    CHECK((out[0] - vec({1, 0})).norm() < 1e-15);
    CHECK((out[1] - vec({0, 1})).norm() < 1e-15);
  }
  SUBCASE("hand example") {
    const auto out = classic_gram_schmidt<cd>({vec({1, 0}), vec({1, 1})});
    CHECK((out[0] - vec({1, 0})).norm() < 1e-15);
    CHECK((out[1] - vec({0, 1})).norm() < 1e-15);
  }
  SUBCASE("dependent input") {
    CHECK(error_of([] { classic_gram_schmidt<cd>({vec({1, 0}), vec({2, 0})}); }) == Errc::LinearDependence);
  }
  SUBCASE("dimension mismatch") {
    CHECK(error_of([] { classic_gram_schmidt<cd>({vec({1, 0}), vec({1, 0, 0})}); }) == Errc::DimensionMismatch);
  }
  SUBCASE("random inputs give an orthonormal set spanning the same prefixes") {
    Rng rng(1);
    for (int t = 0; t < 20; ++t) {
      std::vector<V> vs;
      for (int j = 0; j < 5; ++j) vs.push_back(qbc::test::random_vector(rng, 7));
      const auto out = classic_gram_schmidt(vs);
      const M g = qbc::test::oracle_gram(out);
      CHECK((g - M::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-9);
      // k-th output lies in the span of the first k inputs.
      for (int k = 0; k < 5; ++k) {
        M basis(7, k + 1);
        for (int j = 0; j <= k; ++j) basis.col(j) = vs[static_cast<std::size_t>(j)];
        const V coef = basis.colPivHouseholderQr().solve(out[static_cast<std::size_t>(k)]);
        CHECK((basis * coef - out[static_cast<std::size_t>(k)]).norm() < 1e-9);
      }
    }
  }
}

TEST_CASE("gram matrix") {
  CHECK((gram_matrix<cd>({vec({1, 0}), vec({0, 1})}) - M::Identity(2, 2)).norm() < 1e-15);
  const V v = vec({cd(0.6, 0), cd(0, 0.8)});
  CHECK((gram_matrix<cd>({v, v}) - M::Ones(2, 2)).cwiseAbs().maxCoeff() < 1e-15);
  Rng rng(2);
  std::vector<V> vs;
  for (int j = 0; j < 4; ++j) vs.push_back(qbc::test::random_vector(rng, 3));
  const M g = gram_matrix(vs);
  CHECK((g - qbc::test::oracle_gram(vs)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((g - g.adjoint()).cwiseAbs().maxCoeff() == 0.0);
  CHECK(error_of([] { gram_matrix<cd>({vec({1}), vec({1, 0})}); }) == Errc::DimensionMismatch);
}

TEST_CASE("spectral norm") {
  CHECK(std::abs(spectral_norm(M(M::Identity(3, 3))) - 1.0) < 1e-12);
  M col(4, 1);
  col << 3, 0, cd(0, 4), 0;
  CHECK(std::abs(spectral_norm(col) - 5.0) < 1e-12);
  Rng rng(3);
  const M m = qbc::test::random_matrix(rng, 6, 4);
  const double s = spectral_norm(m);
  CHECK(std::abs(s - qbc::test::oracle_spectral_norm(m, rng)) <= 1e-9 * s);
  M bad = M::Identity(2, 2);
  bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
  CHECK(error_of([&] { spectral_norm(bad); }) == Errc::NonFinite);
}

TEST_CASE("PSD square root") {
  CHECK((sqrt_psd(M(M::Identity(3, 3))) - M::Identity(3, 3)).norm() < 1e-12);
  M d = M::Zero(2, 2);
  d(0, 0) = 4;
  d(1, 1) = 9;
  const M s = sqrt_psd(d);
  CHECK(std::abs(s(0, 0) - 2.0) < 1e-12);
  CHECK(std::abs(s(1, 1) - 3.0) < 1e-12);
  CHECK(std::abs(s(0, 1)) < 1e-12);

  Rng rng(4);
  const M x = qbc::test::random_matrix(rng, 5, 5);
  const M h = x.adjoint() * x;
  const M r = sqrt_psd(h);
  CHECK((r * r - h).cwiseAbs().maxCoeff() <= 1e-9);
  CHECK((r - r.adjoint()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((r - qbc::test::oracle_sqrt(h)).cwiseAbs().maxCoeff() <= 1e-9);

  M neg = M::Identity(2, 2);
  neg(1, 1) = -1e-6;
  CHECK(error_of([&] { sqrt_psd(neg); }) == Errc::NotPSD);
  M tiny = M::Identity(2, 2);
  tiny(1, 1) = -1e-13;
  CHECK(std::abs(sqrt_psd(tiny)(1, 1)) < 1e-12);
  M nonherm = M::Identity(2, 2);
  nonherm(0, 1) = 0.5;
  CHECK(error_of([&] { sqrt_psd(nonherm); }) == Errc::NotPSD);
}

TEST_CASE("batch lifting") {
  SUBCASE("single basis vector") {
    const auto p = LiftingParams::make(2, 2, 2.0);
    const auto out = lift_batch<cd>({vec({1, 0})}, p);
    REQUIRE(out.size() == 1);
    const V expected = vec({1, 0, std::sqrt(3.0), 0});
    CHECK((out[0].full - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(out[0].index == 1);
  }
  SUBCASE("duplicated input") {
    const auto p = LiftingParams::make(2, 2, 2.0);
    const V v = vec({cd(0.6, 0), cd(0, 0.8)});
    const auto out = lift_batch<cd>({v, v}, p);
    check_blocks(out, {v, v}, p);
  }
  SUBCASE("radius too small") {
    const auto p = LiftingParams::make(2, 2, 0.5);
    CHECK(error_of([&] { lift_batch<cd>({vec({1, 0})}, p); }) == Errc::RadiusTooSmall);
  }
  SUBCASE("capacity") {
    const auto p = LiftingParams::make(2, 2, 4.0);
    CHECK(error_of([&] { lift_batch<cd>({vec({1, 0}), vec({0, 1}), vec({1, 1})}, p); }) == Errc::CapacityExceeded);
  }
  SUBCASE("random, dependent sets") {
    Rng rng(5);
    const auto p = LiftingParams::with_default_radius(4, 8);
    for (int t = 0; t < 20; ++t) {
      std::vector<V> vs;
      for (int j = 0; j < 8; ++j)
        vs.push_back(j > 0 && j % 3 == 0 ? vs[static_cast<std::size_t>(j - 1)] : qbc::test::random_unit(rng, 4));
      check_blocks(lift_batch(vs, p), vs, p);
    }
  }
}

TEST_CASE("incremental lifting") {
  SUBCASE("first append") {
    const auto p = LiftingParams::make(3, 4, 2.0);
    LiftingWorkspace<cd> ws(p);
    const V v = vec({0, 1, 0});
    const auto b = lift_append(ws, v);
    V expected = V::Zero(7);
    expected(1) = 1;
    expected(3) = std::sqrt(3.0);
    CHECK((b.full - expected).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(ws.count() == 1);
  }
  SUBCASE("prefix stability and structure") {
    Rng rng(6);
    const auto p = LiftingParams::with_default_radius(5, 8);
    std::vector<V> vs;
    for (int j = 0; j < 4; ++j) vs.push_back(qbc::test::random_unit(rng, 5));
    LiftingWorkspace<cd> a(p), b(p);
    std::vector<OrthoBlock<cd>> first, second;
    for (int j = 0; j < 3; ++j) first.push_back(lift_append(a, vs[static_cast<std::size_t>(j)]));
    for (int j = 0; j < 4; ++j) second.push_back(lift_append(b, vs[static_cast<std::size_t>(j)]));
    for (int j = 0; j < 3; ++j) CHECK(first[static_cast<std::size_t>(j)].full == second[static_cast<std::size_t>(j)].full);
    check_blocks(second, vs, p);
    for (int j = 0; j < 4; ++j) {
      const V lifted = lifted_part(second[static_cast<std::size_t>(j)].full, p);
      CHECK(lifted(j).real() > 0);
      CHECK(lifted(j).imag() == 0.0);
      CHECK(lifted.tail(p.m_max - j - 1).cwiseAbs().maxCoeff() == 0.0);
    }
    // chol^H chol = r^2 I - G
    const M lhs = M(b.chol()).adjoint() * M(b.chol());
    const M rhs = p.r * p.r * M::Identity(4, 4) - M(b.gram());
    CHECK((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("capacity") {
    const auto p = LiftingParams::with_default_radius(2, 2);
    LiftingWorkspace<cd> ws(p);
    lift_append(ws, vec({1, 0}));
    lift_append(ws, vec({1, 0}));
    CHECK(error_of([&] { lift_append(ws, vec({1, 0})); }) == Errc::CapacityExceeded);
  }
  SUBCASE("pivot failure when the radius is too small") {
    const auto p = LiftingParams::make(2, 2, 1.0);
    LiftingWorkspace<cd> ws(p);
    CHECK(error_of([&] { lift_append(ws, vec({1, 0})); }) == Errc::PivotFailure);
    CHECK(ws.count() == 0);
  }
  SUBCASE("dimension mismatch") {
    LiftingWorkspace<cd> ws(LiftingParams::with_default_radius(2, 2));
    CHECK(error_of([&] { lift_append(ws, vec({1, 0, 0})); }) == Errc::DimensionMismatch);
  }
}

TEST_CASE("projection") {
  const auto p = LiftingParams::with_default_radius(2, 2);
  CHECK(project(vec({1, 2, 3, 4}), p) == vec({1, 2}));
  CHECK(error_of([&] { project(vec({1, 2, 3}), p); }) == Errc::DimensionMismatch);
}

TEST_CASE("real scalar instantiation") {
  using VR = Vector<double>;
  const auto p = LiftingParams::with_default_radius(3, 4);
  LiftingWorkspace<double> ws(p);
  VR a(3), b(3);
  a << 1, 0, 0;
  b << 1, 0, 0;
  const auto x = lift_append(ws, a);
  const auto y = lift_append(ws, b);
  CHECK(std::abs(x.full.dot(y.full)) < 1e-12);
  CHECK(std::abs(y.full.norm() - p.r) < 1e-12);
}

TEST_CASE("completion to a unitary") {
  SUBCASE("basis vector") {
    const M q = complete_to_orthogonal<cd>({vec({1, 0, 0})});
    CHECK((q.adjoint() * q - M::Identity(3, 3)).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((q.col(0) - vec({1, 0, 0})).norm() == 0.0);
  }
  SUBCASE("normalized batch columns") {
    Rng rng(7);
    const auto p = LiftingParams::with_default_radius(3, 4);
    std::vector<V> vs;
    for (int j = 0; j < 4; ++j) vs.push_back(qbc::test::random_unit(rng, 3));
    std::vector<V> cols;
    for (const auto& b : lift_batch(vs, p)) cols.push_back(b.full / p.r);
    const M n = complete_to_orthogonal(cols);
    CHECK((n.adjoint() * n - M::Identity(7, 7)).cwiseAbs().maxCoeff() < 1e-9);
    for (int j = 0; j < 4; ++j) CHECK((n.col(j) - cols[static_cast<std::size_t>(j)]).norm() == 0.0);
  }
  SUBCASE("non-orthonormal input") {
    CHECK(error_of([] { complete_to_orthogonal<cd>({vec({1, 0}), vec({1, 1})}); }) == Errc::NotOrthonormal);
  }
}

TEST_CASE("parameter validation") {
  CHECK(error_of([] { LiftingParams::make(0, 2, 1.0); }) == Errc::InvalidParams);
  CHECK(error_of([] { LiftingParams::make(2, 3, 1.0); }) == Errc::InvalidParams);
  CHECK(error_of([] { LiftingParams::make(2, 2, 0.0); }) == Errc::InvalidParams);
  CHECK(LiftingParams::default_radius(16) == 8.0);
}
