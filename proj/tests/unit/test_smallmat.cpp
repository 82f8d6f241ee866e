#include <doctest.h>

#include <Eigen/Dense>
#include <algorithm>

#include "helpers.hpp"
#include "polyproj/errors.hpp"
#include "polyproj/smallmat.hpp"

using namespace polyproj;

TEST_SUITE("smallmat") {
  TEST_CASE("det of identity and diagonal") {
    CHECK(det(SmallMat::identity(2)) == 1.0);
    CHECK(det(SmallMat::diagonal({2.0, 3.0})) == 6.0);
    CHECK(det(SmallMat::diagonal({2.0, 3.0, 4.0, 5.0})) == doctest::Approx(120.0));
  }

  TEST_CASE("det matches signed product of singular values") {
    for (int d = 2; d <= 4; ++d)
      for (std::uint64_t s = 0; s < 200; ++s) {
        CounterRng rng(7, s);
        const SmallMat m = testutil::random_mat(rng, d);
        const Eigen::MatrixXd e = testutil::to_eigen(m);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(e);
        const double prod = svd.singularValues().prod();
        const double sign = e.determinant() >= 0.0 ? 1.0 : -1.0;
        CHECK(det(m) == doctest::Approx(sign * prod).epsilon(1e-10));
      }
  }

  TEST_CASE("cof closed form and adjugate identity") {
    const SmallMat m = SmallMat::from_rows({{1.0, 2.0}, {3.0, 4.0}});
    const SmallMat c = cof(m);
    CHECK(c(0, 0) == 4.0);
    CHECK(c(0, 1) == -3.0);
    CHECK(c(1, 0) == -2.0);
    CHECK(c(1, 1) == 1.0);
    const SmallMat i3 = cof(SmallMat::identity(3));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) CHECK(i3(i, j) == (i == j ? 1.0 : 0.0));

    for (int d = 2; d <= 4; ++d)
      for (std::uint64_t s = 0; s < 200; ++s) {
        CounterRng rng(11, s);
        const SmallMat a = testutil::random_mat(rng, d);
        const SmallMat left = a * cof(a).transpose();
        const SmallMat right = a.transpose() * cof(a);
        const double dm = det(a);
        for (int i = 0; i < d; ++i)
          for (int j = 0; j < d; ++j) {
            CHECK(std::abs(left(i, j) - (i == j ? dm : 0.0)) <= 1e-12 * (1.0 + std::abs(dm)));
            CHECK(std::abs(right(i, j) - (i == j ? dm : 0.0)) <= 1e-12 * (1.0 + std::abs(dm)));
          }
      }
  }

  TEST_CASE("sigma_min against an independent SVD") {
    CHECK(sigma_min(SmallMat::identity(3)) == doctest::Approx(1.0));
    CHECK(sigma_min(SmallMat::diagonal({3.0, 0.5})) == doctest::Approx(0.5));
    for (int d = 2; d <= 4; ++d)
      for (std::uint64_t s = 0; s < 300; ++s) {
        CounterRng rng(13, s);
        const SmallMat m = testutil::random_mat(rng, d, -2.0, 2.0);
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(testutil::to_eigen(m));
        const double ref = svd.singularValues().minCoeff();
        // Relative accuracy through the normal equations degrades as sigma^2.
        const double smax = svd.singularValues().maxCoeff();
        CHECK(std::abs(sigma_min(m) - ref) <= 1e-10 * smax * smax / std::max(ref, 1e-3));
      }
  }

  TEST_CASE("symmetric eigenvalues against Eigen") {
    for (std::uint64_t s = 0; s < 100; ++s) {
      CounterRng rng(17, s);
      SmallMat m = testutil::random_mat(rng, 3);
      m = m + m.transpose();
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(testutil::to_eigen(m));
      const auto ev = symmetric_eigenvalues(m);
      for (int i = 0; i < 3; ++i) CHECK(ev[static_cast<std::size_t>(i)] == doctest::Approx(es.eigenvalues()(i)).epsilon(1e-12));
    }
  }

  TEST_CASE("cofactor inequality sides") {
    const SmallMat m = SmallMat::from_rows({{2.0, 1.0}, {0.5, 1.5}});
    const InequalitySides same = cofactor_inequality_sides(m, m, 3.0);
    CHECK(same.lhs == 0.0);
    CHECK(same.rhs == 0.0);

    const InequalitySides s = cofactor_inequality_sides(SmallMat::identity(2), SmallMat::diagonal({2.0, 2.0}), 1.0);
    CHECK(s.lhs == doctest::Approx(2.0));
    CHECK(s.rhs == doctest::Approx(-2.0));

    CHECK_THROWS_AS(cofactor_inequality_sides(SmallMat(2), SmallMat::identity(2), 1.0), InvalidArgument);
  }

  TEST_CASE("constants") {
    CHECK(kCofactorConstant3d == doctest::Approx(5.0980762114));
    CHECK(kCertificateDenominator == doctest::Approx(10.1961524227));
    CHECK(default_cofactor_constant(2) == 1.0);
  }

  TEST_CASE("bad dimension") { CHECK_THROWS_AS(SmallMat(5), InvalidArgument); }
}
