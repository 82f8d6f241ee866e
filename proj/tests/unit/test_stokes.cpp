#include <doctest.h>

#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "polyproj/errors.hpp"
#include "polyproj/generators.hpp"
#include "polyproj/stokes.hpp"

using namespace polyproj;
using testutil::kPi;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

VectorField diff(VectorField a, const VectorField& b) {
  a -= b;
  return a;
}
}  // namespace

TEST_SUITE("stokes") {
  TEST_CASE("Leray projection of a gradient vanishes") {
    const Grid g(2, 32);
    const ScalarField p = testutil::random_scalar(g, 1);
    const VectorField gp = gradient(p);
    CHECK(norm_lr(leray_project(gp), 2.0) <= 1e-10 * norm_lr(gp, 2.0));
  }

  TEST_CASE("Leray projection fixes divergence-free fields") {
    for (int d : {2, 3}) {
      const Grid g(d, d == 2 ? 32 : 8);
      const VectorField v = stream_velocity(g, "vortex-pair", 1.0);
      CHECK(norm_lr(diff(leray_project(v), v), kInf) <= 1e-10);
    }
  }

  TEST_CASE("Leray projection is an orthogonal projection") {
    for (int d : {2, 3}) {
      const Grid g(d, d == 2 ? 32 : 8);
      const VectorField f = testutil::random_vector(g, 2);
      const VectorField pf = leray_project(f);
      CHECK(norm_lr(divergence(pf), kInf) <= 1e-10);
      CHECK(norm_lr(diff(leray_project(pf), pf), kInf) <= 1e-10);
      const ScalarField psi = testutil::random_scalar(g, 3);
      CHECK(std::abs(dot(pf, gradient(psi))) <= 1e-10);
      const VectorField h = testutil::random_vector(g, 4);
      CHECK(std::abs(dot(pf, h) - dot(f, leray_project(h))) <= 1e-10);
    }
  }

  TEST_CASE("Stokes resolvent") {
    const Grid g(2, 32);
    SUBCASE("zero data") {
      const ResolventResult r = stokes_resolvent(VectorField(g), 0.1);
      CHECK(norm_lr(r.u, kInf) == 0.0);
      CHECK(norm_lr(r.pressure, kInf) < 1e-14);
    }
    SUBCASE("small a is minus the identity on divergence-free data") {
      const VectorField w = stream_velocity(g, "cellular", 1.0);
      VectorField u = stokes_resolvent(w, 1e-8).u;
      u += w;
      CHECK(norm_lr(u, kInf) < 1e-6 * norm_lr(w, kInf));
    }
    SUBCASE("divergence, energy identity and momentum balance") {
      for (double a : {1e-3, 1e-2, 1e-1}) {
        const VectorField w = testutil::random_vector(g, 5);
        const ResolventResult r = stokes_resolvent(w, a);
        CHECK(norm_lr(divergence(r.u), kInf) <= 1e-10);
        const double lhs = dot(r.u, r.u) + a * dirichlet_energy(r.u);
        const double rhs = -dot(w, r.u);
        CHECK(std::abs(lhs - rhs) <= 1e-9 * std::abs(rhs));
        VectorField res = laplacian(r.u);
        res *= -a;
        res += r.u;
        res += gradient(r.pressure);
        res += w;
        CHECK(norm_lr(res, 2.0) <= 1e-8 * norm_lr(w, 2.0));
      }
    }
    SUBCASE("X_a-type estimate is bounded across a") {
      double worst = 0.0;
      for (double a : {1e-3, 1e-2, 1e-1})
        for (std::uint64_t s = 0; s < 3; ++s) {
          const VectorField w = random_stream_velocity(g, 10 + s, 6, 1.0);
          const VectorField u = stokes_resolvent(w, a).u;
          const MapField un = faces_to_nodes(u);
          const double ratio = norm_xa(un, a, 4.0) / norm_lr(w, 4.0);
          worst = std::max(worst, ratio);
        }
      CHECK(worst < 10.0);
    }
    CHECK_THROWS_AS(stokes_resolvent(VectorField(g), 0.0), InvalidArgument);
  }

  TEST_CASE("heat semigroup") {
    const Grid g(2, 32);
    CHECK(norm_lr(heat_semigroup(VectorField(g), 0.05, 0.1, 4), kInf) == 0.0);
    const VectorField w = testutil::random_vector(g, 6);
    const VectorField out = heat_semigroup(w, 0.05, 0.1, 4);
    CHECK(norm_lr(out, 2.0) <= norm_lr(leray_project(w), 2.0));
    CHECK(norm_lr(divergence(out), kInf) <= 1e-10);
    CHECK_THROWS_AS(heat_semigroup(w, 0.05, 0.1, 0), InvalidArgument);

    // First order in the substep size.
    const VectorField v = stream_velocity(g, "vortex-pair", 1.0);
    const VectorField s1 = heat_semigroup(v, 0.05, 0.1, 1), s2 = heat_semigroup(v, 0.05, 0.1, 2);
    const VectorField s4 = heat_semigroup(v, 0.05, 0.1, 4), s8 = heat_semigroup(v, 0.05, 0.1, 8);
    const double e1 = norm_lr(diff(s1, s2), 2.0), e2 = norm_lr(diff(s2, s4), 2.0), e3 = norm_lr(diff(s4, s8), 2.0);
    CHECK(std::log2(e1 / e2) == doctest::Approx(1.0).epsilon(0.15));
    CHECK(std::log2(e2 / e3) == doctest::Approx(1.0).epsilon(0.1));
  }

  TEST_CASE("heat semigroup gradient estimate") {
    // sup_f ||grad e^{-tA} f||_{L^2} / ||f||_{L^2} over a ladder of stream
    // modes decays like t^{-1/2}; the measured constant stays in a narrow band.
    // Viscosity 0.01 puts mu t inside the band of resolved eigenvalues.
    const Grid g(2, 64);
    std::vector<double> ts{0.01, 0.02, 0.04, 0.08, 0.16}, sup;
    for (double t : ts) {
      double best = 0.0;
      for (int k = 1; k <= 16; ++k) {
        const VectorField f = stream_mode_velocity(g, k, k, 1.0);
        const VectorField u = heat_semigroup(f, 0.01, t, 8);
        best = std::max(best, std::sqrt(0.01 * dirichlet_energy(u)) / norm_lr(f, 2.0));
      }
      sup.push_back(best);
    }
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const double x = std::log(ts[i]), y = std::log(sup[i]);
      sx += x;
      sy += y;
      sxx += x * x;
      sxy += x * y;
    }
    const double m = static_cast<double>(ts.size());
    const double slope = (m * sxy - sx * sy) / (m * sxx - sx * sx);
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.2));
    double cmin = kInf, cmax = 0.0;
    for (std::size_t i = 0; i < ts.size(); ++i) {
      cmin = std::min(cmin, sup[i] * std::sqrt(ts[i]));
      cmax = std::max(cmax, sup[i] * std::sqrt(ts[i]));
    }
    MESSAGE("gradient-estimate constant in [" << cmin << ", " << cmax << "], slope " << slope);
    CHECK(cmax / cmin < 1.5);
  }

  TEST_CASE("node Helmholtz solve") {
    const Grid g(2, 32);
    const MapField id = MapField::identity(g);
    MapField s = helmholtz_solve(id, 0.1);
    MapField d = s - id;
    CHECK(norm_lr(d, kInf) < 1e-13);
    auto manufactured = [](int n) {
      const Grid gg(2, n);
      const MapField star = MapField::from_function(gg, [](const Vec3& x) {
        const double b = std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
        return Vec3{x[0] + 0.05 * b, x[1] - 0.03 * b * b, 0.0};
      });
      // Feed the continuous (I - a Lap) S* and recover S* up to O(h^2).
      const double a = 0.05;
      const MapField rhs = MapField::from_function(gg, [&](const Vec3& x) {
        const double sx = std::sin(kPi * x[0]), sy = std::sin(kPi * x[1]);
        const double cx = std::cos(kPi * x[0]), cy = std::cos(kPi * x[1]);
        const double b = sx * sy;
        const double lap_b = -2.0 * kPi * kPi * b;
        // Lap(b^2) = 2 |grad b|^2 + 2 b Lap b.
        const double grad2 = kPi * kPi * (cx * cx * sy * sy + sx * sx * cy * cy);
        const double lap_b2 = 2.0 * grad2 + 2.0 * b * lap_b;
        return Vec3{x[0] + 0.05 * b - a * 0.05 * lap_b, x[1] - 0.03 * b * b + a * 0.03 * lap_b2, 0.0};
      });
      MapField e = helmholtz_solve(rhs, a) - star;
      return norm_lr(e, kInf);
    };
    CHECK(std::log2(manufactured(16) / manufactured(32)) > 1.8);
    // a -> 0 returns the data.
    MapField rhs = swirl_map(g, 0.5);
    MapField e = helmholtz_solve(rhs, 1e-10) - rhs;
    CHECK(norm_lr(e, kInf) < 1e-8);
  }
}
