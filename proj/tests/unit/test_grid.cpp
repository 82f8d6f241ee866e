#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <limits>

#include "helpers.hpp"
#include "polyproj/errors.hpp"
#include "polyproj/field_io.hpp"
#include "polyproj/generators.hpp"
#include "polyproj/grid.hpp"

using namespace polyproj;
using testutil::kPi;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Vec3 smooth_map_point(const Vec3& x, double eps) {
  const double b = std::sin(kPi * x[0]) * std::sin(kPi * x[1]);
  return {x[0] + eps * b * std::sin(2.0 * kPi * x[1]), x[1] + eps * b * std::cos(kPi * x[0]), x[2]};
}

// Analytic Jacobian of smooth_map_point.
SmallMat smooth_map_jacobian(const Vec3& x, double eps) {
  const double sx = std::sin(kPi * x[0]), cx = std::cos(kPi * x[0]);
  const double sy = std::sin(kPi * x[1]), cy = std::cos(kPi * x[1]);
  const double s2 = std::sin(2.0 * kPi * x[1]), c2 = std::cos(2.0 * kPi * x[1]);
  SmallMat j = SmallMat::identity(2);
  j(0, 0) += eps * kPi * cx * sy * s2;
  j(0, 1) += eps * (kPi * sx * cy * s2 + 2.0 * kPi * sx * sy * c2);
  j(1, 0) += eps * (kPi * cx * sy * cx - kPi * sx * sy * sx);
  j(1, 1) += eps * kPi * sx * cy * cx;
  return j;
}

double max_gradient_error(int n) {
  const Grid g(2, n);
  const double eps = 0.05;
  const MapField z = MapField::from_function(g, [&](const Vec3& x) { return smooth_map_point(x, eps); });
  const CellMatrices dz = deformation_gradient(z);
  double err = 0.0;
  for (std::size_t c = 0; c < g.num_cells(); ++c) {
    const auto id = Grid::unindex(g.cell_dims(), c);
    const SmallMat ref = smooth_map_jacobian(g.cell_center(id[0], id[1], id[2]), eps);
    err = std::max(err, (dz.m[c] - ref).frobenius_norm());
  }
  return err;
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("construction and layouts") {
    CHECK_THROWS_AS(Grid(4, 8), InvalidArgument);
    CHECK_THROWS_AS(Grid(2, 3), InvalidArgument);
    const Grid g(3, 8);
    CHECK(g.num_nodes() == 729);
    CHECK(g.num_cells() == 512);
    CHECK(g.num_faces(1) == 8 * 9 * 8);
    CHECK(g.h() * g.n() == 1.0);
  }

  TEST_CASE("deformation gradient exact on affine maps") {
    for (int d : {2, 3}) {
      const Grid g(d, 8);
      const CellMatrices id = deformation_gradient(MapField::identity(g));
      for (const SmallMat& m : id.m) CHECK((m - SmallMat::identity(d)).frobenius_norm() < 1e-13);
    }
    const Grid g(2, 8);
    const double eps = 0.3;
    const MapField shear = MapField::from_function(g, [&](const Vec3& x) { return Vec3{x[0] + eps * x[1], x[1], 0.0}; });
    for (const SmallMat& m : deformation_gradient(shear).m) {
      CHECK(m(0, 1) == doctest::Approx(eps));
      CHECK(m(0, 0) == doctest::Approx(1.0));
      CHECK(std::abs(m(1, 0)) < 1e-13);
    }
  }

  TEST_CASE("deformation gradient is second order") {
    const double e16 = max_gradient_error(16), e32 = max_gradient_error(32), e64 = max_gradient_error(64);
    const double p1 = std::log2(e16 / e32), p2 = std::log2(e32 / e64);
    CHECK(p1 > 1.8);
    CHECK(p2 > 1.8);
  }

  TEST_CASE("discrete null Lagrangian") {
    // In 2D the averaged stencil makes sum(det) h^2 the exact enclosed area,
    // so the cofactor field is discretely divergence-free at every node.
    const Grid g(2, 16);
    const MapField z = MapField::from_function(g, [&](const Vec3& x) { return smooth_map_point(x, 0.1); });
    const ScalarField dets = cell_determinant(z);
    CHECK(mean(dets) == doctest::Approx(1.0).epsilon(1e-14));
    CellMatrices cofs = deformation_gradient(z);
    for (SmallMat& m : cofs.m) m = cof(m);
    const MapField piola = deformation_gradient_adjoint(cofs);
    CHECK(norm_lr(piola, kInf) < 1e-11);

    // In 3D the row divergence of cof(DZ) vanishes under refinement.
    auto piola3 = [](int n) {
      const Grid g3(3, n);
      const MapField z3 = MapField::from_function(g3, [](const Vec3& x) {
        const double b = std::sin(kPi * x[0]) * std::sin(kPi * x[1]) * std::sin(kPi * x[2]);
        return Vec3{x[0] + 0.05 * b, x[1] + 0.05 * b * x[0], x[2] - 0.05 * b * x[1]};
      });
      CellMatrices c3 = deformation_gradient(z3);
      for (SmallMat& m : c3.m) m = cof(m);
      return norm_lr(deformation_gradient_adjoint(c3), kInf);
    };
    const double a = piola3(8), b = piola3(16);
    CHECK(b < a);
  }

  TEST_CASE("divergence and gradient are negative adjoints") {
    for (int d : {2, 3}) {
      const Grid g(d, d == 2 ? 16 : 8);
      const VectorField v = testutil::random_vector(g, 1);
      const ScalarField p = testutil::random_scalar(g, 2);
      const double lhs = dot(divergence(v), p);
      const double rhs = -dot(v, gradient(p));
      CHECK(std::abs(lhs - rhs) <= 1e-13 * (1.0 + std::abs(lhs)));
    }
  }

  TEST_CASE("constants are in the kernels") {
    const Grid g(2, 8);
    ScalarField one(g);
    for (std::size_t i = 0; i < one.size(); ++i) one[i] = 1.0;
    CHECK(norm_lr(laplacian(one), kInf) == 0.0);
    CHECK(norm_lr(gradient(one), kInf) == 0.0);
    const MapField id = MapField::identity(g);
    CHECK(norm_lr(laplacian(id), kInf) < 1e-10);
  }

  TEST_CASE("stencils are linear and symmetric") {
    const Grid g(2, 16);
    const VectorField u = testutil::random_vector(g, 3), v = testutil::random_vector(g, 4);
    VectorField comb = u;
    comb *= 2.0;
    comb.axpy(-3.0, v);
    VectorField lin = laplacian(u);
    lin *= 2.0;
    lin.axpy(-3.0, laplacian(v));
    VectorField diff = laplacian(comb);
    diff -= lin;
    CHECK(norm_lr(diff, kInf) <= 1e-13 * norm_lr(lin, kInf));
    CHECK(dot(laplacian(u), v) == doctest::Approx(dot(u, laplacian(v))).epsilon(1e-12));
    CHECK(dirichlet_energy(u) > 0.0);
    const ScalarField p = testutil::random_scalar(g, 5), q = testutil::random_scalar(g, 6);
    CHECK(dot(laplacian(p), q) == doctest::Approx(dot(p, laplacian(q))).epsilon(1e-12));
  }

  TEST_CASE("laplacians converge at second order") {
    auto cell_err = [](int n) {
      const Grid g(2, n);
      auto f = [](const Vec3& x) { return std::cos(2.0 * kPi * x[0]) * std::cos(2.0 * kPi * x[1]); };
      const ScalarField lap = laplacian(ScalarField::from_function(g, f));
      const ScalarField ref = ScalarField::from_function(g, f);
      double e = 0.0;
      for (std::size_t i = 0; i < lap.size(); ++i) e = std::max(e, std::abs(lap[i] + 8.0 * kPi * kPi * ref[i]));
      return e;
    };
    auto node_err = [](int n) {
      const Grid g(2, n);
      auto f = [](const Vec3& x) { return Vec3{std::sin(2.0 * kPi * x[0]) * std::sin(2.0 * kPi * x[1]), 0.0, 0.0}; };
      const MapField lap = laplacian(MapField::from_function(g, f));
      const MapField ref = MapField::from_function(g, f);
      double e = 0.0;
      const auto nd = g.node_dims();
      for (std::size_t i = 0; i < g.num_nodes(); ++i) {
        const auto id = Grid::unindex(nd, i);
        if (g.is_boundary_node(id[0], id[1], id[2])) continue;
        e = std::max(e, std::abs(lap.at(i, 0) + 8.0 * kPi * kPi * ref.at(i, 0)));
      }
      return e;
    };
    CHECK(std::log2(cell_err(16) / cell_err(32)) > 1.8);
    CHECK(std::log2(node_err(16) / node_err(32)) > 1.8);
  }

  TEST_CASE("norms") {
    const Grid g(2, 32);
    CHECK(norm_lr(ScalarField(g), 2.0) == 0.0);
    ScalarField one(g);
    for (std::size_t i = 0; i < one.size(); ++i) one[i] = 1.0;
    for (double r : {1.0, 2.0, 4.0, kInf}) CHECK(norm_lr(one, r) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(norm_lr(one, 0.5), InvalidArgument);
    const ScalarField x1 = ScalarField::from_function(g, [](const Vec3& x) { return x[0]; });
    CHECK(std::abs(norm_lr(x1, 2.0) - 1.0 / std::sqrt(3.0)) < 2.0 * g.h() * g.h());
    MapField ones(g);
    for (std::size_t i = 0; i < ones.num_nodes(); ++i) ones.at(i, 0) = 1.0;
    CHECK(norm_lr(ones, 3.0) == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("X_a norm") {
    const Grid g(2, 32);
    CHECK(norm_xa(MapField(g), 0.1, 4.0) == 0.0);
    const MapField aff = MapField::from_function(g, [](const Vec3& x) { return Vec3{0.3 * x[0] - x[1] + 2.0, 0.5 * x[1], 0.0}; });
    CHECK(norm_xa(aff, 0.1, 4.0) == doctest::Approx(norm_lr(aff, 4.0)).epsilon(1e-9));
    auto err = [](int n) {
      const Grid gg(2, n);
      const MapField f = MapField::from_function(gg, [](const Vec3& x) { return Vec3{std::sin(2.0 * kPi * x[0]), 0.0, 0.0}; });
      return std::abs(hessian_norm_lr(f, 2.0) - 4.0 * kPi * kPi / std::sqrt(2.0));
    };
    const double e64 = err(64), e128 = err(128);
    CHECK(e64 < 0.01 * 4.0 * kPi * kPi);
    CHECK(std::log2(e64 / e128) > 1.7);
  }

  TEST_CASE("composition") {
    const Grid g(2, 16);
    const MapField id = MapField::identity(g);
    const ScalarField p = testutil::random_scalar(g, 7);
    const VectorField v = testutil::random_vector(g, 8);
    ScalarField dp = compose(p, id);
    dp -= p;
    CHECK(norm_lr(dp, kInf) < 1e-14);
    VectorField dv = compose(v, id);
    dv -= v;
    CHECK(norm_lr(dv, kInf) < 1e-14);

    // Linear functions compose exactly, whatever the (interior) map.
    const MapField z = MapField::from_function(g, [&](const Vec3& x) { return smooth_map_point(x, 0.1); });
    const ScalarField lin = ScalarField::from_function(g, [](const Vec3& x) { return 2.0 * x[0] - 0.5 * x[1] + 1.0; });
    const ScalarField lz = compose(lin, z);
    double e = 0.0;
    for (std::size_t c = 0; c < g.num_cells(); ++c) {
      const auto idc = Grid::unindex(g.cell_dims(), c);
      const Vec3 pz = sample(z, g.cell_center(idc[0], idc[1], idc[2]));
      e = std::max(e, std::abs(lz[c] - (2.0 * pz[0] - 0.5 * pz[1] + 1.0)));
    }
    CHECK(e < 1e-13);
    const MapField lm = MapField::from_function(g, [](const Vec3& x) { return Vec3{x[0] + x[1], 3.0 * x[1], 0.0}; });
    const MapField lmz = compose(lm, z);
    for (std::size_t i = 0; i < g.num_nodes(); ++i) CHECK(std::abs(lmz.at(i, 1) - 3.0 * z.at(i, 1)) < 1e-13);

    MapField out = MapField::identity(g);
    out.at(g.num_nodes() / 2, 0) = 1.5;
    CHECK_THROWS_AS(compose(lm, out), DomainExit);
  }

  TEST_CASE("composition converges at second order and preserves L2 under swirls") {
    auto err = [](int n) {
      const Grid g(2, n);
      auto f = [](const Vec3& x) { return std::cos(kPi * x[0]) * std::sin(2.0 * kPi * x[1]); };
      const ScalarField fz = compose(ScalarField::from_function(g, f), swirl_map(g, 1.0));
      double e = 0.0;
      for (std::size_t c = 0; c < g.num_cells(); ++c) {
        const auto id = Grid::unindex(g.cell_dims(), c);
        e = std::max(e, std::abs(fz[c] - f(swirl_point(g.cell_center(id[0], id[1], id[2]), 2, 1.0))));
      }
      return e;
    };
    CHECK(std::log2(err(16) / err(32)) > 1.7);
    CHECK(std::log2(err(32) / err(64)) > 1.7);

    auto l2gap = [](int n) {
      const Grid g(2, n);
      const ScalarField f = ScalarField::from_function(g, [](const Vec3& x) { return std::exp(x[0]) * std::cos(3.0 * x[1]); });
      return std::abs(norm_lr(compose(f, swirl_map(g, 1.0)), 2.0) - norm_lr(f, 2.0));
    };
    CHECK(l2gap(64) < l2gap(16));
    CHECK(l2gap(64) < 1e-3);
  }

  TEST_CASE("map inversion") {
    const Grid g(2, 16);
    const MapField id = MapField::identity(g);
    MapField inv = invert_map(id);
    for (std::size_t i = 0; i < inv.raw().size(); ++i) CHECK(std::abs(inv.raw()[i] - id.raw()[i]) < 1e-14);

    const MapField z = MapField::from_function(g, [&](const Vec3& x) { return smooth_map_point(x, 0.08); });
    inv = invert_map(z);
    const MapField back = compose(z, inv);
    MapField diff = back - id;
    CHECK(norm_lr(diff, kInf) < 1e-9);

    // Interior translation: inverse shifts back away from the boundary layer.
    const Grid g2(2, 32);
    MapField shift = MapField::identity(g2);
    for (std::size_t i = 0; i < shift.num_nodes(); ++i) {
      const auto nid = Grid::unindex(g2.node_dims(), i);
      if (nid[0] >= 4 && nid[0] <= 28 && nid[1] >= 4 && nid[1] <= 28) shift.at(i, 0) += 0.01;
    }
    const MapField sinv = invert_map(shift);
    const std::size_t mid = Grid::index(g2.node_dims(), 16, 16, 0);
    CHECK(sinv.at(mid, 0) == doctest::Approx(0.5 - 0.01).epsilon(1e-12));
  }

  TEST_CASE("transfers reproduce linear fields in the interior") {
    const Grid g(2, 16);
    const MapField lin = MapField::from_function(g, [](const Vec3& x) { return Vec3{x[1], 2.0 * x[0], 0.0}; });
    const VectorField f = nodes_to_faces(lin);
    const MapField back = faces_to_nodes(f);
    const auto nd = g.node_dims();
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      const auto id = Grid::unindex(nd, i);
      if (id[0] < 2 || id[1] < 2 || id[0] > 14 || id[1] > 14) continue;
      CHECK(back.at(i, 0) == doctest::Approx(lin.at(i, 0)));
      CHECK(back.at(i, 1) == doctest::Approx(lin.at(i, 1)));
    }
  }

  TEST_CASE("stream generators are discretely divergence-free") {
    for (int d : {2, 3}) {
      const Grid g(d, d == 2 ? 32 : 8);
      for (const char* name : {"vortex-pair", "bump-swirl", "cellular"}) {
        const VectorField v = stream_velocity(g, name, 1.0);
        CHECK(norm_lr(divergence(v), kInf) < 1e-11);
        CHECK(norm_lr(v, 2.0) > 0.0);
      }
    }
    const Grid g(2, 32);
    CHECK(norm_lr(divergence(random_stream_velocity(g, 3, 4, 1.0)), kInf) < 1e-11);
    CHECK_THROWS_AS(stream_velocity(g, "nope", 1.0), InvalidArgument);
  }

  TEST_CASE("swirl map preserves area") {
    auto err = [](int n) {
      const Grid g(2, n);
      const ScalarField dets = cell_determinant(swirl_map(g, 1.0));
      double e = 0.0;
      for (std::size_t i = 0; i < dets.size(); ++i) e = std::max(e, std::abs(dets[i] - 1.0));
      return e;
    };
    CHECK(std::log2(err(16) / err(32)) > 1.7);
  }

  TEST_CASE("field dump round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "polyproj_io_test";
    std::filesystem::remove_all(dir);
    const Grid g(3, 4);
    const VectorField v = testutil::random_vector(g, 9);
    const MapField z = swirl_map(g, 0.5);
    const ScalarField p = testutil::random_scalar(g, 10);
    write_field(dir, "v", v, 0.25);
    write_field(dir, "z", z, 0.25);
    write_field(dir, "p", p, 0.25);
    const FieldDump dv = read_field(dir, "v");
    CHECK(dv.layout == "face");
    CHECK(dv.time == 0.25);
    const VectorField v2 = to_vector_field(dv);
    for (int c = 0; c < 3; ++c) CHECK(v2.comp(c) == v.comp(c));
    CHECK(to_map_field(read_field(dir, "z")).raw() == z.raw());
    const ScalarField p2 = to_scalar_field(read_field(dir, "p"));
    for (std::size_t i = 0; i < p.size(); ++i) CHECK(p2[i] == p[i]);
    CHECK(std::filesystem::file_size(dir / "p.bin") == p.size() * 8);
    std::filesystem::remove_all(dir);
  }
}
