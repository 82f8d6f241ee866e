#pragma once

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "polyproj/grid.hpp"
#include "polyproj/rng.hpp"
#include "polyproj/smallmat.hpp"

namespace testutil {

inline constexpr double kPi = std::numbers::pi;

inline polyproj::SmallMat random_mat(polyproj::CounterRng& rng, int d, double lo = -1.0, double hi = 1.0) {
  polyproj::SmallMat m(d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) m(i, j) = rng.uniform(lo, hi);
  return m;
}

inline Eigen::MatrixXd to_eigen(const polyproj::SmallMat& m) {
  Eigen::MatrixXd e(m.dim(), m.dim());
  for (int i = 0; i < m.dim(); ++i)
    for (int j = 0; j < m.dim(); ++j) e(i, j) = m(i, j);
  return e;
}

inline polyproj::ScalarField random_scalar(const polyproj::Grid& g, std::uint64_t seed) {
  polyproj::CounterRng rng(seed, 0);
  polyproj::ScalarField f(g);
  for (std::size_t i = 0; i < f.size(); ++i) f[i] = rng.uniform(-1.0, 1.0);
  return f;
}

inline polyproj::VectorField random_vector(const polyproj::Grid& g, std::uint64_t seed) {
  polyproj::CounterRng rng(seed, 1);
  polyproj::VectorField v(g);
  for (int c = 0; c < g.dim(); ++c)
    for (double& x : v.comp(c)) x = rng.uniform(-1.0, 1.0);
  v.zero_boundary_normal();
  return v;
}

/// Smooth divergence-free no-slip field from the stream function
/// sin^2(pi x) sin^2(pi y) (2D), evaluated by exact face fluxes.
inline polyproj::VectorField smooth_div_free(const polyproj::Grid& g) {
  auto psi = [](double x, double y) {
    const double sx = std::sin(kPi * x), sy = std::sin(kPi * y);
    return sx * sx * sy * sy;
  };
  polyproj::VectorField v(g);
  const double h = g.h();
  // u = dpsi/dy, v = -dpsi/dx as node differences across each face.
  for (int c = 0; c < 2; ++c) {
    const auto fd = g.face_dims(c);
    auto& comp = v.comp(c);
    for (std::size_t i = 0; i < comp.size(); ++i) {
      const auto id = polyproj::Grid::unindex(fd, i);
      if (c == 0)
        comp[i] = (psi(id[0] * h, (id[1] + 1) * h) - psi(id[0] * h, id[1] * h)) / h;
      else
        comp[i] = -(psi((id[0] + 1) * h, id[1] * h) - psi(id[0] * h, id[1] * h)) / h;
    }
  }
  v.zero_boundary_normal();
  return v;
}

}  // namespace testutil
