#pragma once

// Leray projection, Stokes resolvent, the implicit Stokes semigroup and the
// node Helmholtz solve for maps.

#include "polyproj/grid.hpp"

namespace polyproj {

struct SaddleSolveStats {
  int iterations = 0;
  double final_residual = 0.0;
  double tolerance = 0.0;
};

struct LerayResult {
  VectorField v;
  ScalarField phi;  ///< potential with v = f - grad(phi), zero mean
  SaddleSolveStats stats;
};

/// f - grad(phi) with Lap phi = div f (Neumann, mean-zero right side).
LerayResult leray_decompose(const VectorField& f);
VectorField leray_project(const VectorField& f);

struct ResolventResult {
  VectorField u;
  ScalarField pressure;  ///< zero mean
  SaddleSolveStats stats;
};

/// (I - a Lap) u + grad f = -w, div u = 0, u = 0 on the walls.
ResolventResult stokes_resolvent(const VectorField& w, double a, double tol = 1e-10);

/// Projection of w followed by `substeps` implicit Stokes steps of size
/// mu * tau / substeps.
VectorField heat_semigroup(const VectorField& w, double mu, double tau, int substeps);

/// (I - a Lap) S = rhs at interior nodes with S = id on boundary nodes.
MapField helmholtz_solve(const MapField& rhs, double a);

}  // namespace polyproj
