#pragma once

// Exact inverses of the constant-coefficient grid operators by real-to-real
// trigonometric transforms (FFTW). Used as preconditioners, which makes the
// conjugate-gradient loops converge in one or two sweeps.

#include <functional>

#include "polyproj/grid.hpp"

namespace polyproj::spectral {

/// Pseudo-inverse of -Lap on cell scalars with Neumann walls; the constant
/// mode of the input is dropped and the output has zero mean.
ScalarField neumann_poisson_inverse(const ScalarField& rhs);

/// Divides each Neumann cosine mode of rhs by den(lambda), lambda being the
/// eigenvalue of -Lap for that mode. den must be positive.
ScalarField neumann_cell_filter(const ScalarField& rhs, const std::function<double(double)>& den);

/// Inverse of (I - a Lap) on MAC faces with no-slip walls, per component.
/// Boundary-normal faces of the input are ignored and zero in the output.
VectorField face_helmholtz_inverse(const VectorField& rhs, double a);

/// Inverse of (I - a Lap) on interior nodes with homogeneous Dirichlet data;
/// boundary entries of the output are zero.
MapField node_helmholtz_inverse(const MapField& rhs, double a);

/// Inverse of scale * (I + a D^T D) on interior nodes, where D is the
/// cell-averaged deformation-gradient stencil (exact Hessian of the quadratic
/// part of the projection objective). Boundary entries are zero.
MapField node_quadratic_inverse(const MapField& rhs, double a, double scale);

}  // namespace polyproj::spectral
