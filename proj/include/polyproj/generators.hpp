#pragma once

// Analytic test data: a measure-preserving swirl map and smooth
// divergence-free velocity fields built from stream functions.

#include <cstdint>
#include <string>

#include "polyproj/grid.hpp"

namespace polyproj {

/// Rotation about the box centre by an angle amplitude * bump(radius), with
/// the bump supported in a ball of radius 0.4 (in 3D the rotation axis is
/// e_3). Area/volume preserving and the identity near the walls.
Vec3 swirl_point(const Vec3& x, int dim, double amplitude);
MapField swirl_map(const Grid& g, double amplitude);

/// S = id + epsilon u at the nodes, u the vortex-pair field scaled to unit
/// maximal node speed. Divergence-free displacement, not measure-preserving.
MapField epsilon_family_map(const Grid& g, double epsilon);

/// Named stream-function velocity fields, discretely divergence-free with zero
/// normal flux (face values are exact flux differences of the node stream
/// function). Known names: "vortex-pair", "bump-swirl", "zero", "cellular".
/// `amplitude` scales the stream function.
VectorField stream_velocity(const Grid& g, const std::string& name, double amplitude);

/// Single windowed stream mode sin(pi x) sin(pi y) sin(k pi x) sin(l pi y)
/// (times sin(pi z) sin(k pi z) in 3D).
VectorField stream_mode_velocity(const Grid& g, int k, int l, double amplitude);

/// A random smooth divergence-free field: sum of `modes` Fourier stream modes
/// sin(k pi x) sin(l pi y) with random coefficients decaying like 1/(k^2+l^2).
VectorField random_stream_velocity(const Grid& g, std::uint64_t seed, int modes, double amplitude);

}  // namespace polyproj
