#pragma once

// H^1-projection of a map S onto discrete volume-preserving maps:
//   minimize 1/2 |Z - S|^2 + a/2 |DZ - DS|^2  subject to det DZ = 1 per cell,
// solved by an augmented Lagrangian with L-BFGS inner solves. Also the
// residual F, the reference point built from the linearized problem, and the
// smallness quantities delta, delta'.

#include <cstdint>
#include <vector>

#include "polyproj/grid.hpp"
#include "polyproj/polyconvex.hpp"

namespace polyproj {

struct ProjectionProblem {
  explicit ProjectionProblem(MapField data) : s(std::move(data)) {}

  MapField s;
  double a = 0.1;
  double r = 4.0;
  /// Augmentation weight; <= 0 selects 10 a.
  double rho = 0.0;
  double tol_det = 1e-6;
  double tol_opt = 1e-8;
  int max_outer = 60;
  int max_inner = 500;
  /// RK4 steps for the reference-point flow.
  int rk4_steps = 16;

  double effective_rho() const { return rho > 0.0 ? rho : 10.0 * a; }
  /// Throws InvalidArgument on a > 0, r > dim, tolerances > 0 violations.
  void validate() const;
};

struct ProjectionResult {
  MapField z_star;
  ScalarField q_star;
  double residual_f = 0.0;
  double det_violation = 0.0;
  CertificateReport certificate;
  double objective = 0.0;  ///< 1/2 |Z - S|^2 + a/2 |DZ - DS|^2 at z_star
  double grad_norm = 0.0;  ///< final inner gradient norm (L^2 Riesz scaling)
  double rho = 0.0;        ///< final augmentation weight
  int outer_iters = 0;
  int inner_iters = 0;
  /// Augmented-Lagrangian values after every accepted inner step, one list
  /// per outer iteration.
  std::vector<std::vector<double>> inner_values;
};

/// Value and gradient of the discrete augmented Lagrangian
///   h^d [ sum_nodes w_i/2 |Z - S|^2
///         + sum_cells (a/2 |DZ - DS|^2 + q (det DZ - 1) + rho/2 (det DZ - 1)^2) ]
/// with trapezoid node weights w_i. The gradient is the exact derivative with
/// respect to the interior node values; boundary entries are zero. Returns
/// +infinity (and leaves grad untouched) if some cell has det DZ <= 0.1.
double objective_and_gradient(const MapField& z, const ScalarField& q, const ProjectionProblem& prob, double rho,
                              MapField* grad);

/// Smallest cell determinant allowed along the iterate path.
inline constexpr double kDetGuard = 0.1;

/// Augmented-Lagrangian solve from `init` (its boundary must be the identity).
/// Throws MaxIterations, MapDegenerate.
ProjectionResult solve(const ProjectionProblem& prob, const MapField& init);
/// Same, initialized at the reference point.
ProjectionResult solve(const ProjectionProblem& prob);

/// || P[ ((I - a Lap)(z - s)) o z^{-1} ] o z ||_{L^r}, sampled on the faces,
/// with Lap = -D^T D, the Laplacian of the discrete objective.
double residual_F(const MapField& z, const ProjectionProblem& prob);

struct ReferencePoint {
  MapField z_tilde;
  VectorField u_star;
  double det_error = 0.0;  ///< max over cells |det D z_tilde - 1|
};

/// u* solves (I + a A) u* = P (I - a Lap)(S - id); z_tilde is the time-one
/// RK4 flow of u* from the identity.
ReferencePoint reference_point(const ProjectionProblem& prob, int rk4_steps);

/// u* alone (the minimizer of |S - id - u|_{H^1_a} over no-slip
/// divergence-free u).
VectorField linearized_velocity(const ProjectionProblem& prob);

struct SmallnessReport {
  double delta = 0.0;
  double delta_prime = 0.0;
  double k_a_est = 0.0;  ///< 0 when not measured
  double k_a_scaling = 0.0;  ///< a^{-(d+r)/(2r)}
};

/// ka_probe_n < 0 picks the default probe grid (256 in 2D, 48 in 3D); 0 skips
/// the K_a estimate.
SmallnessReport smallness_report(const ProjectionProblem& prob, int ka_probe_n = -1);

/// max over a ladder of bump fields of |Df|_inf / |f|_{X_a} on a probe grid
/// of `probe_n` cells per side (a measured lower bound on K_a).
double k_a_estimate(int dim, double a, double r, int probe_n);

/// Time-one flow of a random smooth divergence-free field: measure-preserving
/// up to discretization error, identity on the boundary. `amplitude` is the
/// largest velocity gradient (so det stays near 1 for amplitude well below 1).
MapField random_feasible_map(const Grid& g, std::uint64_t seed, double amplitude);

struct PressureRecovery {
  double residual = 0.0;   ///< |grad q - DZ^T (I + a D^T D)(Z - S)|_{L^2} at interior nodes
  double reference = 0.0;  ///< |DZ^T (I + a D^T D)(Z - S)|_{L^2}
};

/// Compares the multiplier gradient with the one predicted by stationarity.
PressureRecovery pressure_recovery(const MapField& z, const ScalarField& q, const ProjectionProblem& prob);

/// Unaugmented Lagrangian 1/2|Z-S|^2 + a/2|DZ-DS|^2 + int q (det DZ - 1).
double lagrangian(const MapField& z, const ScalarField& q, const ProjectionProblem& prob);

}  // namespace polyproj
