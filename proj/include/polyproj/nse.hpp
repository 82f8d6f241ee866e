#pragma once

// Minimizing-movement scheme for incompressible Navier-Stokes: each step
// projects S = (I - mu tau Lap)^{-1}(id + tau v) onto volume-preserving maps,
// pushes v forward by the projected map, and applies the Stokes semigroup.
// Also the Lagrangian flow X, per-step diagnostics, the Duhamel check, the
// doubling-time scan and a Chorin-type reference solver.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "polyproj/errors.hpp"
#include "polyproj/grid.hpp"

namespace polyproj {

/// max |v| tau exceeded 4 h: composition would leave the interpolation regime.
class StepTooLarge : public Error {
 public:
  using Error::Error;
};

struct NseConfig {
  int dim = 2;
  int n = 64;
  double r = 4.0;
  double mu = 0.05;
  double tau = 1.0 / 64.0;
  double t_end = 0.25;
  int semigroup_substeps = 4;

  // Projection sub-problem.
  double proj_rho = 0.0;  ///< <= 0 selects 10 a
  double proj_tol_det = 1e-6;
  double proj_tol_opt = 1e-8;
  int proj_max_outer = 60;
  int proj_max_inner = 500;
  int rk4_steps = 16;

  /// Named generator from stream_velocity ("vortex-pair", "bump-swirl",
  /// "zero", "cellular") or "random" (seeded).
  std::string initial_condition = "vortex-pair";
  double amplitude = 0.1;
  std::uint64_t seed = 1;

  /// Growth guard: stop once |v_n|_{L^r} > 2 c0 |v_0|_{L^r}.
  double c0 = 1.0;
  /// Field snapshots every this many steps (0: none).
  int snapshot_every = 0;
  /// Evaluate the Duhamel gap against the initial-condition-independent
  /// test field at every step (costs one semigroup chain per step).
  bool duhamel = false;
  /// Record wall-clock seconds in the CSV (breaks byte-identical output).
  bool record_wallclock = false;

  int steps() const;
  /// Throws InvalidArgument.
  void validate() const;
};

struct NseRow {
  int step = 0;
  double time = 0.0;
  double l2_energy = 0.0;  ///< |v|^2_{L^2}
  double lr_norm = 0.0;
  double dissipation_lhs = 0.0;  ///< |v_{n}|^2 + 2 mu tau |Dv_{n}|^2
  double dissipation_rhs = 0.0;  ///< |v_{n-1}|^2
  double det_err_z_max = 0.0;
  double det_err_x_max = 0.0;
  double sigma_min = 1.0;
  double q_osc = 0.0;
  double q_threshold = 0.0;
  bool cert_pass = true;
  double proj_residual_f = 0.0;
  std::optional<double> duhamel_gap;
  double wallclock_s = 0.0;
};

struct NseState {
  int step = 0;
  double time = 0.0;
  VectorField v;
  MapField x_flow;
  NseRow row;
};

/// Discrete divergence-free, no-slip initial state with X = id.
NseState initial_state(const NseConfig& cfg);

struct StepOutput {
  NseState state;
  MapField z;  ///< Z_{n+1}
};

StepOutput nse_step(const NseState& state, const NseConfig& cfg);

struct Trajectory {
  std::vector<VectorField> v;  ///< v_0 .. v_N
  std::vector<MapField> z;     ///< Z_1 .. Z_N
  MapField x_flow;             ///< X_N
  std::vector<NseRow> rows;    ///< one per state, row 0 is the initial state
  bool doubling_exceeded = false;
  std::string stop_reason;
};

/// Iterates nse_step to t_end. When out_dir is given, writes snapshots there.
Trajectory run(const NseConfig& cfg, const std::filesystem::path* out_dir = nullptr);

/// The diagnostics table with the fixed column set.
void write_csv(const std::vector<NseRow>& rows, std::ostream& os);

/// Smooth divergence-free no-slip test fields for the Duhamel check, indexed
/// 0, 1, 2.
VectorField duhamel_test_field(const Grid& g, int which);

/// |(v_{n+1}, f) - (v_0, f_{n+1}) - sum_k (v_k, f_{n+1-k} o Z_{k+1} - f_{n+1-k})|
/// with f_j the discrete semigroup applied j times to f, for n + 1 = upto_n.
double duhamel_residual(const Trajectory& traj, const VectorField& f, int upto_n, const NseConfig& cfg);

struct DoublingReport {
  std::optional<double> t_doubling;
  double alpha = 0.0;  ///< 1/2 + d / (2 r)
};

DoublingReport doubling_time_report(const Trajectory& traj, const NseConfig& cfg);

/// Semi-Lagrangian advection of v along itself (skipped when advect is
/// false), then one implicit Stokes step of size mu tau.
VectorField chorin_reference_step(const VectorField& v, double mu, double tau, bool advect = true);

/// Chorin trajectory v_0 .. v_N from the same initial state.
std::vector<VectorField> chorin_reference_run(const NseConfig& cfg);

struct RefinementLevel {
  double tau = 0.0;
  Trajectory trajectory;
  /// sqrt(sum_k tau |v_k - v_ref,k|^2) against the Chorin run (0 if skipped).
  double chorin_discrepancy = 0.0;
  /// chorin_discrepancy / (tau + h^2).
  double chorin_constant = 0.0;
};

struct RefinementReport {
  std::vector<RefinementLevel> levels;  ///< tau, tau/2, ..., tau/2^refinements
  std::vector<double> v_diffs;          ///< |v_tau(T) - v_{tau/2}(T)|_{L^2}
  std::vector<double> x_diffs;          ///< |X_tau(T) - X_{tau/2}(T)|_{L^1}
  std::vector<double> v_orders;         ///< log2 of consecutive v_diffs ratios
  std::vector<double> x_orders;
};

/// Runs the scheme at cfg.tau halved `refinements` times on the same grid.
RefinementReport refinement_study(const NseConfig& cfg, int refinements, bool with_chorin);

}  // namespace polyproj
