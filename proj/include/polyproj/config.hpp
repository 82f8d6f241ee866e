#pragma once

// Run configuration for the command-line tool: one JSON document with a
// section per command. Parsing is strict; unknown keys and wrong types are
// errors. Every field has a default, listed in README.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include "polyproj/errors.hpp"
#include "polyproj/nse.hpp"
#include "polyproj/polyconvex.hpp"
#include "polyproj/projection.hpp"

namespace polyproj {

class ConfigError : public InvalidArgument {
 public:
  using InvalidArgument::InvalidArgument;
};

struct MatrixSection {
  int dim = 2;
  std::uint64_t samples = 1000000;
  double entry_range = 3.0;
  double constant_c = 0.0;  ///< <= 0: dimension default
  double sigma_floor = 1e-3;
  double tolerance = 1e-9;
  bool counterexample = false;
};

struct ProjectSection {
  int dim = 2;
  int n = 32;
  double a = 0.1;
  double r = 4.0;
  double rho = 0.0;
  double tol_det = 1e-6;
  double tol_opt = 1e-8;
  int max_outer = 60;
  int max_inner = 500;
  int rk4_steps = 16;
  /// "identity", "swirl", "epsilon-family" or "random-feasible" (seeded).
  std::string data = "swirl";
  /// Swirl angle, epsilon, or the random map's velocity-gradient bound.
  double amplitude = 0.2;
  /// "reference", "identity", "data" or "random-feasible" (seeded).
  std::string init = "reference";
  double init_amplitude = 0.3;
  /// Probe grid for the K_a estimate (0: skip it).
  int ka_probe_n = 0;
  bool dump_fields = true;
};

struct ConvergenceSection {
  int refinements = 2;
  /// Also run the Chorin reference at every tau and report the discrepancy.
  bool chorin = true;
};

struct RunConfig {
  std::optional<std::uint64_t> seed;
  int threads = 0;  ///< 0: hardware parallelism
  MatrixSection matrix;
  ProjectSection project;
  NseConfig nse;  ///< nse.seed is taken from the top-level seed
  ConvergenceSection convergence;
};

/// Throws ConfigError on malformed JSON, unknown keys, wrong types or
/// out-of-range values.
RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::filesystem::path& path);

/// The fully resolved configuration, every field present.
std::string to_json_text(const RunConfig& cfg);

/// True if the command draws random numbers with this configuration.
bool needs_seed(const RunConfig& cfg, const std::string& command);

ProjectionProblem make_projection_problem(const RunConfig& cfg);
/// Initial map for the configured init kind (the reference point is built
/// by solve itself, so "reference" returns std::nullopt).
std::optional<MapField> make_projection_init(const RunConfig& cfg, const ProjectionProblem& prob);

}  // namespace polyproj
