// Command-line front end: verify-matrix-ineq, project, nse, convergence.
// Exit codes: 0 success, 2 usage or config error, 3 solver did not converge,
// 4 an invariant was violated during the run.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "polyproj/config.hpp"
#include "polyproj/field_io.hpp"
#include "polyproj/nse.hpp"
#include "polyproj/parallel.hpp"
#include "polyproj/polyconvex.hpp"
#include "polyproj/projection.hpp"

namespace fs = std::filesystem;
using namespace polyproj;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitSolver = 3;
constexpr int kExitInvariant = 4;

constexpr double kEnergySlack = 1e-6;
constexpr double kFlowDetBound = 5e-3;

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
};

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An empty command skips the seed check (the caller does it after overrides).
RunConfig resolve_config(const CommonFlags& flags, const std::string& command) {
  RunConfig cfg = flags.config_path.empty() ? parse_run_config("{}") : load_run_config(flags.config_path);
  if (flags.seed) {
    cfg.seed = flags.seed;
    cfg.nse.seed = *flags.seed;
  }
  if (!command.empty() && needs_seed(cfg, command) && !cfg.seed)
    throw UsageError(command + ": this configuration is randomized; give a seed (--seed N or \"seed\" in the config)");
  // --threads, then POLYPROJ_THREADS, then the config field, then hardware.
  int threads = cfg.threads;
  if (const int env = thread_count_from_env(); env > 0) threads = env;
  if (flags.threads) threads = *flags.threads;
  cfg.threads = threads;
  set_thread_count(threads);
  return cfg;
}

fs::path prepare_out_dir(const std::string& dir, const RunConfig& cfg) {
  const fs::path out(dir);
  fs::create_directories(out);
  std::ofstream(out / "config.json") << to_json_text(cfg);
  return out;
}

void write_json(const fs::path& path, const nlohmann::ordered_json& j) { std::ofstream(path) << j.dump(2) << "\n"; }

int cmd_verify_matrix_ineq(RunConfig cfg, std::optional<int> dim, std::optional<std::uint64_t> samples, bool counterexample,
                           const std::string& out_dir) {
  if (dim) cfg.matrix.dim = *dim;
  if (samples) cfg.matrix.samples = *samples;
  if (counterexample) cfg.matrix.counterexample = true;
  if (cfg.matrix.counterexample && cfg.matrix.dim != 4) throw UsageError("verify-matrix-ineq: --counterexample requires --dim 4");
  if (needs_seed(cfg, "verify-matrix-ineq") && !cfg.seed)
    throw UsageError("verify-matrix-ineq: random sampling needs a seed (--seed N or \"seed\" in the config)");

  nlohmann::ordered_json report;
  int code = kExitOk;
  if (cfg.matrix.counterexample) {
    const double c = cfg.matrix.constant_c > 0.0 ? cfg.matrix.constant_c : default_cofactor_constant(4);
    bool found = false;
    std::printf("dim 4 unimodular family A = diag(alpha, alpha, alpha, alpha^-3), M = I; violation when lhs/|A-M|^2 < -c, c = %.10g\n", c);
    std::printf("%8s %16s %16s %16s\n", "alpha", "lhs", "|A-M|^2", "ratio");
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (double alpha : {2.0, 4.0, 8.0, 16.0, 32.0}) {
      const CounterexamplePoint p = d4_counterexample(alpha);
      std::printf("%8g %16.8e %16.8e %16.8e\n", alpha, p.lhs, p.quad, p.ratio());
      rows.push_back({{"alpha", alpha}, {"lhs", p.lhs}, {"quad", p.quad}, {"ratio", p.ratio()}});
      found = found || p.ratio() < -c;
    }
    std::printf("violation_found: %s\n", found ? "yes" : "no");
    report = {{"dim", 4}, {"constant_c", c}, {"points", rows}, {"violation_found", found}};
    code = found ? kExitOk : kExitInvariant;
  } else {
    MatrixInequalityOptions opt;
    opt.dim = cfg.matrix.dim;
    opt.samples = cfg.matrix.samples;
    opt.seed = *cfg.seed;
    opt.entry_range = cfg.matrix.entry_range;
    opt.constant_c = cfg.matrix.constant_c;
    opt.sigma_floor = cfg.matrix.sigma_floor;
    opt.tolerance = cfg.matrix.tolerance;
    const auto t0 = std::chrono::steady_clock::now();
    const MatrixInequalityReport rep = verify_matrix_inequality(opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::printf("dim: %d\nsamples: %llu\nkept: %llu\nviolations: %llu\nworst_margin: %.10e\nseconds: %.2f\n", opt.dim,
                static_cast<unsigned long long>(rep.samples), static_cast<unsigned long long>(rep.kept),
                static_cast<unsigned long long>(rep.violations), rep.worst_margin, secs);
    report = {{"dim", opt.dim},         {"samples", rep.samples},           {"kept", rep.kept},
              {"violations", rep.violations}, {"worst_margin", rep.worst_margin}, {"seed", opt.seed}};
    code = rep.violations == 0 ? kExitOk : kExitInvariant;
  }
  if (!out_dir.empty()) write_json(prepare_out_dir(out_dir, cfg) / "matrix_report.json", report);
  return code;
}

int cmd_project(const RunConfig& cfg, const std::string& out_dir) {
  const fs::path out = prepare_out_dir(out_dir, cfg);
  const ProjectionProblem prob = make_projection_problem(cfg);
  const std::optional<MapField> init = make_projection_init(cfg, prob);
  const SmallnessReport small = smallness_report(prob, cfg.project.ka_probe_n);

  nlohmann::ordered_json summary;
  summary["delta"] = small.delta;
  summary["delta_prime"] = small.delta_prime;
  if (cfg.project.ka_probe_n > 0) {
    summary["k_a_est"] = small.k_a_est;
    summary["k_a_scaling"] = small.k_a_scaling;
  }
  std::optional<ProjectionResult> solved;
  try {
    solved = init ? solve(prob, *init) : solve(prob);
  } catch (const SolverError& e) {
    summary["converged"] = false;
    summary["error"] = e.what();
    write_json(out / "summary.json", summary);
    std::fprintf(stderr, "project: %s\n", e.what());
    return kExitSolver;
  } catch (const MapDegenerate& e) {
    summary["converged"] = false;
    summary["error"] = e.what();
    write_json(out / "summary.json", summary);
    std::fprintf(stderr, "project: %s\n", e.what());
    return kExitSolver;
  }
  const ProjectionResult& res = *solved;
  summary["converged"] = true;
  summary["objective"] = res.objective;
  summary["residual_f"] = res.residual_f;
  summary["det_violation"] = res.det_violation;
  summary["sigma_lower"] = res.certificate.sigma_lower;
  summary["q_oscillation"] = res.certificate.q_oscillation;
  summary["threshold"] = res.certificate.threshold;
  summary["certificate_pass"] = res.certificate.passes;
  summary["certificate_margin"] = res.certificate.threshold - res.certificate.q_oscillation;
  summary["iterations"] = {{"outer", res.outer_iters}, {"inner", res.inner_iters}};
  summary["grad_norm"] = res.grad_norm;
  summary["rho"] = res.rho;
  write_json(out / "summary.json", summary);
  if (cfg.project.dump_fields) {
    write_field(out, "s", prob.s, 0.0);
    write_field(out, "z_star", res.z_star, 0.0);
    write_field(out, "q_star", res.q_star, 0.0);
  }
  std::cout << summary.dump(2) << "\n";
  return kExitOk;
}

// Energy inequality per step and the flow-map determinant bound.
std::vector<std::string> invariant_violations(const Trajectory& traj) {
  std::vector<std::string> out;
  for (std::size_t i = 1; i < traj.rows.size(); ++i) {
    const NseRow& r = traj.rows[i];
    if (r.dissipation_lhs > r.dissipation_rhs + kEnergySlack)
      out.push_back("energy inequality fails at step " + std::to_string(r.step));
    if (r.det_err_x_max > kFlowDetBound) out.push_back("flow map |det - 1| exceeds 5e-3 at step " + std::to_string(r.step));
  }
  return out;
}

int cmd_nse(const RunConfig& cfg, const std::string& out_dir) {
  const fs::path out = prepare_out_dir(out_dir, cfg);
  std::optional<Trajectory> ran;
  try {
    ran = run(cfg.nse, &out);
  } catch (const SolverError& e) {
    std::fprintf(stderr, "nse: %s\n", e.what());
    return kExitSolver;
  } catch (const MapDegenerate& e) {
    std::fprintf(stderr, "nse: %s\n", e.what());
    return kExitSolver;
  }
  const Trajectory& traj = *ran;
  {
    std::ofstream csv(out / "diagnostics.csv");
    write_csv(traj.rows, csv);
  }
  const DoublingReport dr = doubling_time_report(traj, cfg.nse);
  const std::vector<std::string> bad = invariant_violations(traj);
  nlohmann::ordered_json summary;
  summary["steps"] = traj.rows.back().step;
  summary["time"] = traj.rows.back().time;
  summary["stop_reason"] = traj.stop_reason;
  summary["doubling_exceeded"] = traj.doubling_exceeded;
  summary["alpha"] = dr.alpha;
  summary["t_doubling"] = dr.t_doubling ? nlohmann::ordered_json(*dr.t_doubling) : nlohmann::ordered_json(nullptr);
  summary["invariant_violations"] = bad;
  write_json(out / "summary.json", summary);
  if (traj.doubling_exceeded) std::fprintf(stderr, "warning: %s\n", traj.stop_reason.c_str());
  std::printf("steps: %d\nfinal l2_energy: %.10e\nmax det_err_X: %.3e\n", traj.rows.back().step, traj.rows.back().l2_energy,
              traj.rows.back().det_err_x_max);
  for (const std::string& b : bad) std::fprintf(stderr, "invariant violation: %s\n", b.c_str());
  return bad.empty() ? kExitOk : kExitInvariant;
}

int cmd_convergence(const RunConfig& cfg, std::optional<int> refinements, const std::string& out_dir) {
  const int levels = refinements.value_or(cfg.convergence.refinements);
  if (levels < 1) throw UsageError("convergence: refinements must be >= 1");
  RefinementReport rep;
  try {
    rep = refinement_study(cfg.nse, levels, cfg.convergence.chorin);
  } catch (const SolverError& e) {
    std::fprintf(stderr, "convergence: %s\n", e.what());
    return kExitSolver;
  } catch (const MapDegenerate& e) {
    std::fprintf(stderr, "convergence: %s\n", e.what());
    return kExitSolver;
  }
  nlohmann::ordered_json j;
  nlohmann::ordered_json lv = nlohmann::ordered_json::array();
  std::printf("%12s %16s %16s\n", "tau", "chorin_disc", "chorin_C");
  for (const RefinementLevel& l : rep.levels) {
    std::printf("%12.6g %16.6e %16.6e\n", l.tau, l.chorin_discrepancy, l.chorin_constant);
    lv.push_back({{"tau", l.tau}, {"chorin_discrepancy", l.chorin_discrepancy}, {"chorin_constant", l.chorin_constant}});
  }
  for (std::size_t k = 0; k < rep.v_diffs.size(); ++k)
    std::printf("|v_tau - v_tau/2| (tau = %g): %.6e   |X_tau - X_tau/2|_L1: %.6e\n", rep.levels[k].tau, rep.v_diffs[k], rep.x_diffs[k]);
  for (std::size_t k = 0; k < rep.v_orders.size(); ++k)
    std::printf("observed order p = %.4f (velocity), %.4f (flow map)\n", rep.v_orders[k], rep.x_orders[k]);
  j["levels"] = lv;
  j["v_diffs"] = rep.v_diffs;
  j["x_diffs"] = rep.x_diffs;
  j["v_orders"] = rep.v_orders;
  j["x_orders"] = rep.x_orders;
  if (!out_dir.empty()) {
    const fs::path out = prepare_out_dir(out_dir, cfg);
    write_json(out / "convergence.json", j);
    for (const RefinementLevel& l : rep.levels) {
      char name[64];
      std::snprintf(name, sizeof name, "diagnostics_tau_%g.csv", 1.0 / l.tau);
      std::ofstream csv(out / name);
      write_csv(l.trajectory.rows, csv);
    }
  }
  return kExitOk;
}

void add_common(CLI::App* sub, CommonFlags& f, bool config_required, bool out_required) {
  auto* c = sub->add_option("--config", f.config_path, "JSON run configuration")->check(CLI::ExistingFile);
  if (config_required) c->required();
  auto* o = sub->add_option("--out", f.out_dir, "output directory");
  if (out_required) o->required();
  sub->add_option("--seed", f.seed, "random seed (overrides the config)");
  sub->add_option("--threads", f.threads, "OpenMP threads; falls back to POLYPROJ_THREADS")->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"polyproj: volume-preserving projections and a minimizing-movement Navier-Stokes scheme"};
  app.require_subcommand(1);

  CommonFlags matrix_flags, project_flags, nse_flags, conv_flags;
  std::optional<int> dim;
  std::optional<std::uint64_t> samples;
  bool counterexample = false;
  std::optional<int> refinements;

  auto* verify = app.add_subcommand("verify-matrix-ineq", "randomized check of the cofactor matrix inequality");
  add_common(verify, matrix_flags, false, false);
  verify->add_option("--dim", dim, "matrix dimension")->check(CLI::IsMember({2, 3, 4}));
  verify->add_option("--samples", samples, "number of random pairs")->check(CLI::Range(std::uint64_t{1}, std::uint64_t{1} << 40));
  verify->add_flag("--counterexample", counterexample, "dim 4: evaluate the unimodular family that breaks the inequality");

  auto* project = app.add_subcommand("project", "solve one volume-preserving projection problem");
  add_common(project, project_flags, true, true);

  auto* nse = app.add_subcommand("nse", "run the Navier-Stokes scheme");
  add_common(nse, nse_flags, true, true);

  auto* conv = app.add_subcommand("convergence", "tau-refinement study with observed order");
  add_common(conv, conv_flags, true, false);
  conv->add_option("--refinements", refinements, "number of tau halvings")->check(CLI::PositiveNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*verify) return cmd_verify_matrix_ineq(resolve_config(matrix_flags, ""), dim, samples, counterexample, matrix_flags.out_dir);
    if (*project) return cmd_project(resolve_config(project_flags, "project"), project_flags.out_dir);
    if (*nse) return cmd_nse(resolve_config(nse_flags, "nse"), nse_flags.out_dir);
    if (*conv) return cmd_convergence(resolve_config(conv_flags, "convergence"), refinements, conv_flags.out_dir);
  } catch (const UsageError& e) {
    std::fprintf(stderr, "usage error: %s\n", e.what());
    return kExitUsage;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "%s\n", e.what());
    return kExitUsage;
  } catch (const SolverError& e) {
    std::fprintf(stderr, "solver error: %s\n", e.what());
    return kExitSolver;
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitSolver;
  } catch (const fs::filesystem_error& e) {
    std::fprintf(stderr, "i/o error: %s\n", e.what());
    return kExitUsage;
  }
  return kExitUsage;
}
