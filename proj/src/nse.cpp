#include "polyproj/nse.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "polyproj/field_io.hpp"
#include "polyproj/generators.hpp"
#include "polyproj/parallel.hpp"
#include "polyproj/projection.hpp"
#include "polyproj/stokes.hpp"

namespace polyproj {

namespace {

double max_det_error(const MapField& z) {
  const ScalarField det = cell_determinant(z);
  return ordered_max(det.size(), [&](std::size_t i) { return std::abs(det[i] - 1.0); });
}

ProjectionProblem step_problem(const MapField& s, const NseConfig& cfg) {
  ProjectionProblem p(s);
  p.a = cfg.mu * cfg.tau;
  p.r = cfg.r;
  p.rho = cfg.proj_rho;
  p.tol_det = cfg.proj_tol_det;
  p.tol_opt = cfg.proj_tol_opt;
  p.max_outer = cfg.proj_max_outer;
  p.max_inner = cfg.proj_max_inner;
  p.rk4_steps = cfg.rk4_steps;
  return p;
}

std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

std::string snapshot_name(const char* what, int step) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%s_%05d", what, step);
  return buf;
}

}  // namespace

int NseConfig::steps() const { return static_cast<int>(std::ceil(t_end / tau - 1e-9)); }

void NseConfig::validate() const {
  if (dim != 2 && dim != 3) throw InvalidArgument("nse: dim must be 2 or 3");
  if (n < 4) throw InvalidArgument("nse: n must be >= 4");
  if (!(r > dim)) throw InvalidArgument("nse: r must exceed the dimension");
  if (!(mu > 0.0)) throw InvalidArgument("nse: mu must be > 0");
  if (!(tau > 0.0)) throw InvalidArgument("nse: tau must be > 0");
  if (!(tau < t_end)) throw InvalidArgument("nse: tau must be smaller than t_end");
  if (semigroup_substeps < 1) throw InvalidArgument("nse: semigroup_substeps must be >= 1");
  if (!(c0 > 0.0)) throw InvalidArgument("nse: c0 must be > 0");
  if (snapshot_every < 0) throw InvalidArgument("nse: snapshot_every must be >= 0");
}

NseState initial_state(const NseConfig& cfg) {
  cfg.validate();
  const Grid g(cfg.dim, cfg.n);
  VectorField v = cfg.initial_condition == "random" ? random_stream_velocity(g, cfg.seed, 4, cfg.amplitude)
                                                    : stream_velocity(g, cfg.initial_condition, cfg.amplitude);
  v = leray_project(v);
  NseState st{0, 0.0, v, MapField::identity(g), {}};
  st.row.l2_energy = dot(v, v);
  st.row.lr_norm = norm_lr(v, cfg.r);
  st.row.dissipation_lhs = st.row.l2_energy;
  st.row.dissipation_rhs = st.row.l2_energy;
  return st;
}

StepOutput nse_step(const NseState& state, const NseConfig& cfg) {
  const auto t0 = std::chrono::steady_clock::now();
  const Grid& g = state.v.grid();
  const double speed = max_speed(state.v);
  if (speed * cfg.tau > 4.0 * g.h())
    throw StepTooLarge("nse_step: max|v| tau = " + fmt(speed * cfg.tau) + " exceeds 4h = " + fmt(4.0 * g.h()) + "; use a smaller tau");
  const double a = cfg.mu * cfg.tau;

  // (I - a Lap) S = id + tau v at the nodes.
  MapField rhs = faces_to_nodes(state.v);
  rhs *= cfg.tau;
  rhs += MapField::identity(g);
  const MapField s = helmholtz_solve(rhs, a);

  const ProjectionProblem prob = step_problem(s, cfg);
  ProjectionResult pr = solve(prob);

  const VectorField w = compose_inverse(state.v, pr.z_star);
  VectorField v_next = heat_semigroup(w, cfg.mu, cfg.tau, cfg.semigroup_substeps);
  MapField x_next = compose(pr.z_star, state.x_flow);
  x_next.set_identity_boundary();

  NseRow row;
  row.step = state.step + 1;
  row.time = (state.step + 1) * cfg.tau;
  row.l2_energy = dot(v_next, v_next);
  row.lr_norm = norm_lr(v_next, cfg.r);
  row.dissipation_lhs = row.l2_energy + 2.0 * cfg.mu * cfg.tau * dirichlet_energy(v_next);
  row.dissipation_rhs = state.row.l2_energy;
  row.det_err_z_max = pr.det_violation;
  row.det_err_x_max = max_det_error(x_next);
  row.sigma_min = pr.certificate.sigma_lower;
  row.q_osc = pr.certificate.q_oscillation;
  row.q_threshold = pr.certificate.threshold;
  row.cert_pass = pr.certificate.passes;
  row.proj_residual_f = pr.residual_f;
  if (cfg.record_wallclock) row.wallclock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  return {NseState{row.step, row.time, std::move(v_next), std::move(x_next), row}, std::move(pr.z_star)};
}

Trajectory run(const NseConfig& cfg, const std::filesystem::path* out_dir) {
  NseState st = initial_state(cfg);
  Trajectory traj{{st.v}, {}, st.x_flow, {st.row}, false, "reached t_end"};
  const double guard = 2.0 * cfg.c0 * st.row.lr_norm;
  const int steps = cfg.steps();
  const VectorField test = cfg.duhamel ? duhamel_test_field(st.v.grid(), 0) : VectorField(st.v.grid());
  if (out_dir && cfg.snapshot_every > 0) {
    write_field(*out_dir, snapshot_name("v", 0), st.v, 0.0);
    write_field(*out_dir, snapshot_name("x", 0), st.x_flow, 0.0);
  }
  for (int k = 0; k < steps; ++k) {
    StepOutput out = nse_step(st, cfg);
    st = std::move(out.state);
    traj.v.push_back(st.v);
    traj.z.push_back(std::move(out.z));
    if (cfg.duhamel) st.row.duhamel_gap = duhamel_residual(traj, test, st.step, cfg);
    traj.rows.push_back(st.row);
    if (out_dir && cfg.snapshot_every > 0 && st.step % cfg.snapshot_every == 0) {
      write_field(*out_dir, snapshot_name("v", st.step), st.v, st.time);
      write_field(*out_dir, snapshot_name("x", st.step), st.x_flow, st.time);
    }
    if (guard > 0.0 && st.row.lr_norm > guard) {
      traj.doubling_exceeded = true;
      traj.stop_reason = "DoublingExceeded: |v|_{L^r} passed 2 c0 |v_0|_{L^r} at step " + std::to_string(st.step);
      break;
    }
  }
  traj.x_flow = st.x_flow;
  return traj;
}

void write_csv(const std::vector<NseRow>& rows, std::ostream& os) {
  os << "step,time,l2_energy,lr_norm,dissipation_lhs,dissipation_rhs,det_err_Z_max,det_err_X_max,sigma_min,q_osc,q_threshold,"
        "cert_pass,proj_residual_F,duhamel_gap,wallclock_s\n";
  for (const NseRow& r : rows) {
    os << r.step << ',' << fmt(r.time) << ',' << fmt(r.l2_energy) << ',' << fmt(r.lr_norm) << ',' << fmt(r.dissipation_lhs) << ','
       << fmt(r.dissipation_rhs) << ',' << fmt(r.det_err_z_max) << ',' << fmt(r.det_err_x_max) << ',' << fmt(r.sigma_min) << ','
       << fmt(r.q_osc) << ',' << fmt(r.q_threshold) << ',' << (r.cert_pass ? 1 : 0) << ',' << fmt(r.proj_residual_f) << ','
       << (r.duhamel_gap ? fmt(*r.duhamel_gap) : std::string()) << ',' << fmt(r.wallclock_s) << '\n';
  }
}

VectorField duhamel_test_field(const Grid& g, int which) {
  switch (which) {
    case 0: return stream_velocity(g, "cellular", 1.0);
    case 1: return stream_mode_velocity(g, 2, 1, 1.0);
    case 2: return stream_velocity(g, "bump-swirl", 1.0);
    default: throw InvalidArgument("duhamel_test_field: index must be 0, 1 or 2");
  }
}

double duhamel_residual(const Trajectory& traj, const VectorField& f, int upto_n, const NseConfig& cfg) {
  const int m = upto_n;
  if (m < 1) throw InvalidArgument("duhamel_residual: upto_n must be >= 1");
  if (static_cast<int>(traj.v.size()) <= m || static_cast<int>(traj.z.size()) < m)
    throw InvalidArgument("duhamel_residual: trajectory does not store the required maps");
  std::vector<VectorField> fj{f};
  for (int j = 1; j <= m; ++j) fj.push_back(heat_semigroup(fj.back(), cfg.mu, cfg.tau, cfg.semigroup_substeps));
  const double lhs = dot(traj.v[static_cast<std::size_t>(m)], f);
  double rhs = dot(traj.v[0], fj[static_cast<std::size_t>(m)]);
  for (int k = 0; k < m; ++k) {
    const VectorField& fk = fj[static_cast<std::size_t>(m - k)];
    VectorField moved = compose(fk, traj.z[static_cast<std::size_t>(k)]);
    moved -= fk;
    rhs += dot(traj.v[static_cast<std::size_t>(k)], moved);
  }
  return std::abs(lhs - rhs);
}

DoublingReport doubling_time_report(const Trajectory& traj, const NseConfig& cfg) {
  if (traj.rows.empty()) throw InvalidArgument("doubling_time_report: empty trajectory");
  DoublingReport rep;
  rep.alpha = 0.5 + cfg.dim / (2.0 * cfg.r);
  const double base = traj.rows.front().lr_norm;
  for (const NseRow& r : traj.rows)
    if (r.lr_norm > 2.0 * base) {
      rep.t_doubling = r.time;
      break;
    }
  return rep;
}

VectorField chorin_reference_step(const VectorField& v, double mu, double tau, bool advect) {
  const Grid& g = v.grid();
  VectorField adv = v;
  if (advect) {
    const int n = g.n();
    for (int c = 0; c < g.dim(); ++c) {
      const auto fd = g.face_dims(c);
      auto& o = adv.comp(c);
#pragma omp parallel for schedule(static)
      for (std::ptrdiff_t fi = 0; fi < static_cast<std::ptrdiff_t>(o.size()); ++fi) {
        const auto id = Grid::unindex(fd, static_cast<std::size_t>(fi));
        const int ic = id[static_cast<std::size_t>(c)];
        if (ic == 0 || ic == n) continue;
        const Vec3 x = g.face_position(c, id[0], id[1], id[2]);
        const Vec3 vel = sample(v, x);
        Vec3 back = x;
        for (int b = 0; b < g.dim(); ++b) back[static_cast<std::size_t>(b)] -= tau * vel[static_cast<std::size_t>(b)];
        o[static_cast<std::size_t>(fi)] = sample(v, back)[static_cast<std::size_t>(c)];
      }
    }
  }
  adv *= -1.0;
  return stokes_resolvent(adv, mu * tau).u;
}

std::vector<VectorField> chorin_reference_run(const NseConfig& cfg) {
  const NseState st = initial_state(cfg);
  std::vector<VectorField> out{st.v};
  for (int k = 0; k < cfg.steps(); ++k) out.push_back(chorin_reference_step(out.back(), cfg.mu, cfg.tau));
  return out;
}

RefinementReport refinement_study(const NseConfig& cfg, int refinements, bool with_chorin) {
  if (refinements < 1) throw InvalidArgument("refinement_study: refinements must be >= 1");
  RefinementReport rep;
  const double h = 1.0 / cfg.n;
  for (int k = 0; k <= refinements; ++k) {
    NseConfig c = cfg;
    c.tau = cfg.tau / std::ldexp(1.0, k);
    RefinementLevel lvl{c.tau, run(c), 0.0, 0.0};
    if (lvl.trajectory.doubling_exceeded) throw SolverError("refinement_study: " + lvl.trajectory.stop_reason);
    if (with_chorin) {
      const std::vector<VectorField> ref = chorin_reference_run(c);
      double acc = 0.0;
      for (std::size_t i = 1; i < ref.size(); ++i) {
        VectorField d = lvl.trajectory.v[i];
        d -= ref[i];
        acc += c.tau * dot(d, d);
      }
      lvl.chorin_discrepancy = std::sqrt(acc);
      lvl.chorin_constant = lvl.chorin_discrepancy / (c.tau + h * h);
    }
    rep.levels.push_back(std::move(lvl));
  }
  for (std::size_t k = 0; k + 1 < rep.levels.size(); ++k) {
    VectorField dv = rep.levels[k].trajectory.v.back();
    dv -= rep.levels[k + 1].trajectory.v.back();
    rep.v_diffs.push_back(std::sqrt(dot(dv, dv)));
    rep.x_diffs.push_back(norm_lr(rep.levels[k].trajectory.x_flow - rep.levels[k + 1].trajectory.x_flow, 1.0));
  }
  for (std::size_t k = 0; k + 1 < rep.v_diffs.size(); ++k) {
    rep.v_orders.push_back(std::log2(rep.v_diffs[k] / rep.v_diffs[k + 1]));
    rep.x_orders.push_back(std::log2(rep.x_diffs[k] / rep.x_diffs[k + 1]));
  }
  return rep;
}

}  // namespace polyproj
