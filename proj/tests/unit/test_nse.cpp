#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "polyproj/nse.hpp"
#include "polyproj/stokes.hpp"

using namespace polyproj;

namespace {

NseConfig small_config() {
  NseConfig cfg;
  cfg.n = 16;
  cfg.tau = 1.0 / 32.0;
  cfg.t_end = 4.0 / 32.0;
  return cfg;
}

double l2_diff(const VectorField& a, const VectorField& b) {
  VectorField d = a;
  d -= b;
  return std::sqrt(dot(d, d));
}

}  // namespace

TEST_SUITE("nse") {
  TEST_CASE("configuration validation") {
    NseConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.steps() == 16);
    auto bad = [](auto edit) {
      NseConfig c;
      edit(c);
      return c;
    };
    CHECK_THROWS_AS(bad([](NseConfig& c) { c.dim = 4; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](NseConfig& c) { c.r = 2.0; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](NseConfig& c) { c.mu = 0.0; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](NseConfig& c) { c.tau = -1.0; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](NseConfig& c) { c.tau = 1.0; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](NseConfig& c) { c.semigroup_substeps = 0; }).validate(), InvalidArgument);
    CHECK_THROWS_AS(bad([](NseConfig& c) { c.c0 = 0.0; }).validate(), InvalidArgument);
  }

  TEST_CASE("zero data stays at rest") {
    NseConfig cfg = small_config();
    cfg.initial_condition = "zero";
    const Trajectory traj = run(cfg);
    REQUIRE(traj.v.size() == 5);
    for (const VectorField& v : traj.v) CHECK(dot(v, v) == 0.0);
    const MapField d = traj.x_flow - MapField::identity(traj.x_flow.grid());
    for (double x : d.raw()) CHECK(std::abs(x) <= 1e-14);
    CHECK_FALSE(traj.doubling_exceeded);
  }

  TEST_CASE("energy dissipation inequality holds at every step") {
    const Trajectory traj = run(small_config());
    REQUIRE(traj.rows.size() == 5);
    for (std::size_t k = 1; k < traj.rows.size(); ++k) {
      const NseRow& r = traj.rows[k];
      CHECK(r.dissipation_lhs <= r.dissipation_rhs + 1e-10);
      CHECK(r.l2_energy < traj.rows[k - 1].l2_energy);
      CHECK(r.det_err_z_max <= 1e-6);
      CHECK(r.det_err_x_max <= 5e-3);
    }
  }

  TEST_CASE("too large a step is rejected") {
    NseConfig cfg = small_config();
    cfg.amplitude = 20.0;
    cfg.tau = 0.25;
    cfg.t_end = 1.0;
    CHECK_THROWS_AS(nse_step(initial_state(cfg), cfg), StepTooLarge);
  }

  TEST_CASE("diagnostics table layout") {
    NseConfig cfg = small_config();
    cfg.duhamel = true;
    const Trajectory traj = run(cfg);
    std::ostringstream os;
    write_csv(traj.rows, os);
    std::istringstream is(os.str());
    std::string line;
    std::getline(is, line);
    CHECK(line ==
          "step,time,l2_energy,lr_norm,dissipation_lhs,dissipation_rhs,det_err_Z_max,det_err_X_max,sigma_min,q_osc,"
          "q_threshold,cert_pass,proj_residual_F,duhamel_gap,wallclock_s");
    int rows = 0;
    while (std::getline(is, line)) {
      CHECK(std::count(line.begin(), line.end(), ',') == 14);
      ++rows;
    }
    CHECK(rows == 5);
    CHECK_FALSE(traj.rows[0].duhamel_gap.has_value());
    for (std::size_t k = 1; k < traj.rows.size(); ++k) {
      REQUIRE(traj.rows[k].duhamel_gap.has_value());
      CHECK(*traj.rows[k].duhamel_gap <= 1e-8);
    }
  }

  TEST_CASE("Duhamel identity for each test field") {
    const NseConfig cfg = small_config();
    const Trajectory traj = run(cfg);
    for (int which = 0; which < 3; ++which) {
      const VectorField f = duhamel_test_field(traj.v[0].grid(), which);
      for (int m = 1; m <= cfg.steps(); ++m) CHECK(duhamel_residual(traj, f, m, cfg) <= 1e-8);
    }
    CHECK_THROWS_AS(duhamel_test_field(traj.v[0].grid(), 3), InvalidArgument);
    CHECK_THROWS_AS(duhamel_residual(traj, duhamel_test_field(traj.v[0].grid(), 0), 0, cfg), InvalidArgument);
    CHECK_THROWS_AS(duhamel_residual(traj, duhamel_test_field(traj.v[0].grid(), 0), 5, cfg), InvalidArgument);
  }

  TEST_CASE("Duhamel residual vanishes for zero data") {
    NseConfig cfg = small_config();
    cfg.initial_condition = "zero";
    const Trajectory traj = run(cfg);
    const VectorField f = duhamel_test_field(traj.v[0].grid(), 1);
    CHECK(duhamel_residual(traj, f, cfg.steps(), cfg) == 0.0);
  }

  TEST_CASE("doubling report") {
    const NseConfig cfg = small_config();
    const Trajectory traj = run(cfg);
    const DoublingReport rep = doubling_time_report(traj, cfg);
    CHECK(rep.alpha == doctest::Approx(0.75));
    CHECK_FALSE(rep.t_doubling.has_value());

    // A guard below the initial norm trips on the first step.
    NseConfig tight = cfg;
    tight.c0 = 0.25;
    const Trajectory stopped = run(tight);
    CHECK(stopped.doubling_exceeded);
    CHECK(stopped.rows.size() == 2);
    CHECK(stopped.stop_reason.find("DoublingExceeded") == 0);
  }

  TEST_CASE("Chorin reference solver") {
    const Grid g(2, 16);
    const VectorField zero(g);
    CHECK(dot(chorin_reference_step(zero, 0.05, 0.01), chorin_reference_step(zero, 0.05, 0.01)) == 0.0);

    // Without advection it is one implicit Stokes step.
    const NseConfig cfg = small_config();
    const VectorField v0 = initial_state(cfg).v;
    CHECK(l2_diff(chorin_reference_step(v0, cfg.mu, cfg.tau, false), heat_semigroup(v0, cfg.mu, cfg.tau, 1)) <= 1e-8);

    const std::vector<VectorField> ref = chorin_reference_run(cfg);
    REQUIRE(ref.size() == 5);
    for (std::size_t k = 1; k < ref.size(); ++k) CHECK(dot(ref[k], ref[k]) <= dot(ref[k - 1], ref[k - 1]) * (1.0 + 1e-12));
  }

  TEST_CASE("refinement study bookkeeping") {
    NseConfig cfg = small_config();
    cfg.tau = 1.0 / 16.0;
    cfg.t_end = 0.125;
    const RefinementReport rep = refinement_study(cfg, 2, true);
    REQUIRE(rep.levels.size() == 3);
    CHECK(rep.levels[2].tau == doctest::Approx(1.0 / 64.0));
    CHECK(rep.v_diffs.size() == 2);
    CHECK(rep.v_orders.size() == 1);
    for (const auto& l : rep.levels) CHECK(l.chorin_constant > 0.0);
    CHECK_THROWS_AS(refinement_study(cfg, 0, false), InvalidArgument);
  }
}
