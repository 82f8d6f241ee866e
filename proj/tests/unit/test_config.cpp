#include <doctest.h>

#include <string>

#include "polyproj/config.hpp"

using namespace polyproj;

TEST_SUITE("config") {
  TEST_CASE("empty document gives the defaults") {
    const RunConfig cfg = parse_run_config("{}");
    CHECK_FALSE(cfg.seed.has_value());
    CHECK(cfg.threads == 0);
    CHECK(cfg.matrix.dim == 2);
    CHECK(cfg.matrix.samples == 1000000);
    CHECK(cfg.project.n == 32);
    CHECK(cfg.project.data == "swirl");
    CHECK(cfg.project.amplitude == 0.2);
    CHECK(cfg.nse.n == 64);
    CHECK(cfg.nse.tau == 1.0 / 64.0);
    CHECK(cfg.convergence.refinements == 2);
  }

  TEST_CASE("values are read into every section") {
    const RunConfig cfg = parse_run_config(R"({
      "seed": 7, "threads": 3,
      "matrix": {"dim": 3, "samples": 10, "counterexample": true},
      "project": {"n": 16, "data": "epsilon-family", "amplitude": 0.05, "init": "identity"},
      "nse": {"n": 24, "tau": 0.125, "t_end": 0.5, "initial_condition": "random"},
      "convergence": {"refinements": 3, "chorin": false}
    })");
    REQUIRE(cfg.seed.has_value());
    CHECK(*cfg.seed == 7);
    CHECK(cfg.nse.seed == 7);
    CHECK(cfg.threads == 3);
    CHECK(cfg.matrix.dim == 3);
    CHECK(cfg.matrix.samples == 10);
    CHECK(cfg.matrix.counterexample);
    CHECK(cfg.project.n == 16);
    CHECK(cfg.project.data == "epsilon-family");
    CHECK(cfg.nse.n == 24);
    CHECK(cfg.nse.initial_condition == "random");
    CHECK(cfg.convergence.refinements == 3);
    CHECK_FALSE(cfg.convergence.chorin);
  }

  TEST_CASE("unknown keys are rejected at every level") {
    CHECK_THROWS_AS(parse_run_config(R"({"sede": 1})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"matrix": {"dimension": 2}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"project": {"nn": 2}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"nse": {"seed": 2}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"convergence": {"levels": 2}})"), ConfigError);
  }

  TEST_CASE("malformed input and wrong types") {
    CHECK_THROWS_AS(parse_run_config("{"), ConfigError);
    CHECK_THROWS_AS(parse_run_config("[]"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"seed": -1})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"seed": 1.5})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"threads": "4"})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"matrix": {"dim": 2.0}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"matrix": {"counterexample": 1}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"project": {"a": "0.1"}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"project": 3})"), ConfigError);
    CHECK_NOTHROW(parse_run_config(R"({"seed": null})"));
  }

  TEST_CASE("out-of-range values") {
    CHECK_THROWS_AS(parse_run_config(R"({"threads": -1})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"matrix": {"dim": 5}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"matrix": {"samples": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"project": {"data": "spiral"}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"project": {"a": -1.0}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"project": {"ka_probe_n": 4}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"nse": {"mu": 0}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"nse": {"initial_condition": "taylor"}})"), ConfigError);
    CHECK_THROWS_AS(parse_run_config(R"({"convergence": {"refinements": 0}})"), ConfigError);
  }

  TEST_CASE("resolved text round-trips") {
    const RunConfig cfg = parse_run_config(R"({"seed": 11, "project": {"n": 20}, "nse": {"mu": 0.1}})");
    const std::string text = to_json_text(cfg);
    CHECK(text.find("\"seed\": 11") != std::string::npos);
    const RunConfig again = parse_run_config(text);
    CHECK(to_json_text(again) == text);
    CHECK(again.project.n == 20);
    CHECK(again.nse.mu == 0.1);
    CHECK(to_json_text(parse_run_config("{}")).find("\"seed\": null") != std::string::npos);
  }

  TEST_CASE("seed requirement per command") {
    RunConfig cfg;
    CHECK(needs_seed(cfg, "verify-matrix-ineq"));
    cfg.matrix.dim = 4;
    cfg.matrix.counterexample = true;
    CHECK_FALSE(needs_seed(cfg, "verify-matrix-ineq"));
    CHECK_FALSE(needs_seed(cfg, "project"));
    cfg.project.init = "random-feasible";
    CHECK(needs_seed(cfg, "project"));
    CHECK_FALSE(needs_seed(cfg, "nse"));
    cfg.nse.initial_condition = "random";
    CHECK(needs_seed(cfg, "nse"));
    CHECK(needs_seed(cfg, "convergence"));
  }

  TEST_CASE("projection problem and initial map") {
    RunConfig cfg = parse_run_config(R"({"seed": 3, "project": {"n": 8, "a": 0.2, "data": "random-feasible", "init": "data"}})");
    const ProjectionProblem prob = make_projection_problem(cfg);
    CHECK(prob.a == 0.2);
    CHECK(prob.s.grid().n() == 8);
    const auto init = make_projection_init(cfg, prob);
    REQUIRE(init.has_value());
    CHECK(init->raw() == prob.s.raw());
    cfg.project.init = "reference";
    CHECK_FALSE(make_projection_init(cfg, prob).has_value());
  }

  TEST_CASE("missing file") { CHECK_THROWS_AS(load_run_config("/nonexistent/config.json"), ConfigError); }
}
