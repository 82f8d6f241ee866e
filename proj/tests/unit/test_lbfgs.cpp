#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "polyproj/lbfgs.hpp"

using namespace polyproj;

namespace {

double rosenbrock(const std::vector<double>& x, std::vector<double>& g) {
  double f = 0.0;
  g.assign(x.size(), 0.0);
  for (std::size_t i = 0; i + 1 < x.size(); ++i) {
    const double a = x[i + 1] - x[i] * x[i], b = 1.0 - x[i];
    f += 100.0 * a * a + b * b;
    g[i] += -400.0 * a * x[i] - 2.0 * b;
    g[i + 1] += 200.0 * a;
  }
  return f;
}

}  // namespace

TEST_SUITE("lbfgs") {
  TEST_CASE("Rosenbrock in ten variables") {
    std::vector<double> x(10, -1.2);
    LbfgsOptions opt;
    opt.max_iter = 2000;
    opt.grad_tol = 1e-9;
    const LbfgsResult r = lbfgs_minimize(rosenbrock, x, opt);
    CHECK(r.converged);
    for (double xi : x) CHECK(xi == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("exact inverse Hessian converges in one step") {
    // f = 1/2 sum d_i x_i^2 - x_i, minimizer x_i = 1/d_i.
    const std::vector<double> d{1.0, 10.0, 100.0, 1000.0};
    auto f = [&](const std::vector<double>& x, std::vector<double>& g) {
      double s = 0.0;
      g.resize(x.size());
      for (std::size_t i = 0; i < x.size(); ++i) {
        s += 0.5 * d[i] * x[i] * x[i] - x[i];
        g[i] = d[i] * x[i] - 1.0;
      }
      return s;
    };
    auto h0 = [&](const std::vector<double>& g, std::vector<double>& out) {
      out.resize(g.size());
      for (std::size_t i = 0; i < g.size(); ++i) out[i] = g[i] / d[i];
    };
    std::vector<double> x(4, 0.0);
    LbfgsOptions opt;
    opt.grad_tol = 1e-12;
    const LbfgsResult r = lbfgs_minimize(f, x, opt, h0);
    CHECK(r.converged);
    CHECK(r.iterations <= 2);
    for (std::size_t i = 0; i < 4; ++i) CHECK(x[i] == doctest::Approx(1.0 / d[i]).epsilon(1e-12));
  }

  TEST_CASE("infinite values act as a barrier") {
    // Minimizer of (x - 3)^2 restricted to x > 1 is 3; x <= 1 is inadmissible.
    // Starting at 1.5 with a long first step, the search must back off.
    auto f = [](const std::vector<double>& x, std::vector<double>& g) {
      g.assign(1, 2.0 * (x[0] - 3.0));
      if (x[0] <= 1.0) return std::numeric_limits<double>::infinity();
      return (x[0] - 3.0) * (x[0] - 3.0) + 1.0 / (x[0] - 1.0);
    };
    std::vector<double> x{1.5};
    std::vector<double> seen;
    LbfgsOptions opt;
    opt.on_accept = [&](double v) { seen.push_back(v); };
    lbfgs_minimize(f, x, opt);
    CHECK(x[0] > 1.0);
    for (double v : seen) CHECK(std::isfinite(v));
  }

  TEST_CASE("accepted values are non-increasing") {
    std::vector<double> x{-1.2, 1.0, -0.5, 0.3};
    std::vector<double> seen;
    LbfgsOptions opt;
    opt.max_iter = 500;
    opt.on_accept = [&](double v) { seen.push_back(v); };
    std::vector<double> g;
    const double f0 = rosenbrock(x, g);
    lbfgs_minimize(rosenbrock, x, opt);
    REQUIRE(!seen.empty());
    CHECK(seen.front() <= f0);
    for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i] <= seen[i - 1] * (1.0 + 1e-12));
  }

  TEST_CASE("iteration budget is reported") {
    std::vector<double> x(10, -1.2);
    LbfgsOptions opt;
    opt.max_iter = 3;
    const LbfgsResult r = lbfgs_minimize(rosenbrock, x, opt);
    CHECK_FALSE(r.converged);
    CHECK(r.iterations == 3);
    CHECK(!r.message.empty());
  }
}
