#pragma once

// Limited-memory BFGS with a strong-Wolfe line search (cubic interpolation in
// the zoom phase) and an optional initial inverse-Hessian operator.

#include <functional>
#include <string>
#include <vector>

namespace polyproj {

struct LbfgsOptions {
  int memory = 10;
  int max_iter = 500;
  /// Stop when gradient_norm(g) <= grad_tol.
  double grad_tol = 1e-8;
  double c1 = 1e-4;
  double c2 = 0.9;
  int max_linesearch = 40;
  /// Called with f after every accepted step.
  std::function<void(double)> on_accept;
};

struct LbfgsResult {
  int iterations = 0;
  int evaluations = 0;
  double value = 0.0;
  double grad_norm = 0.0;
  bool converged = false;
  std::string message;
};

/// Returns f(x) and writes the gradient; +infinity marks an inadmissible x.
using ObjectiveFn = std::function<double(const std::vector<double>& x, std::vector<double>& grad)>;
/// Applies the initial inverse Hessian H0 to a gradient-shaped vector.
using PreconditionerFn = std::function<void(const std::vector<double>& g, std::vector<double>& out)>;
using NormFn = std::function<double(const std::vector<double>& g)>;

/// Minimizes from x (updated in place). Every accepted step lowers f
/// (or leaves it within roundoff while shrinking the slope).
LbfgsResult lbfgs_minimize(const ObjectiveFn& f, std::vector<double>& x, const LbfgsOptions& opt,
                           const PreconditionerFn& h0 = nullptr, const NormFn& grad_norm = nullptr);

}  // namespace polyproj
