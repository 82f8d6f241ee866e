#pragma once

// Preconditioned conjugate gradients over any vector type, driven by
// callables so the same loop serves cell, face and node unknowns.

#include <cmath>
#include <string>

#include "polyproj/errors.hpp"

namespace polyproj {

struct CgStats {
  int iterations = 0;
  double initial_residual = 0.0;
  double final_residual = 0.0;
  bool converged = false;
};

/// Solves A x = b from the initial x. `apply(x, out)` writes A x, `precond(r,
/// out)` writes M^{-1} r, `dot` is the inner product, `axpy(a, x, y)` does
/// y += a x. Stops once ||r|| <= max(rel_tol ||b||, abs_tol).
template <class V, class Apply, class Precond, class Dot, class Axpy>
CgStats pcg(Apply&& apply, Precond&& precond, Dot&& dot, Axpy&& axpy, const V& b, V& x, double rel_tol, double abs_tol,
            int max_iter) {
  CgStats st;
  V r = b;
  V ax = b;
  apply(x, ax);
  axpy(-1.0, ax, r);
  const double bnorm = std::sqrt(dot(b, b));
  const double target = std::max(rel_tol * bnorm, abs_tol);
  double rnorm = std::sqrt(dot(r, r));
  st.initial_residual = rnorm;
  st.final_residual = rnorm;
  if (rnorm <= target) {
    st.converged = true;
    return st;
  }
  V z = r;
  precond(r, z);
  V p = z;
  V q = z;
  double rz = dot(r, z);
  for (int it = 1; it <= max_iter; ++it) {
    apply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) break;
    const double alpha = rz / pq;
    axpy(alpha, p, x);
    axpy(-alpha, q, r);
    rnorm = std::sqrt(dot(r, r));
    st.iterations = it;
    st.final_residual = rnorm;
    if (rnorm <= target) {
      st.converged = true;
      return st;
    }
    precond(r, z);
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    // p = z + beta p
    V tmp = z;
    axpy(beta, p, tmp);
    p = std::move(tmp);
  }
  return st;
}

}  // namespace polyproj
