#include "polyproj/stokes.hpp"

#include <string>

#include "polyproj/errors.hpp"
#include "polyproj/linalg.hpp"
#include "polyproj/parallel.hpp"
#include "spectral.hpp"

namespace polyproj {

namespace {

constexpr int kMaxCg = 500;
constexpr double kPoissonTol = 1e-13;
constexpr double kHelmholtzTol = 1e-12;

double plain_dot(const ScalarField& a, const ScalarField& b) {
  return ordered_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

void remove_mean(ScalarField& f) {
  const double m = ordered_sum(f.size(), [&](std::size_t i) { return f[i]; }) / static_cast<double>(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) f[i] -= m;
}

SaddleSolveStats to_stats(const CgStats& s, double tol) { return {s.iterations, s.final_residual, tol}; }

}  // namespace

LerayResult leray_decompose(const VectorField& f) {
  const Grid& g = f.grid();
  ScalarField b = divergence(f);
  b *= -1.0;
  remove_mean(b);
  ScalarField phi(g);
  const CgStats st = pcg(
      [](const ScalarField& x, ScalarField& out) {
        out = laplacian(x);
        out *= -1.0;
      },
      [](const ScalarField& r, ScalarField& out) { out = spectral::neumann_poisson_inverse(r); }, plain_dot,
      [](double a, const ScalarField& x, ScalarField& y) {
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
      },
      b, phi, kPoissonTol, 0.0, kMaxCg);
  if (!st.converged) throw SolverError("leray_project: pressure Poisson CG did not converge (residual " + std::to_string(st.final_residual) + ")");
  remove_mean(phi);
  VectorField v = f;
  v -= gradient(phi);
  v.zero_boundary_normal();
  return {std::move(v), std::move(phi), to_stats(st, kPoissonTol)};
}

VectorField leray_project(const VectorField& f) { return leray_decompose(f).v; }

ResolventResult stokes_resolvent(const VectorField& w, double a, double tol) {
  if (!(a > 0.0)) throw InvalidArgument("stokes_resolvent: a must be > 0");
  const Grid& g = w.grid();
  VectorField b = leray_project(w);
  b *= -1.0;
  VectorField u(g);
  auto helm = [a](const VectorField& x) {
    VectorField hx = laplacian(x);
    hx *= -a;
    hx += x;
    return hx;
  };
  // Conjugate gradients on the divergence-free subspace; the preconditioner is
  // the exact inverse of the componentwise Helmholtz operator, projected.
  const CgStats st = pcg(
      [&](const VectorField& x, VectorField& out) { out = leray_project(helm(x)); },
      [&](const VectorField& r, VectorField& out) { out = leray_project(spectral::face_helmholtz_inverse(r, a)); },
      [](const VectorField& x, const VectorField& y) { return dot(x, y); },
      [](double s, const VectorField& x, VectorField& y) { y.axpy(s, x); }, b, u, tol, 0.0, kMaxCg);
  if (!st.converged) throw SolverError("stokes_resolvent: CG did not converge (residual " + std::to_string(st.final_residual) + ")");
  u = leray_project(u);
  // grad f = -(H u + w) up to the divergence-free part, which vanishes.
  VectorField rhs = helm(u);
  rhs += w;
  rhs *= -1.0;
  ScalarField p = leray_decompose(rhs).phi;
  return {std::move(u), std::move(p), to_stats(st, tol)};
}

VectorField heat_semigroup(const VectorField& w, double mu, double tau, int substeps) {
  if (!(mu > 0.0) || !(tau > 0.0)) throw InvalidArgument("heat_semigroup: mu and tau must be > 0");
  if (substeps < 1) throw InvalidArgument("heat_semigroup: substeps must be >= 1");
  const double a = mu * tau / substeps;
  VectorField v = leray_project(w);
  for (int s = 0; s < substeps; ++s) {
    VectorField neg = v;
    neg *= -1.0;
    v = stokes_resolvent(neg, a).u;
  }
  return v;
}

MapField helmholtz_solve(const MapField& rhs, double a) {
  if (!(a > 0.0)) throw InvalidArgument("helmholtz_solve: a must be > 0");
  const Grid& g = rhs.grid();
  const MapField id = MapField::identity(g);
  MapField b = rhs - id;
  b.set_zero_boundary();
  MapField disp(g);
  const CgStats st = pcg(
      [a](const MapField& x, MapField& out) {
        out = helmholtz_apply(x, a);
        out.set_zero_boundary();
      },
      [a](const MapField& r, MapField& out) { out = spectral::node_helmholtz_inverse(r, a); },
      [](const MapField& x, const MapField& y) { return dot(x, y); },
      [](double s, const MapField& x, MapField& y) {
        auto& yr = y.raw();
        const auto& xr = x.raw();
        for (std::size_t i = 0; i < yr.size(); ++i) yr[i] += s * xr[i];
      },
      b, disp, kHelmholtzTol, 0.0, kMaxCg);
  if (!st.converged) throw SolverError("helmholtz_solve: CG did not converge (residual " + std::to_string(st.final_residual) + ")");
  return id + disp;
}

}  // namespace polyproj
