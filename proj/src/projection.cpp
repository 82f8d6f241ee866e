#include "polyproj/projection.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <string>

#include "polyproj/errors.hpp"
#include "polyproj/generators.hpp"
#include "polyproj/lbfgs.hpp"
#include "polyproj/linalg.hpp"
#include "polyproj/parallel.hpp"
#include "polyproj/stokes.hpp"
#include "spectral.hpp"

namespace polyproj {

namespace {

std::ptrdiff_t sz(std::size_t n) { return static_cast<std::ptrdiff_t>(n); }

// The map-valued (I - a Lap)(z - s).
MapField helmholtz_of_difference(const MapField& z, const MapField& s, double a) { return helmholtz_apply(z - s, a); }

// (I + a D^T D)(z - s): the same operator with the Laplacian that the discrete
// objective actually uses, so that it vanishes against discrete stationarity
// up to interpolation error only.
MapField quadratic_gradient(const MapField& z, const MapField& s, double a) {
  MapField x = z - s;
  x.set_zero_boundary();
  MapField out = deformation_gradient_adjoint(deformation_gradient(x));
  out *= a;
  out += x;
  return out;
}

// Boundary nodes carry no stationarity equation; fill them by linear
// extrapolation along each axis in turn so that interpolation near the walls
// sees a smooth field instead of a jump to zero.
void extrapolate_boundary(MapField& f) {
  const Grid& g = f.grid();
  const int d = g.dim(), n = g.n();
  const auto nd = g.node_dims();
  for (int b = 0; b < d; ++b) {
    for (std::size_t node = 0; node < f.num_nodes(); ++node) {
      auto id = Grid::unindex(nd, node);
      const int ib = id[static_cast<std::size_t>(b)];
      if (ib != 0 && ib != n) continue;
      const int step = ib == 0 ? 1 : -1;
      auto near = id, far = id;
      near[static_cast<std::size_t>(b)] += step;
      far[static_cast<std::size_t>(b)] += 2 * step;
      const std::size_t i1 = Grid::index(nd, near[0], near[1], near[2]);
      const std::size_t i2 = Grid::index(nd, far[0], far[1], far[2]);
      for (int c = 0; c < d; ++c) f.at(node, c) = 2.0 * f.at(i1, c) - f.at(i2, c);
    }
  }
}

// Pointwise divergence-free evaluation of a 2D MAC field. The discrete stream
// function (psi at the nodes, face fluxes as its differences) is interpolated
// by a tensor cubic B-spline, and u = (dpsi/dy, -dpsi/dx). The spline is C^2,
// so the velocity gradient is continuous and the time-one flow is smooth and
// exactly area-preserving. End conditions: zero normal slope (no-slip).
class StreamInterpolant {
 public:
  explicit StreamInterpolant(const VectorField& u) : n_(u.grid().n()), h_(u.grid().h()), c_((n_ + 1) * (n_ + 1), 0.0) {
    const auto fx = u.grid().face_dims(0);
    for (int i = 0; i <= n_; ++i)
      for (int j = 0; j < n_; ++j) at(i, j + 1) = at(i, j) + h_ * u.comp(0)[Grid::index(fx, i, j, 0)];
    std::vector<double> line(static_cast<std::size_t>(n_ + 1));
    for (int axis = 0; axis < 2; ++axis)
      for (int k = 0; k <= n_; ++k) {
        for (int i = 0; i <= n_; ++i) line[static_cast<std::size_t>(i)] = axis == 0 ? at(i, k) : at(k, i);
        spline_coefficients(line);
        for (int i = 0; i <= n_; ++i) (axis == 0 ? at(i, k) : at(k, i)) = line[static_cast<std::size_t>(i)];
      }
  }

  Vec3 operator()(const Vec3& x) const {
    const double px = std::clamp(x[0], 0.0, 1.0) / h_, py = std::clamp(x[1], 0.0, 1.0) / h_;
    const int i = std::min(static_cast<int>(px), n_ - 1), j = std::min(static_cast<int>(py), n_ - 1);
    double wx[4], dwx[4], wy[4], dwy[4];
    basis(px - i, wx, dwx);
    basis(py - j, wy, dwy);
    double ux = 0.0, uy = 0.0;
    for (int a = 0; a < 4; ++a)
      for (int b = 0; b < 4; ++b) {
        const double c = coef(i - 1 + a, j - 1 + b);
        ux += wx[a] * dwy[b] * c;
        uy -= dwx[a] * wy[b] * c;
      }
    return {ux / h_, uy / h_, 0.0};
  }

 private:
  double& at(int i, int j) { return c_[static_cast<std::size_t>(i + (n_ + 1) * j)]; }

  // Zero end slope means mirrored coefficients.
  double coef(int i, int j) const {
    i = i < 0 ? -i : (i > n_ ? 2 * n_ - i : i);
    j = j < 0 ? -j : (j > n_ ? 2 * n_ - j : j);
    return c_[static_cast<std::size_t>(i + (n_ + 1) * j)];
  }

  // Solves (c_{i-1} + 4 c_i + c_{i+1}) / 6 = f_i with c_{-1} = c_1 and
  // c_{n+1} = c_{n-1}, in place (Thomas algorithm).
  static void spline_coefficients(std::vector<double>& f) {
    const std::size_t m = f.size();
    std::vector<double> sup(m), diag(m, 4.0 / 6.0), sub(m, 1.0 / 6.0);
    for (std::size_t i = 0; i < m; ++i) sup[i] = 1.0 / 6.0;
    sup[0] = 2.0 / 6.0;
    sub[m - 1] = 2.0 / 6.0;
    for (std::size_t i = 1; i < m; ++i) {
      const double w = sub[i] / diag[i - 1];
      diag[i] -= w * sup[i - 1];
      f[i] -= w * f[i - 1];
    }
    f[m - 1] /= diag[m - 1];
    for (std::size_t i = m - 1; i-- > 0;) f[i] = (f[i] - sup[i] * f[i + 1]) / diag[i];
  }

  static void basis(double t, double* w, double* dw) {
    const double s = 1.0 - t;
    w[0] = s * s * s / 6.0;
    w[1] = (3.0 * t * t * t - 6.0 * t * t + 4.0) / 6.0;
    w[2] = (-3.0 * t * t * t + 3.0 * t * t + 3.0 * t + 1.0) / 6.0;
    w[3] = t * t * t / 6.0;
    dw[0] = -0.5 * s * s;
    dw[1] = 0.5 * (3.0 * t * t - 4.0 * t);
    dw[2] = 0.5 * (-3.0 * t * t + 2.0 * t + 1.0);
    dw[3] = 0.5 * t * t;
  }

  int n_;
  double h_;
  std::vector<double> c_;
};

// Time-one RK4 flow of u from the identity, node by node. In 2D the velocity
// is evaluated through the stream-function interpolant; in 3D through the
// face interpolant.
MapField flow_map(const VectorField& u, int steps) {
  const Grid& g = u.grid();
  const int d = g.dim();
  const double dt = 1.0 / steps;
  const double margin = clamp_margin(g);
  std::function<Vec3(const Vec3&)> vel;
  if (d == 2) {
    vel = [si = StreamInterpolant(u)](const Vec3& x) { return si(x); };
  } else {
    vel = [&u](const Vec3& x) { return sample(u, x); };
  }
  MapField y = MapField::identity(g);
  bool exited = false;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < sz(g.num_nodes()); ++ni) {
    const std::size_t node = static_cast<std::size_t>(ni);
    Vec3 p{0.0, 0.0, 0.0};
    for (int c = 0; c < d; ++c) p[static_cast<std::size_t>(c)] = y.at(node, c);
    auto shifted = [&](const Vec3& base, const Vec3& k, double s) {
      Vec3 q = base;
      for (int c = 0; c < d; ++c) q[static_cast<std::size_t>(c)] += s * k[static_cast<std::size_t>(c)];
      return q;
    };
    for (int st = 0; st < steps; ++st) {
      const Vec3 k1 = vel(p);
      const Vec3 k2 = vel(shifted(p, k1, 0.5 * dt));
      const Vec3 k3 = vel(shifted(p, k2, 0.5 * dt));
      const Vec3 k4 = vel(shifted(p, k3, dt));
      for (int c = 0; c < d; ++c) {
        const std::size_t cc = static_cast<std::size_t>(c);
        p[cc] += dt / 6.0 * (k1[cc] + 2.0 * k2[cc] + 2.0 * k3[cc] + k4[cc]);
      }
    }
    for (int c = 0; c < d; ++c) {
      const double v = p[static_cast<std::size_t>(c)];
      if (v < -margin || v > 1.0 + margin) {
#pragma omp atomic write
        exited = true;
      }
      y.at(node, c) = v;
    }
  }
  if (exited) throw DomainExit("flow_map: trajectory left the unit box");
  y.set_identity_boundary();
  return y;
}

// Approximate inverse of the augmented-Lagrangian Hessian
//   h^d [I + a D^T D + rho B^T B],  B x = cof(DZ0) : Dx,
// by the Woodbury identity around the spectral inverse of the first part.
// Without the rho term the stiff compressive directions (eigenvalues near
// rho / h^2) leave L-BFGS stalling at roundoff.
class AlPreconditioner {
 public:
  AlPreconditioner(const MapField& z0, double a, double rho)
      : grid_(z0.grid()), a_(a), rho_(rho), cof_(deformation_gradient(z0)) {
    for (SmallMat& m : cof_.m) m = cof(m);
  }

  MapField apply(const MapField& g) const {
    const MapField y = a_inv(g);
    ScalarField r = b(y);
    ScalarField t(grid_);
    const double a = a_, irho = 1.0 / rho_;
    const CgStats st = pcg(
        [&](const ScalarField& x, ScalarField& out) {
          out = b(a_inv(bt(x)));
          for (std::size_t i = 0; i < out.size(); ++i) out[i] += irho * x[i];
        },
        [&](const ScalarField& x, ScalarField& out) {
          out = spectral::neumann_cell_filter(x, [&](double lam) { return irho + lam / (1.0 + a * lam); });
        },
        [](const ScalarField& x, const ScalarField& y) { return ordered_sum(x.size(), [&](std::size_t i) { return x[i] * y[i]; }); },
        [](double s, const ScalarField& x, ScalarField& y) {
          for (std::size_t i = 0; i < y.size(); ++i) y[i] += s * x[i];
        },
        r, t, 1e-10, 0.0, 300);
    (void)st;  // a loosely solved correction still gives a usable H0
    MapField out = y - a_inv(bt(t));
    out *= 1.0 / grid_.cell_volume();
    return out;
  }

 private:
  MapField a_inv(const MapField& x) const { return spectral::node_quadratic_inverse(x, a_, 1.0); }

  ScalarField b(const MapField& x) const {
    const CellMatrices dx = deformation_gradient(x);
    ScalarField out(grid_);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = cof_.m[i].dot(dx.m[i]);
    return out;
  }

  MapField bt(const ScalarField& c) const {
    CellMatrices p = cof_;
    for (std::size_t i = 0; i < p.m.size(); ++i) p.m[i] *= c[i];
    return deformation_gradient_adjoint(p);
  }

  Grid grid_;
  double a_, rho_;
  CellMatrices cof_;
};

double max_det_error(const MapField& z) {
  const ScalarField det = cell_determinant(z);
  return ordered_max(det.size(), [&](std::size_t i) { return std::abs(det[i] - 1.0); });
}

}  // namespace

void ProjectionProblem::validate() const {
  if (!(a > 0.0)) throw InvalidArgument("projection: a must be > 0");
  if (!(r > s.dim())) throw InvalidArgument("projection: r must exceed the dimension");
  if (rho < 0.0) throw InvalidArgument("projection: rho must be > 0 (or 0 for the default)");
  if (!(tol_det > 0.0) || !(tol_opt > 0.0)) throw InvalidArgument("projection: tolerances must be > 0");
  if (max_outer < 1 || max_inner < 1) throw InvalidArgument("projection: iteration limits must be >= 1");
  if (rk4_steps < 1) throw InvalidArgument("projection: rk4_steps must be >= 1");
}

double objective_and_gradient(const MapField& z, const ScalarField& q, const ProjectionProblem& prob, double rho,
                              MapField* grad) {
  const Grid& g = z.grid();
  require_same_grid(g, prob.s.grid(), "objective_and_gradient");
  require_same_grid(g, q.grid(), "objective_and_gradient");
  const CellMatrices dz = deformation_gradient(z);
  const CellMatrices ds = deformation_gradient(prob.s);
  const std::size_t nc = dz.m.size();
  std::vector<double> dets(nc);
  for (std::size_t i = 0; i < nc; ++i) dets[i] = det(dz.m[i]);
  const double min_det = ordered_min(nc, [&](std::size_t i) { return dets[i]; });
  if (!(min_det > kDetGuard)) return std::numeric_limits<double>::infinity();

  const MapField diff = z - prob.s;
  const double a = prob.a;
  const double cell_terms = ordered_sum(nc, [&](std::size_t i) {
    const SmallMat e = dz.m[i] - ds.m[i];
    const double c = dets[i] - 1.0;
    return 0.5 * a * e.dot(e) + q[i] * c + 0.5 * rho * c * c;
  });
  const double value = 0.5 * dot(diff, diff) + g.cell_volume() * cell_terms;

  if (grad) {
    CellMatrices p{g, std::vector<SmallMat>(nc, SmallMat(g.dim()))};
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ci = 0; ci < sz(nc); ++ci) {
      const std::size_t i = static_cast<std::size_t>(ci);
      p.m[i] = a * (dz.m[i] - ds.m[i]) + (q[i] + rho * (dets[i] - 1.0)) * cof(dz.m[i]);
    }
    MapField gr = deformation_gradient_adjoint(p);
    gr += diff;
    gr.set_zero_boundary();
    gr *= g.cell_volume();
    *grad = std::move(gr);
  }
  return value;
}

double lagrangian(const MapField& z, const ScalarField& q, const ProjectionProblem& prob) {
  return objective_and_gradient(z, q, prob, 0.0, nullptr);
}

ProjectionResult solve(const ProjectionProblem& prob, const MapField& init) {
  prob.validate();
  const Grid& g = prob.s.grid();
  require_same_grid(g, init.grid(), "projection solve");
  if (!init.has_identity_boundary()) throw InvalidArgument("projection solve: initial map must be the identity on the boundary");
  if (!(ordered_min(g.num_cells(), [&, det = cell_determinant(init)](std::size_t i) { return det[i]; }) > kDetGuard))
    throw MapDegenerate("projection solve: initial map has a cell with det <= 0.1");

  const double hd = g.cell_volume();
  ProjectionResult res{init, ScalarField(g), 0.0, 0.0, {}, 0.0, 0.0, prob.effective_rho(), 0, 0, {}};
  ScalarField& q = res.q_star;
  double rho = res.rho;
  std::vector<double> x = init.raw();

  auto grad_norm = [hd](const std::vector<double>& gv) {
    return std::sqrt(ordered_sum(gv.size(), [&](std::size_t i) { return gv[i] * gv[i]; }) / hd);
  };
  double prev_violation = std::numeric_limits<double>::infinity();
  std::string last_message;
  for (int outer = 1; outer <= prob.max_outer; ++outer) {
    LbfgsOptions opt;
    opt.max_iter = prob.max_inner;
    // Inexact early solves: no point resolving stationarity far below the
    // current constraint violation.
    opt.grad_tol = std::isfinite(prev_violation) ? std::max(prob.tol_opt, 1e-2 * prev_violation) : std::max(prob.tol_opt, 1e-4);
    std::vector<double> values;
    opt.on_accept = [&values](double f) { values.push_back(f); };
    MapField scratch(g);
    const ObjectiveFn f = [&](const std::vector<double>& xv, std::vector<double>& gv) {
      scratch.raw() = xv;
      MapField gm(g);
      const double v = objective_and_gradient(scratch, q, prob, rho, &gm);
      if (std::isfinite(v)) gv = std::move(gm.raw());
      return v;
    };
    MapField base(g);
    base.raw() = x;
    const AlPreconditioner precond(base, prob.a, rho);
    const PreconditionerFn h0 = [&](const std::vector<double>& gv, std::vector<double>& out) {
      MapField r(g);
      r.raw() = gv;
      out = std::move(precond.apply(r).raw());
    };
    const LbfgsResult lr = lbfgs_minimize(f, x, opt, h0, grad_norm);
    res.inner_iters += lr.iterations;
    res.inner_values.push_back(std::move(values));
    res.grad_norm = lr.grad_norm;
    last_message = lr.message;
    res.outer_iters = outer;

    res.z_star.raw() = x;
    const ScalarField dets = cell_determinant(res.z_star);
    const double violation = ordered_max(dets.size(), [&](std::size_t i) { return std::abs(dets[i] - 1.0); });
    res.det_violation = violation;
    if (violation <= prob.tol_det && lr.grad_norm <= prob.tol_opt) break;
    if (outer == prob.max_outer)
      throw MaxIterations("projection solve: no convergence after " + std::to_string(outer) + " outer iterations (det violation " +
                          std::to_string(violation) + ", gradient " + std::to_string(lr.grad_norm) + ", inner: " + last_message + ")");
    for (std::size_t i = 0; i < q.size(); ++i) q[i] += rho * (dets[i] - 1.0);
    if (violation > prob.tol_det && violation > 0.25 * prev_violation) rho *= 10.0;
    prev_violation = violation;
  }
  res.rho = rho;
  res.z_star.set_identity_boundary();
  res.objective = lagrangian(res.z_star, ScalarField(g), prob);
  res.certificate = uniqueness_certificate(q, deformation_gradient(res.z_star), prob.a);
  res.residual_f = residual_F(res.z_star, prob);
  return res;
}

ProjectionResult solve(const ProjectionProblem& prob) {
  prob.validate();
  return solve(prob, reference_point(prob, prob.rk4_steps).z_tilde);
}

double residual_F(const MapField& z, const ProjectionProblem& prob) {
  const Grid& g = z.grid();
  require_same_grid(g, prob.s.grid(), "residual_F");
  MapField gm = quadratic_gradient(z, prob.s, prob.a);
  extrapolate_boundary(gm);
  // g o z^{-1} at the face sample points.
  VectorField pulled(g);
  bool failed = false;
  const int n = g.n();
  for (int c = 0; c < g.dim(); ++c) {
    const auto fd = g.face_dims(c);
    auto& o = pulled.comp(c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t fi = 0; fi < sz(o.size()); ++fi) {
      const auto id = Grid::unindex(fd, static_cast<std::size_t>(fi));
      const int ic = id[static_cast<std::size_t>(c)];
      if (ic == 0 || ic == n) continue;
      try {
        const Vec3 y = invert_point(z, g.face_position(c, id[0], id[1], id[2]));
        o[static_cast<std::size_t>(fi)] = sample(gm, y)[static_cast<std::size_t>(c)];
      } catch (const MapDegenerate&) {
#pragma omp atomic write
        failed = true;
      }
    }
  }
  if (failed) throw MapDegenerate("residual_F: map inversion failed");
  const VectorField projected = leray_project(pulled);
  return norm_lr(compose(projected, z), prob.r);
}

VectorField linearized_velocity(const ProjectionProblem& prob) {
  const Grid& g = prob.s.grid();
  const MapField rhs = helmholtz_of_difference(prob.s, MapField::identity(g), prob.a);
  VectorField f = nodes_to_faces(rhs);
  f *= -1.0;
  return stokes_resolvent(f, prob.a).u;
}

ReferencePoint reference_point(const ProjectionProblem& prob, int rk4_steps) {
  if (rk4_steps < 1) throw InvalidArgument("reference_point: rk4_steps must be >= 1");
  VectorField u = linearized_velocity(prob);
  MapField z = flow_map(u, rk4_steps);
  const double err = max_det_error(z);
  return {std::move(z), std::move(u), err};
}

SmallnessReport smallness_report(const ProjectionProblem& prob, int ka_probe_n) {
  prob.validate();
  const Grid& g = prob.s.grid();
  const MapField id = MapField::identity(g);
  SmallnessReport rep;
  const MapField hs = helmholtz_of_difference(prob.s, id, prob.a);
  rep.delta = norm_lr(hs, prob.r);
  // (I - a Lap)(S - id - u*) on the faces, with the MAC Laplacian for u*.
  const VectorField u = linearized_velocity(prob);
  VectorField rest = nodes_to_faces(hs);
  VectorField hu = laplacian(u);
  hu *= -prob.a;
  hu += u;
  rest -= hu;
  rep.delta_prime = norm_lr(rest, prob.r);
  const int probe_n = ka_probe_n < 0 ? (g.dim() == 2 ? 256 : 48) : ka_probe_n;
  if (probe_n > 0) rep.k_a_est = k_a_estimate(g.dim(), prob.a, prob.r, probe_n);
  rep.k_a_scaling = std::pow(prob.a, -(g.dim() + prob.r) / (2.0 * prob.r));
  return rep;
}

double k_a_estimate(int dim, double a, double r, int probe_n) {
  const Grid g(dim, probe_n);
  const double h = g.h();
  double best = 0.0;
  // Widths from 0.45 down to a few cells, geometric ratio 0.85.
  for (double w = 0.45; w >= 4.0 * h; w *= 0.85) {
    const MapField f = MapField::from_function(g, [&](const Vec3& x) {
      double s = 0.0;
      for (int c = 0; c < dim; ++c) s += (x[static_cast<std::size_t>(c)] - 0.5) * (x[static_cast<std::size_t>(c)] - 0.5);
      const double t = 1.0 - s / (w * w);
      const double v = t > 0.0 ? t * t * t * t : 0.0;
      return Vec3{v, 0.0, 0.0};
    });
    const CellMatrices df = deformation_gradient(f);
    const double grad_inf = ordered_max(df.m.size(), [&](std::size_t i) { return df.m[i].frobenius_norm(); });
    const double xa = norm_xa(f, a, r);
    if (xa > 0.0) best = std::max(best, grad_inf / xa);
  }
  return best;
}

MapField random_feasible_map(const Grid& g, std::uint64_t seed, double amplitude) {
  // Normalize so that the largest velocity gradient equals `amplitude`.
  VectorField u = random_stream_velocity(g, seed, 6, 1.0);
  const CellMatrices du = deformation_gradient(faces_to_nodes(u));
  const double gmax = ordered_max(du.m.size(), [&](std::size_t i) { return du.m[i].frobenius_norm(); });
  if (gmax > 0.0) u *= amplitude / gmax;
  return flow_map(u, 16);
}

PressureRecovery pressure_recovery(const MapField& z, const ScalarField& q, const ProjectionProblem& prob) {
  const Grid& g = z.grid();
  const int d = g.dim();
  const auto nd = g.node_dims(), cd = g.cell_dims();
  const MapField gm = quadratic_gradient(z, prob.s, prob.a);
  const CellMatrices dz = deformation_gradient(z);
  const double w = 1.0 / (static_cast<double>(1 << (d - 1)) * g.h());
  const double avg = 1.0 / static_cast<double>(1 << d);
  const int kc = d == 3 ? 2 : 1;
  MapField diff(g), pred(g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < sz(g.num_nodes()); ++ni) {
    const auto id = Grid::unindex(nd, static_cast<std::size_t>(ni));
    if (g.is_boundary_node(id[0], id[1], id[2])) continue;
    double gq[3] = {0.0, 0.0, 0.0};
    SmallMat m(d);
    for (int dk = 0; dk < kc; ++dk)
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) {
          const int off[3] = {di, dj, dk};
          const std::size_t cell = Grid::index(cd, id[0] - 1 + di, id[1] - 1 + dj, d == 3 ? id[2] - 1 + dk : 0);
          for (int b = 0; b < d; ++b) gq[b] += (off[b] ? w : -w) * q[cell];
          m += avg * dz.m[cell];
        }
    for (int b = 0; b < d; ++b) {
      double p = 0.0;
      for (int c = 0; c < d; ++c) p += m(c, b) * gm.at(static_cast<std::size_t>(ni), c);
      pred.at(static_cast<std::size_t>(ni), b) = p;
      diff.at(static_cast<std::size_t>(ni), b) = gq[b] - p;
    }
  }
  return {std::sqrt(dot(diff, diff)), std::sqrt(dot(pred, pred))};
}

}  // namespace polyproj
