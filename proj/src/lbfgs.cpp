#include "polyproj/lbfgs.hpp"

#include <cmath>
#include <deque>
#include <limits>

#include "polyproj/parallel.hpp"

namespace polyproj {

namespace {

using Vec = std::vector<double>;

// Relative change in f treated as evaluation noise.
constexpr double kRoundoff = 1e-12;

double vdot(const Vec& a, const Vec& b) {
  return ordered_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

struct Trial {
  double alpha = 0.0;
  double phi = 0.0;
  double dphi = 0.0;
  Vec x, g;
};

class LineSearch {
 public:
  LineSearch(const ObjectiveFn& f, const Vec& x0, const Vec& d, double phi0, double dphi0, const LbfgsOptions& opt,
             int& evals)
      : f_(f), x0_(x0), d_(d), phi0_(phi0), dphi0_(dphi0), opt_(opt), evals_(evals) {}

  // Returns true with the accepted point in `out`.
  bool run(double alpha_init, Trial& out) {
    Trial prev;
    prev.alpha = 0.0;
    prev.phi = phi0_;
    prev.dphi = dphi0_;
    double alpha = alpha_init;
    for (int i = 0; i < opt_.max_linesearch; ++i) {
      Trial cur = eval(alpha);
      if (accept(cur)) {
        out = std::move(cur);
        return true;
      }
      if (!std::isfinite(cur.phi) || cur.phi > phi0_ + opt_.c1 * alpha * dphi0_ || (i > 0 && cur.phi >= prev.phi))
        return zoom(prev, cur, out);
      if (cur.dphi >= 0.0) return zoom(cur, prev, out);
      prev = std::move(cur);
      alpha *= 2.0;
    }
    return false;
  }

 private:
  Trial eval(double alpha) {
    Trial t;
    t.alpha = alpha;
    t.x = x0_;
    for (std::size_t i = 0; i < t.x.size(); ++i) t.x[i] += alpha * d_[i];
    t.g.assign(t.x.size(), 0.0);
    t.phi = f_(t.x, t.g);
    ++evals_;
    t.dphi = std::isfinite(t.phi) ? vdot(t.g, d_) : std::numeric_limits<double>::infinity();
    return t;
  }

  bool accept(const Trial& t) const {
    if (!std::isfinite(t.phi)) return false;
    const bool wolfe = t.phi <= phi0_ + opt_.c1 * t.alpha * dphi0_ && std::abs(t.dphi) <= -opt_.c2 * dphi0_;
    // Near convergence the Armijo test drowns in roundoff; accept a point
    // where f has not risen beyond roundoff and the slope is strongly reduced.
    const bool approx = t.phi <= phi0_ + kRoundoff * std::abs(phi0_) && (2.0 * opt_.c1 - 1.0) * dphi0_ >= t.dphi &&
                        t.dphi >= opt_.c2 * dphi0_;
    return wolfe || approx;
  }

  bool zoom(Trial lo, Trial hi, Trial& out) {
    for (int i = 0; i < opt_.max_linesearch; ++i) {
      const double a = lo.alpha, b = hi.alpha;
      const double width = std::abs(b - a);
      if (width < 1e-16 * std::max(1.0, std::abs(a))) break;
      double alpha = 0.5 * (a + b);
      if (std::isfinite(hi.phi) && std::isfinite(hi.dphi)) {
        const double d1 = lo.dphi + hi.dphi - 3.0 * (lo.phi - hi.phi) / (a - b);
        const double disc = d1 * d1 - lo.dphi * hi.dphi;
        if (disc >= 0.0) {
          const double d2 = (b > a ? 1.0 : -1.0) * std::sqrt(disc);
          const double c = b - (b - a) * (hi.dphi + d2 - d1) / (hi.dphi - lo.dphi + 2.0 * d2);
          const double lo_b = std::min(a, b) + 0.1 * width, hi_b = std::max(a, b) - 0.1 * width;
          if (std::isfinite(c)) alpha = std::clamp(c, lo_b, hi_b);
        }
      } else {
        // Inadmissible upper end: pull back hard toward the good side.
        alpha = a + 0.25 * (b - a);
      }
      Trial cur = eval(alpha);
      if (accept(cur)) {
        out = std::move(cur);
        return true;
      }
      if (!std::isfinite(cur.phi) || cur.phi > phi0_ + opt_.c1 * alpha * dphi0_ || cur.phi >= lo.phi) {
        hi = std::move(cur);
      } else {
        if (cur.dphi * (hi.alpha - lo.alpha) >= 0.0) hi = lo;
        lo = std::move(cur);
      }
    }
    // Fall back to the best admissible point if it lowers f.
    if (lo.alpha > 0.0 && lo.phi < phi0_) {
      out = std::move(lo);
      return true;
    }
    return false;
  }

  const ObjectiveFn& f_;
  const Vec& x0_;
  const Vec& d_;
  double phi0_, dphi0_;
  const LbfgsOptions& opt_;
  int& evals_;
};

}  // namespace

LbfgsResult lbfgs_minimize(const ObjectiveFn& f, std::vector<double>& x, const LbfgsOptions& opt, const PreconditionerFn& h0,
                           const NormFn& grad_norm) {
  LbfgsResult res;
  const std::size_t n = x.size();
  auto norm = [&](const Vec& g) { return grad_norm ? grad_norm(g) : std::sqrt(vdot(g, g)); };
  auto apply_h0 = [&](const Vec& g, Vec& out) {
    if (h0)
      h0(g, out);
    else
      out = g;
  };

  Vec g(n, 0.0);
  double fx = f(x, g);
  res.evaluations = 1;
  if (!std::isfinite(fx)) {
    res.value = fx;
    res.message = "objective not finite at the starting point";
    return res;
  }

  std::deque<Vec> s_hist, y_hist;
  std::deque<double> rho_hist;
  Vec d(n), q(n), r(n);

  for (int it = 0;; ++it) {
    res.grad_norm = norm(g);
    res.value = fx;
    res.iterations = it;
    if (res.grad_norm <= opt.grad_tol) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      return res;
    }
    if (it >= opt.max_iter) {
      res.message = "iteration limit reached";
      return res;
    }

    // Two-loop recursion.
    q = g;
    const std::size_t m = s_hist.size();
    std::vector<double> alpha(m);
    for (std::size_t k = m; k-- > 0;) {
      alpha[k] = rho_hist[k] * vdot(s_hist[k], q);
      for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * y_hist[k][i];
    }
    apply_h0(q, r);
    if (!h0 && m > 0) {
      const double gamma = vdot(s_hist.back(), y_hist.back()) / vdot(y_hist.back(), y_hist.back());
      for (double& v : r) v *= gamma;
    }
    for (std::size_t k = 0; k < m; ++k) {
      const double beta = rho_hist[k] * vdot(y_hist[k], r);
      for (std::size_t i = 0; i < n; ++i) r[i] += (alpha[k] - beta) * s_hist[k][i];
    }
    for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
    double dphi0 = vdot(g, d);
    if (!(dphi0 < 0.0)) {
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      apply_h0(g, r);
      for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
      dphi0 = vdot(g, d);
      if (!(dphi0 < 0.0)) {
        res.message = "no descent direction";
        return res;
      }
    }

    double alpha0 = 1.0;
    if (!h0 && m == 0) alpha0 = std::min(1.0, 1.0 / std::sqrt(vdot(g, g)));
    Trial acc;
    bool ok = LineSearch(f, x, d, fx, dphi0, opt, res.evaluations).run(alpha0, acc);
    if (!ok && m > 0) {
      // Retry along the preconditioned gradient with a fresh memory.
      s_hist.clear();
      y_hist.clear();
      rho_hist.clear();
      apply_h0(g, r);
      for (std::size_t i = 0; i < n; ++i) d[i] = -r[i];
      dphi0 = vdot(g, d);
      ok = dphi0 < 0.0 && LineSearch(f, x, d, fx, dphi0, opt, res.evaluations).run(1.0, acc);
    }
    if (!ok) {
      res.message = "line search failed";
      return res;
    }

    Vec s(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = acc.x[i] - x[i];
      y[i] = acc.g[i] - g[i];
    }
    const double sy = vdot(s, y);
    if (sy > 1e-14 * std::sqrt(vdot(s, s) * vdot(y, y))) {
      s_hist.push_back(std::move(s));
      y_hist.push_back(std::move(y));
      rho_hist.push_back(1.0 / sy);
      if (static_cast<int>(s_hist.size()) > opt.memory) {
        s_hist.pop_front();
        y_hist.pop_front();
        rho_hist.pop_front();
      }
    }
    x = std::move(acc.x);
    g = std::move(acc.g);
    fx = acc.phi;
    if (opt.on_accept) opt.on_accept(fx);
  }
}

}  // namespace polyproj
