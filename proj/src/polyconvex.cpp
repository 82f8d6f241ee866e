#include "polyproj/polyconvex.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "polyproj/errors.hpp"
#include "polyproj/parallel.hpp"
#include "polyproj/rng.hpp"

namespace polyproj {

namespace {

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

SmallMat random_near_identity(CounterRng& rng, int dim, double range) {
  SmallMat m = SmallMat::identity(dim);
  for (int i = 0; i < dim; ++i)
    for (int j = 0; j < dim; ++j) m(i, j) += rng.uniform(-range, range);
  return m;
}

}  // namespace

MatrixInequalityReport verify_matrix_inequality(const MatrixInequalityOptions& opt) {
  if (opt.dim < 2 || opt.dim > 4) throw InvalidArgument("verify_matrix_inequality: dim must be 2, 3 or 4");
  if (opt.samples < 1) throw InvalidArgument("verify_matrix_inequality: samples must be >= 1");
  if (!(opt.entry_range >= 0.0)) throw InvalidArgument("verify_matrix_inequality: entry_range must be >= 0");
  const double c = opt.constant_c > 0.0 ? opt.constant_c : default_cofactor_constant(opt.dim);

  // Per-block tallies combined in block order keep the result independent of
  // the thread count.
  const std::uint64_t n = opt.samples;
  const std::uint64_t block = kReductionBlock;
  const std::uint64_t blocks = (n + block - 1) / block;
  std::vector<std::uint64_t> kept(blocks, 0), viol(blocks, 0);
  std::vector<double> worst(blocks, std::numeric_limits<double>::infinity());

#pragma omp parallel for schedule(dynamic, 16)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(blocks); ++b) {
    const std::uint64_t lo = static_cast<std::uint64_t>(b) * block;
    const std::uint64_t hi = std::min(n, lo + block);
    std::uint64_t k = 0, v = 0;
    double w = std::numeric_limits<double>::infinity();
    for (std::uint64_t s = lo; s < hi; ++s) {
      CounterRng rng(opt.seed, s);
      const SmallMat m = random_near_identity(rng, opt.dim, opt.entry_range);
      const SmallMat a = random_near_identity(rng, opt.dim, opt.entry_range);
      if (sigma_min(m) < opt.sigma_floor) continue;
      double lhs, rhs;
      if (opt.unsigned_form) {
        const SmallMat d = a - m;
        lhs = (cof(a) - cof(m)).dot(d);
        rhs = -d.dot(d);
      } else {
        const InequalitySides sides = cofactor_inequality_sides(m, a, c);
        lhs = sides.lhs;
        rhs = sides.rhs;
      }
      ++k;
      w = std::min(w, lhs - rhs);
      if (lhs < rhs - opt.tolerance * (1.0 + std::abs(lhs) + std::abs(rhs))) ++v;
    }
    kept[static_cast<std::size_t>(b)] = k;
    viol[static_cast<std::size_t>(b)] = v;
    worst[static_cast<std::size_t>(b)] = w;
  }

  MatrixInequalityReport rep;
  rep.samples = n;
  double w = std::numeric_limits<double>::infinity();
  for (std::size_t b = 0; b < blocks; ++b) {
    rep.kept += kept[b];
    rep.violations += viol[b];
    w = std::min(w, worst[b]);
  }
  rep.worst_margin = rep.kept > 0 ? w : 0.0;
  return rep;
}

CounterexamplePoint d4_counterexample(double alpha) {
  if (!(alpha > 1.0) || !std::isfinite(alpha)) throw InvalidArgument("d4_counterexample: alpha must be > 1");
  const SmallMat m = SmallMat::identity(4);
  const SmallMat a = SmallMat::diagonal({alpha, alpha, alpha, std::pow(alpha, -3.0)});
  const InequalitySides sides = cofactor_inequality_sides(m, a, 1.0);
  const SmallMat d = a - m;
  return {sides.lhs, d.dot(d)};
}

double bregman(const MapField& z, const MapField& z0, const ScalarField& q) {
  require_same_grid(z.grid(), z0.grid(), "bregman");
  require_same_grid(z.grid(), q.grid(), "bregman");
  const CellMatrices dz = deformation_gradient(z);
  const CellMatrices dz0 = deformation_gradient(z0);
  const double vol = z.grid().cell_volume();
  return vol * ordered_sum(q.size(), [&](std::size_t c) {
           const SmallMat& a = dz.m[c];
           const SmallMat& m = dz0.m[c];
           const double dm = det(m);
           return q[c] * (std::abs(det(a)) - std::abs(dm) - sgn(dm) * cof(m).dot(a - m));
         });
}

BregmanBound bregman_bound(const MapField& z, const MapField& z0, const ScalarField& q, double c) {
  require_same_grid(z.grid(), z0.grid(), "bregman_bound");
  require_same_grid(z.grid(), q.grid(), "bregman_bound");
  if (c <= 0.0) c = default_cofactor_constant(z.grid().dim());
  const CellMatrices dz = deformation_gradient(z);
  const CellMatrices dz0 = deformation_gradient(z0);
  const std::size_t nc = q.size();
  const double sigma = ordered_min(nc, [&](std::size_t i) { return sigma_min(dz0.m[i]); });
  const double qdet = ordered_max(nc, [&](std::size_t i) { return std::abs(q[i] * det(dz0.m[i])); });
  const double vol = z.grid().cell_volume();
  const double dist2 = vol * ordered_sum(nc, [&](std::size_t i) {
                         const SmallMat d = dz.m[i] - dz0.m[i];
                         return d.dot(d);
                       });
  BregmanBound out;
  out.neg_bregman = -bregman(z, z0, q);
  out.sigma = sigma;
  out.bound = sigma > 0.0 ? c / (2.0 * sigma * sigma) * qdet * dist2 : std::numeric_limits<double>::infinity();
  return out;
}

CertificateReport uniqueness_certificate(const ScalarField& q, const CellMatrices& dz, double a) {
  if (!(a > 0.0)) throw InvalidArgument("uniqueness_certificate: a must be > 0");
  if (q.size() == 0 || dz.m.empty()) throw InvalidArgument("uniqueness_certificate: empty field");
  if (dz.m.size() != q.size()) throw GridMismatch("uniqueness_certificate: q and DZ differ in size");
  CertificateReport r;
  r.sigma_lower = ordered_min(dz.m.size(), [&](std::size_t i) { return sigma_min(dz.m[i]); });
  const double qhat = mean(q);
  r.q_oscillation = ordered_max(q.size(), [&](std::size_t i) { return std::abs(q[i] - qhat); });
  r.threshold = a * r.sigma_lower * r.sigma_lower / kCertificateDenominator;
  r.passes = r.q_oscillation <= r.threshold;
  return r;
}

}  // namespace polyproj
