#include "polyproj/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "polyproj/errors.hpp"
#include "polyproj/parallel.hpp"

namespace polyproj {

namespace {

using Dims = std::array<int, 3>;

std::ptrdiff_t sz(std::size_t n) { return static_cast<std::ptrdiff_t>(n); }

std::size_t stride(const Dims& d, int axis) {
  return axis == 0 ? 1 : (axis == 1 ? static_cast<std::size_t>(d[0]) : static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]));
}

// ---- 1D interpolation weights -------------------------------------------

enum class AxisKind {
  Node,        // samples at i*h, i = 0..n
  CellExtrap,  // samples at (i+1/2)h, linear extrapolation beyond the end samples
  CellOdd,     // samples at (i+1/2)h, odd reflection about the wall (zero trace)
};

struct AxisWeights {
  int idx[2] = {0, 0};
  double w[2] = {0.0, 0.0};
  double dw[2] = {0.0, 0.0};  // d w / d x
  int count = 0;
};

AxisWeights axis_weights(AxisKind kind, double x, int n) {
  const double inv_h = static_cast<double>(n);
  AxisWeights a;
  auto two = [&](int i0, double t) {
    a.count = 2;
    a.idx[0] = i0;
    a.idx[1] = i0 + 1;
    a.w[0] = 1.0 - t;
    a.w[1] = t;
    a.dw[0] = -inv_h;
    a.dw[1] = inv_h;
  };
  switch (kind) {
    case AxisKind::Node: {
      const double s = x * inv_h;
      const int i0 = std::clamp(static_cast<int>(std::floor(s)), 0, n - 1);
      two(i0, s - i0);
      break;
    }
    case AxisKind::CellExtrap: {
      const double s = x * inv_h - 0.5;
      const int i0 = std::clamp(static_cast<int>(std::floor(s)), 0, n - 2);
      two(i0, s - i0);
      break;
    }
    case AxisKind::CellOdd: {
      const double s = x * inv_h - 0.5;
      if (s < 0.0) {
        a.count = 1;
        a.idx[0] = 0;
        a.w[0] = 2.0 * s + 1.0;
        a.dw[0] = 2.0 * inv_h;
      } else if (s > n - 1) {
        a.count = 1;
        a.idx[0] = n - 1;
        a.w[0] = 1.0 - 2.0 * (s - (n - 1));
        a.dw[0] = -2.0 * inv_h;
      } else {
        const int i0 = std::min(static_cast<int>(std::floor(s)), n - 2);
        two(i0, s - i0);
      }
      break;
    }
  }
  return a;
}

// Multilinear combination over the per-axis weights; fetch(index) returns the
// stored value at a flat index of `dims`.
template <class Fetch>
double multilinear(int dim, const Dims& dims, const AxisWeights* ax, Fetch&& fetch) {
  double s = 0.0;
  const int kc = dim == 3 ? ax[2].count : 1;
  for (int c2 = 0; c2 < kc; ++c2)
    for (int c1 = 0; c1 < ax[1].count; ++c1)
      for (int c0 = 0; c0 < ax[0].count; ++c0) {
        double w = ax[0].w[c0] * ax[1].w[c1];
        int k = 0;
        if (dim == 3) {
          w *= ax[2].w[c2];
          k = ax[2].idx[c2];
        }
        s += w * fetch(Grid::index(dims, ax[0].idx[c0], ax[1].idx[c1], k));
      }
  return s;
}

Vec3 clamp_to_box(const Grid& g, Vec3 x) {
  const double m = clamp_margin(g);
  for (int c = 0; c < g.dim(); ++c) {
    if (!(x[static_cast<std::size_t>(c)] >= -m && x[static_cast<std::size_t>(c)] <= 1.0 + m))
      throw DomainExit("position " + std::to_string(x[static_cast<std::size_t>(c)]) + " leaves the unit box beyond the clamp margin");
    x[static_cast<std::size_t>(c)] = std::clamp(x[static_cast<std::size_t>(c)], 0.0, 1.0);
  }
  return x;
}

Vec3 clamp_silent(const Grid& g, Vec3 x) {
  for (int c = 0; c < g.dim(); ++c) x[static_cast<std::size_t>(c)] = std::clamp(x[static_cast<std::size_t>(c)], 0.0, 1.0);
  return x;
}

double sample_face_component(const VectorField& v, int c, const Vec3& x) {
  const Grid& g = v.grid();
  AxisWeights ax[3];
  for (int b = 0; b < g.dim(); ++b)
    ax[b] = axis_weights(b == c ? AxisKind::Node : AxisKind::CellOdd, x[static_cast<std::size_t>(b)], g.n());
  const auto& data = v.comp(c);
  return multilinear(g.dim(), g.face_dims(c), ax, [&](std::size_t i) { return data[i]; });
}

// Value and Jacobian of the node interpolant.
void sample_map_jacobian(const MapField& z, const Vec3& x, Vec3& val, SmallMat& jac) {
  const Grid& g = z.grid();
  const int d = g.dim();
  AxisWeights ax[3];
  for (int b = 0; b < d; ++b) ax[b] = axis_weights(AxisKind::Node, x[static_cast<std::size_t>(b)], g.n());
  const Dims dims = g.node_dims();
  val = {0.0, 0.0, 0.0};
  jac = SmallMat(d);
  const int kc = d == 3 ? 2 : 1;
  for (int c2 = 0; c2 < kc; ++c2)
    for (int c1 = 0; c1 < 2; ++c1)
      for (int c0 = 0; c0 < 2; ++c0) {
        const int k = d == 3 ? ax[2].idx[c2] : 0;
        const std::size_t node = Grid::index(dims, ax[0].idx[c0], ax[1].idx[c1], k);
        double w[3] = {ax[0].w[c0], ax[1].w[c1], d == 3 ? ax[2].w[c2] : 1.0};
        double dw[3] = {ax[0].dw[c0], ax[1].dw[c1], d == 3 ? ax[2].dw[c2] : 0.0};
        const double wall = w[0] * w[1] * w[2];
        for (int a = 0; a < d; ++a) {
          const double za = z.at(node, a);
          val[static_cast<std::size_t>(a)] += wall * za;
          for (int b = 0; b < d; ++b) {
            double p = dw[b];
            for (int e = 0; e < d; ++e)
              if (e != b) p *= w[e];
            jac(a, b) += p * za;
          }
        }
      }
}

SmallMat inverse(const SmallMat& m) {
  SmallMat inv = cof(m).transpose();
  inv *= 1.0 / det(m);
  return inv;
}

}  // namespace

// ---------------------------------------------------------------------------
// Grid

Grid::Grid(int dim, int n) : dim_(dim), n_(n) {
  if (dim != 2 && dim != 3) throw InvalidArgument("Grid: dim must be 2 or 3");
  if (n < 4) throw InvalidArgument("Grid: n must be >= 4");
}

double Grid::cell_volume() const { return std::pow(h(), dim_); }

std::array<int, 3> Grid::node_dims() const { return {n_ + 1, n_ + 1, dim_ == 3 ? n_ + 1 : 1}; }
std::array<int, 3> Grid::cell_dims() const { return {n_, n_, dim_ == 3 ? n_ : 1}; }
std::array<int, 3> Grid::face_dims(int c) const {
  if (c < 0 || c >= dim_) throw InvalidArgument("Grid::face_dims: bad component");
  Dims d = cell_dims();
  d[static_cast<std::size_t>(c)] += 1;
  return d;
}

std::array<int, 3> Grid::unindex(const std::array<int, 3>& dims, std::size_t idx) {
  const int i = static_cast<int>(idx % static_cast<std::size_t>(dims[0]));
  idx /= static_cast<std::size_t>(dims[0]);
  const int j = static_cast<int>(idx % static_cast<std::size_t>(dims[1]));
  const int k = static_cast<int>(idx / static_cast<std::size_t>(dims[1]));
  return {i, j, k};
}

Vec3 Grid::node_position(int i, int j, int k) const {
  return {i * h(), j * h(), dim_ == 3 ? k * h() : 0.0};
}

Vec3 Grid::cell_center(int i, int j, int k) const {
  return {(i + 0.5) * h(), (j + 0.5) * h(), dim_ == 3 ? (k + 0.5) * h() : 0.0};
}

Vec3 Grid::face_position(int c, int i, int j, int k) const {
  Vec3 p = cell_center(i, j, k);
  const int id[3] = {i, j, k};
  p[static_cast<std::size_t>(c)] = id[c] * h();
  return p;
}

bool Grid::is_boundary_node(int i, int j, int k) const {
  if (i == 0 || i == n_ || j == 0 || j == n_) return true;
  return dim_ == 3 && (k == 0 || k == n_);
}

void require_same_grid(const Grid& a, const Grid& b, const char* what) {
  if (a != b) throw GridMismatch(std::string(what) + ": fields live on different grids");
}

// ---------------------------------------------------------------------------
// Fields

ScalarField ScalarField::from_function(const Grid& g, const std::function<double(const Vec3&)>& f) {
  ScalarField s(g);
  const Dims d = g.cell_dims();
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto id = Grid::unindex(d, i);
    s[i] = f(g.cell_center(id[0], id[1], id[2]));
  }
  return s;
}

ScalarField& ScalarField::operator+=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_, "ScalarField +=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}
ScalarField& ScalarField::operator-=(const ScalarField& o) {
  require_same_grid(grid_, o.grid_, "ScalarField -=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}
ScalarField& ScalarField::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

VectorField::VectorField(const Grid& g) : grid_(g) {
  for (int c = 0; c < g.dim(); ++c) c_[static_cast<std::size_t>(c)].assign(g.num_faces(c), 0.0);
}

VectorField VectorField::from_function(const Grid& g, const std::function<Vec3(const Vec3&)>& f) {
  VectorField v(g);
  for (int c = 0; c < g.dim(); ++c) {
    const Dims d = g.face_dims(c);
    auto& data = v.comp(c);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto id = Grid::unindex(d, i);
      data[i] = f(g.face_position(c, id[0], id[1], id[2]))[static_cast<std::size_t>(c)];
    }
  }
  v.zero_boundary_normal();
  return v;
}

void VectorField::zero_boundary_normal() {
  const int n = grid_.n();
  for (int c = 0; c < grid_.dim(); ++c) {
    const Dims d = grid_.face_dims(c);
    auto& data = comp(c);
    for (std::size_t i = 0; i < data.size(); ++i) {
      const auto id = Grid::unindex(d, i);
      const int ic = id[static_cast<std::size_t>(c)];
      if (ic == 0 || ic == n) data[i] = 0.0;
    }
  }
}

VectorField& VectorField::operator+=(const VectorField& o) {
  axpy(1.0, o);
  return *this;
}
VectorField& VectorField::operator-=(const VectorField& o) {
  axpy(-1.0, o);
  return *this;
}
VectorField& VectorField::operator*=(double s) {
  for (int c = 0; c < grid_.dim(); ++c)
    for (double& x : comp(c)) x *= s;
  return *this;
}
void VectorField::axpy(double a, const VectorField& x) {
  require_same_grid(grid_, x.grid_, "VectorField axpy");
  for (int c = 0; c < grid_.dim(); ++c) {
    auto& y = comp(c);
    const auto& xs = x.comp(c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < sz(y.size()); ++i) y[static_cast<std::size_t>(i)] += a * xs[static_cast<std::size_t>(i)];
  }
}

MapField MapField::identity(const Grid& g) {
  return from_function(g, [](const Vec3& x) { return x; });
}

MapField MapField::from_function(const Grid& g, const std::function<Vec3(const Vec3&)>& f) {
  MapField z(g);
  const Dims d = g.node_dims();
  for (std::size_t i = 0; i < z.num_nodes(); ++i) {
    const auto id = Grid::unindex(d, i);
    const Vec3 v = f(g.node_position(id[0], id[1], id[2]));
    for (int c = 0; c < g.dim(); ++c) z.at(i, c) = v[static_cast<std::size_t>(c)];
  }
  return z;
}

void MapField::set_identity_boundary() {
  const Dims d = grid_.node_dims();
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    const auto id = Grid::unindex(d, i);
    if (!grid_.is_boundary_node(id[0], id[1], id[2])) continue;
    const Vec3 p = grid_.node_position(id[0], id[1], id[2]);
    for (int c = 0; c < dim(); ++c) at(i, c) = p[static_cast<std::size_t>(c)];
  }
}

void MapField::set_zero_boundary() {
  const Dims d = grid_.node_dims();
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    const auto id = Grid::unindex(d, i);
    if (!grid_.is_boundary_node(id[0], id[1], id[2])) continue;
    for (int c = 0; c < dim(); ++c) at(i, c) = 0.0;
  }
}

bool MapField::has_identity_boundary() const {
  const Dims d = grid_.node_dims();
  for (std::size_t i = 0; i < num_nodes(); ++i) {
    const auto id = Grid::unindex(d, i);
    if (!grid_.is_boundary_node(id[0], id[1], id[2])) continue;
    const Vec3 p = grid_.node_position(id[0], id[1], id[2]);
    for (int c = 0; c < dim(); ++c)
      if (at(i, c) != p[static_cast<std::size_t>(c)]) return false;
  }
  return true;
}

bool MapField::all_finite() const {
  return std::all_of(v_.begin(), v_.end(), [](double x) { return std::isfinite(x); });
}

MapField& MapField::operator+=(const MapField& o) {
  require_same_grid(grid_, o.grid_, "MapField +=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] += o.v_[i];
  return *this;
}
MapField& MapField::operator-=(const MapField& o) {
  require_same_grid(grid_, o.grid_, "MapField -=");
  for (std::size_t i = 0; i < v_.size(); ++i) v_[i] -= o.v_[i];
  return *this;
}
MapField& MapField::operator*=(double s) {
  for (double& x : v_) x *= s;
  return *this;
}

// ---------------------------------------------------------------------------
// Deformation gradient

CellMatrices deformation_gradient(const MapField& z) {
  const Grid& g = z.grid();
  const int d = g.dim();
  const Dims cd = g.cell_dims(), nd = g.node_dims();
  const double w = 1.0 / (static_cast<double>(1 << (d - 1)) * g.h());
  CellMatrices out{g, std::vector<SmallMat>(g.num_cells(), SmallMat(d))};
  const int kc = d == 3 ? 2 : 1;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < sz(g.num_cells()); ++ci) {
    const auto id = Grid::unindex(cd, static_cast<std::size_t>(ci));
    SmallMat m(d);
    for (int dk = 0; dk < kc; ++dk)
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) {
          const std::size_t node = Grid::index(nd, id[0] + di, id[1] + dj, id[2] + dk);
          const int off[3] = {di, dj, dk};
          for (int b = 0; b < d; ++b) {
            const double s = off[b] ? w : -w;
            for (int a = 0; a < d; ++a) m(a, b) += s * z.at(node, a);
          }
        }
    out.m[static_cast<std::size_t>(ci)] = m;
  }
  return out;
}

MapField deformation_gradient_adjoint(const CellMatrices& p) {
  const Grid& g = p.grid;
  const int d = g.dim();
  const int n = g.n();
  const Dims cd = g.cell_dims(), nd = g.node_dims();
  const double w = 1.0 / (static_cast<double>(1 << (d - 1)) * g.h());
  MapField out(g);
  const int kc = d == 3 ? 2 : 1;
  // Gather over the cells touching each node keeps the result deterministic.
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < sz(g.num_nodes()); ++ni) {
    const auto id = Grid::unindex(nd, static_cast<std::size_t>(ni));
    if (g.is_boundary_node(id[0], id[1], id[2])) continue;
    double acc[3] = {0.0, 0.0, 0.0};
    for (int dk = 0; dk < kc; ++dk)
      for (int dj = 0; dj < 2; ++dj)
        for (int di = 0; di < 2; ++di) {
          // Cell whose corner (di, dj, dk) is this node.
          const int c0 = id[0] - di, c1 = id[1] - dj, c2 = d == 3 ? id[2] - dk : 0;
          if (c0 < 0 || c1 < 0 || c2 < 0 || c0 >= n || c1 >= n || (d == 3 && c2 >= n)) continue;
          const SmallMat& m = p.m[Grid::index(cd, c0, c1, c2)];
          const int off[3] = {di, dj, dk};
          for (int b = 0; b < d; ++b) {
            const double s = off[b] ? w : -w;
            for (int a = 0; a < d; ++a) acc[a] += s * m(a, b);
          }
        }
    for (int a = 0; a < d; ++a) out.at(static_cast<std::size_t>(ni), a) = acc[a];
  }
  return out;
}

ScalarField cell_determinant(const MapField& z) {
  const CellMatrices dz = deformation_gradient(z);
  ScalarField out(z.grid());
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < sz(out.size()); ++i) out[static_cast<std::size_t>(i)] = det(dz.m[static_cast<std::size_t>(i)]);
  return out;
}

// ---------------------------------------------------------------------------
// Stencils

ScalarField laplacian(const ScalarField& p) {
  const Grid& g = p.grid();
  const Dims cd = g.cell_dims();
  const double ih2 = 1.0 / (g.h() * g.h());
  ScalarField out(g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < sz(p.size()); ++ci) {
    const std::size_t c = static_cast<std::size_t>(ci);
    const auto id = Grid::unindex(cd, c);
    double s = 0.0;
    for (int a = 0; a < g.dim(); ++a) {
      const std::size_t st = stride(cd, a);
      const int ia = id[static_cast<std::size_t>(a)];
      if (ia > 0) s += p[c - st] - p[c];
      if (ia < g.n() - 1) s += p[c + st] - p[c];
    }
    out[c] = s * ih2;
  }
  return out;
}

VectorField laplacian(const VectorField& v) {
  const Grid& g = v.grid();
  const int n = g.n();
  const double ih2 = 1.0 / (g.h() * g.h());
  VectorField out(g);
  for (int c = 0; c < g.dim(); ++c) {
    const Dims fd = g.face_dims(c);
    const auto& u = v.comp(c);
    auto& o = out.comp(c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t fi = 0; fi < sz(u.size()); ++fi) {
      const std::size_t f = static_cast<std::size_t>(fi);
      const auto id = Grid::unindex(fd, f);
      const int ic = id[static_cast<std::size_t>(c)];
      if (ic == 0 || ic == n) {
        o[f] = 0.0;
        continue;
      }
      double s = 0.0;
      for (int a = 0; a < g.dim(); ++a) {
        const std::size_t st = stride(fd, a);
        if (a == c) {
          s += u[f - st] + u[f + st] - 2.0 * u[f];
        } else {
          // Odd ghost across the wall enforces a zero tangential trace.
          const int ia = id[static_cast<std::size_t>(a)];
          s += (ia > 0 ? u[f - st] : -u[f]) + (ia < n - 1 ? u[f + st] : -u[f]) - 2.0 * u[f];
        }
      }
      o[f] = s * ih2;
    }
  }
  return out;
}

MapField laplacian(const MapField& z) {
  const Grid& g = z.grid();
  const int d = g.dim();
  const Dims nd = g.node_dims();
  const double ih2 = 1.0 / (g.h() * g.h());
  MapField out(g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < sz(g.num_nodes()); ++ni) {
    const std::size_t node = static_cast<std::size_t>(ni);
    const auto id = Grid::unindex(nd, node);
    if (g.is_boundary_node(id[0], id[1], id[2])) continue;
    for (int c = 0; c < d; ++c) {
      double s = 0.0;
      for (int a = 0; a < d; ++a) {
        const std::size_t st = stride(nd, a);
        s += z.at(node - st, c) + z.at(node + st, c) - 2.0 * z.at(node, c);
      }
      out.at(node, c) = s * ih2;
    }
  }
  return out;
}

ScalarField divergence(const VectorField& v) {
  const Grid& g = v.grid();
  const Dims cd = g.cell_dims();
  const double ih = 1.0 / g.h();
  ScalarField out(g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < sz(out.size()); ++ci) {
    const auto id = Grid::unindex(cd, static_cast<std::size_t>(ci));
    double s = 0.0;
    for (int c = 0; c < g.dim(); ++c) {
      const Dims fd = g.face_dims(c);
      const std::size_t lo = Grid::index(fd, id[0], id[1], id[2]);
      s += v.comp(c)[lo + stride(fd, c)] - v.comp(c)[lo];
    }
    out[static_cast<std::size_t>(ci)] = s * ih;
  }
  return out;
}

VectorField gradient(const ScalarField& p) {
  const Grid& g = p.grid();
  const int n = g.n();
  const Dims cd = g.cell_dims();
  const double ih = 1.0 / g.h();
  VectorField out(g);
  for (int c = 0; c < g.dim(); ++c) {
    const Dims fd = g.face_dims(c);
    auto& o = out.comp(c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t fi = 0; fi < sz(o.size()); ++fi) {
      auto id = Grid::unindex(fd, static_cast<std::size_t>(fi));
      const int ic = id[static_cast<std::size_t>(c)];
      if (ic == 0 || ic == n) continue;
      const std::size_t hi = Grid::index(cd, id[0], id[1], id[2]);
      o[static_cast<std::size_t>(fi)] = (p[hi] - p[hi - stride(cd, c)]) * ih;
    }
  }
  return out;
}

MapField helmholtz_apply(const MapField& z, double a) {
  MapField out = laplacian(z);
  out *= -a;
  out += z;
  return out;
}

// ---------------------------------------------------------------------------
// Transfers

MapField faces_to_nodes(const VectorField& v) {
  const Grid& g = v.grid();
  const int d = g.dim();
  const Dims nd = g.node_dims();
  const double wt = 1.0 / static_cast<double>(1 << (d - 1));
  MapField out(g);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < sz(g.num_nodes()); ++ni) {
    const auto id = Grid::unindex(nd, static_cast<std::size_t>(ni));
    if (g.is_boundary_node(id[0], id[1], id[2])) continue;
    for (int c = 0; c < d; ++c) {
      const Dims fd = g.face_dims(c);
      double s = 0.0;
      const int kc = d == 3 ? 2 : 1;
      for (int dk = 0; dk < kc; ++dk)
        for (int dj = 0; dj < 2; ++dj)
          for (int di = 0; di < 2; ++di) {
            const int off[3] = {di, dj, dk};
            if (off[c]) continue;  // the normal axis does not straddle
            int f[3] = {id[0], id[1], id[2]};
            for (int b = 0; b < d; ++b)
              if (b != c) f[b] -= off[b];
            s += v.comp(c)[Grid::index(fd, f[0], f[1], f[2])];
          }
      out.at(static_cast<std::size_t>(ni), c) = s * wt;
    }
  }
  return out;
}

VectorField nodes_to_faces(const MapField& z) {
  const Grid& g = z.grid();
  const int d = g.dim();
  const int n = g.n();
  const Dims nd = g.node_dims();
  const double wt = 1.0 / static_cast<double>(1 << (d - 1));
  VectorField out(g);
  for (int c = 0; c < d; ++c) {
    const Dims fd = g.face_dims(c);
    auto& o = out.comp(c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t fi = 0; fi < sz(o.size()); ++fi) {
      const auto id = Grid::unindex(fd, static_cast<std::size_t>(fi));
      const int ic = id[static_cast<std::size_t>(c)];
      if (ic == 0 || ic == n) continue;
      double s = 0.0;
      const int kc = d == 3 ? 2 : 1;
      for (int dk = 0; dk < kc; ++dk)
        for (int dj = 0; dj < 2; ++dj)
          for (int di = 0; di < 2; ++di) {
            const int off[3] = {di, dj, dk};
            if (off[c]) continue;
            s += z.at(Grid::index(nd, id[0] + di, id[1] + dj, id[2] + dk), c);
          }
      o[static_cast<std::size_t>(fi)] = s * wt;
    }
  }
  return out;
}

std::vector<double> faces_to_cells(const VectorField& v) {
  const Grid& g = v.grid();
  const int d = g.dim();
  const Dims cd = g.cell_dims();
  std::vector<double> out(g.num_cells() * static_cast<std::size_t>(d), 0.0);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < sz(g.num_cells()); ++ci) {
    const auto id = Grid::unindex(cd, static_cast<std::size_t>(ci));
    for (int c = 0; c < d; ++c) {
      const Dims fd = g.face_dims(c);
      const std::size_t lo = Grid::index(fd, id[0], id[1], id[2]);
      out[static_cast<std::size_t>(ci) * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)] =
          0.5 * (v.comp(c)[lo] + v.comp(c)[lo + stride(fd, c)]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Interpolation and composition

double clamp_margin(const Grid& g) { return 2.0 * g.h(); }

Vec3 sample(const MapField& z, const Vec3& x) {
  const Grid& g = z.grid();
  const Vec3 p = clamp_silent(g, x);
  AxisWeights ax[3];
  for (int b = 0; b < g.dim(); ++b) ax[b] = axis_weights(AxisKind::Node, p[static_cast<std::size_t>(b)], g.n());
  Vec3 out{0.0, 0.0, 0.0};
  for (int c = 0; c < g.dim(); ++c)
    out[static_cast<std::size_t>(c)] = multilinear(g.dim(), g.node_dims(), ax, [&](std::size_t i) { return z.at(i, c); });
  return out;
}

double sample(const ScalarField& f, const Vec3& x) {
  const Grid& g = f.grid();
  const Vec3 p = clamp_silent(g, x);
  AxisWeights ax[3];
  for (int b = 0; b < g.dim(); ++b) ax[b] = axis_weights(AxisKind::CellExtrap, p[static_cast<std::size_t>(b)], g.n());
  return multilinear(g.dim(), g.cell_dims(), ax, [&](std::size_t i) { return f[i]; });
}

Vec3 sample(const VectorField& v, const Vec3& x) {
  const Grid& g = v.grid();
  const Vec3 p = clamp_silent(g, x);
  Vec3 out{0.0, 0.0, 0.0};
  for (int c = 0; c < g.dim(); ++c) out[static_cast<std::size_t>(c)] = sample_face_component(v, c, p);
  return out;
}

ScalarField compose(const ScalarField& f, const MapField& z) {
  require_same_grid(f.grid(), z.grid(), "compose");
  const Grid& g = f.grid();
  const Dims cd = g.cell_dims();
  ScalarField out(g);
  bool exited = false;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ci = 0; ci < sz(out.size()); ++ci) {
    const auto id = Grid::unindex(cd, static_cast<std::size_t>(ci));
    try {
      const Vec3 pos = clamp_to_box(g, sample(z, g.cell_center(id[0], id[1], id[2])));
      out[static_cast<std::size_t>(ci)] = sample(f, pos);
    } catch (const DomainExit&) {
#pragma omp atomic write
      exited = true;
    }
  }
  if (exited) throw DomainExit("compose: map leaves the unit box");
  return out;
}

VectorField compose(const VectorField& f, const MapField& z) {
  require_same_grid(f.grid(), z.grid(), "compose");
  const Grid& g = f.grid();
  VectorField out(g);
  bool exited = false;
  for (int c = 0; c < g.dim(); ++c) {
    const Dims fd = g.face_dims(c);
    auto& o = out.comp(c);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t fi = 0; fi < sz(o.size()); ++fi) {
      const auto id = Grid::unindex(fd, static_cast<std::size_t>(fi));
      try {
        const Vec3 pos = clamp_to_box(g, sample(z, g.face_position(c, id[0], id[1], id[2])));
        o[static_cast<std::size_t>(fi)] = sample_face_component(f, c, pos);
      } catch (const DomainExit&) {
#pragma omp atomic write
        exited = true;
      }
    }
  }
  if (exited) throw DomainExit("compose: map leaves the unit box");
  out.zero_boundary_normal();
  return out;
}

MapField compose(const MapField& f, const MapField& z) {
  require_same_grid(f.grid(), z.grid(), "compose");
  const Grid& g = f.grid();
  MapField out(g);
  bool exited = false;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < sz(g.num_nodes()); ++ni) {
    const std::size_t node = static_cast<std::size_t>(ni);
    Vec3 x{0.0, 0.0, 0.0};
    for (int c = 0; c < g.dim(); ++c) x[static_cast<std::size_t>(c)] = z.at(node, c);
    try {
      const Vec3 v = sample(f, clamp_to_box(g, x));
      for (int c = 0; c < g.dim(); ++c) out.at(node, c) = v[static_cast<std::size_t>(c)];
    } catch (const DomainExit&) {
#pragma omp atomic write
      exited = true;
    }
  }
  if (exited) throw DomainExit("compose: map leaves the unit box");
  return out;
}

Vec3 invert_point(const MapField& z, const Vec3& x) {
  const Grid& g = z.grid();
  const int d = g.dim();
  constexpr int kMaxIter = 50;
  constexpr double kTol = 1e-10;
  Vec3 y = clamp_silent(g, x);
  Vec3 val;
  SmallMat jac(d);
  auto resid = [&](const Vec3& p, Vec3& r) {
    sample_map_jacobian(z, p, val, jac);
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      r[static_cast<std::size_t>(c)] = val[static_cast<std::size_t>(c)] - x[static_cast<std::size_t>(c)];
      s += r[static_cast<std::size_t>(c)] * r[static_cast<std::size_t>(c)];
    }
    return std::sqrt(s);
  };
  Vec3 r{0.0, 0.0, 0.0};
  double rn = resid(y, r);
  for (int it = 0; it < kMaxIter && rn > kTol; ++it) {
    const double dj = det(jac);
    if (!(std::abs(dj) > 1e-14)) break;
    const SmallMat inv = inverse(jac);
    Vec3 step{0.0, 0.0, 0.0};
    for (int a = 0; a < d; ++a)
      for (int b = 0; b < d; ++b) step[static_cast<std::size_t>(a)] -= inv(a, b) * r[static_cast<std::size_t>(b)];
    // Damped update: the interpolant is only piecewise smooth.
    double t = 1.0;
    for (int ls = 0; ls < 30; ++ls, t *= 0.5) {
      Vec3 cand = y;
      for (int c = 0; c < d; ++c) cand[static_cast<std::size_t>(c)] += t * step[static_cast<std::size_t>(c)];
      cand = clamp_silent(g, cand);
      Vec3 rc;
      const double rcn = resid(cand, rc);
      if (rcn < rn || ls == 29) {
        y = cand;
        r = rc;
        rn = rcn;
        break;
      }
    }
    sample_map_jacobian(z, y, val, jac);
  }
  if (!(rn <= kTol)) throw MapDegenerate("invert_map: Newton iteration did not converge (residual " + std::to_string(rn) + ")");
  return y;
}

MapField invert_map(const MapField& z) {
  const Grid& g = z.grid();
  const Dims nd = g.node_dims();
  MapField out(g);
  bool failed = false;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t ni = 0; ni < sz(g.num_nodes()); ++ni) {
    const auto id = Grid::unindex(nd, static_cast<std::size_t>(ni));
    try {
      const Vec3 y = invert_point(z, g.node_position(id[0], id[1], id[2]));
      for (int c = 0; c < g.dim(); ++c) out.at(static_cast<std::size_t>(ni), c) = y[static_cast<std::size_t>(c)];
    } catch (const MapDegenerate&) {
#pragma omp atomic write
      failed = true;
    }
  }
  if (failed) throw MapDegenerate("invert_map: Newton iteration did not converge");
  out.set_identity_boundary();
  return out;
}

VectorField compose_inverse(const VectorField& f, const MapField& z) {
  require_same_grid(f.grid(), z.grid(), "compose_inverse");
  const Grid& g = f.grid();
  VectorField out(g);
  bool failed = false;
  for (int c = 0; c < g.dim(); ++c) {
    const Dims fd = g.face_dims(c);
    auto& o = out.comp(c);
    const int n = g.n();
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t fi = 0; fi < sz(o.size()); ++fi) {
      const auto id = Grid::unindex(fd, static_cast<std::size_t>(fi));
      const int ic = id[static_cast<std::size_t>(c)];
      if (ic == 0 || ic == n) continue;
      try {
        const Vec3 y = invert_point(z, g.face_position(c, id[0], id[1], id[2]));
        o[static_cast<std::size_t>(fi)] = sample_face_component(f, c, y);
      } catch (const MapDegenerate&) {
#pragma omp atomic write
        failed = true;
      }
    }
  }
  if (failed) throw MapDegenerate("compose_inverse: map inversion failed");
  return out;
}

// ---------------------------------------------------------------------------
// Inner products and norms

namespace {

// Trapezoid weight of a node relative to h^d.
double node_weight(const Grid& g, const std::array<int, 3>& id) {
  double w = 1.0;
  for (int a = 0; a < g.dim(); ++a)
    if (id[static_cast<std::size_t>(a)] == 0 || id[static_cast<std::size_t>(a)] == g.n()) w *= 0.5;
  return w;
}

double finish_lr(double sum_pow, double r) { return std::pow(sum_pow, 1.0 / r); }

void check_r(double r) {
  if (!(r >= 1.0)) throw InvalidArgument("norm_lr: r must be >= 1");
}

}  // namespace

double dot(const ScalarField& a, const ScalarField& b) {
  require_same_grid(a.grid(), b.grid(), "dot");
  return a.grid().cell_volume() * ordered_sum(a.size(), [&](std::size_t i) { return a[i] * b[i]; });
}

double dot(const VectorField& a, const VectorField& b) {
  require_same_grid(a.grid(), b.grid(), "dot");
  const Grid& g = a.grid();
  double s = 0.0;
  for (int c = 0; c < g.dim(); ++c) {
    const Dims fd = g.face_dims(c);
    const std::size_t st = stride(fd, c);
    const int n = g.n();
    const auto& x = a.comp(c);
    const auto& y = b.comp(c);
    s += ordered_sum(x.size(), [&](std::size_t i) {
      const int ic = static_cast<int>((i / st) % static_cast<std::size_t>(fd[static_cast<std::size_t>(c)]));
      return (ic == 0 || ic == n) ? 0.0 : x[i] * y[i];
    });
  }
  return g.cell_volume() * s;
}

double dot(const MapField& a, const MapField& b) {
  require_same_grid(a.grid(), b.grid(), "dot");
  const Grid& g = a.grid();
  const Dims nd = g.node_dims();
  return g.cell_volume() * ordered_sum(g.num_nodes(), [&](std::size_t i) {
           double s = 0.0;
           for (int c = 0; c < g.dim(); ++c) s += a.at(i, c) * b.at(i, c);
           return node_weight(g, Grid::unindex(nd, i)) * s;
         });
}

double mean(const ScalarField& f) {
  return f.grid().cell_volume() * ordered_sum(f.size(), [&](std::size_t i) { return f[i]; });
}

double norm_lr(const ScalarField& f, double r) {
  check_r(r);
  if (std::isinf(r)) return std::max(0.0, ordered_max(f.size(), [&](std::size_t i) { return std::abs(f[i]); }));
  return finish_lr(f.grid().cell_volume() * ordered_sum(f.size(), [&](std::size_t i) { return std::pow(std::abs(f[i]), r); }), r);
}

double norm_lr(const VectorField& f, double r) {
  check_r(r);
  const Grid& g = f.grid();
  const int d = g.dim();
  const std::vector<double> cells = faces_to_cells(f);
  auto mag = [&](std::size_t i) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      const double v = cells[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(c)];
      s += v * v;
    }
    return std::sqrt(s);
  };
  if (std::isinf(r)) return std::max(0.0, ordered_max(g.num_cells(), mag));
  return finish_lr(g.cell_volume() * ordered_sum(g.num_cells(), [&](std::size_t i) { return std::pow(mag(i), r); }), r);
}

double norm_lr(const MapField& f, double r) {
  check_r(r);
  const Grid& g = f.grid();
  const Dims nd = g.node_dims();
  auto mag = [&](std::size_t i) {
    double s = 0.0;
    for (int c = 0; c < g.dim(); ++c) s += f.at(i, c) * f.at(i, c);
    return std::sqrt(s);
  };
  if (std::isinf(r)) return std::max(0.0, ordered_max(g.num_nodes(), mag));
  return finish_lr(g.cell_volume() * ordered_sum(g.num_nodes(), [&](std::size_t i) {
                     return node_weight(g, Grid::unindex(nd, i)) * std::pow(mag(i), r);
                   }),
                   r);
}

double hessian_norm_lr(const MapField& f, double r) {
  check_r(r);
  const Grid& g = f.grid();
  const int d = g.dim();
  const int n = g.n();
  const Dims nd = g.node_dims();
  const double ih2 = 1.0 / (g.h() * g.h());
  // Frobenius norm of the Hessian at each node; boundary nodes reuse the
  // nearest interior stencil.
  auto hess = [&](std::size_t i) {
    auto id = Grid::unindex(nd, i);
    for (int a = 0; a < d; ++a) id[static_cast<std::size_t>(a)] = std::clamp(id[static_cast<std::size_t>(a)], 1, n - 1);
    const std::size_t node = Grid::index(nd, id[0], id[1], id[2]);
    double s = 0.0;
    for (int c = 0; c < d; ++c)
      for (int a = 0; a < d; ++a) {
        const std::size_t sa = stride(nd, a);
        const double daa = (f.at(node + sa, c) + f.at(node - sa, c) - 2.0 * f.at(node, c)) * ih2;
        s += daa * daa;
        for (int b = a + 1; b < d; ++b) {
          const std::size_t sb = stride(nd, b);
          const double dab = 0.25 * ih2 *
                             (f.at(node + sa + sb, c) - f.at(node + sa - sb, c) - f.at(node - sa + sb, c) + f.at(node - sa - sb, c));
          s += 2.0 * dab * dab;
        }
      }
    return std::sqrt(s);
  };
  if (std::isinf(r)) return std::max(0.0, ordered_max(g.num_nodes(), hess));
  return finish_lr(g.cell_volume() * ordered_sum(g.num_nodes(), [&](std::size_t i) {
                     return node_weight(g, Grid::unindex(nd, i)) * std::pow(hess(i), r);
                   }),
                   r);
}

double norm_xa(const MapField& f, double a, double r) {
  if (!(a > 0.0)) throw InvalidArgument("norm_xa: a must be > 0");
  return norm_lr(f, r) + a * hessian_norm_lr(f, r);
}

double dirichlet_energy(const VectorField& v) { return -dot(laplacian(v), v); }

double max_speed(const VectorField& v) { return norm_lr(v, std::numeric_limits<double>::infinity()); }

}  // namespace polyproj
