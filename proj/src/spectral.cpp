#include "spectral.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>
#include <numbers>
#include <tuple>
#include <vector>

namespace polyproj::spectral {

namespace {

enum class Axis {
  NeumannCell,    // cosine modes k = 0..n-1
  DirichletNode,  // sine modes on the n-1 interior nodes
  DirichletCell,  // sine modes on n cells with walls half a cell away
};

int axis_len(Axis a, int n) { return a == Axis::DirichletNode ? n - 1 : n; }

double axis_eig(Axis a, int m, int n, double ih2) {
  const int k = a == Axis::NeumannCell ? m : m + 1;
  return (2.0 - 2.0 * std::cos(std::numbers::pi * k / n)) * ih2;
}

fftw_r2r_kind forward_kind(Axis a) {
  switch (a) {
    case Axis::NeumannCell: return FFTW_REDFT10;
    case Axis::DirichletNode: return FFTW_RODFT00;
    default: return FFTW_RODFT10;
  }
}

fftw_r2r_kind backward_kind(Axis a) {
  switch (a) {
    case Axis::NeumannCell: return FFTW_REDFT01;
    case Axis::DirichletNode: return FFTW_RODFT00;
    default: return FFTW_RODFT01;
  }
}

struct Buffer {
  explicit Buffer(std::size_t n) : p(fftw_alloc_real(n)), size(n) {}
  ~Buffer() { fftw_free(p); }
  Buffer(const Buffer&) = delete;
  Buffer& operator=(const Buffer&) = delete;
  double* p;
  std::size_t size;
};

using PlanKey = std::tuple<int, int, int, int, int, int, int>;

// Planning is not thread-safe in FFTW; executing an existing plan is.
fftw_plan cached_plan(int dim, const int* len, const fftw_r2r_kind* kinds) {
  static std::mutex mu;
  static std::map<PlanKey, fftw_plan> plans;
  const PlanKey key{dim, len[0], len[1], dim == 3 ? len[2] : 0, kinds[0], kinds[1], dim == 3 ? kinds[2] : -1};
  std::lock_guard<std::mutex> lock(mu);
  auto it = plans.find(key);
  if (it != plans.end()) return it->second;
  // FFTW is row-major (last index fastest); our arrays are x-fastest.
  int rev_len[3];
  fftw_r2r_kind rev_kind[3];
  for (int a = 0; a < dim; ++a) {
    rev_len[a] = len[dim - 1 - a];
    rev_kind[a] = kinds[dim - 1 - a];
  }
  std::size_t total = 1;
  for (int a = 0; a < dim; ++a) total *= static_cast<std::size_t>(len[a]);
  Buffer scratch(total);
  fftw_plan p = fftw_plan_r2r(dim, rev_len, scratch.p, scratch.p, rev_kind, FFTW_ESTIMATE);
  plans.emplace(key, p);
  return p;
}

// Divide by den(m0, m1, m2) on the transform basis, in place. A zero
// denominator (the Neumann constant mode) maps to zero.
template <class Den>
void diagonal_solve(int dim, const Axis* axes, int n, double* data, Den&& den) {
  int len[3] = {1, 1, 1};
  fftw_r2r_kind fk[3] = {FFTW_R2HC, FFTW_R2HC, FFTW_R2HC}, bk[3] = {FFTW_R2HC, FFTW_R2HC, FFTW_R2HC};
  std::size_t total = 1;
  double norm = 1.0;
  for (int ax = 0; ax < dim; ++ax) {
    len[ax] = axis_len(axes[ax], n);
    fk[ax] = forward_kind(axes[ax]);
    bk[ax] = backward_kind(axes[ax]);
    total *= static_cast<std::size_t>(len[ax]);
    norm *= 2.0 * n;
  }
  const fftw_plan fwd = cached_plan(dim, len, fk);
  const fftw_plan bwd = cached_plan(dim, len, bk);
  fftw_execute_r2r(fwd, data, data);
  for (std::size_t idx = 0; idx < total; ++idx) {
    const int i = static_cast<int>(idx % static_cast<std::size_t>(len[0]));
    const int j = static_cast<int>((idx / static_cast<std::size_t>(len[0])) % static_cast<std::size_t>(len[1]));
    const int k = dim == 3 ? static_cast<int>(idx / (static_cast<std::size_t>(len[0]) * static_cast<std::size_t>(len[1]))) : 0;
    const double d = den(i, j, k);
    data[idx] = d != 0.0 ? data[idx] / (d * norm) : 0.0;
  }
  fftw_execute_r2r(bwd, data, data);
}

// shift + a * (sum of second-difference eigenvalues).
void laplace_solve(int dim, const Axis* axes, int n, double h, double shift, double a, double* data) {
  const double ih2 = 1.0 / (h * h);
  std::vector<double> eig[3];
  for (int ax = 0; ax < dim; ++ax) {
    const int len = axis_len(axes[ax], n);
    eig[ax].resize(static_cast<std::size_t>(len));
    for (int m = 0; m < len; ++m) eig[ax][static_cast<std::size_t>(m)] = axis_eig(axes[ax], m, n, ih2);
  }
  diagonal_solve(dim, axes, n, data, [&](int i, int j, int k) {
    double lam = eig[0][static_cast<std::size_t>(i)] + eig[1][static_cast<std::size_t>(j)];
    if (dim == 3) lam += eig[2][static_cast<std::size_t>(k)];
    return shift + a * lam;
  });
}

}  // namespace

ScalarField neumann_poisson_inverse(const ScalarField& rhs) {
  const Grid& g = rhs.grid();
  Buffer buf(rhs.size());
  std::copy(rhs.values().begin(), rhs.values().end(), buf.p);
  const Axis axes[3] = {Axis::NeumannCell, Axis::NeumannCell, Axis::NeumannCell};
  laplace_solve(g.dim(), axes, g.n(), g.h(), 0.0, 1.0, buf.p);
  ScalarField out(g);
  std::copy(buf.p, buf.p + rhs.size(), out.values().begin());
  return out;
}

ScalarField neumann_cell_filter(const ScalarField& rhs, const std::function<double(double)>& den) {
  const Grid& g = rhs.grid();
  const int d = g.dim(), n = g.n();
  const double ih2 = 1.0 / (g.h() * g.h());
  std::vector<double> eig(static_cast<std::size_t>(n));
  for (int m = 0; m < n; ++m) eig[static_cast<std::size_t>(m)] = axis_eig(Axis::NeumannCell, m, n, ih2);
  Buffer buf(rhs.size());
  std::copy(rhs.values().begin(), rhs.values().end(), buf.p);
  const Axis axes[3] = {Axis::NeumannCell, Axis::NeumannCell, Axis::NeumannCell};
  diagonal_solve(d, axes, n, buf.p, [&](int i, int j, int k) {
    double lam = eig[static_cast<std::size_t>(i)] + eig[static_cast<std::size_t>(j)];
    if (d == 3) lam += eig[static_cast<std::size_t>(k)];
    return den(lam);
  });
  ScalarField out(g);
  std::copy(buf.p, buf.p + rhs.size(), out.values().begin());
  return out;
}

VectorField face_helmholtz_inverse(const VectorField& rhs, double a) {
  const Grid& g = rhs.grid();
  const int d = g.dim(), n = g.n();
  VectorField out(g);
  for (int c = 0; c < d; ++c) {
    Axis axes[3];
    int len[3] = {1, 1, 1};
    std::size_t total = 1;
    for (int ax = 0; ax < d; ++ax) {
      axes[ax] = ax == c ? Axis::DirichletNode : Axis::DirichletCell;
      len[ax] = axis_len(axes[ax], n);
      total *= static_cast<std::size_t>(len[ax]);
    }
    const auto fd = g.face_dims(c);
    Buffer buf(total);
    // Interior faces: the normal index runs 1..n-1.
    auto face_of = [&](std::size_t idx) {
      int id[3] = {0, 0, 0};
      id[0] = static_cast<int>(idx % static_cast<std::size_t>(len[0]));
      id[1] = static_cast<int>((idx / static_cast<std::size_t>(len[0])) % static_cast<std::size_t>(len[1]));
      id[2] = d == 3 ? static_cast<int>(idx / (static_cast<std::size_t>(len[0]) * static_cast<std::size_t>(len[1]))) : 0;
      id[c] += 1;
      return Grid::index(fd, id[0], id[1], id[2]);
    };
    for (std::size_t idx = 0; idx < total; ++idx) buf.p[idx] = rhs.comp(c)[face_of(idx)];
    laplace_solve(d, axes, n, g.h(), 1.0, a, buf.p);
    for (std::size_t idx = 0; idx < total; ++idx) out.comp(c)[face_of(idx)] = buf.p[idx];
  }
  return out;
}

MapField node_helmholtz_inverse(const MapField& rhs, double a) {
  const Grid& g = rhs.grid();
  const int d = g.dim(), n = g.n();
  const auto nd = g.node_dims();
  std::size_t total = 1;
  int len[3] = {1, 1, 1};
  for (int ax = 0; ax < d; ++ax) {
    len[ax] = n - 1;
    total *= static_cast<std::size_t>(n - 1);
  }
  auto node_of = [&](std::size_t idx) {
    const int i = static_cast<int>(idx % static_cast<std::size_t>(len[0])) + 1;
    const int j = static_cast<int>((idx / static_cast<std::size_t>(len[0])) % static_cast<std::size_t>(len[1])) + 1;
    const int k = d == 3 ? static_cast<int>(idx / (static_cast<std::size_t>(len[0]) * static_cast<std::size_t>(len[1]))) + 1 : 0;
    return Grid::index(nd, i, j, k);
  };
  const Axis axes[3] = {Axis::DirichletNode, Axis::DirichletNode, Axis::DirichletNode};
  MapField out(g);
  Buffer buf(total);
  for (int c = 0; c < d; ++c) {
    for (std::size_t idx = 0; idx < total; ++idx) buf.p[idx] = rhs.at(node_of(idx), c);
    laplace_solve(d, axes, n, g.h(), 1.0, a, buf.p);
    for (std::size_t idx = 0; idx < total; ++idx) out.at(node_of(idx), c) = buf.p[idx];
  }
  return out;
}

MapField node_quadratic_inverse(const MapField& rhs, double a, double scale) {
  const Grid& g = rhs.grid();
  const int d = g.dim(), n = g.n();
  const auto nd = g.node_dims();
  std::size_t total = 1;
  int len[3] = {1, 1, 1};
  for (int ax = 0; ax < d; ++ax) {
    len[ax] = n - 1;
    total *= static_cast<std::size_t>(n - 1);
  }
  // 1D symbols on sine mode k: second difference 4 sin^2(t/2)/h^2, two-point
  // average squared cos^2(t/2), with t = pi k / n.
  std::vector<double> s2(static_cast<std::size_t>(n - 1)), c2(static_cast<std::size_t>(n - 1));
  for (int m = 0; m < n - 1; ++m) {
    const double t = std::numbers::pi * (m + 1) / n;
    s2[static_cast<std::size_t>(m)] = 4.0 * std::sin(0.5 * t) * std::sin(0.5 * t) / (g.h() * g.h());
    c2[static_cast<std::size_t>(m)] = std::cos(0.5 * t) * std::cos(0.5 * t);
  }
  auto node_of = [&](std::size_t idx) {
    const int i = static_cast<int>(idx % static_cast<std::size_t>(len[0])) + 1;
    const int j = static_cast<int>((idx / static_cast<std::size_t>(len[0])) % static_cast<std::size_t>(len[1])) + 1;
    const int k = d == 3 ? static_cast<int>(idx / (static_cast<std::size_t>(len[0]) * static_cast<std::size_t>(len[1]))) + 1 : 0;
    return Grid::index(nd, i, j, k);
  };
  const Axis axes[3] = {Axis::DirichletNode, Axis::DirichletNode, Axis::DirichletNode};
  auto den = [&](int i, int j, int k) {
    const std::size_t m[3] = {static_cast<std::size_t>(i), static_cast<std::size_t>(j), static_cast<std::size_t>(k)};
    double lam = 0.0;
    for (int b = 0; b < d; ++b) {
      double t = s2[m[b]];
      for (int e = 0; e < d; ++e)
        if (e != b) t *= c2[m[e]];
      lam += t;
    }
    return scale * (1.0 + a * lam);
  };
  MapField out(g);
  Buffer buf(total);
  for (int c = 0; c < d; ++c) {
    for (std::size_t idx = 0; idx < total; ++idx) buf.p[idx] = rhs.at(node_of(idx), c);
    diagonal_solve(d, axes, n, buf.p, den);
    for (std::size_t idx = 0; idx < total; ++idx) out.at(node_of(idx), c) = buf.p[idx];
  }
  return out;
}

}  // namespace polyproj::spectral
