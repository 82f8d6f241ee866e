#pragma once

// Uniform grids on the unit box [0,1]^d (d = 2 or 3) and the discrete calculus
// used throughout: node-collocated maps, cell-centred scalars, face-staggered
// (MAC) velocities, the stencil operators between them, interpolation and
// composition, map inversion, and quadrature norms.
//
// Storage is x-fastest: index = i + nx * (j + ny * k). In 2D the k extent is 1.

#include <array>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "polyproj/smallmat.hpp"

namespace polyproj {

using Vec3 = std::array<double, 3>;

class Grid {
 public:
  Grid(int dim, int n);

  int dim() const { return dim_; }
  int n() const { return n_; }
  double h() const { return 1.0 / n_; }
  double cell_volume() const;

  std::array<int, 3> node_dims() const;
  std::array<int, 3> cell_dims() const;
  /// Lattice of the faces normal to axis `c`.
  std::array<int, 3> face_dims(int c) const;

  std::size_t num_nodes() const { return count(node_dims()); }
  std::size_t num_cells() const { return count(cell_dims()); }
  std::size_t num_faces(int c) const { return count(face_dims(c)); }

  static std::size_t index(const std::array<int, 3>& dims, int i, int j, int k) {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(dims[0]) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(dims[1]) * static_cast<std::size_t>(k));
  }
  static std::array<int, 3> unindex(const std::array<int, 3>& dims, std::size_t idx);

  Vec3 node_position(int i, int j, int k) const;
  Vec3 cell_center(int i, int j, int k) const;
  Vec3 face_position(int c, int i, int j, int k) const;

  bool is_boundary_node(int i, int j, int k) const;

  bool operator==(const Grid& o) const { return dim_ == o.dim_ && n_ == o.n_; }
  bool operator!=(const Grid& o) const { return !(*this == o); }

 private:
  static std::size_t count(const std::array<int, 3>& d) {
    return static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]) * static_cast<std::size_t>(d[2]);
  }
  int dim_;
  int n_;
};

void require_same_grid(const Grid& a, const Grid& b, const char* what);

/// Cell-centred scalar (pressure, multiplier).
class ScalarField {
 public:
  explicit ScalarField(const Grid& g) : grid_(g), v_(g.num_cells(), 0.0) {}
  static ScalarField from_function(const Grid& g, const std::function<double(const Vec3&)>& f);

  const Grid& grid() const { return grid_; }
  std::size_t size() const { return v_.size(); }
  double& operator[](std::size_t i) { return v_[i]; }
  double operator[](std::size_t i) const { return v_[i]; }
  std::span<double> values() { return v_; }
  std::span<const double> values() const { return v_; }

  ScalarField& operator+=(const ScalarField& o);
  ScalarField& operator-=(const ScalarField& o);
  ScalarField& operator*=(double s);

 private:
  Grid grid_;
  std::vector<double> v_;
};

/// Face-staggered vector field. Component c lives on the faces normal to axis
/// c. Boundary-normal faces are part of the storage and are kept at zero for
/// no-slip fields.
class VectorField {
 public:
  explicit VectorField(const Grid& g);
  static VectorField from_function(const Grid& g, const std::function<Vec3(const Vec3&)>& f);

  const Grid& grid() const { return grid_; }
  std::vector<double>& comp(int c) { return c_[static_cast<std::size_t>(c)]; }
  const std::vector<double>& comp(int c) const { return c_[static_cast<std::size_t>(c)]; }

  /// Zero the faces lying on the boundary of the box (normal component).
  void zero_boundary_normal();

  VectorField& operator+=(const VectorField& o);
  VectorField& operator-=(const VectorField& o);
  VectorField& operator*=(double s);
  void axpy(double a, const VectorField& x);

 private:
  Grid grid_;
  std::array<std::vector<double>, 3> c_;
};

/// Node-collocated field of R^d values: maps Z, S, X and their differences.
/// Values are interleaved per node: v[node * dim + c].
class MapField {
 public:
  explicit MapField(const Grid& g) : grid_(g), v_(g.num_nodes() * static_cast<std::size_t>(g.dim()), 0.0) {}
  static MapField identity(const Grid& g);
  static MapField from_function(const Grid& g, const std::function<Vec3(const Vec3&)>& f);

  const Grid& grid() const { return grid_; }
  int dim() const { return grid_.dim(); }
  std::size_t num_nodes() const { return grid_.num_nodes(); }
  double& at(std::size_t node, int c) { return v_[node * static_cast<std::size_t>(dim()) + static_cast<std::size_t>(c)]; }
  double at(std::size_t node, int c) const { return v_[node * static_cast<std::size_t>(dim()) + static_cast<std::size_t>(c)]; }
  std::vector<double>& raw() { return v_; }
  const std::vector<double>& raw() const { return v_; }

  /// Overwrite boundary nodes with the identity.
  void set_identity_boundary();
  /// Overwrite boundary nodes with zero (for displacement-type fields).
  void set_zero_boundary();
  bool has_identity_boundary() const;
  bool all_finite() const;

  MapField& operator+=(const MapField& o);
  MapField& operator-=(const MapField& o);
  MapField& operator*=(double s);
  friend MapField operator+(MapField a, const MapField& b) { return a += b; }
  friend MapField operator-(MapField a, const MapField& b) { return a -= b; }
  friend MapField operator*(double s, MapField a) { return a *= s; }

 private:
  Grid grid_;
  std::vector<double> v_;
};

/// One SmallMat per cell (e.g. the deformation gradient).
struct CellMatrices {
  Grid grid;
  std::vector<SmallMat> m;
};

// ---------------------------------------------------------------------------
// Stencils

/// Cell-centre deformation gradient from the node values, averaging the edge
/// differences of each cell (exact for multilinear maps, second order).
CellMatrices deformation_gradient(const MapField& z);

/// Transpose of the deformation-gradient stencil: given per-cell matrices P
/// (dE/dDZ), returns dE/dZ at the nodes. Boundary nodes are zeroed.
MapField deformation_gradient_adjoint(const CellMatrices& p);

/// det of the cell deformation gradients; in 2D this is quad area / h^2.
ScalarField cell_determinant(const MapField& z);

/// Cell-centred Neumann Laplacian, div(grad p).
ScalarField laplacian(const ScalarField& p);
/// MAC Laplacian with no-slip walls (ghost = -interior for tangential
/// directions). Boundary-normal faces of the result are zero.
VectorField laplacian(const VectorField& v);
/// Standard node Laplacian at interior nodes; boundary entries are zero.
MapField laplacian(const MapField& z);

ScalarField divergence(const VectorField& v);
/// Face gradient of a cell field; boundary-normal faces are zero.
VectorField gradient(const ScalarField& p);

/// (I - a Lap) applied at interior nodes; boundary nodes pass through.
MapField helmholtz_apply(const MapField& z, double a);

// ---------------------------------------------------------------------------
// Transfers between layouts

/// Average the two faces adjacent to each node along each component's normal
/// axis (four in 3D); boundary nodes get zero.
MapField faces_to_nodes(const VectorField& v);
/// Average node values onto faces; boundary-normal faces get zero.
VectorField nodes_to_faces(const MapField& z);
/// Average faces to cell centres: one R^d vector per cell, interleaved.
std::vector<double> faces_to_cells(const VectorField& v);

// ---------------------------------------------------------------------------
// Interpolation, composition, inversion

/// Clamp tolerance for composition: positions farther than this outside the
/// closed box raise DomainExit.
double clamp_margin(const Grid& g);

/// Multilinear interpolation of the node map at an arbitrary point.
Vec3 sample(const MapField& z, const Vec3& x);
/// Multilinear interpolation of a cell field (linear extrapolation at walls).
double sample(const ScalarField& f, const Vec3& x);
/// Multilinear interpolation of every component of a MAC field at x.
Vec3 sample(const VectorField& v, const Vec3& x);

/// f(z(x)) at the sample locations of f. Positions are the map interpolated to
/// those locations, then clamped to the box.
ScalarField compose(const ScalarField& f, const MapField& z);
VectorField compose(const VectorField& f, const MapField& z);
MapField compose(const MapField& f, const MapField& z);

/// Solve z(y) = x for y by Newton's method on the multilinear interpolant.
Vec3 invert_point(const MapField& z, const Vec3& x);
/// Per-node inverse map. Throws MapDegenerate on non-convergence.
MapField invert_map(const MapField& z);
/// f(z^{-1}(x)) at the sample locations of f, inverting at those locations.
VectorField compose_inverse(const VectorField& f, const MapField& z);

// ---------------------------------------------------------------------------
// Inner products and norms (midpoint rule on cells and faces, trapezoid on
// nodes so that constants integrate exactly)

double dot(const ScalarField& a, const ScalarField& b);
double dot(const VectorField& a, const VectorField& b);
double dot(const MapField& a, const MapField& b);

double mean(const ScalarField& f);

/// (sum |f|^r h^d)^(1/r); r = infinity gives the max norm. r < 1 throws.
double norm_lr(const ScalarField& f, double r);
/// Uses the cell-averaged Euclidean magnitude of the staggered field.
double norm_lr(const VectorField& f, double r);
double norm_lr(const MapField& f, double r);

/// L^r norm of the full node Hessian (Frobenius over components and
/// derivative pairs), evaluated at interior nodes.
double hessian_norm_lr(const MapField& f, double r);
/// ||f||_{L^r} + a ||D^2 f||_{L^r}.
double norm_xa(const MapField& f, double a, double r);

/// -<Lap v, v>: the discrete Dirichlet energy consistent with `laplacian`.
double dirichlet_energy(const VectorField& v);

/// Max over cells of the cell-averaged Euclidean magnitude.
double max_speed(const VectorField& v);

}  // namespace polyproj
