#pragma once

// Field-level consequences of the cofactor inequality: randomized verification
// of the matrix inequality, the four-dimensional counterexample family, the
// Bregman divergence of Z -> int q |det DZ|, and the uniqueness certificate.

#include <cstdint>

#include "polyproj/grid.hpp"
#include "polyproj/smallmat.hpp"

namespace polyproj {

struct MatrixInequalityOptions {
  int dim = 2;
  std::uint64_t samples = 1000000;
  std::uint64_t seed = 1;
  /// Entries are delta_ij + U(-entry_range, entry_range).
  double entry_range = 3.0;
  /// Constant c; <= 0 selects default_cofactor_constant(dim).
  double constant_c = 0.0;
  /// Pairs with sigma_min(M) below this are discarded.
  double sigma_floor = 1e-3;
  double tolerance = 1e-9;
  /// Use the plain-cofactor form without sign factors ((cof A - cof M):(A - M),
  /// constant -1) instead of the signed inequality.
  bool unsigned_form = false;
};

struct MatrixInequalityReport {
  std::uint64_t samples = 0;
  std::uint64_t kept = 0;
  std::uint64_t violations = 0;
  /// min(lhs - rhs) over kept samples (0 when nothing was kept).
  double worst_margin = 0.0;
};

MatrixInequalityReport verify_matrix_inequality(const MatrixInequalityOptions& opt);

struct CounterexamplePoint {
  double lhs;
  double quad;
  double ratio() const { return lhs / quad; }
};

/// M = I, A = diag(alpha, alpha, alpha, alpha^-3) in four dimensions.
/// Throws InvalidArgument unless alpha > 1.
CounterexamplePoint d4_counterexample(double alpha);

/// Midpoint quadrature of q (|det DZ| - |det DZ0| - sgn(det DZ0) cof(DZ0):(DZ - DZ0)).
double bregman(const MapField& z, const MapField& z0, const ScalarField& q);

struct BregmanBound {
  double neg_bregman;  ///< -bregman(z, z0, q)
  double bound;        ///< (c / 2 sigma^2) ||q det DZ0||_inf ||DZ - DZ0||_{L2}^2
  double sigma;        ///< min over cells of sigma_min(DZ0)
};

/// Both sides of the concavity control; c <= 0 selects the dimension default.
BregmanBound bregman_bound(const MapField& z, const MapField& z0, const ScalarField& q, double c = 0.0);

struct CertificateReport {
  double sigma_lower = 0.0;
  double q_oscillation = 0.0;
  double threshold = 0.0;
  bool passes = false;
};

CertificateReport uniqueness_certificate(const ScalarField& q, const CellMatrices& dz, double a);

}  // namespace polyproj
