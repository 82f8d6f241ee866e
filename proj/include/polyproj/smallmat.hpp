#pragma once

// Dense d x d matrices for d in {2, 3, 4}: determinant, cofactor matrix,
// smallest singular value, and the two sides of the cofactor monotonicity
// inequality used by the uniqueness certificate.

#include <array>
#include <cmath>
#include <initializer_list>

namespace polyproj {

class SmallMat {
 public:
  static constexpr int kMaxDim = 4;

  explicit SmallMat(int dim = 2);

  static SmallMat identity(int dim);
  static SmallMat diagonal(std::initializer_list<double> d);
  static SmallMat from_rows(std::initializer_list<std::initializer_list<double>> rows);

  int dim() const { return dim_; }

  double& operator()(int i, int j) { return a_[static_cast<std::size_t>(i * kMaxDim + j)]; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i * kMaxDim + j)]; }

  SmallMat transpose() const;

  SmallMat& operator+=(const SmallMat& o);
  SmallMat& operator-=(const SmallMat& o);
  SmallMat& operator*=(double s);

  friend SmallMat operator+(SmallMat a, const SmallMat& b) { return a += b; }
  friend SmallMat operator-(SmallMat a, const SmallMat& b) { return a -= b; }
  friend SmallMat operator*(SmallMat a, double s) { return a *= s; }
  friend SmallMat operator*(double s, SmallMat a) { return a *= s; }
  friend SmallMat operator*(const SmallMat& a, const SmallMat& b);

  /// Frobenius inner product A:B.
  double dot(const SmallMat& o) const;
  double frobenius_norm() const { return std::sqrt(dot(*this)); }
  bool all_finite() const;

 private:
  int dim_;
  std::array<double, kMaxDim * kMaxDim> a_{};
};

double det(const SmallMat& m);

/// Matrix of signed minors, so that m * cof(m)^T = det(m) I.
SmallMat cof(const SmallMat& m);

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
std::array<double, SmallMat::kMaxDim> symmetric_eigenvalues(const SmallMat& s);

/// Smallest singular value, from the eigenvalues of m^T m.
double sigma_min(const SmallMat& m);

/// Constant of the three-dimensional cofactor inequality, 1 + (3/2)(1 + sqrt 3).
inline const double kCofactorConstant3d = 1.0 + 1.5 * (1.0 + std::sqrt(3.0));

/// Denominator of the multiplier-oscillation threshold, 2 + 3(1 + sqrt 3).
inline const double kCertificateDenominator = 2.0 + 3.0 * (1.0 + std::sqrt(3.0));

/// Default constant for the cofactor inequality in dimension `dim`.
double default_cofactor_constant(int dim);

struct InequalitySides {
  double lhs;
  double rhs;
};

/// lhs = (sgn(det A) cof A - sgn(det M) cof M) : (A - M),
/// rhs = -c |det M| / sigma_min(M)^2 |A - M|^2.
/// Throws InvalidArgument when sigma_min(M) == 0.
InequalitySides cofactor_inequality_sides(const SmallMat& m, const SmallMat& a, double c);

}  // namespace polyproj
