#include "polyproj/smallmat.hpp"

#include <algorithm>
#include <cmath>

#include "polyproj/errors.hpp"

namespace polyproj {

namespace {

void check_dim(int dim) {
  if (dim < 2 || dim > SmallMat::kMaxDim) throw InvalidArgument("SmallMat: dim must be 2, 3 or 4");
}

double sgn(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

// Determinant of the 3x3 submatrix with the given rows and columns.
double minor3(const SmallMat& m, const int r[3], const int c[3]) {
  return m(r[0], c[0]) * (m(r[1], c[1]) * m(r[2], c[2]) - m(r[1], c[2]) * m(r[2], c[1])) -
         m(r[0], c[1]) * (m(r[1], c[0]) * m(r[2], c[2]) - m(r[1], c[2]) * m(r[2], c[0])) +
         m(r[0], c[2]) * (m(r[1], c[0]) * m(r[2], c[1]) - m(r[1], c[1]) * m(r[2], c[0]));
}

void complement(int skip, int out[3]) {
  int k = 0;
  for (int i = 0; i < 4; ++i)
    if (i != skip) out[k++] = i;
}

}  // namespace

SmallMat::SmallMat(int dim) : dim_(dim) { check_dim(dim); }

SmallMat SmallMat::identity(int dim) {
  SmallMat m(dim);
  for (int i = 0; i < dim; ++i) m(i, i) = 1.0;
  return m;
}

SmallMat SmallMat::diagonal(std::initializer_list<double> d) {
  SmallMat m(static_cast<int>(d.size()));
  int i = 0;
  for (double v : d) {
    m(i, i) = v;
    ++i;
  }
  return m;
}

SmallMat SmallMat::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  SmallMat m(static_cast<int>(rows.size()));
  int i = 0;
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != m.dim()) throw InvalidArgument("SmallMat::from_rows: ragged rows");
    int j = 0;
    for (double v : row) m(i, j++) = v;
    ++i;
  }
  return m;
}

SmallMat SmallMat::transpose() const {
  SmallMat t(dim_);
  for (int i = 0; i < dim_; ++i)
    for (int j = 0; j < dim_; ++j) t(i, j) = (*this)(j, i);
  return t;
}

SmallMat& SmallMat::operator+=(const SmallMat& o) {
  for (std::size_t k = 0; k < a_.size(); ++k) a_[k] += o.a_[k];
  return *this;
}

SmallMat& SmallMat::operator-=(const SmallMat& o) {
  for (std::size_t k = 0; k < a_.size(); ++k) a_[k] -= o.a_[k];
  return *this;
}

SmallMat& SmallMat::operator*=(double s) {
  for (double& v : a_) v *= s;
  return *this;
}

SmallMat operator*(const SmallMat& a, const SmallMat& b) {
  SmallMat c(a.dim());
  for (int i = 0; i < a.dim(); ++i)
    for (int j = 0; j < a.dim(); ++j) {
      double s = 0.0;
      for (int k = 0; k < a.dim(); ++k) s += a(i, k) * b(k, j);
      c(i, j) = s;
    }
  return c;
}

double SmallMat::dot(const SmallMat& o) const {
  double s = 0.0;
  for (std::size_t k = 0; k < a_.size(); ++k) s += a_[k] * o.a_[k];
  return s;
}

bool SmallMat::all_finite() const {
  return std::all_of(a_.begin(), a_.end(), [](double v) { return std::isfinite(v); });
}

double det(const SmallMat& m) {
  switch (m.dim()) {
    case 2:
      return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3: {
      const int r[3] = {0, 1, 2};
      return minor3(m, r, r);
    }
    default: {
      // Cofactor expansion along the first row.
      const int rows[3] = {1, 2, 3};
      double d = 0.0;
      for (int j = 0; j < 4; ++j) {
        int cols[3];
        complement(j, cols);
        d += ((j % 2 == 0) ? 1.0 : -1.0) * m(0, j) * minor3(m, rows, cols);
      }
      return d;
    }
  }
}

SmallMat cof(const SmallMat& m) {
  SmallMat c(m.dim());
  switch (m.dim()) {
    case 2:
      c(0, 0) = m(1, 1);
      c(0, 1) = -m(1, 0);
      c(1, 0) = -m(0, 1);
      c(1, 1) = m(0, 0);
      break;
    case 3:
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) {
          const int i1 = (i + 1) % 3, i2 = (i + 2) % 3;
          const int j1 = (j + 1) % 3, j2 = (j + 2) % 3;
          c(i, j) = m(i1, j1) * m(i2, j2) - m(i1, j2) * m(i2, j1);
        }
      break;
    default:
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) {
          int rows[3], cols[3];
          complement(i, rows);
          complement(j, cols);
          c(i, j) = (((i + j) % 2 == 0) ? 1.0 : -1.0) * minor3(m, rows, cols);
        }
      break;
  }
  return c;
}

std::array<double, SmallMat::kMaxDim> symmetric_eigenvalues(const SmallMat& s) {
  const int n = s.dim();
  SmallMat a = s;
  for (int sweep = 0; sweep < 64; ++sweep) {
    double off = 0.0, scale = 0.0;
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) (i == j ? scale : off) += a(i, j) * a(i, j);
    if (off <= 1e-32 * scale || off == 0.0) break;
    for (int p = 0; p < n - 1; ++p)
      for (int q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double sn = t * c;
        for (int k = 0; k < n; ++k) {
          const double akp = a(k, p), akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (int k = 0; k < n; ++k) {
          const double apk = a(p, k), aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
      }
  }
  std::array<double, SmallMat::kMaxDim> ev{};
  for (int i = 0; i < n; ++i) ev[static_cast<std::size_t>(i)] = a(i, i);
  std::sort(ev.begin(), ev.begin() + n);
  return ev;
}

double sigma_min(const SmallMat& m) {
  const auto ev = symmetric_eigenvalues(m.transpose() * m);
  return std::sqrt(std::max(ev[0], 0.0));
}

double default_cofactor_constant(int dim) { return dim == 2 ? 1.0 : kCofactorConstant3d; }

InequalitySides cofactor_inequality_sides(const SmallMat& m, const SmallMat& a, double c) {
  if (m.dim() != a.dim()) throw InvalidArgument("cofactor_inequality_sides: dimension mismatch");
  const double sigma = sigma_min(m);
  if (!(sigma > 0.0)) throw InvalidArgument("cofactor_inequality_sides: sigma_min(M) is zero");
  const double det_m = det(m);
  const SmallMat diff = a - m;
  const SmallMat lhs_mat = sgn(det(a)) * cof(a) - sgn(det_m) * cof(m);
  return {lhs_mat.dot(diff), -c * std::abs(det_m) / (sigma * sigma) * diff.dot(diff)};
}

}  // namespace polyproj
