#pragma once

#include <cmath>

#include "l2flow/types.hpp"

namespace l2flow {

/// Lower Cholesky factor of a symmetric 4x4. Returns false if a pivot is <= 0.
inline bool cholesky4(const Mat4& a, Mat4& l) noexcept {
  l = Mat4{};
  for (int j = 0; j < 4; ++j) {
    double d = a[j][j];
    for (int k = 0; k < j; ++k) d -= l[j][k] * l[j][k];
    if (!(d > 0.0)) return false;
    l[j][j] = std::sqrt(d);
    for (int i = j + 1; i < 4; ++i) {
      double s = a[i][j];
      for (int k = 0; k < j; ++k) s -= l[i][k] * l[j][k];
      l[i][j] = s / l[j][j];
    }
  }
  return true;
}

/// Inverse of a lower-triangular 4x4.
inline Mat4 lower_inverse4(const Mat4& l) noexcept {
  Mat4 m{};
  for (int j = 0; j < 4; ++j) {
    m[j][j] = 1.0 / l[j][j];
    for (int i = j + 1; i < 4; ++i) {
      double s = 0.0;
      for (int k = j; k < i; ++k) s -= l[i][k] * m[k][j];
      m[i][j] = s / l[i][i];
    }
  }
  return m;
}

/// Inverse and sqrt(det) of an SPD matrix. Returns false if not positive definite.
inline bool spd_inverse4(const Mat4& a, Mat4& inv, double& sqrt_det) noexcept {
  Mat4 l;
  if (!cholesky4(a, l)) return false;
  const Mat4 m = lower_inverse4(l);
  sqrt_det = l[0][0] * l[1][1] * l[2][2] * l[3][3];
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) {
      double s = 0.0;
      for (int k = j; k < 4; ++k) s += m[k][i] * m[k][j];
      inv[i][j] = inv[j][i] = s;
    }
  return true;
}

inline Mat4 matmul4(const Mat4& a, const Mat4& b) noexcept {
  Mat4 c{};
  for (int i = 0; i < 4; ++i)
    for (int k = 0; k < 4; ++k) {
      const double aik = a[i][k];
      for (int j = 0; j < 4; ++j) c[i][j] += aik * b[k][j];
    }
  return c;
}

inline Mat4 transpose4(const Mat4& a) noexcept {
  Mat4 t{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) t[i][j] = a[j][i];
  return t;
}

/// sum_ij a_ij b_ij
inline double frob4(const Mat4& a, const Mat4& b) noexcept {
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s += a[i][j] * b[i][j];
  return s;
}

/// Smallest and largest eigenvalue of a symmetric 4x4.
void sym_eig_range4(const Mat4& a, double& lo, double& hi);

}  // namespace l2flow
