#pragma once

// Closed-form curvature of g = exp(2u) delta with u = eps sin(k x^axis), k = 2 pi w / L.
// For a conformally flat metric in coordinates,
//   R_ijkl = -exp(2u) (A o delta)_ijkl,  A = Hess u - du du + |du|^2 delta / 2,
//   (A o B)_ijkl = A_il B_jk + A_jk B_il - A_ik B_jl - A_jl B_ik.
// Everything is evaluated from exact derivatives of u; no stencils involved.

#include <array>
#include <cmath>
#include <numbers>

namespace oracle {

using Tensor4 = std::array<std::array<std::array<std::array<double, 4>, 4>, 4>, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;

struct ConformalMode {
  double eps;
  int axis;
  int wavenumber;
  double period;

  double k() const { return 2.0 * std::numbers::pi * wavenumber / period; }
  double u(double x) const { return eps * std::sin(k() * x); }
  double du(double x) const { return eps * k() * std::cos(k() * x); }
  double ddu(double x) const { return -eps * k() * k() * std::sin(k() * x); }

  Tensor4 riemann(double x) const {
    Mat4 a{};
    const double d1 = du(x);
    a[axis][axis] = ddu(x) - d1 * d1;
    for (int i = 0; i < 4; ++i) a[i][i] += 0.5 * d1 * d1;
    const double s = -std::exp(2.0 * u(x));
    Tensor4 r{};
    auto delta = [](int i, int j) { return i == j ? 1.0 : 0.0; };
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int kk = 0; kk < 4; ++kk)
          for (int l = 0; l < 4; ++l)
            r[i][j][kk][l] = s * (a[i][l] * delta(j, kk) + a[j][kk] * delta(i, l) - a[i][kk] * delta(j, l) - a[j][l] * delta(i, kk));
    return r;
  }

  // |Rm|^2 with indices raised by exp(-2u) delta.
  double rm_sq(double x) const {
    const Tensor4 r = riemann(x);
    double s = 0.0;
    for (const auto& a : r)
      for (const auto& b : a)
        for (const auto& c : b)
          for (double v : c) s += v * v;
    return s * std::exp(-8.0 * u(x));
  }

  double sqrt_det(double x) const { return std::exp(4.0 * u(x)); }

  // Ricci and scalar by contraction with the exact inverse metric.
  Mat4 ricci(double x) const {
    const Tensor4 r = riemann(x);
    const double gi = std::exp(-2.0 * u(x));
    Mat4 rc{};
    for (int j = 0; j < 4; ++j)
      for (int kk = 0; kk < 4; ++kk)
        for (int i = 0; i < 4; ++i) rc[j][kk] += gi * r[i][j][kk][i];
    return rc;
  }

  double traceless_sq(double x) const {
    const Mat4 rc = ricci(x);
    const double gi = std::exp(-2.0 * u(x));
    double scal = 0.0, rc2 = 0.0;
    for (int i = 0; i < 4; ++i) scal += gi * rc[i][i];
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) rc2 += gi * gi * rc[i][j] * rc[i][j];
    return rc2 - 0.25 * scal * scal;
  }
};

}  // namespace oracle
