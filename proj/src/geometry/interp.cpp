#include "l2flow/interp.hpp"

#include <cmath>

#include "l2flow/linalg4.hpp"

namespace l2flow {
namespace {

struct AxisWeights {
  int base;  // node index of offset -1
  double w[4];
  double dw[4];  // derivative with respect to x, not u
};

AxisWeights axis_weights(double x, double h) {
  const double u_full = x / h;
  const double fl = std::floor(u_full);
  const double u = u_full - fl;
  AxisWeights a;
  a.base = static_cast<int>(fl) - 1;
  const double u2 = u * u, u3 = u2 * u;
  a.w[0] = 0.5 * (-u3 + 2.0 * u2 - u);
  a.w[1] = 0.5 * (3.0 * u3 - 5.0 * u2 + 2.0);
  a.w[2] = 0.5 * (-3.0 * u3 + 4.0 * u2 + u);
  a.w[3] = 0.5 * (u3 - u2);
  a.dw[0] = 0.5 * (-3.0 * u2 + 4.0 * u - 1.0) / h;
  a.dw[1] = 0.5 * (9.0 * u2 - 10.0 * u) / h;
  a.dw[2] = 0.5 * (-9.0 * u2 + 8.0 * u + 1.0) / h;
  a.dw[3] = 0.5 * (3.0 * u2 - 2.0 * u) / h;
  return a;
}

}  // namespace

void FieldInterpolator::value(const Vec4& x, double* out) const {
  const TorusGrid& grid = f_->grid();
  const int nc = f_->components();
  AxisWeights ax[4];
  for (int a = 0; a < 4; ++a) ax[a] = axis_weights(x[a], grid.spacing(a));
  for (int c = 0; c < nc; ++c) out[c] = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k) {
        const double wijk = ax[0].w[i] * ax[1].w[j] * ax[2].w[k];
        for (int l = 0; l < 4; ++l) {
          const double w = wijk * ax[3].w[l];
          const double* v = f_->at(grid.index(ax[0].base + i, ax[1].base + j, ax[2].base + k, ax[3].base + l));
          for (int c = 0; c < nc; ++c) out[c] += w * v[c];
        }
      }
}

void FieldInterpolator::value_grad(const Vec4& x, double* out, double* grad) const {
  const TorusGrid& grid = f_->grid();
  const int nc = f_->components();
  AxisWeights ax[4];
  for (int a = 0; a < 4; ++a) ax[a] = axis_weights(x[a], grid.spacing(a));
  for (int c = 0; c < nc; ++c) out[c] = 0.0;
  for (int c = 0; c < 4 * nc; ++c) grad[c] = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          const double w0 = ax[0].w[i], w1 = ax[1].w[j], w2 = ax[2].w[k], w3 = ax[3].w[l];
          const double w = w0 * w1 * w2 * w3;
          const double d[4] = {ax[0].dw[i] * w1 * w2 * w3, w0 * ax[1].dw[j] * w2 * w3, w0 * w1 * ax[2].dw[k] * w3,
                               w0 * w1 * w2 * ax[3].dw[l]};
          const double* v = f_->at(grid.index(ax[0].base + i, ax[1].base + j, ax[2].base + k, ax[3].base + l));
          for (int c = 0; c < nc; ++c) {
            out[c] += w * v[c];
            for (int a = 0; a < 4; ++a) grad[a * nc + c] += d[a] * v[c];
          }
        }
}

Mat4 MetricInterpolator::g(const Vec4& x) const {
  double v[kSymComponents];
  interp_.value(x, v);
  Mat4 m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m[i][j] = v[SymIndex::of[i][j]];
  return m;
}

bool MetricInterpolator::sample(const Vec4& x, MetricSample& out) const {
  double v[kSymComponents];
  double dv[4 * kSymComponents];
  interp_.value_grad(x, v, dv);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      out.g[i][j] = v[SymIndex::of[i][j]];
      for (int a = 0; a < 4; ++a) out.dg[a][i][j] = dv[a * kSymComponents + SymIndex::of[i][j]];
    }
  if (!spd_inverse4(out.g, out.ginv, out.sqrt_det)) return false;
  Tensor3 g1;
  for (int m = 0; m < 4; ++m)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) g1[m][i][j] = 0.5 * (out.dg[i][j][m] + out.dg[j][i][m] - out.dg[m][i][j]);
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double s = 0.0;
        for (int m = 0; m < 4; ++m) s += out.ginv[k][m] * g1[m][i][j];
        out.gamma2[k][i][j] = s;
      }
  return true;
}

Vec4 MetricInterpolator::geodesic_acceleration(const Vec4& x, const Vec4& v) const {
  MetricSample s;
  if (!sample(x, s)) throw Error(ErrorKind::NotPositiveDefinite, "interpolated metric not positive definite");
  Vec4 a{};
  for (int k = 0; k < 4; ++k) {
    double acc = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) acc += s.gamma2[k][i][j] * v[i] * v[j];
    a[k] = -acc;
  }
  return a;
}

}  // namespace l2flow
