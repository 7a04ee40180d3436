#pragma once

#include "l2flow/field.hpp"
#include "l2flow/metric.hpp"
#include "l2flow/pointwise.hpp"

namespace l2flow {

/// Tensor-product Catmull-Rom interpolation of a periodic field at continuous
/// coordinates (x^a in units of the period, node i at i h_a). C^1, exact on cubics.
class FieldInterpolator {
public:
  explicit FieldInterpolator(const Field& f) : f_(&f) {}

  const Field& field() const noexcept { return *f_; }
  /// Values of all components at x.
  void value(const Vec4& x, double* out) const;
  /// Values and first partials: grad[a * components + c] = d_a f_c.
  void value_grad(const Vec4& x, double* out, double* grad) const;

private:
  const Field* f_;
};

/// Metric, inverse and Christoffel symbols at a continuous point.
struct MetricSample {
  Mat4 g;
  Mat4 ginv;
  double sqrt_det;
  Tensor3 dg;      // dg[a][i][j] = d_a g_ij
  Tensor3 gamma2;  // gamma2[k][i][j] = Gamma^k_ij
};

class MetricInterpolator {
public:
  explicit MetricInterpolator(const MetricField& g) : metric_(&g), interp_(g) {}

  const MetricField& metric() const noexcept { return *metric_; }
  const TorusGrid& grid() const noexcept { return metric_->grid(); }
  Mat4 g(const Vec4& x) const;
  /// Returns false where the interpolated metric is not positive definite.
  bool sample(const Vec4& x, MetricSample& out) const;
  /// -Gamma^k_ij v^i v^j.
  Vec4 geodesic_acceleration(const Vec4& x, const Vec4& v) const;

private:
  const MetricField* metric_;
  FieldInterpolator interp_;
};

inline double quad_form(const Mat4& g, const Vec4& a, const Vec4& b) {
  double s = 0.0;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) s += g[i][j] * a[i] * b[j];
  return s;
}

}  // namespace l2flow
