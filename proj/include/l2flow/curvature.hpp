#pragma once

#include <vector>

#include "l2flow/field.hpp"
#include "l2flow/metric.hpp"

namespace l2flow {

/// Pointwise curvature of one metric. Immutable once built.
///
/// Layouts: christoffel holds Gamma^k_ij as 4 blocks of 10 (k major, ij in SymIndex
/// order); riemann holds the 20 compressed bivector entries (RiemannIndex);
/// nabla_rm[j-1] holds nabla^j Rm as 4^j blocks of 20, derivative indices slowest first.
/// Stored derivative fields stop at order 2; order 3 is reduced to its norm on the fly.
struct CurvatureBundle {
  int max_order = 0;
  Field christoffel;
  Field riemann;
  SymTensorField ricci;
  Field scalar;
  SymTensorField traceless_ricci;
  SymTensorField check;
  Field rm_norm_sq;
  Field rc_norm_sq;
  Field traceless_norm_sq;
  std::vector<Field> nabla_rm;
  std::vector<Field> nabla_norm;  // |nabla^j Rm| for j = 0..max_order
  std::vector<Field> fk;          // f_k for k = 0..max_order

  const TorusGrid& grid() const noexcept { return riemann.grid(); }
};

CurvatureBundle build_curvature(const MetricField& metric, int max_derivative_order);

/// Covariant derivative of a field of curvature-type tensors carrying `vector_indices`
/// extra covariant slots (4^m blocks of 20). Output has one more leading slot.
Field covariant_derivative_rm(const Field& t, int vector_indices, const Field& christoffel);

/// Pointwise norm |T| of a 4^m x 20 curvature-type field, measured with `metric`.
Field curvature_tensor_norm(const Field& t, int vector_indices, const MetricField& metric);

/// max over points and components of |f|.
double sup_norm(const Field& f);

/// (sum_x |f(x)|^p sqrt(det g) prod h)^(1/p), |f(x)| the Euclidean norm of the components.
/// For tensor norms in g pass a pointwise-norm field such as nabla_norm[0].
double lp_norm(const Field& f, double p, const MetricField& metric);

/// Largest relative deviation of f_k(c g) from f_k(g)/c over the grid.
double fk_scaling_check(const MetricField& metric, int k, double c);

/// Relative violation of the Riemann pair symmetries and first Bianchi identity,
/// recomputed from the full 256-entry tensor at every point.
double riemann_symmetry_violation(const MetricField& metric);

}  // namespace l2flow
