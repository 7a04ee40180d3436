#pragma once

#include <array>

#include "l2flow/stencil.hpp"
#include "l2flow/types.hpp"

namespace l2flow {

using Tensor3 = std::array<std::array<std::array<double, 4>, 4>, 4>;
using Tensor4 = std::array<Tensor3, 4>;
using BivMat = std::array<std::array<double, 6>, 6>;

/// Metric, inverse, Christoffels and lowered Riemann tensor at one point.
/// R(X,Y)Z = [D_X, D_Y]Z - D_[X,Y]Z, R_ijkl = <R(d_i,d_j)d_k, d_l>; round spheres have
/// positive Ricci in this convention.
struct PointGeometry {
  Mat4 g;
  Mat4 ginv;
  double sqrt_det;
  Tensor3 dg;      // dg[a][i][j] = d_a g_ij
  Tensor3 gamma1;  // gamma1[m][i][j] = Gamma_{m,ij}
  Tensor3 gamma2;  // gamma2[m][i][j] = Gamma^m_ij
  Tensor4 riem;
};

/// Returns false if the metric at the point is not positive definite.
bool point_geometry(const MetricJet& jet, PointGeometry& out);

struct PointCurvature {
  Mat4 ricci;
  double scalar;
  Mat4 traceless_ricci;
  Mat4 check;  // R_i^{pqr} R_jpqr
  double rm_sq;
  double rc_sq;
  double traceless_sq;
};

PointCurvature point_curvature(const PointGeometry& geo);

/// |traceless Rc|^2 alone; cheaper than point_curvature.
double traceless_ricci_sq(const PointGeometry& geo);

/// R_IJ over bivectors I=(i<j), J=(k<l).
BivMat riemann_bivector(const Tensor4& r);
void riemann_compress(const BivMat& b, double* out20);
BivMat riemann_expand(const double* in20);
Tensor4 riemann_full(const BivMat& b);

/// Full contraction T_{i...}T^{i...} of a curvature-type bivector matrix: 4 tr(R Gb R Gb)
/// with Gb the metric induced on bivectors by ginv.
double riemann_norm_sq(const BivMat& r, const Mat4& ginv);

/// Bivector representation of a frame change: P[A][B] = M_ai M_bj - M_aj M_bi for
/// A=(a<b), B=(i<j).
BivMat bivector_transform(const Mat4& m);

/// Reverse-mode sensitivities of a pointwise density with respect to the metric jet.
/// Inputs: dPsi/dR_ijkl for all 256 entries, dPsi/dg^{ij}, dPsi/dsqrt(det g).
/// Accumulates into jet_bar laid out as g(10) | dg(4x10) | ddg(10x10).
void backprop_geometry(const PointGeometry& geo, const Tensor4& r_bar, const Mat4& ginv_bar, double sqrt_det_bar, double* jet_bar);

/// |Rm|^2 sqrt(det g) and its reverse-mode seeds.
double density_rm_sq(const PointGeometry& geo, Tensor4& r_bar, Mat4& ginv_bar, double& sqrt_det_bar);
/// |traceless Rc|^2 sqrt(det g) and its reverse-mode seeds.
double density_traceless_sq(const PointGeometry& geo, Tensor4& r_bar, Mat4& ginv_bar, double& sqrt_det_bar);

}  // namespace l2flow
