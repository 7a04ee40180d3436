#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "l2flow/metric.hpp"

namespace l2flow {

struct EnergyReport {
  double F = 0.0;                      // integral of |Rm|^2
  double G = 0.0;                      // integral of |traceless Rc|^2
  double gauss_bonnet_residual = 0.0;  // F - 4G; zero in the continuum on T^4
  double volume = 0.0;
};

EnergyReport energy(const MetricField& metric);

enum class GradientProvenance { Analytic, DiscreteOracle };

struct GradientField {
  SymTensorField grad;
  GradientProvenance provenance = GradientProvenance::DiscreteOracle;
  double functional_value = 0.0;  // value of the differentiated functional, when known
};

/// Exact gradient of the discretized F (quadrature of |Rm|^2 sqrt(det g) over grid
/// points), obtained by reverse-mode differentiation through the stencils, and
/// converted to the L^2(g) gradient: <grad, h> integrated equals dF(h).
GradientField grad_F_discrete(const MetricField& metric);
GradientField grad_G_discrete(const MetricField& metric);

/// One pass producing everything a flow step needs: grad F (discrete oracle), the
/// energy report, sup |Rm| and the squared L^2(g) norm of the gradient.
struct FlowEvaluation {
  GradientField gradient;
  EnergyReport energy;
  double sup_rm = 0.0;
  double grad_l2_sq = 0.0;
};
FlowEvaluation evaluate_for_flow(const MetricField& metric);

/// dF/dg_c(q) for one point and symmetric component by central differencing the
/// discrete F with step probe_spacing. Independent route to the adjoint above.
double grad_F_probe_component(const MetricField& metric, std::size_t point, int component, double probe_spacing);

/// Turns raw component partials dF/dg_c(q) into the L^2(g) gradient at q.
Mat4 partials_to_gradient(const double* partials, const Mat4& g, double sqrt_det, double cell_volume);

/// grad F = 2 s (delta d Rc) - 2 Rc-check + |Rm|^2 g / 2, with (dRc)_ijk = D_i Rc_jk - D_j Rc_ik,
/// (delta w)_jk = -2 g^{ai} D_a w_ijk (the adjoint of d when 3-tensors are paired by full
/// index contraction), symmetrised, and s the frozen codifferential sign.
GradientField grad_F_analytic(const MetricField& metric);
GradientField grad_F_analytic_with_sign(const MetricField& metric, double codifferential_sign);

/// integral of g^{ia} g^{jb} a_ij b_ab sqrt(det g) over the grid.
double l2_inner(const SymTensorField& a, const SymTensorField& b, const MetricField& metric);

/// Relative L^2(g) distance |a - b| / |b|.
double relative_l2_error(const SymTensorField& a, const SymTensorField& b, const MetricField& metric);

struct SignCalibration {
  double chosen_sign = 0.0;
  double error_plus = 0.0;   // mean relative error with s = +1
  double error_minus = 0.0;  // mean relative error with s = -1
};

/// Chooses the codifferential sign minimising the L^2 distance between the analytic
/// and discrete gradients over band-limited metrics with the given seeds.
SignCalibration calibrate_codifferential_sign(int n, double eps, const std::vector<std::uint64_t>& seeds);

/// Appends "t,F,G,residual,volume"; writes the header when the file is new.
void append_energy_csv(const std::string& path, double t, const EnergyReport& e);

}  // namespace l2flow
