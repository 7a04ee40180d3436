#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "l2flow/geodesic.hpp"

namespace l2flow {

/// One sample of a normal disc: the point, its 3-volume weight and |d pi| there.
struct DiscPoint {
  Vec4 x;
  double weight = 0.0;
  double dpi = 0.0;
  double rho = 0.0;  // geodesic distance from the disc centre
};

/// exp_{gamma(s)} of the r-ball in the normal space of the unit tangent.
struct NormalDisc {
  double s = 0.0;
  Vec4 center{};
  Vec4 tangent{};  // unit for g(center)
  std::array<Vec4, 3> normal{};
  double area = 0.0;  // 3-volume
  std::vector<DiscPoint> points;
};

struct TubeOptions {
  double disc_spacing = 0.25;  // disc spacing in s, as a fraction of r
  int radial_nodes = 3;        // Gauss-Legendre in rho with weight rho^2
  int directions = 32;         // Fibonacci points on S^2
  int table_per_disc = 4;      // leaf-function table nodes per disc interval
  double beta = 0.05;          // hypothesis slack
  bool check_hypotheses = true;
};

/// Disc samples by geodesic shooting from `center` along a g-orthonormal frame of
/// tangent-perp. Weights are sqrt det(J^T g J) rho^2 with J from forward differences.
NormalDisc exp_normal_disc(const MetricInterpolator& mi, const Vec4& center, const Vec4& tangent, double r,
                           int radial_nodes, int directions);

struct TubeDiagnostics {
  bool foliation_ok = false;
  int multi_leaf_points = 0;    // disc samples whose leaf function has more than one root in reach
  double min_leaf_slope = 0.0;  // min of -d Phi_q / ds in reach, 1 - kappa rho in the flat case
  double sup_dpi = 0.0;
  double min_area = 0.0;
  double area_constant = 0.0;   // min area / r^3
};

/// Tube D(gamma, r) around a curve, in arc length s in [0, L]. The leaf function
/// Phi_q(s) = <log_{gamma(s)} q, gamma'(s)> (log to second order) vanishes exactly on the
/// disc through q, so pi(q) is its root. Keeps a pointer to the interpolator, which must
/// outlive the tube.
class Tube {
public:
  double radius() const noexcept { return r_; }
  double length() const noexcept { return length_; }
  const Curve& curve() const noexcept { return curve_; }
  const std::vector<NormalDisc>& discs() const noexcept { return discs_; }
  const TubeDiagnostics& diagnostics() const noexcept { return diag_; }
  const MetricInterpolator& interpolator() const noexcept { return *mi_; }

  double leaf_function(const Vec4& q, double s) const;
  /// pi(q): the root of the leaf function nearest s_hint. Without a hint, the root in [0, L]
  /// closest to q, empty when none lies within r (q outside the tube).
  std::optional<double> project(const Vec4& q, double s_hint = -1.0) const;
  /// |grad pi|_g at q by central differences along a g(q)-orthonormal basis.
  double dpi(const Vec4& q, double s_hint) const;
  /// Number of sign changes of the leaf function over table nodes within reach r of q.
  int leaf_roots(const Vec4& q, double* min_slope = nullptr) const;
  /// gamma(s) and the unit tangent there.
  Vec4 point(double s) const;
  Vec4 unit_tangent(double s) const;
  /// Approximate geodesic distance |log_{gamma(s)} q|.
  double normal_distance(const Vec4& q, double s) const;

private:
  friend Tube build_tube(const MetricInterpolator&, const Curve&, double, const TubeOptions&);
  struct TableNode {
    Vec4 x;
    Vec4 t;
    MetricSample m;
  };
  double leaf_at_node(const Vec4& q, std::size_t k) const;
  double u_of_s(double s) const;
  std::size_t node_index(double s) const;
  double node_s(std::size_t k) const { return (static_cast<double>(k) - kPad) * table_ds_; }
  static constexpr int kPad = 2;  // table nodes beyond each end

  const MetricInterpolator* mi_ = nullptr;
  Curve curve_;
  std::vector<double> node_s_;  // cumulative arc length at curve nodes
  double length_ = 0.0;
  double r_ = 0.0;
  double table_ds_ = 0.0;
  std::vector<TableNode> table_;
  std::vector<NormalDisc> discs_;
  TubeDiagnostics diag_;
};

/// Checks the curve hypotheses (L <= d(ends) + beta, |geodesic curvature| <= beta, speed
/// within [(1+beta)^-1, 1+beta] of the mean) unless disabled; failures throw naming the bound.
Tube build_tube(const MetricInterpolator& mi, const Curve& curve, double r, const TubeOptions& opts = {});

struct CoareaResult {
  double volume_side = 0.0;  // int_tube phi dV on a coordinate lattice
  double fiber_side = 0.0;   // int_0^L int_D(s) phi / |d pi| dA ds
  double residual = 0.0;     // |volume - fiber| / max(|volume|, |fiber|)
  std::size_t lattice_points = 0;
};
/// Lattice spacing is lattice_fraction * r, cell centred.
CoareaResult coarea_residual(const Tube& tube, const std::function<double(const Vec4&)>& phi,
                             double lattice_fraction = 0.1);

}  // namespace l2flow
