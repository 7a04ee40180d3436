#pragma once

#include <vector>

#include "l2flow/flow.hpp"
#include "l2flow/geodesic.hpp"

namespace l2flow {

/// All-pairs distances of one point set at every sample of a trace: d[k][i][j].
struct DistanceSeries {
  std::vector<double> times;
  std::vector<Vec4> points;
  std::vector<std::vector<std::vector<double>>> d;
};
DistanceSeries distance_series(const FlowTrace& trace, const std::vector<Vec4>& points);

/// Smallest majorant a phi1 + b phi2 of |d(x,y,t2) - d(x,y,t1)| over sampled t1 < t2 and pairs,
/// phi1 = (t2^(1/8) - t1^(1/8))^(1/2), phi2 = t2^(1/24) - t1^(1/24). "Smallest" means the
/// lowest value at the widest interval (Phi1, Phi2 = phi at (t_first, t_last)); the objective is
/// convex in a with b(a) = max_i (dd_i - a phi1_i)^+ / phi2_i, minimised by golden section.
struct HolderFit {
  double a = 0.0;
  double b = 0.0;
  double phi1_max = 0.0;
  double phi2_max = 0.0;
  double majorant_max = 0.0;  // a Phi1 + b Phi2
  double max_delta = 0.0;
  // Constraint with the largest |dd| / majorant (the binding one).
  double worst_t1 = 0.0, worst_t2 = 0.0;
  int worst_i = 0, worst_j = 0;
  double worst_delta = 0.0;
  std::size_t constraints = 0;
  bool finite() const;
};
/// Throws InvalidArgument for fewer than 10 samples, fewer than 5 pairs or repeated times.
HolderFit distance_holder_fit(const DistanceSeries& s);

struct HolderStability {
  double a_change = 0.0;  // relative
  double b_change = 0.0;
  double majorant_change = 0.0;  // (|da| Phi1 + |db| Phi2) / max majorant
  bool stable = false;
};
/// (a, b) trade off along a flat direction of the objective, so stability is measured on the
/// majorant at the widest interval.
HolderStability holder_stability(const HolderFit& x, const HolderFit& y, double tolerance = 0.3);

/// Half the distortion of the identity correspondence, max |d_a - d_b| / 2.
double gh_upper_bound(const std::vector<std::vector<double>>& da, const std::vector<std::vector<double>>& db);
double gh_upper_bound(const MetricField& a, const MetricField& b, const std::vector<Vec4>& points);

struct GhTrend {
  std::vector<double> times;
  std::vector<double> bound;     // gh_upper_bound(g(0), g(t_k))
  std::vector<double> smoothed;  // trailing mean over up to 3 records
  double worst_drop = 0.0;       // largest decrease of the smoothed bound, relative to its max
  bool non_decreasing = false;
};
GhTrend gh_trend(const DistanceSeries& s);

/// |L(gamma, t_{k+1}) - L(gamma, t_k)| <= int_{t_k}^{t_{k+1}} int_gamma |g'|_g dsigma dt over
/// consecutive samples, inner integral along the curve, outer by the trapezoid rule.
struct IntervalBound {
  double t1 = 0.0, t2 = 0.0;
  double lhs = 0.0, rhs = 0.0;
};
struct BoundCheck {
  std::vector<IntervalBound> intervals;
  double worst_ratio = 0.0;  // max lhs / rhs (0 when rhs and lhs vanish)
  bool holds(double tolerance) const { return worst_ratio <= 1.0 + tolerance; }
};
BoundCheck length_derivative_check(const FlowTrace& trace, const Curve& curve);

/// |log(|v|^2_{t2} / |v|^2_{t1})| <= int_{t1}^{t2} ||g'||_inf dt for coordinate vectors at the
/// given points, over every sampled pair t1 < t2.
BoundCheck vector_ratio_check(const FlowTrace& trace, const std::vector<Vec4>& points);

/// d/dt |D gamma'|^2 <= |g'| |D gamma'|^2 + C |gamma'|^2 |D gamma'| |nabla g'| along a fixed curve:
/// the smallest C consistent with the sampled data (reported, C(n) is not explicit).
struct AccelerationFit {
  double C = 0.0;
  double worst_t1 = 0.0, worst_t2 = 0.0;
  int worst_node = 0;
  std::size_t samples = 0;
};
AccelerationFit acceleration_derivative_fit(const FlowTrace& trace, const Curve& curve);

/// |h|_g and |nabla h|_g of a symmetric 2-tensor field at a continuous point.
struct PointVelocity {
  double norm = 0.0;
  double grad_norm = 0.0;
};
PointVelocity velocity_at(const MetricInterpolator& mi, const SymTensorField& h, const Vec4& x);

}  // namespace l2flow
