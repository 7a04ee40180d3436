#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "l2flow/interp.hpp"
#include "l2flow/metric.hpp"

namespace l2flow {

/// Polyline in unwrapped coordinates with uniform parameters u_k = k / (n - 1) on [0, 1].
/// Positions are evaluated modulo the periods, so a curve may leave the fundamental cell.
struct Curve {
  std::vector<Vec4> points;
  double metric_time = 0.0;
  bool certified = true;  // false when relaxation stopped before converging

  std::size_t size() const noexcept { return points.size(); }
  double du() const noexcept { return 1.0 / static_cast<double>(points.size() - 1); }
  /// Catmull-Rom along the nodes (ends extrapolated linearly).
  Vec4 at(double u) const;
  Vec4 derivative(double u) const;
};

/// Midpoint-rule length sum |x_{k+1} - x_k|_{g(midpoint)}.
double curve_length(const MetricInterpolator& mi, const Curve& c);
/// |d gamma / du|_g per segment, measured at segment midpoints.
std::vector<double> curve_speeds(const MetricInterpolator& mi, const Curve& c);
/// |D_u d gamma / du|_g at interior nodes, by central differences plus Christoffel terms.
std::vector<double> curve_accelerations(const MetricInterpolator& mi, const Curve& c);

struct GeodesicOptions {
  int min_nodes = 16;
  double nodes_per_cell = 2.0;  // node density relative to the smallest grid spacing
  int max_iterations = 60;
  double tolerance = 1e-12;     // step size, relative to the coordinate length
  double energy_tolerance = 1e-13;  // relative energy decrease per iteration
  double lift_ambiguity = 0.4;  // also try the other lift when |dx_a| exceeds this fraction of L_a
};

/// Graph, interpolator and relaxation for one metric. Build once, query many pairs.
class GeodesicSolver {
public:
  explicit GeodesicSolver(const MetricField& metric, GeodesicOptions opts = {});

  const MetricInterpolator& interpolator() const noexcept { return mi_; }
  const MetricField& metric() const noexcept { return *metric_; }

  /// Shortest path lengths on the grid graph: moves of +-1 along at most two axes
  /// (8 axial + 24 planar diagonals), edge weight |offset| in the midpoint metric.
  std::vector<double> graph_distances(std::size_t source, std::vector<std::int32_t>* pred = nullptr,
                                      std::vector<std::uint8_t>* move = nullptr) const;

  /// Minimising geodesic from x to y: graph path and nearby straight lifts, each relaxed
  /// by Gauss-Newton on the discrete energy; the shortest result wins.
  Curve geodesic(const Vec4& x, const Vec4& y) const;
  double distance(const Vec4& x, const Vec4& y) const;
  /// Symmetric matrix of geodesic distances, closed under the triangle inequality.
  std::vector<std::vector<double>> all_pairs(const std::vector<Vec4>& points) const;

  /// Relaxes the interior nodes of c (endpoints fixed). Returns true on convergence.
  bool relax(Curve& c) const;
  /// Shortest closed geodesic whose lift closes up with displacement `winding` (coordinates).
  Curve closed_geodesic(const Vec4& start, const Vec4& winding) const;

  /// Graph path from x to y as an unwrapped polyline ending at a lift of y.
  Curve graph_path(const Vec4& x, const Vec4& y) const;

private:
  int node_count(double coord_length) const;
  Curve straight(const Vec4& x, const Vec4& y_lift) const;
  Curve resampled_graph_path(std::vector<Vec4> poly) const;
  std::vector<Curve> straight_candidates(const Vec4& x, const Vec4& y) const;

  const MetricField* metric_;
  MetricInterpolator mi_;
  GeodesicOptions opts_;
};

Curve geodesic(const MetricField& metric, const Vec4& x, const Vec4& y);
double distance(const MetricField& metric, const Vec4& x, const Vec4& y);
std::vector<std::vector<double>> all_pairs_distances(const MetricField& metric, const std::vector<Vec4>& points);
double diameter(const MetricField& metric, const std::vector<Vec4>& points);

/// Wraps x into the fundamental cell [0, L_a).
Vec4 wrap_point(const TorusGrid& grid, const Vec4& x);

/// `count` quasi-uniform points (Halton 2,3,5,7 with a seeded rotation) in the fundamental cell.
std::vector<Vec4> sample_points(const TorusGrid& grid, int count, std::uint64_t seed);

/// exp_p(w) by RK4 on the geodesic equation. Step count doubles on failure (up to 4 times).
Vec4 exp_map(const MetricInterpolator& mi, const Vec4& p, const Vec4& w);
/// Columns form a g(p)-orthonormal basis (inverse transpose Cholesky factor).
Mat4 orthonormal_frame(const Mat4& g);

/// Volume of the geodesic ball B(center, r): integral of sqrt(det g) over exp_c of the
/// tangent r-ball, in geodesic polar coordinates (Gauss-Legendre radii, 48 directions on S^3).
double ball_volume(const MetricField& metric, const Vec4& center, double r);
double ball_volume(const MetricInterpolator& mi, const Vec4& center, double r);

/// min over centres and radii of Vol(B(x, r)) / (delta omega_4 r^4) - 1, omega_4 = pi^2/2.
double noncollapsing_check(const MetricField& metric, double delta, const std::vector<Vec4>& centers,
                           const std::vector<double>& radii);

struct InjEstimate {
  double value = 0.0;                 // half the shortest closed geodesic found
  std::array<double, 4> axis_loops{};  // shortest loop in each axis class
  double curvature_product = 0.0;      // sup|Rm| diam^2, the near-flat indicator
  bool low_confidence = false;         // curvature_product above the threshold
  static constexpr double kThreshold = 10.0;
};
/// Heuristic: ignores conjugate points and only searches the axis classes (+-e_a).
InjEstimate inj_estimate(const MetricField& metric);

struct GammaNorm {
  double center = 0.0;     // at p itself, zero up to discretisation
  double max_probe = 0.0;  // max over probe points exp_p(w), |w| = probe_radius
};
/// Norm of the Christoffel symbols of normal coordinates at p: smallest C with
/// |Gamma(u, v)| <= C |u| |v|, computed as max_z of the spectral norm of z . Gamma.
GammaNorm gamma_norm(const MetricField& metric, const Vec4& p, double probe_radius, double fd_step = 0.0);

}  // namespace l2flow
