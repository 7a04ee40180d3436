#include "l2flow/quasi_geodesic.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>

namespace l2flow {

double QuasiGeodesicFamily::min_margin() const {
  double m = std::numeric_limits<double>::infinity();
  for (const QgCheck& c : checks) {
    m = std::min(m, c.length_margin);
    if (!degenerate) m = std::min({m, c.speed_margin, c.acceleration_margin});
  }
  return m;
}

double stiffness_constant(const FlowTrace& trace, double t1, double t2) {
  double sup = 0.0, sup_grad = 0.0;
  for (std::size_t k = 0; k < trace.sample_count(); ++k) {
    const double t = trace.sample_time(k);
    if (t < t1 || t > t2) continue;
    const VelocityNorms n = velocity_norms(trace.sample_metric(k), trace.sample_velocity(k));
    sup = std::max(sup, n.sup);
    sup_grad = std::max(sup_grad, n.sup_grad);
  }
  return sup + sup_grad;
}

QuasiGeodesicFamily quasi_geodesic(const FlowTrace& trace, const Vec4& x, const Vec4& y, QgDirection direction,
                                   const QuasiGeodesicOptions& opts) {
  if (opts.check_times < 2) throw Error(ErrorKind::InvalidArgument, "quasi-geodesic needs at least two check times");
  const FlowTrace view = direction == QgDirection::Forward ? trace : trace.time_reversed_view();
  QuasiGeodesicFamily fam;
  fam.x = x;
  fam.y = y;
  fam.direction = direction;
  fam.beta = opts.beta;
  fam.t1 = view.t_begin();
  fam.t2 = view.t_end();
  const double T = fam.t2 - fam.t1;
  if (!(T > 0.0)) throw Error(ErrorKind::InvalidArgument, "quasi-geodesic needs a trace with t2 > t1");
  const TorusGrid& grid = view.grid();
  fam.degenerate = wrap_point(grid, x) == wrap_point(grid, y);

  std::vector<double> times(opts.check_times);
  for (int i = 0; i < opts.check_times; ++i) times[i] = fam.t1 + T * i / (opts.check_times - 1);
  times.back() = fam.t2;

  // Distances at the check times come first: d_bar enters S.
  std::vector<MetricField> metrics;
  std::vector<double> d_solver;
  for (double t : times) {
    metrics.push_back(view.metric_at(t));
    d_solver.push_back(fam.degenerate ? 0.0 : GeodesicSolver(metrics.back()).distance(x, y));
  }
  fam.d_bar = *std::min_element(d_solver.begin(), d_solver.end());

  fam.A = stiffness_constant(view, fam.t1, fam.t2);
  const double beta = opts.beta;
  const double d1 = d_solver.front();
  if (fam.A > 0.0 && !fam.degenerate) {
    const double A = fam.A;
    fam.S_terms[0] = std::log((1.0 + beta) * (1.0 + beta)) / A;
    fam.S_terms[1] = std::log1p(beta / (2.0 * std::exp(A * T) * d1)) / A;
    fam.S_terms[2] = 0.5 * std::min(beta * fam.d_bar * fam.d_bar, 1.0) /
                     (A * (1.0 + 4.0 * opts.c_ap2 * std::exp(2.0 * A * T) * d1 * d1));
    fam.S = std::min({fam.S_terms[0], fam.S_terms[1], fam.S_terms[2], T});
  } else {
    fam.S_terms[0] = fam.S_terms[1] = fam.S_terms[2] = std::numeric_limits<double>::infinity();
    fam.S = T;
  }
  const double segments = std::floor(T / fam.S) + 1.0;
  if (!(fam.S > 0.0) || segments > opts.max_segments) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "quasi-geodesic interval underflow: A = %.6g, S = %.6g for T = %.6g", fam.A, fam.S, T);
    throw Error(ErrorKind::Numerical, buf);
  }

  const int nseg = static_cast<int>(segments);
  for (int j = 0; j < nseg; ++j) {
    QgSegment seg;
    seg.t_start = std::min(fam.t1 + j * fam.S, fam.t2);
    if (fam.degenerate) {
      seg.curve.points = {x, x};
    } else {
      const MetricField g = view.metric_at(seg.t_start);
      const GeodesicSolver solver(g);
      seg.curve = solver.geodesic(x, y);
      seg.d_start = curve_length(solver.interpolator(), seg.curve);
    }
    seg.curve.metric_time = seg.t_start;
    fam.segments.push_back(std::move(seg));
  }

  for (std::size_t i = 0; i < times.size(); ++i) {
    QgCheck c;
    c.t = times[i];
    c.segment = std::min(nseg - 1, static_cast<int>(std::floor((c.t - fam.t1) / fam.S)));
    const QgSegment& seg = fam.segments[c.segment];
    if (fam.degenerate) {
      c.length_margin = beta;
      fam.checks.push_back(c);
      continue;
    }
    const GeodesicSolver solver(metrics[i]);
    const MetricInterpolator& mi = solver.interpolator();
    c.length = curve_length(mi, seg.curve);
    // The shortest curve found: the solver's, the family member relaxed at t, and the member itself.
    Curve relaxed = seg.curve;
    solver.relax(relaxed);
    c.d = std::min({d_solver[i], curve_length(mi, relaxed), c.length});
    c.length_margin = c.d + beta - c.length;
    const std::vector<double> speeds = curve_speeds(mi, seg.curve);
    c.speed_min = *std::min_element(speeds.begin(), speeds.end());
    c.speed_max = *std::max_element(speeds.begin(), speeds.end());
    const double dj = seg.d_start;
    c.speed_margin = std::min(c.speed_min - dj / (1.0 + beta), (1.0 + beta) * dj - c.speed_max) / dj;
    const std::vector<double> acc = curve_accelerations(mi, seg.curve);
    c.acceleration = acc.empty() ? 0.0 : *std::max_element(acc.begin(), acc.end());
    c.acceleration_margin = (beta * dj * dj - c.acceleration) / (dj * dj);
    fam.checks.push_back(c);
  }
  return fam;
}

}  // namespace l2flow
