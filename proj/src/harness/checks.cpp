#include "l2flow/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "l2flow/linalg4.hpp"
#include "l2flow/vec4.hpp"

namespace l2flow {

namespace {

double phi1(double t1, double t2) { return std::sqrt(std::pow(t2, 0.125) - std::pow(t1, 0.125)); }
double phi2(double t1, double t2) { return std::pow(t2, 1.0 / 24.0) - std::pow(t1, 1.0 / 24.0); }

struct Constraint {
  double delta, p1, p2;
  double t1, t2;
  int i, j;
};

double b_of_a(const std::vector<Constraint>& cs, double a) {
  double b = 0.0;
  for (const Constraint& c : cs) b = std::max(b, (c.delta - a * c.p1) / c.p2);
  return b;
}

Mat4 tensor_at(const FieldInterpolator& hi, const Vec4& x) {
  double v[kSymComponents];
  hi.value(x, v);
  Mat4 m{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m[i][j] = v[SymIndex::of[i][j]];
  return m;
}

double tensor_norm(const Mat4& ginv, const Mat4& h) { return std::sqrt(std::max(0.0, frob4(matmul4(matmul4(ginv, h), ginv), h))); }

}  // namespace

DistanceSeries distance_series(const FlowTrace& trace, const std::vector<Vec4>& points) {
  DistanceSeries s;
  s.points = points;
  for (std::size_t k = 0; k < trace.sample_count(); ++k) {
    s.times.push_back(trace.sample_time(k));
    s.d.push_back(GeodesicSolver(trace.sample_metric(k)).all_pairs(points));
  }
  return s;
}

bool HolderFit::finite() const { return std::isfinite(a) && std::isfinite(b) && a >= 0.0 && b >= 0.0; }

HolderFit distance_holder_fit(const DistanceSeries& s) {
  const std::size_t nt = s.times.size();
  const std::size_t np = s.points.size();
  if (nt < 10) throw Error(ErrorKind::InvalidArgument, "distance Holder fit needs at least 10 time samples, got " + std::to_string(nt));
  if (np * (np - 1) / 2 < 5) throw Error(ErrorKind::InvalidArgument, "distance Holder fit needs at least 5 point pairs");
  for (std::size_t k = 0; k + 1 < nt; ++k)
    if (!(s.times[k + 1] > s.times[k])) throw Error(ErrorKind::InvalidArgument, "degenerate time grid: sample times must increase strictly");

  std::vector<Constraint> cs;
  HolderFit fit;
  for (std::size_t k1 = 0; k1 < nt; ++k1)
    for (std::size_t k2 = k1 + 1; k2 < nt; ++k2)
      for (std::size_t i = 0; i < np; ++i)
        for (std::size_t j = i + 1; j < np; ++j) {
          const double delta = std::abs(s.d[k2][i][j] - s.d[k1][i][j]);
          cs.push_back({delta, phi1(s.times[k1], s.times[k2]), phi2(s.times[k1], s.times[k2]), s.times[k1], s.times[k2],
                        static_cast<int>(i), static_cast<int>(j)});
          fit.max_delta = std::max(fit.max_delta, delta);
        }
  fit.constraints = cs.size();
  fit.phi1_max = phi1(s.times.front(), s.times.back());
  fit.phi2_max = phi2(s.times.front(), s.times.back());

  double a_max = 0.0;
  for (const Constraint& c : cs) a_max = std::max(a_max, c.delta / c.p1);
  if (a_max > 0.0) {
    auto objective = [&](double a) { return a * fit.phi1_max + b_of_a(cs, a) * fit.phi2_max; };
    const double r = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = 0.0, hi = a_max;
    double x1 = hi - r * (hi - lo), x2 = lo + r * (hi - lo);
    double f1 = objective(x1), f2 = objective(x2);
    for (int it = 0; it < 200 && hi - lo > 1e-15 * a_max; ++it) {
      if (f1 <= f2) {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - r * (hi - lo);
        f1 = objective(x1);
      } else {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + r * (hi - lo);
        f2 = objective(x2);
      }
    }
    double a = 0.5 * (lo + hi);
    // The ends of the bracket are never evaluated by the search itself.
    for (double cand : {0.0, a_max})
      if (objective(cand) < objective(a)) a = cand;
    fit.a = a;
    fit.b = b_of_a(cs, a);
  }
  fit.majorant_max = fit.a * fit.phi1_max + fit.b * fit.phi2_max;

  double worst = -1.0;
  for (const Constraint& c : cs) {
    const double m = fit.a * c.p1 + fit.b * c.p2;
    const double ratio = m > 0.0 ? c.delta / m : 0.0;
    if (ratio > worst) {
      worst = ratio;
      fit.worst_t1 = c.t1;
      fit.worst_t2 = c.t2;
      fit.worst_i = c.i;
      fit.worst_j = c.j;
      fit.worst_delta = c.delta;
    }
  }
  return fit;
}

HolderStability holder_stability(const HolderFit& x, const HolderFit& y, double tolerance) {
  HolderStability st;
  auto rel = [](double p, double q) {
    const double m = std::max(std::abs(p), std::abs(q));
    return m > 0.0 ? std::abs(p - q) / m : 0.0;
  };
  st.a_change = rel(x.a, y.a);
  st.b_change = rel(x.b, y.b);
  const double m = std::max(x.majorant_max, y.majorant_max);
  st.majorant_change = m > 0.0 ? (std::abs(x.a - y.a) * x.phi1_max + std::abs(x.b - y.b) * x.phi2_max) / m : 0.0;
  st.stable = x.finite() && y.finite() && st.majorant_change <= tolerance;
  return st;
}

double gh_upper_bound(const std::vector<std::vector<double>>& da, const std::vector<std::vector<double>>& db) {
  if (da.size() != db.size()) throw Error(ErrorKind::InvalidArgument, "distance matrices of different sizes");
  double m = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i)
    for (std::size_t j = 0; j < da.size(); ++j) m = std::max(m, std::abs(da[i][j] - db[i][j]));
  return 0.5 * m;
}

double gh_upper_bound(const MetricField& a, const MetricField& b, const std::vector<Vec4>& points) {
  if (!a.grid().same_shape(b.grid())) throw Error(ErrorKind::InvalidArgument, "GH bound needs both metrics on the same grid");
  return gh_upper_bound(all_pairs_distances(a, points), all_pairs_distances(b, points));
}

GhTrend gh_trend(const DistanceSeries& s) {
  GhTrend tr;
  tr.times = s.times;
  for (std::size_t k = 0; k < s.d.size(); ++k) {
    tr.bound.push_back(gh_upper_bound(s.d.front(), s.d[k]));
    const std::size_t first = k >= 2 ? k - 2 : 0;
    double sum = 0.0;
    for (std::size_t m = first; m <= k; ++m) sum += tr.bound[m];
    tr.smoothed.push_back(sum / static_cast<double>(k - first + 1));
  }
  const double top = tr.smoothed.empty() ? 0.0 : *std::max_element(tr.smoothed.begin(), tr.smoothed.end());
  for (std::size_t k = 0; k + 1 < tr.smoothed.size(); ++k) {
    const double drop = tr.smoothed[k] - tr.smoothed[k + 1];
    if (top > 0.0) tr.worst_drop = std::max(tr.worst_drop, drop / top);
  }
  tr.non_decreasing = tr.worst_drop <= 1e-12;
  return tr;
}

PointVelocity velocity_at(const MetricInterpolator& mi, const SymTensorField& h, const Vec4& x) {
  MetricSample ms;
  if (!mi.sample(x, ms)) throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite at a curve point");
  const FieldInterpolator hi(h);
  double v[kSymComponents], dv[4 * kSymComponents];
  hi.value_grad(x, v, dv);
  Mat4 hm{};
  std::array<Mat4, 4> dh{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      hm[i][j] = v[SymIndex::of[i][j]];
      for (int a = 0; a < 4; ++a) dh[a][i][j] = dv[a * kSymComponents + SymIndex::of[i][j]];
    }
  std::array<Mat4, 4> nh{};
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double s = dh[k][i][j];
        for (int m = 0; m < 4; ++m) s -= ms.gamma2[m][k][i] * hm[m][j] + ms.gamma2[m][k][j] * hm[i][m];
        nh[k][i][j] = s;
      }
  PointVelocity out;
  out.norm = tensor_norm(ms.ginv, hm);
  double sq = 0.0;
  for (int k = 0; k < 4; ++k)
    for (int a = 0; a < 4; ++a) sq += ms.ginv[k][a] * frob4(matmul4(matmul4(ms.ginv, nh[k]), ms.ginv), nh[a]);
  out.grad_norm = std::sqrt(std::max(0.0, sq));
  return out;
}

BoundCheck length_derivative_check(const FlowTrace& trace, const Curve& curve) {
  const std::size_t n = trace.sample_count();
  std::vector<double> L(n), R(n);
  for (std::size_t k = 0; k < n; ++k) {
    const MetricInterpolator mi(trace.sample_metric(k));
    const SymTensorField h = trace.sample_velocity(k);
    const FieldInterpolator hi(h);
    L[k] = curve_length(mi, curve);
    double r = 0.0;
    for (std::size_t s = 0; s + 1 < curve.size(); ++s) {
      const Vec4 mid = v4::lerp(curve.points[s], curve.points[s + 1], 0.5);
      const Vec4 dx = v4::sub(curve.points[s + 1], curve.points[s]);
      const Mat4 g = mi.g(mid);
      Mat4 gi;
      double sd;
      spd_inverse4(g, gi, sd);
      r += tensor_norm(gi, tensor_at(hi, mid)) * std::sqrt(quad_form(g, dx, dx));
    }
    R[k] = r;
  }
  BoundCheck res;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    IntervalBound b{trace.sample_time(k), trace.sample_time(k + 1), std::abs(L[k + 1] - L[k]), 0.0};
    b.rhs = 0.5 * (R[k] + R[k + 1]) * std::abs(b.t2 - b.t1);
    if (b.rhs > 0.0) res.worst_ratio = std::max(res.worst_ratio, b.lhs / b.rhs);
    else if (b.lhs > 0.0) res.worst_ratio = std::numeric_limits<double>::infinity();
    res.intervals.push_back(b);
  }
  return res;
}

namespace {

// sup_M |h|_g, pointwise values only.
double sup_velocity_norm(const MetricField& g, const SymTensorField& h) {
  double sup = 0.0;
  for (std::size_t p = 0; p < g.points(); ++p) {
    Mat4 gi;
    double sd;
    if (!spd_inverse4(g.matrix(p), gi, sd)) throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite");
    const Mat4 hm = h.matrix(p);
    sup = std::max(sup, std::sqrt(std::max(0.0, frob4(matmul4(matmul4(gi, hm), gi), hm))));
  }
  return sup;
}

}  // namespace

BoundCheck vector_ratio_check(const FlowTrace& trace, const std::vector<Vec4>& points) {
  const std::size_t n = trace.sample_count();
  const TorusGrid& grid = trace.grid();
  // Probes sit on grid nodes, where ||g'||_inf is taken.
  std::vector<std::size_t> nodes;
  for (const Vec4& x : points) {
    const Vec4 w = wrap_point(grid, x);
    std::array<int, 4> idx{};
    for (int a = 0; a < 4; ++a) idx[a] = static_cast<int>(std::lround(w[a] / grid.spacing(a))) % grid.n();
    nodes.push_back(grid.index(idx));
  }
  std::vector<double> sup(n), integral(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) sup[k] = sup_velocity_norm(trace.sample_metric(k), trace.sample_velocity(k));
  for (std::size_t k = 1; k < n; ++k)
    integral[k] = integral[k - 1] + 0.5 * (sup[k] + sup[k - 1]) * std::abs(trace.sample_time(k) - trace.sample_time(k - 1));

  BoundCheck res;
  for (std::size_t k1 = 0; k1 < n; ++k1)
    for (std::size_t k2 = k1 + 1; k2 < n; ++k2) {
      IntervalBound b{trace.sample_time(k1), trace.sample_time(k2), 0.0, integral[k2] - integral[k1]};
      const MetricField& g1 = trace.sample_metric(k1);
      const MetricField& g2 = trace.sample_metric(k2);
      for (std::size_t p : nodes)
        for (int a = 0; a < 4; ++a) {
          const int c = SymIndex::of[a][a];
          b.lhs = std::max(b.lhs, std::abs(std::log(g2.at(p)[c] / g1.at(p)[c])));
        }
      if (b.rhs > 0.0) res.worst_ratio = std::max(res.worst_ratio, b.lhs / b.rhs);
      else if (b.lhs > 0.0) res.worst_ratio = std::numeric_limits<double>::infinity();
      res.intervals.push_back(b);
    }
  return res;
}

AccelerationFit acceleration_derivative_fit(const FlowTrace& trace, const Curve& curve) {
  const std::size_t n = trace.sample_count();
  const std::size_t interior = curve.size() - 2;
  struct NodeData {
    std::vector<double> acc, speed_sq, h, dh;
  };
  std::vector<NodeData> data(n);
  for (std::size_t k = 0; k < n; ++k) {
    const MetricInterpolator mi(trace.sample_metric(k));
    const SymTensorField h = trace.sample_velocity(k);
    NodeData& d = data[k];
    d.acc = curve_accelerations(mi, curve);
    const std::vector<double> speeds = curve_speeds(mi, curve);
    for (std::size_t m = 0; m < interior; ++m) {
      const double v = 0.5 * (speeds[m] + speeds[m + 1]);
      d.speed_sq.push_back(v * v);
      const PointVelocity pv = velocity_at(mi, h, curve.points[m + 1]);
      d.h.push_back(pv.norm);
      d.dh.push_back(pv.grad_norm);
    }
  }
  AccelerationFit fit;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double dt = std::abs(trace.sample_time(k + 1) - trace.sample_time(k));
    const NodeData& p = data[k];
    const NodeData& q = data[k + 1];
    for (std::size_t m = 0; m < interior; ++m) {
      const double lhs = std::abs(q.acc[m] * q.acc[m] - p.acc[m] * p.acc[m]) / dt;
      const double first = 0.5 * (p.h[m] * p.acc[m] * p.acc[m] + q.h[m] * q.acc[m] * q.acc[m]);
      const double second = 0.5 * (p.speed_sq[m] * p.acc[m] * p.dh[m] + q.speed_sq[m] * q.acc[m] * q.dh[m]);
      ++fit.samples;
      if (!(second > 0.0)) continue;
      const double c = (lhs - first) / second;
      if (c > fit.C) {
        fit.C = c;
        fit.worst_t1 = trace.sample_time(k);
        fit.worst_t2 = trace.sample_time(k + 1);
        fit.worst_node = static_cast<int>(m + 1);
      }
    }
  }
  return fit;
}

}  // namespace l2flow
