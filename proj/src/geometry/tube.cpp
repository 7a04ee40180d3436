#include "l2flow/tube.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>

#include "l2flow/linalg4.hpp"
#include "l2flow/parallel.hpp"
#include "l2flow/vec4.hpp"

namespace l2flow {
namespace {

using v4::add;
using v4::sub;

constexpr double kGolden = 2.399963229728653;  // pi (3 - sqrt 5)

// Antipodally symmetric Fibonacci set: half on the upper hemisphere, then the mirror images.
std::vector<Vec4> sphere2_directions(int count) {
  const int half = std::max(1, count / 2);
  std::vector<Vec4> d;
  for (int k = 0; k < half; ++k) {
    const double z = 1.0 - (k + 0.5) / half;
    const double rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = k * kGolden;
    d.push_back({rho * std::cos(phi), rho * std::sin(phi), z, 0.0});
  }
  for (int k = 0; k < half; ++k) d.push_back({-d[k][0], -d[k][1], -d[k][2], 0.0});
  return d;
}

// Gauss-Legendre nodes and weights on [-1, 1] by Newton on P_n.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (z * p1 - p0) / (z * z - 1.0);
      const double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    x[n - 1 - i] = z;
    w[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

double g_norm(const Mat4& g, const Vec4& v) { return std::sqrt(std::max(0.0, quad_form(g, v, v))); }

// g-orthonormal basis of the complement of the unit vector t.
std::array<Vec4, 3> normal_frame(const Mat4& g, const Vec4& t) {
  std::array<Vec4, 4> cand;
  std::array<double, 4> len;
  for (int a = 0; a < 4; ++a) {
    Vec4 e{};
    e[a] = 1.0;
    cand[a] = add(e, t, -quad_form(g, e, t));
    len[a] = g_norm(g, cand[a]);
  }
  // Drop the coordinate direction most aligned with t.
  int drop = 0;
  for (int a = 1; a < 4; ++a)
    if (len[a] < len[drop]) drop = a;
  std::array<Vec4, 3> out;
  int n = 0;
  for (int a = 0; a < 4; ++a) {
    if (a == drop) continue;
    Vec4 v = cand[a];
    for (int b = 0; b < n; ++b) v = add(v, out[b], -quad_form(g, v, out[b]));
    v = add(v, t, -quad_form(g, v, t));
    out[n++] = v4::scale(v, 1.0 / g_norm(g, v));
  }
  return out;
}

double det3(const Eigen::Matrix3d& m) { return m.determinant(); }

}  // namespace

NormalDisc exp_normal_disc(const MetricInterpolator& mi, const Vec4& center, const Vec4& tangent, double r,
                           int radial_nodes, int directions) {
  NormalDisc disc;
  disc.center = center;
  const Mat4 g0 = mi.g(center);
  disc.tangent = v4::scale(tangent, 1.0 / g_norm(g0, tangent));
  disc.normal = normal_frame(g0, disc.tangent);
  if (r <= 0.0) {
    disc.points.push_back({center, 0.0, 0.0, 0.0});
    return disc;
  }
  std::vector<double> xr, wr;
  gauss_legendre(radial_nodes, xr, wr);
  const auto dirs = sphere2_directions(directions);
  const double dir_weight = 4.0 * std::numbers::pi / static_cast<double>(dirs.size());
  const double eta = 1e-6 * r;
  auto shoot = [&](const double w[3]) {
    Vec4 v{};
    for (int i = 0; i < 3; ++i) v = add(v, disc.normal[i], w[i]);
    return exp_map(mi, center, v);
  };
  for (int i = 0; i < radial_nodes; ++i) {
    const double rho = 0.5 * r * (1.0 + xr[i]);
    const double radial_weight = 0.5 * r * wr[i] * rho * rho;
    for (const Vec4& u : dirs) {
      const double w[3] = {rho * u[0], rho * u[1], rho * u[2]};
      const Vec4 x = shoot(w);
      Eigen::Matrix<double, 4, 3> J;
      for (int b = 0; b < 3; ++b) {
        double wb[3] = {w[0], w[1], w[2]};
        wb[b] += eta;
        const Vec4 xb = shoot(wb);
        for (int a = 0; a < 4; ++a) J(a, b) = (xb[a] - x[a]) / eta;
      }
      const Mat4 gx = mi.g(x);
      Eigen::Matrix4d ge;
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b) ge(a, b) = gx[a][b];
      const double density = std::sqrt(std::max(0.0, det3(J.transpose() * ge * J)));
      const double weight = radial_weight * dir_weight * density;
      disc.points.push_back({x, weight, 0.0, rho});
      disc.area += weight;
    }
  }
  return disc;
}

double Tube::u_of_s(double s) const {
  const std::size_t n = node_s_.size();
  if (s <= 0.0) return 0.0;
  if (s >= length_) return 1.0;
  const auto it = std::upper_bound(node_s_.begin(), node_s_.end(), s);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(it - node_s_.begin()), n - 1) - 1;
  const double span = node_s_[k + 1] - node_s_[k];
  const double frac = span > 0.0 ? (s - node_s_[k]) / span : 0.0;
  return (static_cast<double>(k) + frac) / static_cast<double>(n - 1);
}

Vec4 Tube::point(double s) const {
  if (s < 0.0) return add(curve_.at(0.0), unit_tangent(0.0), s);
  if (s > length_) return add(curve_.at(1.0), unit_tangent(length_), s - length_);
  return curve_.at(u_of_s(s));
}

Vec4 Tube::unit_tangent(double s) const {
  const double sc = std::clamp(s, 0.0, length_);
  const Vec4 d = curve_.derivative(u_of_s(sc));
  return v4::scale(d, 1.0 / g_norm(mi_->g(curve_.at(u_of_s(sc))), d));
}

namespace {

Vec4 wrapped_delta(const TorusGrid& grid, const Vec4& q, const Vec4& p) {
  Vec4 d = sub(q, p);
  for (int a = 0; a < 4; ++a) d[a] -= grid.period(a) * std::round(d[a] / grid.period(a));
  return d;
}

// Second-order log map: the initial velocity reaching p + d.
Vec4 approx_log(const MetricSample& m, const Vec4& d) { return add(d, v4::contract(m.gamma2, d, d), 0.5); }

}  // namespace

double Tube::leaf_at_node(const Vec4& q, std::size_t k) const {
  const TableNode& n = table_[k];
  const Vec4 l = approx_log(n.m, wrapped_delta(mi_->grid(), q, n.x));
  return quad_form(n.m.g, l, n.t);
}

double Tube::leaf_function(const Vec4& q, double s) const {
  const Vec4 p = point(s);
  MetricSample m;
  if (!mi_->sample(p, m)) throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite on the tube axis");
  const Vec4 l = approx_log(m, wrapped_delta(mi_->grid(), q, p));
  return quad_form(m.g, l, unit_tangent(s));
}

double Tube::normal_distance(const Vec4& q, double s) const {
  const Vec4 p = point(s);
  MetricSample m;
  if (!mi_->sample(p, m)) return std::numeric_limits<double>::infinity();
  return g_norm(m.g, approx_log(m, wrapped_delta(mi_->grid(), q, p)));
}

std::size_t Tube::node_index(double s) const {
  const double k = std::round(s / table_ds_) + kPad;
  return static_cast<std::size_t>(std::clamp(k, 0.0, static_cast<double>(table_.size() - 1)));
}

namespace {

// Root in [0, 1] of the Catmull-Rom cubic through f0..f3 on the middle interval; f1 and f2 differ in sign.
double cubic_root(double f0, double f1, double f2, double f3) {
  auto p = [&](double s) {
    const double s2 = s * s, s3 = s2 * s;
    return 0.5 * (2.0 * f1 + (-f0 + f2) * s + (2.0 * f0 - 5.0 * f1 + 4.0 * f2 - f3) * s2 + (-f0 + 3.0 * f1 - 3.0 * f2 + f3) * s3);
  };
  double lo = 0.0, hi = 1.0;
  const bool rising = f2 > f1;
  for (int it = 0; it < 60; ++it) {
    const double mid = 0.5 * (lo + hi);
    if ((p(mid) < 0.0) == rising) lo = mid;
    else hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::optional<double> Tube::project(const Vec4& q, double s_hint) const {
  const std::size_t last = table_.size() - 1;
  auto refine = [&](std::size_t k, double fk, double fk1) {
    const double f0 = k > 0 ? leaf_at_node(q, k - 1) : 2.0 * fk - fk1;
    const double f3 = k + 2 <= last ? leaf_at_node(q, k + 2) : 2.0 * fk1 - fk;
    return node_s(k) + table_ds_ * cubic_root(f0, fk, fk1, f3);
  };
  if (s_hint >= 0.0) {
    // Walk downhill in |Phi| from the hint; Phi decreases through the leaf.
    std::size_t k = node_index(s_hint);
    double fk = leaf_at_node(q, k);
    const int dir = fk > 0.0 ? 1 : -1;
    for (int step = 0; step < 8; ++step) {
      if ((dir > 0 && k == last) || (dir < 0 && k == 0)) break;
      const std::size_t k2 = dir > 0 ? k + 1 : k - 1;
      const double f2 = leaf_at_node(q, k2);
      if ((fk > 0.0) != (f2 > 0.0)) return dir > 0 ? refine(k, fk, f2) : refine(k2, f2, fk);
      k = k2;
      fk = f2;
    }
    return std::nullopt;
  }
  std::vector<double> phi(table_.size());
  for (std::size_t k = 0; k <= last; ++k) phi[k] = leaf_at_node(q, k);
  std::optional<double> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < last; ++k) {
    if ((phi[k] > 0.0) == (phi[k + 1] > 0.0)) continue;
    const double s = refine(k, phi[k], phi[k + 1]);
    if (s < 0.0 || s > length_) continue;
    const double d = normal_distance(q, s);
    if (d < r_ && d < best_dist) {
      best_dist = d;
      best = s;
    }
  }
  return best;
}

double Tube::dpi(const Vec4& q, double s_hint) const {
  const Mat4 frame = orthonormal_frame(mi_->g(q));
  const double eta = 1e-4 * r_;
  double sum = 0.0;
  for (int i = 0; i < 4; ++i) {
    const Vec4 f{frame[0][i], frame[1][i], frame[2][i], frame[3][i]};
    const auto sp = project(add(q, f, eta), s_hint);
    const auto sm = project(add(q, f, -eta), s_hint);
    if (!sp || !sm) return std::numeric_limits<double>::infinity();
    const double d = (*sp - *sm) / (2.0 * eta);
    sum += d * d;
  }
  return std::sqrt(sum);
}

int Tube::leaf_roots(const Vec4& q, double* min_slope) const {
  int changes = 0;
  double slope = std::numeric_limits<double>::infinity();
  bool prev_in = false;
  double prev_phi = 0.0;
  for (std::size_t k = 0; k < table_.size(); ++k) {
    const TableNode& n = table_[k];
    const Vec4 l = approx_log(n.m, wrapped_delta(mi_->grid(), q, n.x));
    const bool in = g_norm(n.m.g, l) <= r_;
    const double phi = quad_form(n.m.g, l, n.t);
    if (in && prev_in) {
      if ((phi > 0.0) != (prev_phi > 0.0)) ++changes;
      slope = std::min(slope, -(phi - prev_phi) / table_ds_);
    }
    prev_in = in;
    prev_phi = phi;
  }
  if (min_slope) *min_slope = slope;
  return changes;
}

Tube build_tube(const MetricInterpolator& mi, const Curve& curve, double r, const TubeOptions& opts) {
  if (curve.size() < 2) throw Error(ErrorKind::InvalidArgument, "tube needs a curve with at least two points");
  if (!(r > 0.0)) throw Error(ErrorKind::InvalidArgument, "tube radius must be positive");
  Tube t;
  t.mi_ = &mi;
  t.curve_ = curve;
  t.r_ = r;
  t.node_s_.assign(curve.size(), 0.0);
  for (std::size_t k = 1; k < curve.size(); ++k) {
    const Vec4 d = sub(curve.points[k], curve.points[k - 1]);
    t.node_s_[k] = t.node_s_[k - 1] + g_norm(mi.g(add(curve.points[k - 1], d, 0.5)), d);
  }
  t.length_ = t.node_s_.back();
  if (!(t.length_ > 0.0)) throw Error(ErrorKind::InvalidArgument, "tube curve has zero length");

  if (opts.check_hypotheses) {
    const double beta = opts.beta;
    const GeodesicSolver solver(mi.metric());
    const double d = solver.distance(curve.points.front(), curve.points.back());
    if (t.length_ > d + beta)
      throw Error(ErrorKind::InvalidArgument, "tube hypothesis failed: L(gamma) <= d(gamma(0), gamma(L)) + beta (L = " +
                                                  std::to_string(t.length_) + ", d = " + std::to_string(d) + ")");
    const std::vector<double> speeds = curve_speeds(mi, curve);
    for (double v : speeds) {
      const double rel = v / t.length_;
      if (rel > 1.0 + beta || rel < 1.0 / (1.0 + beta))
        throw Error(ErrorKind::InvalidArgument, "tube hypothesis failed: speed in [(1+beta)^-1, 1+beta] (relative speed " +
                                                    std::to_string(rel) + ")");
    }
    const double inv_du = static_cast<double>(curve.size() - 1);
    for (std::size_t k = 1; k + 1 < curve.size(); ++k) {
      MetricSample m;
      if (!mi.sample(curve.points[k], m)) throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite on the curve");
      Vec4 v{}, a{};
      for (int i = 0; i < 4; ++i) {
        v[i] = 0.5 * inv_du * (curve.points[k + 1][i] - curve.points[k - 1][i]);
        a[i] = inv_du * inv_du * (curve.points[k + 1][i] - 2.0 * curve.points[k][i] + curve.points[k - 1][i]);
      }
      a = add(a, v4::contract(m.gamma2, v, v));
      const double v2 = quad_form(m.g, v, v);
      const Vec4 a_perp = add(a, v, -quad_form(m.g, a, v) / v2);
      const double kappa = g_norm(m.g, a_perp) / v2;
      if (kappa > beta)
        throw Error(ErrorKind::InvalidArgument, "tube hypothesis failed: |D_s gamma'| <= beta (curvature " +
                                                    std::to_string(kappa) + ")");
    }
  }

  const int intervals = std::max(1, static_cast<int>(std::ceil(t.length_ / (opts.disc_spacing * r))));
  const double disc_ds = t.length_ / intervals;
  const int table_intervals = intervals * std::max(1, opts.table_per_disc);
  t.table_ds_ = t.length_ / table_intervals;
  t.table_.resize(static_cast<std::size_t>(table_intervals + 1 + 2 * Tube::kPad));
  for (std::size_t k = 0; k < t.table_.size(); ++k) {
    const double s = t.node_s(k);
    Tube::TableNode& n = t.table_[k];
    n.x = t.point(s);
    n.t = t.unit_tangent(s);
    if (!mi.sample(n.x, n.m)) throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite on the tube axis");
  }

  t.discs_.resize(static_cast<std::size_t>(intervals + 1));
  parallel_for(t.discs_.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const double s = j * disc_ds;
      NormalDisc disc = exp_normal_disc(mi, t.point(s), t.unit_tangent(s), r, opts.radial_nodes, opts.directions);
      disc.s = s;
      for (DiscPoint& p : disc.points) p.dpi = t.dpi(p.x, s);
      t.discs_[j] = std::move(disc);
    }
  });

  TubeDiagnostics& dg = t.diag_;
  dg.min_area = std::numeric_limits<double>::infinity();
  dg.min_leaf_slope = std::numeric_limits<double>::infinity();
  for (const NormalDisc& disc : t.discs_) {
    dg.min_area = std::min(dg.min_area, disc.area);
    for (const DiscPoint& p : disc.points) {
      dg.sup_dpi = std::max(dg.sup_dpi, p.dpi);
      double slope;
      if (t.leaf_roots(p.x, &slope) > 1) ++dg.multi_leaf_points;
      dg.min_leaf_slope = std::min(dg.min_leaf_slope, slope);
    }
  }
  dg.foliation_ok = dg.multi_leaf_points == 0;
  dg.area_constant = dg.min_area / (r * r * r);
  return t;
}

CoareaResult coarea_residual(const Tube& tube, const std::function<double(const Vec4&)>& phi, double lattice_fraction) {
  const MetricInterpolator& mi = tube.interpolator();
  const auto& discs = tube.discs();
  const double r = tube.radius();
  const double delta = lattice_fraction * r;
  const double cell = delta * delta * delta * delta;
  CoareaResult out;

  // Fiber side: trapezoid over the discs.
  const std::size_t J = discs.size() - 1;
  const double ds = tube.length() / static_cast<double>(J);
  for (std::size_t j = 0; j <= J; ++j) {
    double f = 0.0;
    for (const DiscPoint& p : discs[j].points) f += phi(p.x) * p.weight / p.dpi;
    out.fiber_side += (j == 0 || j == J ? 0.5 : 1.0) * ds * f;
  }

  // Volume side: each lattice point is counted by the segment [s_j, s_j+1) containing pi(q).
  std::vector<double> seg_sum(J, 0.0);
  std::vector<std::size_t> seg_count(J, 0);
  parallel_for(J, [&](std::size_t b, std::size_t e) {
    for (std::size_t j = b; j < e; ++j) {
      const double s0 = discs[j].s, s1 = discs[j + 1].s;
      double lmin = std::numeric_limits<double>::infinity();
      Vec4 lo, hi;
      lo.fill(std::numeric_limits<double>::infinity());
      hi.fill(-std::numeric_limits<double>::infinity());
      for (int k = 0; k <= 4; ++k) {
        const Vec4 c = tube.point(s0 + 0.25 * k * (s1 - s0));
        double l0, l1;
        sym_eig_range4(mi.g(c), l0, l1);
        lmin = std::min(lmin, l0);
        for (int a = 0; a < 4; ++a) lo[a] = std::min(lo[a], c[a]), hi[a] = std::max(hi[a], c[a]);
      }
      const double pad = 1.1 * r / std::sqrt(lmin);
      std::array<long, 4> i0, i1;
      for (int a = 0; a < 4; ++a) {
        i0[a] = static_cast<long>(std::floor((lo[a] - pad) / delta - 0.5));
        i1[a] = static_cast<long>(std::ceil((hi[a] + pad) / delta - 0.5));
      }
      const double s_mid = 0.5 * (s0 + s1);
      const bool last = j + 1 == J;
      double sum = 0.0;
      std::size_t count = 0;
      for (long a0 = i0[0]; a0 <= i1[0]; ++a0)
        for (long a1 = i0[1]; a1 <= i1[1]; ++a1)
          for (long a2 = i0[2]; a2 <= i1[2]; ++a2)
            for (long a3 = i0[3]; a3 <= i1[3]; ++a3) {
              const Vec4 q{(a0 + 0.5) * delta, (a1 + 0.5) * delta, (a2 + 0.5) * delta, (a3 + 0.5) * delta};
              const auto s = tube.project(q, s_mid);
              if (!s || *s < s0 || *s > s1 || (*s == s1 && !last)) continue;
              if (tube.normal_distance(q, *s) >= r) continue;
              MetricSample m;
              if (!mi.sample(q, m)) continue;
              sum += phi(q) * m.sqrt_det * cell;
              ++count;
            }
      seg_sum[j] = sum;
      seg_count[j] = count;
    }
  });
  for (std::size_t j = 0; j < J; ++j) {
    out.volume_side += seg_sum[j];
    out.lattice_points += seg_count[j];
  }
  const double scale = std::max(std::abs(out.volume_side), std::abs(out.fiber_side));
  out.residual = scale > 0.0 ? std::abs(out.volume_side - out.fiber_side) / scale : 0.0;
  return out;
}

}  // namespace l2flow
