#include "l2flow/geodesic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "l2flow/curvature.hpp"
#include "l2flow/linalg4.hpp"
#include "l2flow/parallel.hpp"
#include "l2flow/vec4.hpp"

namespace l2flow {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kLoopEnergyTolerance = 1e-9;

using v4::add;
using v4::sub;
using v4::lerp;
using v4::matvec;
using v4::inf_norm;

MetricSample checked_sample(const MetricInterpolator& mi, const Vec4& x) {
  MetricSample s;
  if (!mi.sample(x, s)) throw Error(ErrorKind::NotPositiveDefinite, "interpolated metric not positive definite");
  return s;
}

// 8 axial moves, then the 24 moves with two nonzero unit offsets.
struct Moves {
  std::array<std::array<int, 4>, 32> off{};
  Moves() {
    int n = 0;
    for (int a = 0; a < 4; ++a)
      for (int s : {-1, 1}) {
        off[n] = {0, 0, 0, 0};
        off[n++][a] = s;
      }
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        for (int sa : {-1, 1})
          for (int sb : {-1, 1}) {
            off[n] = {0, 0, 0, 0};
            off[n][a] = sa;
            off[n++][b] = sb;
          }
  }
};
const Moves& moves() {
  static const Moves m;
  return m;
}

std::array<int, 4> nearest_node(const TorusGrid& grid, const Vec4& x) {
  std::array<int, 4> c{};
  for (int a = 0; a < 4; ++a) c[a] = static_cast<int>(std::lround(x[a] / grid.spacing(a)));
  return c;
}

Vec4 node_position(const TorusGrid& grid, const std::array<int, 4>& c) {
  return {c[0] * grid.spacing(0), c[1] * grid.spacing(1), c[2] * grid.spacing(2), c[3] * grid.spacing(3)};
}

// Resamples a polyline to n points equally spaced in coordinate arc length.
std::vector<Vec4> resample(const std::vector<Vec4>& poly, int n) {
  std::vector<double> cum(poly.size(), 0.0);
  for (std::size_t k = 1; k < poly.size(); ++k) cum[k] = cum[k - 1] + v4::norm(sub(poly[k], poly[k - 1]));
  const double total = cum.back();
  std::vector<Vec4> out(n);
  if (total <= 0.0) {
    for (int k = 0; k < n; ++k) out[k] = lerp(poly.front(), poly.back(), static_cast<double>(k) / (n - 1));
    return out;
  }
  std::size_t seg = 0;
  for (int k = 0; k < n; ++k) {
    const double s = total * k / (n - 1);
    while (seg + 2 < poly.size() && cum[seg + 1] < s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    out[k] = len > 0.0 ? lerp(poly[seg], poly[seg + 1], (s - cum[seg]) / len) : poly[seg];
  }
  out.front() = poly.front();
  out.back() = poly.back();
  return out;
}

struct SegmentData {
  Mat4 g;
  Vec4 d;  // Delta^T d_a g Delta
};

// Per-segment metric and metric-derivative contraction at midpoints.
bool segment_data(const MetricInterpolator& mi, const std::vector<Vec4>& x, const std::vector<Vec4>& delta,
                  std::vector<SegmentData>& out) {
  out.resize(delta.size());
  for (std::size_t k = 0; k < delta.size(); ++k) {
    MetricSample s;
    if (!mi.sample(add(x[k], delta[k], 0.5), s)) return false;
    out[k].g = s.g;
    for (int a = 0; a < 4; ++a) {
      double v = 0.0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) v += s.dg[a][i][j] * delta[k][i] * delta[k][j];
      out[k].d[a] = v;
    }
  }
  return true;
}

// Discrete energy (n-1) sum Delta^T g(mid) Delta. Returns +inf where positivity fails.
double discrete_energy(const MetricInterpolator& mi, const std::vector<Vec4>& x, const Vec4& closing) {
  const bool closed = closing[0] != 0.0 || closing[1] != 0.0 || closing[2] != 0.0 || closing[3] != 0.0;
  const std::size_t segs = closed ? x.size() : x.size() - 1;
  double e = 0.0;
  for (std::size_t k = 0; k < segs; ++k) {
    const Vec4 next = (closed && k + 1 == x.size()) ? add(x[0], closing) : x[k + 1];
    const Vec4 d = sub(next, x[k]);
    MetricSample s;
    if (!mi.sample(add(x[k], d, 0.5), s)) return kInf;
    e += quad_form(s.g, d, d);
  }
  return static_cast<double>(segs) * e;
}

using Mat4e = Eigen::Matrix4d;
using Vec4e = Eigen::Vector4d;

Mat4e to_eigen(const Mat4& m) {
  Mat4e r;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r(i, j) = m[i][j];
  return r;
}

}  // namespace

Vec4 Curve::at(double u) const {
  const std::size_t n = points.size();
  if (n == 1) return points[0];
  const double t = std::clamp(u, 0.0, 1.0) * static_cast<double>(n - 1);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(t), n - 2);
  const double s = t - static_cast<double>(k);
  const Vec4& p1 = points[k];
  const Vec4& p2 = points[k + 1];
  const Vec4 p0 = k > 0 ? points[k - 1] : add(p1, sub(p1, p2));
  const Vec4 p3 = k + 2 < n ? points[k + 2] : add(p2, sub(p2, p1));
  const double s2 = s * s, s3 = s2 * s;
  Vec4 r{};
  for (int a = 0; a < 4; ++a)
    r[a] = 0.5 * ((2.0 * p1[a]) + (-p0[a] + p2[a]) * s + (2.0 * p0[a] - 5.0 * p1[a] + 4.0 * p2[a] - p3[a]) * s2 +
                  (-p0[a] + 3.0 * p1[a] - 3.0 * p2[a] + p3[a]) * s3);
  return r;
}

Vec4 Curve::derivative(double u) const {
  const std::size_t n = points.size();
  if (n == 1) return Vec4{};
  const double t = std::clamp(u, 0.0, 1.0) * static_cast<double>(n - 1);
  const std::size_t k = std::min<std::size_t>(static_cast<std::size_t>(t), n - 2);
  const double s = t - static_cast<double>(k);
  const Vec4& p1 = points[k];
  const Vec4& p2 = points[k + 1];
  const Vec4 p0 = k > 0 ? points[k - 1] : add(p1, sub(p1, p2));
  const Vec4 p3 = k + 2 < n ? points[k + 2] : add(p2, sub(p2, p1));
  Vec4 r{};
  for (int a = 0; a < 4; ++a)
    r[a] = 0.5 * static_cast<double>(n - 1) *
           ((-p0[a] + p2[a]) + 2.0 * (2.0 * p0[a] - 5.0 * p1[a] + 4.0 * p2[a] - p3[a]) * s +
            3.0 * (-p0[a] + 3.0 * p1[a] - 3.0 * p2[a] + p3[a]) * s * s);
  return r;
}

double curve_length(const MetricInterpolator& mi, const Curve& c) {
  double len = 0.0;
  for (std::size_t k = 0; k + 1 < c.size(); ++k) {
    const Vec4 d = sub(c.points[k + 1], c.points[k]);
    if (d == Vec4{}) continue;
    len += std::sqrt(quad_form(mi.g(add(c.points[k], d, 0.5)), d, d));
  }
  return len;
}

std::vector<double> curve_speeds(const MetricInterpolator& mi, const Curve& c) {
  std::vector<double> out;
  const double inv_du = static_cast<double>(c.size() - 1);
  for (std::size_t k = 0; k + 1 < c.size(); ++k) {
    const Vec4 d = sub(c.points[k + 1], c.points[k]);
    out.push_back(inv_du * std::sqrt(std::max(0.0, quad_form(mi.g(add(c.points[k], d, 0.5)), d, d))));
  }
  return out;
}

std::vector<double> curve_accelerations(const MetricInterpolator& mi, const Curve& c) {
  std::vector<double> out;
  const double inv_du = static_cast<double>(c.size() - 1);
  for (std::size_t k = 1; k + 1 < c.size(); ++k) {
    const MetricSample s = checked_sample(mi, c.points[k]);
    Vec4 v{}, acc{};
    for (int a = 0; a < 4; ++a) {
      v[a] = 0.5 * inv_du * (c.points[k + 1][a] - c.points[k - 1][a]);
      acc[a] = inv_du * inv_du * (c.points[k + 1][a] - 2.0 * c.points[k][a] + c.points[k - 1][a]);
    }
    const Vec4 cov = add(acc, v4::contract(s.gamma2, v, v));
    out.push_back(std::sqrt(std::max(0.0, quad_form(s.g, cov, cov))));
  }
  return out;
}

Vec4 wrap_point(const TorusGrid& grid, const Vec4& x) {
  Vec4 r;
  for (int a = 0; a < 4; ++a) {
    const double L = grid.period(a);
    r[a] = x[a] - L * std::floor(x[a] / L);
    if (r[a] >= L) r[a] = 0.0;
  }
  return r;
}

GeodesicSolver::GeodesicSolver(const MetricField& metric, GeodesicOptions opts)
    : metric_(&metric), mi_(metric), opts_(opts) {}

int GeodesicSolver::node_count(double coord_length) const {
  const double h = metric_->grid().min_spacing();
  return std::max(opts_.min_nodes, static_cast<int>(std::ceil(opts_.nodes_per_cell * coord_length / h)) + 1);
}

std::vector<double> GeodesicSolver::graph_distances(std::size_t source, std::vector<std::int32_t>* pred,
                                                    std::vector<std::uint8_t>* move) const {
  const TorusGrid& grid = metric_->grid();
  const std::size_t n = grid.size();
  const Moves& mv = moves();
  // Offsets in coordinates, reused for every edge.
  std::array<Vec4, 32> disp;
  for (int m = 0; m < 32; ++m)
    for (int a = 0; a < 4; ++a) disp[m][a] = mv.off[m][a] * grid.spacing(a);

  std::vector<double> dist(n, kInf);
  if (pred) pred->assign(n, -1);
  if (move) move->assign(n, 0);
  using Item = std::pair<double, std::size_t>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> queue;
  dist[source] = 0.0;
  queue.push({0.0, source});
  while (!queue.empty()) {
    const auto [d, p] = queue.top();
    queue.pop();
    if (d > dist[p]) continue;
    const Mat4 gp = metric_->matrix(p);
    const auto c = grid.coords(p);
    for (int m = 0; m < 32; ++m) {
      const std::size_t q = grid.index(c[0] + mv.off[m][0], c[1] + mv.off[m][1], c[2] + mv.off[m][2], c[3] + mv.off[m][3]);
      const Mat4 gq = metric_->matrix(q);
      double w2 = 0.0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) w2 += 0.5 * (gp[i][j] + gq[i][j]) * disp[m][i] * disp[m][j];
      const double nd = d + std::sqrt(std::max(w2, 0.0));
      if (nd < dist[q]) {
        dist[q] = nd;
        if (pred) (*pred)[q] = static_cast<std::int32_t>(p);
        if (move) (*move)[q] = static_cast<std::uint8_t>(m);
        queue.push({nd, q});
      }
    }
  }
  return dist;
}

namespace {

// Unwrapped polyline through the graph path from the node nearest x to the node nearest y.
std::vector<Vec4> polyline_from_tree(const TorusGrid& grid, const Vec4& x, const Vec4& y,
                                     const std::vector<std::int32_t>& pred, const std::vector<std::uint8_t>& move) {
  const Moves& mv = moves();
  const auto xs = nearest_node(grid, x);
  const auto yt = nearest_node(grid, y);
  const std::size_t source = grid.index(xs);
  std::vector<int> steps;
  for (std::size_t q = grid.index(yt); q != source; q = static_cast<std::size_t>(pred[q])) {
    if (pred[q] < 0) throw Error(ErrorKind::Numerical, "grid graph is disconnected");
    steps.push_back(move[q]);
  }
  std::reverse(steps.begin(), steps.end());
  std::array<int, 4> cell = xs;
  std::vector<Vec4> poly{x};
  for (std::size_t k = 0; k < steps.size(); ++k) {
    for (int a = 0; a < 4; ++a) cell[a] += mv.off[steps[k]][a];
    if (k + 1 < steps.size()) poly.push_back(node_position(grid, cell));
  }
  // cell is now a lift of y's node; carry y along with it.
  const Vec4 shift = sub(node_position(grid, cell), node_position(grid, yt));
  poly.push_back(add(y, shift));
  return poly;
}

}  // namespace

Curve GeodesicSolver::graph_path(const Vec4& x, const Vec4& y) const {
  std::vector<std::int32_t> pred;
  std::vector<std::uint8_t> move;
  const TorusGrid& grid = metric_->grid();
  graph_distances(grid.index(nearest_node(grid, x)), &pred, &move);
  Curve c;
  c.points = polyline_from_tree(grid, x, y, pred, move);
  return c;
}

Curve GeodesicSolver::straight(const Vec4& x, const Vec4& y_lift) const {
  Curve c;
  c.points = resample({x, y_lift}, node_count(v4::norm(sub(y_lift, x))));
  return c;
}

bool GeodesicSolver::relax(Curve& c) const {
  const int n = static_cast<int>(c.size());
  if (n < 3) return true;
  std::vector<Vec4>& x = c.points;
  const double scale = std::max(v4::norm(sub(x.back(), x.front())), metric_->grid().min_spacing());
  const double m_scale = static_cast<double>(n - 1);
  const Vec4 open{};
  double energy = discrete_energy(mi_, x, open);
  if (!std::isfinite(energy)) throw Error(ErrorKind::NotPositiveDefinite, "geodesic initial curve leaves the positive cone");
  std::vector<Vec4> delta(n - 1), trial;
  std::vector<SegmentData> seg;
  std::vector<Mat4e> cp(n);
  std::vector<Vec4e> rp(n), step(n);
  for (int it = 0; it < opts_.max_iterations; ++it) {
    for (int k = 0; k + 1 < n; ++k) delta[k] = sub(x[k + 1], x[k]);
    if (!segment_data(mi_, x, delta, seg)) return false;
    // Gradient of the energy at interior nodes and the Gauss-Newton block tridiagonal system.
    // Forward block elimination (Thomas) over nodes 1..n-2.
    double grad_dot_step = 0.0;
    for (int k = 1; k < n - 1; ++k) {
      Vec4e gk;
      for (int a = 0; a < 4; ++a) {
        double v = 0.5 * (seg[k - 1].d[a] + seg[k].d[a]);
        for (int j = 0; j < 4; ++j) v += 2.0 * (seg[k - 1].g[a][j] * delta[k - 1][j] - seg[k].g[a][j] * delta[k][j]);
        gk(a) = m_scale * v;
      }
      Mat4e diag = 2.0 * m_scale * (to_eigen(seg[k - 1].g) + to_eigen(seg[k].g));
      Vec4e rhs = -gk;
      if (k > 1) {
        const Mat4e lower = -2.0 * m_scale * to_eigen(seg[k - 1].g);  // block (k, k-1)
        const Mat4e l = lower * cp[k - 1].inverse();
        diag -= l * lower.transpose();
        rhs -= l * rp[k - 1];
      }
      cp[k] = diag;
      rp[k] = rhs;
      step[k] = gk;  // keep the gradient for the Armijo test
    }
    std::vector<Vec4e> grad(step.begin(), step.end());
    step[n - 2] = cp[n - 2].ldlt().solve(rp[n - 2]);
    for (int k = n - 3; k >= 1; --k) {
      const Mat4e upper = -2.0 * m_scale * to_eigen(seg[k].g);  // block (k, k+1)
      step[k] = cp[k].ldlt().solve(rp[k] - upper * step[k + 1]);
    }
    double max_step = 0.0;
    for (int k = 1; k < n - 1; ++k) {
      grad_dot_step += grad[k].dot(step[k]);
      max_step = std::max(max_step, step[k].cwiseAbs().maxCoeff());
    }
    if (max_step <= opts_.tolerance * scale) return true;
    if (!(grad_dot_step < 0.0)) return max_step <= 1e-8 * scale;
    double alpha = 1.0, drop = 0.0;
    bool accepted = false;
    for (int ls = 0; ls < 30; ++ls) {
      trial = x;
      for (int k = 1; k < n - 1; ++k)
        for (int a = 0; a < 4; ++a) trial[k][a] += alpha * step[k](a);
      const double e = discrete_energy(mi_, trial, open);
      if (e <= energy + 1e-4 * alpha * grad_dot_step) {
        x.swap(trial);
        drop = energy - e;
        energy = e;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) return alpha * max_step <= 1e-8 * scale;
    if (alpha * max_step <= opts_.tolerance * scale || drop <= opts_.energy_tolerance * energy) return true;
  }
  return false;
}

Curve GeodesicSolver::closed_geodesic(const Vec4& start, const Vec4& winding) const {
  const int n = node_count(v4::norm(winding)) - 1;  // distinct nodes; segment n closes the loop
  std::vector<Vec4> x(n);
  for (int k = 0; k < n; ++k) x[k] = add(start, winding, static_cast<double>(k) / n);
  const double scale = v4::norm(winding);
  const double m_scale = n;
  double energy = discrete_energy(mi_, x, winding);
  if (!std::isfinite(energy)) throw Error(ErrorKind::NotPositiveDefinite, "closed curve leaves the positive cone");
  bool converged = false;
  double damping = -1.0, diag_scale = 0.0;
  std::vector<Vec4> delta(n), trial;
  std::vector<SegmentData> seg;
  std::vector<Vec4> mids(n);
  for (int it = 0; it < opts_.max_iterations && !converged; ++it) {
    for (int k = 0; k < n; ++k) delta[k] = sub(k + 1 < n ? x[k + 1] : add(x[0], winding), x[k]);
    if (!segment_data(mi_, x, delta, seg)) break;
    Eigen::MatrixXd H = Eigen::MatrixXd::Zero(4 * n, 4 * n);
    Eigen::VectorXd grad(4 * n);
    for (int k = 0; k < n; ++k) {
      const int km = (k + n - 1) % n;
      for (int a = 0; a < 4; ++a) {
        double v = 0.5 * (seg[km].d[a] + seg[k].d[a]);
        for (int j = 0; j < 4; ++j) v += 2.0 * (seg[km].g[a][j] * delta[km][j] - seg[k].g[a][j] * delta[k][j]);
        grad(4 * k + a) = m_scale * v;
      }
      const int kp = (k + 1) % n;
      H.block<4, 4>(4 * k, 4 * k) += 2.0 * m_scale * (to_eigen(seg[km].g) + to_eigen(seg[k].g));
      H.block<4, 4>(4 * k, 4 * kp) -= 2.0 * m_scale * to_eigen(seg[k].g);
      H.block<4, 4>(4 * kp, 4 * k) -= 2.0 * m_scale * to_eigen(seg[k].g);
    }
    if (damping < 0.0) {
      diag_scale = H.diagonal().maxCoeff();
      damping = 1e-3 * diag_scale;
    }
    // Gauss-Newton ignores second derivatives of g, which are all that pin the loop's
    // transverse position, so damp Levenberg-Marquardt style instead of line searching.
    bool accepted = false;
    double drop = 0.0, max_step = 0.0;
    for (int tries = 0; tries < 40 && !accepted; ++tries) {
      Eigen::MatrixXd Hd = H;
      Hd.diagonal().array() += damping;
      const Eigen::VectorXd dir = -Hd.ldlt().solve(grad);
      max_step = dir.cwiseAbs().maxCoeff();
      if (max_step <= opts_.tolerance * scale) break;
      trial = x;
      for (int k = 0; k < n; ++k)
        for (int a = 0; a < 4; ++a) trial[k][a] += dir(4 * k + a);
      const double e = discrete_energy(mi_, trial, winding);
      if (e < energy) {
        x.swap(trial);
        drop = energy - e;
        energy = e;
        accepted = true;
        damping = std::max(damping / 3.0, 1e-12 * diag_scale);
      } else {
        damping *= 4.0;
      }
    }
    // The transverse drift is slow and changes the length only at second order, so the
    // loop tolerance is looser than for open curves.
    if (!accepted || max_step <= opts_.tolerance * scale || drop <= kLoopEnergyTolerance * energy) converged = true;
  }
  Curve c;
  c.points = x;
  c.points.push_back(add(x[0], winding));
  c.certified = converged;
  return c;
}

namespace {

// Lattice lifts of y near x: per axis the nearest lift, plus the runner-up when ambiguous.
std::vector<Vec4> candidate_lifts(const TorusGrid& grid, const Vec4& x, const Vec4& y, double ambiguity) {
  std::array<std::vector<double>, 4> per_axis;
  for (int a = 0; a < 4; ++a) {
    const double L = grid.period(a);
    const double d = y[a] - x[a];
    const double k = -std::round(d / L);
    const double r = d + k * L;
    per_axis[a].push_back(y[a] + k * L);
    if (std::abs(r) > ambiguity * L) per_axis[a].push_back(y[a] + (k + (r > 0.0 ? -1.0 : 1.0)) * L);
  }
  std::vector<Vec4> out;
  for (double a0 : per_axis[0])
    for (double a1 : per_axis[1])
      for (double a2 : per_axis[2])
        for (double a3 : per_axis[3]) out.push_back({a0, a1, a2, a3});
  return out;
}

}  // namespace

namespace {

// Relaxes the graph path and each straight lift; the shortest result wins.
Curve best_geodesic(const GeodesicSolver& solver, const Curve& graph, const std::vector<Curve>& straights) {
  const MetricInterpolator& mi = solver.interpolator();
  Curve best;
  double best_len = kInf;
  auto consider = [&](Curve c) {
    c.certified = solver.relax(c);
    const double len = curve_length(mi, c);
    if (len < best_len) {
      best = std::move(c);
      best_len = len;
    }
  };
  consider(graph);
  for (const Curve& c : straights) consider(c);
  return best;
}

}  // namespace

Curve GeodesicSolver::resampled_graph_path(std::vector<Vec4> poly) const {
  double coord_len = 0.0;
  for (std::size_t k = 1; k < poly.size(); ++k) coord_len += v4::norm(sub(poly[k], poly[k - 1]));
  Curve c;
  c.points = resample(poly, node_count(coord_len));
  return c;
}

std::vector<Curve> GeodesicSolver::straight_candidates(const Vec4& x, const Vec4& y) const {
  std::vector<Curve> out;
  for (const Vec4& lift : candidate_lifts(metric_->grid(), x, y, opts_.lift_ambiguity)) out.push_back(straight(x, lift));
  return out;
}

Curve GeodesicSolver::geodesic(const Vec4& x, const Vec4& y) const {
  const TorusGrid& grid = metric_->grid();
  if (wrap_point(grid, x) == wrap_point(grid, y)) {
    Curve c;
    c.points = {x, x};
    return c;
  }
  return best_geodesic(*this, resampled_graph_path(graph_path(x, y).points), straight_candidates(x, y));
}

double GeodesicSolver::distance(const Vec4& x, const Vec4& y) const { return curve_length(mi_, geodesic(x, y)); }

std::vector<std::vector<double>> GeodesicSolver::all_pairs(const std::vector<Vec4>& points) const {
  const std::size_t n = points.size();
  const TorusGrid& grid = metric_->grid();
  std::vector<std::vector<double>> d(n, std::vector<double>(n, 0.0));
  parallel_for(n, [&](std::size_t begin, std::size_t end) {
    std::vector<std::int32_t> pred;
    std::vector<std::uint8_t> move;
    for (std::size_t i = begin; i < end; ++i) {
      graph_distances(grid.index(nearest_node(grid, points[i])), &pred, &move);
      for (std::size_t j = i + 1; j < n; ++j) {
        if (wrap_point(grid, points[i]) == wrap_point(grid, points[j])) continue;
        const Curve c = best_geodesic(*this, resampled_graph_path(polyline_from_tree(grid, points[i], points[j], pred, move)),
                                      straight_candidates(points[i], points[j]));
        d[i][j] = curve_length(mi_, c);
      }
    }
  });
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) d[j][i] = d[i][j];
  // Triangle closure.
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  return d;
}

Curve geodesic(const MetricField& metric, const Vec4& x, const Vec4& y) { return GeodesicSolver(metric).geodesic(x, y); }

double distance(const MetricField& metric, const Vec4& x, const Vec4& y) { return GeodesicSolver(metric).distance(x, y); }

std::vector<std::vector<double>> all_pairs_distances(const MetricField& metric, const std::vector<Vec4>& points) {
  return GeodesicSolver(metric).all_pairs(points);
}

double diameter(const MetricField& metric, const std::vector<Vec4>& points) {
  double m = 0.0;
  for (const auto& row : all_pairs_distances(metric, points))
    for (double v : row) m = std::max(m, v);
  return m;
}

std::vector<Vec4> sample_points(const TorusGrid& grid, int count, std::uint64_t seed) {
  static constexpr int kBases[4] = {2, 3, 5, 7};
  Rng rng(seed);
  Vec4 shift;
  for (int a = 0; a < 4; ++a) shift[a] = rng.uniform();
  std::vector<Vec4> pts(count);
  for (int i = 0; i < count; ++i)
    for (int a = 0; a < 4; ++a) {
      double f = 1.0, r = 0.0;
      for (int k = i + 1; k > 0; k /= kBases[a]) {
        f /= kBases[a];
        r += f * (k % kBases[a]);
      }
      const double u = r + shift[a];
      pts[i][a] = (u - std::floor(u)) * grid.period(a);
    }
  return pts;
}

Vec4 exp_map(const MetricInterpolator& mi, const Vec4& p, const Vec4& w) {
  const double h = mi.grid().min_spacing();
  int steps = std::max(4, static_cast<int>(std::ceil(2.0 * inf_norm(w) / h)));
  for (int attempt = 0; attempt < 5; ++attempt, steps *= 2) {
    try {
      Vec4 x = p, v = w;
      const double du = 1.0 / steps;
      for (int s = 0; s < steps; ++s) {
        const Vec4 k1x = v, k1v = mi.geodesic_acceleration(x, v);
        const Vec4 x2 = add(x, k1x, 0.5 * du), v2 = add(v, k1v, 0.5 * du);
        const Vec4 k2x = v2, k2v = mi.geodesic_acceleration(x2, v2);
        const Vec4 x3 = add(x, k2x, 0.5 * du), v3 = add(v, k2v, 0.5 * du);
        const Vec4 k3x = v3, k3v = mi.geodesic_acceleration(x3, v3);
        const Vec4 x4 = add(x, k3x, du), v4 = add(v, k3v, du);
        const Vec4 k4x = v4, k4v = mi.geodesic_acceleration(x4, v4);
        for (int a = 0; a < 4; ++a) {
          x[a] += du / 6.0 * (k1x[a] + 2.0 * k2x[a] + 2.0 * k3x[a] + k4x[a]);
          v[a] += du / 6.0 * (k1v[a] + 2.0 * k2v[a] + 2.0 * k3v[a] + k4v[a]);
        }
      }
      bool finite = true;
      for (int a = 0; a < 4; ++a) finite = finite && std::isfinite(x[a]);
      if (finite) return x;
    } catch (const Error&) {
    }
  }
  throw Error(ErrorKind::Numerical, "exponential map integration failed");
}

Mat4 orthonormal_frame(const Mat4& g) {
  Mat4 l;
  if (!cholesky4(g, l)) throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite");
  return transpose4(lower_inverse4(l));
}

namespace {

// 48 points: the vertices of two dual 24-cells. Equal weights integrate degree <= 5 exactly.
const std::vector<Vec4>& sphere3_directions() {
  static const std::vector<Vec4> dirs = [] {
    std::vector<Vec4> d;
    const double s = 1.0 / std::sqrt(2.0);
    for (int a = 0; a < 4; ++a)
      for (int b = a + 1; b < 4; ++b)
        for (int sa : {-1, 1})
          for (int sb : {-1, 1}) {
            Vec4 v{};
            v[a] = sa * s;
            v[b] = sb * s;
            d.push_back(v);
          }
    for (int a = 0; a < 4; ++a)
      for (int sa : {-1, 1}) {
        Vec4 v{};
        v[a] = sa;
        d.push_back(v);
      }
    for (int m = 0; m < 16; ++m)
      d.push_back({m & 1 ? 0.5 : -0.5, m & 2 ? 0.5 : -0.5, m & 4 ? 0.5 : -0.5, m & 8 ? 0.5 : -0.5});
    return d;
  }();
  return dirs;
}

constexpr double kGaussNodes[4] = {-0.8611363115940526, -0.3399810435848563, 0.3399810435848563, 0.8611363115940526};
constexpr double kGaussWeights[4] = {0.3478548451374538, 0.6521451548625461, 0.6521451548625461, 0.3478548451374538};

// sqrt det(J^T g J), J the Jacobian of w' -> exp_p(E w') by forward differences.
double chart_density(const MetricInterpolator& mi, const Vec4& p, const Mat4& frame, const Vec4& wp, double eta) {
  const Vec4 q = exp_map(mi, p, matvec(frame, wp));
  Mat4 J;
  for (int b = 0; b < 4; ++b) {
    Vec4 w2 = wp;
    w2[b] += eta;
    const Vec4 qb = exp_map(mi, p, matvec(frame, w2));
    for (int i = 0; i < 4; ++i) J[i][b] = (qb[i] - q[i]) / eta;
  }
  const Mat4 pull = matmul4(transpose4(J), matmul4(mi.g(q), J));
  Mat4 inv;
  double sd;
  if (!spd_inverse4(pull, inv, sd)) return 0.0;
  return sd;
}

}  // namespace

double ball_volume(const MetricInterpolator& mi, const Vec4& center, double r) {
  if (r <= 0.0) return 0.0;
  const Mat4 frame = orthonormal_frame(mi.g(center));
  const auto& dirs = sphere3_directions();
  const double sphere_area = 2.0 * std::numbers::pi * std::numbers::pi;
  const double eta = 1e-6 * r;
  double vol = 0.0;
  for (int k = 0; k < 4; ++k) {
    const double rho = 0.5 * r * (1.0 + kGaussNodes[k]);
    const double wr = 0.5 * r * kGaussWeights[k] * rho * rho * rho;
    double shell = 0.0;
    for (const Vec4& u : dirs) shell += chart_density(mi, center, frame, {rho * u[0], rho * u[1], rho * u[2], rho * u[3]}, eta);
    vol += wr * sphere_area * shell / static_cast<double>(dirs.size());
  }
  return vol;
}

double ball_volume(const MetricField& metric, const Vec4& center, double r) {
  return ball_volume(MetricInterpolator(metric), center, r);
}

double noncollapsing_check(const MetricField& metric, double delta, const std::vector<Vec4>& centers,
                           const std::vector<double>& radii) {
  const MetricInterpolator mi(metric);
  const double omega4 = 0.5 * std::numbers::pi * std::numbers::pi;
  std::vector<double> margins(centers.size(), kInf);
  parallel_for(centers.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i)
      for (double r : radii)
        margins[i] = std::min(margins[i], ball_volume(mi, centers[i], r) / (delta * omega4 * r * r * r * r) - 1.0);
  });
  double m = kInf;
  for (double v : margins) m = std::min(m, v);
  return m;
}

InjEstimate inj_estimate(const MetricField& metric) {
  const TorusGrid& grid = metric.grid();
  const GeodesicSolver solver(metric);
  InjEstimate est;
  double shortest = kInf;
  for (int a = 0; a < 4; ++a) {
    Vec4 winding{};
    winding[a] = grid.period(a);
    double best = kInf;
    // Starts on the 2x2x2 lattice of transverse half-period offsets.
    for (int m = 0; m < 8; ++m) {
      Vec4 start{};
      int bit = 0;
      for (int b = 0; b < 4; ++b) {
        if (b == a) continue;
        start[b] = (m >> bit++) & 1 ? 0.5 * grid.period(b) : 0.0;
      }
      best = std::min(best, curve_length(solver.interpolator(), solver.closed_geodesic(start, winding)));
    }
    est.axis_loops[a] = best;
    shortest = std::min(shortest, best);
  }
  est.value = 0.5 * shortest;

  const CurvatureBundle cb = build_curvature(metric, 0);
  double sup_rm = 0.0, lmax = 0.0;
  for (std::size_t p = 0; p < metric.points(); ++p) {
    sup_rm = std::max(sup_rm, std::sqrt(std::max(0.0, cb.rm_norm_sq(p, 0))));
    double lo, hi;
    sym_eig_range4(metric.matrix(p), lo, hi);
    lmax = std::max(lmax, hi);
  }
  double period_sq = 0.0;
  for (int a = 0; a < 4; ++a) period_sq += grid.period(a) * grid.period(a);
  const double diam = 0.5 * std::sqrt(period_sq * lmax);
  est.curvature_product = sup_rm * diam * diam;
  est.low_confidence = est.curvature_product > InjEstimate::kThreshold;
  return est;
}

namespace {

using Gamma3 = std::array<Mat4, 4>;  // Gamma[c](a, b)

// Smallest C with |Gamma(u, v)| <= C |u| |v| for an orthonormal-frame Christoffel tensor:
// max over unit z of the spectral norm of sum_c z_c Gamma[c], by alternating maximisation.
double bilinear_norm(const Gamma3& gm) {
  double best = 0.0;
  Rng rng(12345);
  for (int start = 0; start < 8; ++start) {
    Vec4e z;
    if (start < 4) {
      z.setZero();
      z(start) = 1.0;
    } else {
      for (int c = 0; c < 4; ++c) z(c) = rng.normal();
      z.normalize();
    }
    double value = 0.0;
    for (int it = 0; it < 50; ++it) {
      Mat4e m = Mat4e::Zero();
      for (int c = 0; c < 4; ++c) m += z(c) * to_eigen(gm[c]);
      Eigen::SelfAdjointEigenSolver<Mat4e> es(m);
      const int top = std::abs(es.eigenvalues()(0)) > std::abs(es.eigenvalues()(3)) ? 0 : 3;
      const Vec4e u = es.eigenvectors().col(top);
      Vec4e gz;
      for (int c = 0; c < 4; ++c) gz(c) = u.dot(to_eigen(gm[c]) * u);
      const double nv = gz.norm();
      if (nv <= value * (1.0 + 1e-13) || nv == 0.0) {
        value = std::max(value, nv);
        break;
      }
      value = nv;
      z = gz / nv;
    }
    best = std::max(best, value);
  }
  return best;
}

// Christoffels of the normal chart at w, in a frame orthonormal for the chart metric.
double normal_chart_gamma(const MetricInterpolator& mi, const Vec4& p, const Mat4& frame, const Vec4& w, double eta) {
  auto x_of = [&](const Vec4& wp) { return exp_map(mi, p, matvec(frame, wp)); };
  const Vec4 x0 = x_of(w);
  std::array<Vec4, 4> xp, xm;
  for (int a = 0; a < 4; ++a) {
    Vec4 wa = w;
    wa[a] += eta;
    xp[a] = x_of(wa);
    wa[a] = w[a] - eta;
    xm[a] = x_of(wa);
  }
  Mat4 J;
  std::array<Mat4, 4> H;  // H[i](a, b)
  for (int i = 0; i < 4; ++i)
    for (int a = 0; a < 4; ++a) {
      J[i][a] = (xp[a][i] - xm[a][i]) / (2.0 * eta);
      H[i][a][a] = (xp[a][i] - 2.0 * x0[i] + xm[a][i]) / (eta * eta);
    }
  for (int a = 0; a < 4; ++a)
    for (int b = a + 1; b < 4; ++b) {
      Vec4 w1 = w, w2 = w, w3 = w, w4 = w;
      w1[a] += eta, w1[b] += eta;
      w2[a] += eta, w2[b] -= eta;
      w3[a] -= eta, w3[b] += eta;
      w4[a] -= eta, w4[b] -= eta;
      const Vec4 q1 = x_of(w1), q2 = x_of(w2), q3 = x_of(w3), q4 = x_of(w4);
      for (int i = 0; i < 4; ++i) H[i][a][b] = H[i][b][a] = (q1[i] - q2[i] - q3[i] + q4[i]) / (4.0 * eta * eta);
    }
  const MetricSample s = checked_sample(mi, x0);
  const Mat4e Je = to_eigen(J);
  const Mat4e Jinv = Je.inverse();
  // Chart Christoffels Gamma~^c_ab = Jinv^c_i (H^i_ab + Gamma^i_jk J^j_a J^k_b).
  std::array<Mat4e, 4> gt;
  for (int c = 0; c < 4; ++c) gt[c].setZero();
  for (int i = 0; i < 4; ++i) {
    Mat4e t = to_eigen(H[i]) + Je.transpose() * to_eigen(s.gamma2[i]) * Je;
    for (int c = 0; c < 4; ++c) gt[c] += Jinv(c, i) * t;
  }
  // Orthonormalise with the chart metric J^T g J = L L^T.
  const Mat4e gchart = Je.transpose() * to_eigen(s.g) * Je;
  const Eigen::LLT<Mat4e> llt(gchart);
  if (llt.info() != Eigen::Success) throw Error(ErrorKind::NotPositiveDefinite, "normal chart metric degenerate");
  const Mat4e L = llt.matrixL();
  const Mat4e Lit = L.transpose().inverse();
  Gamma3 b;
  for (int c2 = 0; c2 < 4; ++c2) {
    Mat4e m = Mat4e::Zero();
    for (int c = 0; c < 4; ++c) m += L(c, c2) * gt[c];
    m = Lit.transpose() * m * Lit;
    for (int a = 0; a < 4; ++a)
      for (int bb = 0; bb < 4; ++bb) b[c2][a][bb] = 0.5 * (m(a, bb) + m(bb, a));
  }
  return bilinear_norm(b);
}

}  // namespace

GammaNorm gamma_norm(const MetricField& metric, const Vec4& p, double probe_radius, double fd_step) {
  const MetricInterpolator mi(metric);
  const double eta = fd_step > 0.0 ? fd_step : 1e-3 * std::max(probe_radius, metric.grid().min_spacing());
  GammaNorm out;
  try {
    const Mat4 frame = orthonormal_frame(mi.g(p));
    out.center = normal_chart_gamma(mi, p, frame, Vec4{}, eta);
    if (probe_radius > 0.0) {
      const auto& dirs = sphere3_directions();
      for (std::size_t k = 24; k < dirs.size(); ++k) {
        const Vec4 w{probe_radius * dirs[k][0], probe_radius * dirs[k][1], probe_radius * dirs[k][2], probe_radius * dirs[k][3]};
        out.max_probe = std::max(out.max_probe, normal_chart_gamma(mi, p, frame, w, eta));
      }
    }
  } catch (const Error& e) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "normal chart at (%.6g, %.6g, %.6g, %.6g) failed: ", p[0], p[1], p[2], p[3]);
    throw Error(ErrorKind::Numerical, buf + std::string(e.what()));
  }
  return out;
}

}  // namespace l2flow
