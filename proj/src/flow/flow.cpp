#include "l2flow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "l2flow/calibration.hpp"
#include "l2flow/curvature.hpp"
#include "l2flow/field_io.hpp"
#include "l2flow/linalg4.hpp"
#include "l2flow/parallel.hpp"
#include "l2flow/pointwise.hpp"
#include "l2flow/stencil.hpp"

namespace l2flow {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

MetricField axpy(const MetricField& g, double a, const SymTensorField& x) {
  MetricField out = g;
  auto& d = out.data();
  const auto& xd = x.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += a * xd[i];
  return out;
}

bool energy_increased(double f_new, double f_old, double tol) {
  return f_new > f_old + tol * std::max(f_old, 1e-300);
}

void fill_monitors(HistoryRecord& r, const MetricField& metric, int order) {
  for (double& v : r.sup_drm) v = kNaN;
  if (order <= 0) return;
  const CurvatureBundle cb = build_curvature(metric, order);
  for (int m = 1; m <= order; ++m) r.sup_drm[m - 1] = sup_norm(cb.nabla_norm[m]);
}

}  // namespace

FlowState make_state(const MetricField& metric, double t) {
  FlowEvaluation ev = evaluate_for_flow(metric);
  FlowState s;
  s.t = t;
  s.metric = metric;
  s.energy = ev.energy;
  s.grad_l2_sq = ev.grad_l2_sq;
  s.sup_rm = ev.sup_rm;
  s.grad = std::move(ev.gradient.grad);
  return s;
}

double min_metric_eigenvalue(const MetricField& metric) {
  const std::size_t n = metric.points();
  const int workers = std::max(1, thread_count());
  std::vector<double> lows(static_cast<std::size_t>(workers), std::numeric_limits<double>::infinity());
  const std::size_t chunk = (n + workers - 1) / workers;
  // One slot per chunk so the reduction order is fixed.
  parallel_for(static_cast<std::size_t>(workers), [&](std::size_t wb, std::size_t we) {
    for (std::size_t w = wb; w < we; ++w) {
      const std::size_t b = w * chunk, e = std::min(n, b + chunk);
      for (std::size_t p = b; p < e; ++p) {
        double lo, hi;
        sym_eig_range4(metric.matrix(p), lo, hi);
        lows[w] = std::min(lows[w], lo);
      }
    }
  });
  return *std::min_element(lows.begin(), lows.end());
}

double dt_stable(const FlowState& state, const FlowOptions& opts) {
  const double kappa = opts.stiffness > 0.0 ? opts.stiffness : kFlowStiffness;
  const double h = state.metric.grid().min_spacing();
  const double len2 = h * h * min_metric_eigenvalue(state.metric);
  return opts.dt_safety * len2 * len2 / (kappa * (1.0 + state.sup_rm * len2 * opts.curvature_scale));
}

double measure_stiffness(const TorusGrid& grid, int iterations, std::uint64_t seed) {
  const MetricField flat = flat_metric(grid);
  Rng rng(seed);
  SymTensorField v(grid);
  for (double& x : v.data()) x = rng.normal();
  const double eps = 1e-4;
  auto normalise = [&](SymTensorField& f) {
    const double n = std::sqrt(l2_inner(f, f, flat));
    for (double& x : f.data()) x /= n;
  };
  normalise(v);
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    const SymTensorField gp = grad_F_discrete(axpy(flat, eps, v)).grad;
    const SymTensorField gm = grad_F_discrete(axpy(flat, -eps, v)).grad;
    SymTensorField jv(grid);
    for (std::size_t i = 0; i < jv.data().size(); ++i) jv.data()[i] = (gp.data()[i] - gm.data()[i]) / (2.0 * eps);
    lambda = l2_inner(v, jv, flat);
    v = std::move(jv);
    normalise(v);
  }
  const double h = grid.min_spacing();
  return lambda * h * h * h * h;
}

StepOutcome step(const FlowState& state, double dt, const FlowOptions& opts) {
  if (!(dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "step: dt must be positive");
  StepOutcome out;
  for (int attempt = 0; attempt <= opts.max_retries; ++attempt) {
    MetricField next;
    if (opts.integrator == Integrator::Euler) {
      next = axpy(state.metric, -dt, state.grad);
    } else {
      const MetricField half = axpy(state.metric, -0.5 * dt, state.grad);
      half.validate();
      next = axpy(state.metric, -dt, grad_F_discrete(half).grad);
    }
    try {
      next.validate();
    } catch (const Error& e) {
      throw Error(ErrorKind::Numerical, std::string("flow step at t=") + std::to_string(state.t) + ": " + e.what());
    }
    FlowState s = make_state(next, state.t + dt);
    if (!energy_increased(s.energy.F, state.energy.F, opts.energy_tolerance)) {
      out.state = std::move(s);
      out.dt_used = dt;
      out.retries = attempt;
      return out;
    }
    dt *= 0.5;
  }
  throw Error(ErrorKind::Numerical, "flow step at t=" + std::to_string(state.t) + ": energy still increasing after " +
                                        std::to_string(opts.max_retries) + " step halvings");
}

SampleSchedule SampleSchedule::uniform(int intervals, double t_final) {
  if (intervals < 1 || !(t_final > 0.0)) throw Error(ErrorKind::InvalidArgument, "uniform schedule needs intervals >= 1 and t_final > 0");
  SampleSchedule s;
  for (int i = 0; i <= intervals; ++i) s.times.push_back(i == intervals ? t_final : t_final * i / intervals);
  return s;
}

SampleSchedule SampleSchedule::geometric(int count, double t_final, double first_fraction) {
  if (count < 1 || !(t_final > 0.0) || !(first_fraction > 0.0 && first_fraction <= 1.0))
    throw Error(ErrorKind::InvalidArgument, "geometric schedule needs count >= 1, t_final > 0, 0 < first_fraction <= 1");
  SampleSchedule s;
  s.times.push_back(0.0);
  for (int i = 0; i < count; ++i) {
    const double f = count == 1 ? 1.0 : std::pow(first_fraction, 1.0 - static_cast<double>(i) / (count - 1));
    s.times.push_back(i == count - 1 ? t_final : t_final * f);
  }
  return s;
}

double FlowTrace::sample_time(std::size_t k) const { return map_time(data_->samples.at(source_sample(k)).t); }

const MetricField& FlowTrace::sample_metric(std::size_t k) const { return data_->samples.at(source_sample(k)).metric; }

SymTensorField FlowTrace::sample_velocity(std::size_t k) const {
  SymTensorField v = data_->samples.at(source_sample(k)).grad;
  // Forward flow moves along -grad; the reversed view runs the same path backwards.
  if (!reversed_)
    for (double& x : v.data()) x = -x;
  return v;
}

double FlowTrace::sample_grad_l2_sq(std::size_t k) const { return data_->samples.at(source_sample(k)).grad_l2_sq; }

HistoryRecord FlowTrace::record(std::size_t k) const {
  const std::size_t n = data_->history.size();
  HistoryRecord r = data_->history.at(reversed_ ? n - 1 - k : k);
  r.t = map_time(r.t);
  return r;
}

MetricField FlowTrace::metric_at(double t) const {
  const std::size_t n = sample_count();
  if (n == 1) return sample_metric(0);
  std::size_t k = 0;
  while (k + 2 < n && sample_time(k + 1) <= t) ++k;
  const double t0 = sample_time(k), t1 = sample_time(k + 1);
  const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
  if (w == 0.0) return sample_metric(k);
  if (w == 1.0) return sample_metric(k + 1);
  MetricField out = sample_metric(k);
  const auto& b = sample_metric(k + 1).data();
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = (1.0 - w) * out.data()[i] + w * b[i];
  return out;
}

SymTensorField FlowTrace::velocity_at(double t) const {
  const std::size_t n = sample_count();
  if (n == 1) return sample_velocity(0);
  std::size_t k = 0;
  while (k + 2 < n && sample_time(k + 1) <= t) ++k;
  const double t0 = sample_time(k), t1 = sample_time(k + 1);
  const double w = std::clamp((t - t0) / (t1 - t0), 0.0, 1.0);
  SymTensorField out = sample_velocity(k);
  const SymTensorField b = sample_velocity(k + 1);
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] = (1.0 - w) * out.data()[i] + w * b.data()[i];
  return out;
}

FlowTrace FlowTrace::time_reversed_view() const {
  FlowTrace r = *this;
  r.reversed_ = !reversed_;
  return r;
}

FlowTrace run(const MetricField& initial, double t_final, const SampleSchedule& schedule, const FlowOptions& opts) {
  if (!(t_final > 0.0)) throw Error(ErrorKind::InvalidArgument, "run: t_final must be positive");
  if (opts.monitor_order < 0 || opts.monitor_order > 3) throw Error(ErrorKind::InvalidArgument, "run: monitor_order must be in 0..3");
  initial.validate();

  std::vector<double> targets;
  for (double t : schedule.times)
    if (t > 0.0 && t < t_final) targets.push_back(t);
  targets.push_back(t_final);
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());

  auto data = std::make_shared<FlowTrace::Data>();
  data->t_begin = 0.0;
  const int stride = std::max(1, opts.monitor_stride);

  FlowState state = make_state(initial, 0.0);
  auto record = [&](long n, double dt, bool monitor) {
    HistoryRecord r;
    r.step = n;
    r.t = state.t;
    r.dt = dt;
    r.F = state.energy.F;
    r.G = state.energy.G;
    r.vol = state.energy.volume;
    r.sup_rm = state.sup_rm;
    r.grad_l2_sq = state.grad_l2_sq;
    if (monitor)
      fill_monitors(r, state.metric, opts.monitor_order);
    else
      for (double& v : r.sup_drm) v = kNaN;
    data->history.push_back(r);
  };
  auto sample = [&]() { data->samples.push_back({state.t, state.metric, state.grad, state.grad_l2_sq}); };

  record(0, 0.0, true);
  sample();

  long n = 0;
  std::size_t next = 0;
  try {
    while (next < targets.size()) {
      const double target = targets[next];
      double dt = std::min(dt_stable(state, opts), opts.dt_max);
      bool lands = false;
      if (state.t + dt >= target * (1.0 - 1e-12)) {
        dt = target - state.t;
        lands = true;
      }
      StepOutcome o = step(state, dt, opts);
      // A halved step no longer reaches the target.
      if (o.dt_used != dt) lands = false;
      state = std::move(o.state);
      if (lands) state.t = target;
      ++n;
      record(n, o.dt_used, lands || n % stride == 0);
      if (lands) {
        sample();
        ++next;
      }
    }
    data->completed = true;
    data->termination = "completed";
  } catch (const Error& e) {
    data->completed = false;
    data->termination = e.what();
    // Keep the last stable state as a sample so the trace stays usable.
    if (data->samples.back().t != state.t) sample();
  }
  data->t_end = data->samples.back().t;

  FlowTrace trace(std::move(data));
  trace.bounds.lambda = trace.record(0).F;
  trace.bounds.K = decay_monitors(trace).K;
  return trace;
}

double energy_identity_residual(const FlowTrace& trace) {
  const std::size_t n = trace.record_count();
  if (n < 3) throw Error(ErrorKind::InvalidArgument, "energy identity needs at least 3 records");
  // Work in forward time regardless of the view.
  const FlowTrace fwd = trace.reversed() ? trace.time_reversed_view() : trace;
  const HistoryRecord r0 = fwd.record(0);
  double integral = 0.0, worst = 0.0;
  HistoryRecord prev = r0;
  for (std::size_t k = 1; k < n; ++k) {
    const HistoryRecord r = fwd.record(k);
    integral += 0.5 * (r.t - prev.t) * (r.grad_l2_sq + prev.grad_l2_sq);
    const double drop = r0.F - r.F;
    const double denom = std::max(drop, 1e-300);
    worst = std::max(worst, std::abs(drop - integral) / denom);
    prev = r;
  }
  return worst;
}

DecayFit decay_monitors(const FlowTrace& trace) {
  DecayFit fit;
  for (std::size_t k = 0; k < trace.record_count(); ++k) {
    const HistoryRecord r = trace.record(k);
    const double t = trace.reversed() ? trace.t_begin() + trace.t_end() - r.t : r.t;
    if (!(t > 0.0)) continue;
    fit.K = std::max(fit.K, r.sup_rm * std::sqrt(t));
    for (int m = 1; m <= 3; ++m) {
      const double v = r.sup_drm[m - 1];
      if (std::isnan(v)) continue;
      fit.C[m - 1] = std::max(fit.C[m - 1], v * std::pow(t, (2.0 + m) / 4.0));
      ++fit.monitored_records[m - 1];
    }
  }
  return fit;
}

VolumeSetCheck open_set_volume_check(const FlowTrace& trace, const std::vector<std::size_t>& region) {
  if (region.empty()) throw Error(ErrorKind::InvalidArgument, "open_set_volume_check: region is empty");
  const FlowTrace fwd = trace.reversed() ? trace.time_reversed_view() : trace;
  const double cv = fwd.grid().cell_volume();
  auto region_integrals = [&](std::size_t k, double& vol, double& grad_sq) {
    const MetricField& g = fwd.sample_metric(k);
    const SymTensorField v = fwd.sample_velocity(k);
    vol = 0.0;
    grad_sq = 0.0;
    for (std::size_t p : region) {
      Mat4 gi;
      double sq;
      if (!spd_inverse4(g.matrix(p), gi, sq)) throw Error(ErrorKind::NotPositiveDefinite, "open_set_volume_check: metric not positive definite");
      const Mat4 a = v.matrix(p);
      const Mat4 ag = matmul4(matmul4(gi, a), gi);
      vol += sq;
      grad_sq += frob4(ag, a) * sq;
    }
    vol *= cv;
    grad_sq *= cv;
  };
  VolumeSetCheck out;
  double vol0, gs_prev;
  region_integrals(0, vol0, gs_prev);
  double integral = 0.0, t_prev = fwd.sample_time(0);
  for (std::size_t k = 1; k < fwd.sample_count(); ++k) {
    double vol, gs;
    region_integrals(k, vol, gs);
    const double t = fwd.sample_time(k);
    integral += 0.5 * (t - t_prev) * (gs + gs_prev);
    out.max_relative_drift = std::max(out.max_relative_drift, std::abs(vol - vol0) / vol0);
    const double deficit = std::sqrt(vol0) - std::sqrt(vol);
    if (deficit > 0.0) {
      const double scale = std::sqrt(t) * std::sqrt(integral);
      const double c = scale > 0.0 ? deficit / scale : std::numeric_limits<double>::infinity();
      if (c > out.c_emp) {
        out.c_emp = c;
        out.worst_t = t;
      }
    }
    gs_prev = gs;
    t_prev = t;
  }
  return out;
}

VelocityNorms velocity_norms(const MetricField& g, const SymTensorField& h) {
  std::vector<VelocityNorms> part(g.points());
  parallel_for(g.points(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      PointGeometry geo;
      if (!point_geometry(metric_jet(g, p), geo)) throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite");
      const Mat4 hm = h.matrix(p);
      std::array<Mat4, 4> dh;
      for (int a = 0; a < 4; ++a) {
        double d[kSymComponents];
        d1_point(h, p, a, d);
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) dh[a][i][j] = d[SymIndex::of[i][j]];
      }
      // nabla_k h_ij = d_k h_ij - Gamma^m_ki h_mj - Gamma^m_kj h_im, then raise all indices.
      std::array<Mat4, 4> nh;
      for (int k = 0; k < 4; ++k)
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) {
            double v = dh[k][i][j];
            for (int m = 0; m < 4; ++m) v -= geo.gamma2[m][k][i] * hm[m][j] + geo.gamma2[m][k][j] * hm[i][m];
            nh[k][i][j] = v;
          }
      const Mat4& gi = geo.ginv;
      const Mat4 hu = matmul4(matmul4(gi, hm), gi);
      part[p].sup = std::sqrt(std::max(0.0, frob4(hu, hm)));
      double sq = 0.0;
      for (int k = 0; k < 4; ++k)
        for (int a = 0; a < 4; ++a) {
          if (gi[k][a] == 0.0) continue;
          sq += gi[k][a] * frob4(matmul4(matmul4(gi, nh[k]), gi), nh[a]);
        }
      part[p].sup_grad = std::sqrt(std::max(0.0, sq));
    }
  });
  VelocityNorms out;
  for (const auto& v : part) {
    out.sup = std::max(out.sup, v.sup);
    out.sup_grad = std::max(out.sup_grad, v.sup_grad);
  }
  return out;
}

void write_history_csv(const FlowTrace& trace, const std::string& path) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path);
  os << "step,t,dt,F,G,vol,sup_rm,sup_d1rm,sup_d2rm,sup_d3rm,grad_l2_sq\n";
  char buf[512];
  for (std::size_t k = 0; k < trace.record_count(); ++k) {
    const HistoryRecord r = trace.record(k);
    std::snprintf(buf, sizeof buf, "%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.step, r.t, r.dt, r.F, r.G,
                  r.vol, r.sup_rm, r.sup_drm[0], r.sup_drm[1], r.sup_drm[2], r.grad_l2_sq);
    os << buf;
  }
  if (!os) throw Error(ErrorKind::Io, "write failed: " + path);
}

void write_snapshots(const FlowTrace& trace, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (std::size_t k = 0; k < trace.sample_count(); ++k) {
    char name[64];
    std::snprintf(name, sizeof name, "metric_%03zu.bin", k);
    write_field_binary(trace.sample_metric(k), (std::filesystem::path(dir) / name).string());
  }
}

}  // namespace l2flow
