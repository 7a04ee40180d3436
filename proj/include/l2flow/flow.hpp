#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "l2flow/functionals.hpp"
#include "l2flow/metric.hpp"

namespace l2flow {

enum class Integrator { Euler, Midpoint };

struct FlowOptions {
  double dt_safety = 0.5;  // Euler is stable up to 2 in these units
  Integrator integrator = Integrator::Euler;
  // lambda_max h^4 of the linearised flow operator at the flat metric; see measure_stiffness.
  double stiffness = 0.0;  // 0 selects the frozen default
  double curvature_scale = 1.0;
  double dt_max = std::numeric_limits<double>::infinity();
  int max_retries = 10;
  double energy_tolerance = 1e-12;  // relative slack before a step counts as an increase
  int monitor_order = 3;            // highest m recorded for sup |D^m Rm|
  int monitor_stride = 1;           // derivative monitors every this many steps (and at samples)
};

struct FlowState {
  double t = 0.0;
  MetricField metric;
  EnergyReport energy;
  double grad_l2_sq = 0.0;
  double sup_rm = 0.0;
  SymTensorField grad;  // grad F at this state
};

/// Evaluates energy, gradient and sup |Rm| of a metric at time t.
FlowState make_state(const MetricField& metric, double t);

/// Smallest eigenvalue of g over the grid.
double min_metric_eigenvalue(const MetricField& metric);

/// safety (h^2 lmin)^2 / (kappa (1 + sup|Rm| h^2 lmin scale)), with h the smallest grid
/// spacing and lmin the smallest metric eigenvalue. Scales like c^2 under g -> c g.
double dt_stable(const FlowState& state, const FlowOptions& opts);

/// lambda_max h^4 for the Hessian of the discrete F at the flat metric on `grid`, by power
/// iteration on central differences of the gradient.
double measure_stiffness(const TorusGrid& grid, int iterations, std::uint64_t seed);

struct StepOutcome {
  FlowState state;
  double dt_used = 0.0;
  int retries = 0;
};

/// One accepted step of dg/dt = -grad F. Halves dt while F increases (up to
/// opts.max_retries). Throws Error(Numerical) when positivity is lost or retries run out.
StepOutcome step(const FlowState& state, double dt, const FlowOptions& opts);

struct HistoryRecord {
  long step = 0;
  double t = 0.0;
  double dt = 0.0;  // step that produced this record; 0 for the initial one
  double F = 0.0;
  double G = 0.0;
  double vol = 0.0;
  double sup_rm = 0.0;
  double sup_drm[3] = {0.0, 0.0, 0.0};  // NaN when not monitored at this record
  double grad_l2_sq = 0.0;
};

struct SampledState {
  double t = 0.0;
  MetricField metric;
  SymTensorField grad;
  double grad_l2_sq = 0.0;
};

/// Target sample times, always including 0 and t_final.
struct SampleSchedule {
  std::vector<double> times;
  static SampleSchedule uniform(int intervals, double t_final);
  /// 0, then `count` times geometrically spaced from first_fraction * t_final to t_final.
  static SampleSchedule geometric(int count, double t_final, double first_fraction);
};

/// Proxies for the constants in the curvature, injectivity and diameter hypotheses.
/// Lambda and K come from the flow; iota and D are filled in by geometry checks.
struct FlowBounds {
  double lambda = std::numeric_limits<double>::quiet_NaN();
  double K = std::numeric_limits<double>::quiet_NaN();
  double iota = std::numeric_limits<double>::quiet_NaN();
  double D = std::numeric_limits<double>::quiet_NaN();
};

/// Sampled states and per-step history. Data is shared and immutable; a reversed view
/// maps t to t_begin + t_end - t on access and flips the velocity sign, so reversing twice
/// gives back the original values bit for bit.
class FlowTrace {
public:
  struct Data {
    std::vector<SampledState> samples;
    std::vector<HistoryRecord> history;
    double t_begin = 0.0;
    double t_end = 0.0;
    bool completed = false;
    std::string termination;
  };

  FlowTrace() = default;
  explicit FlowTrace(std::shared_ptr<const Data> data) : data_(std::move(data)) {}

  bool reversed() const noexcept { return reversed_; }
  bool completed() const noexcept { return data_->completed; }
  const std::string& termination() const noexcept { return data_->termination; }
  double t_begin() const noexcept { return data_->t_begin; }
  double t_end() const noexcept { return data_->t_end; }
  const TorusGrid& grid() const { return data_->samples.front().metric.grid(); }

  std::size_t sample_count() const noexcept { return data_->samples.size(); }
  double sample_time(std::size_t k) const;
  const MetricField& sample_metric(std::size_t k) const;
  /// d g/dt in this view's time orientation.
  SymTensorField sample_velocity(std::size_t k) const;
  double sample_grad_l2_sq(std::size_t k) const;

  std::size_t record_count() const noexcept { return data_->history.size(); }
  HistoryRecord record(std::size_t k) const;

  /// Linear interpolation between the bracketing samples.
  MetricField metric_at(double t) const;
  SymTensorField velocity_at(double t) const;

  FlowTrace time_reversed_view() const;

  FlowBounds bounds;

private:
  std::size_t source_sample(std::size_t k) const { return reversed_ ? data_->samples.size() - 1 - k : k; }
  double map_time(double t) const { return reversed_ ? (data_->t_begin + data_->t_end) - t : t; }
  std::shared_ptr<const Data> data_;
  bool reversed_ = false;
};

/// Integrates from t = 0 to t_final. Steps are shortened to land on schedule times. A
/// positivity loss or exhausted retry budget ends the run early with completed() false.
FlowTrace run(const MetricField& initial, double t_final, const SampleSchedule& schedule, const FlowOptions& opts);

/// max over records of |F(0) - F(t) - int_0^t |grad F|^2| / max(F(0) - F(t), eps), trapezoid in t.
double energy_identity_residual(const FlowTrace& trace);

struct DecayFit {
  double K = 0.0;                   // max sup|Rm| t^(1/2)
  double C[3] = {0.0, 0.0, 0.0};    // max sup|D^m Rm| t^((2+m)/4)
  int monitored_records[3] = {0, 0, 0};
};
DecayFit decay_monitors(const FlowTrace& trace);

struct VolumeSetCheck {
  double c_emp = 0.0;        // smallest C with Vol_t(U)^(1/2) >= Vol_0(U)^(1/2) - C t^(1/2) I_t^(1/2)
  double max_relative_drift = 0.0;
  double worst_t = 0.0;
};
/// U given as grid point indices; I_t = int_0^t int_U |grad F|^2 from the samples.
VolumeSetCheck open_set_volume_check(const FlowTrace& trace, const std::vector<std::size_t>& region);

struct VelocityNorms {
  double sup = 0.0;       // sup |h|_g
  double sup_grad = 0.0;  // sup |nabla h|_g
};
/// Pointwise norms of a symmetric 2-tensor h (a metric velocity) measured with g.
VelocityNorms velocity_norms(const MetricField& g, const SymTensorField& h);

/// "step,t,dt,F,G,vol,sup_rm,sup_d1rm,sup_d2rm,sup_d3rm,grad_l2_sq", full precision.
void write_history_csv(const FlowTrace& trace, const std::string& path);
/// metric_<k>.bin for every sample, in the field binary layout.
void write_snapshots(const FlowTrace& trace, const std::string& dir);

}  // namespace l2flow
