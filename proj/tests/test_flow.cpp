#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "l2flow/calibration.hpp"
#include "l2flow/curvature.hpp"
#include "l2flow/flow.hpp"

using namespace l2flow;

namespace {

double max_abs_diff(const Field& a, const Field& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data().size(); ++i) m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
  return m;
}

FlowOptions fast_options() {
  FlowOptions o;
  o.dt_safety = 1.0;
  o.monitor_order = 0;
  return o;
}

}  // namespace

TEST_CASE("flat metric is a fixed point of the flow") {
  FlowState s = make_state(flat_metric(TorusGrid::unit(8)), 0.0);
  const MetricField g0 = s.metric;
  FlowOptions o = fast_options();
  for (int k = 0; k < 100; ++k) s = step(s, dt_stable(s, o), o).state;
  CHECK(max_abs_diff(s.metric, g0) <= 1e-12);
  CHECK(s.energy.F == 0.0);
}

TEST_CASE("one Euler step lowers F by about dt |grad F|^2") {
  const FlowState s = make_state(random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 3), 0.0);
  FlowOptions o = fast_options();
  const double dt = 0.1 * dt_stable(s, o);
  const StepOutcome out = step(s, dt, o);
  CHECK(out.retries == 0);
  const double drop = s.energy.F - out.state.energy.F;
  const double predicted = dt * s.grad_l2_sq;
  CHECK(drop > 0.0);
  CHECK(std::abs(drop - predicted) <= 0.1 * predicted);
  // Two half steps land closer to the first-order prediction's limit than one full step.
  FlowState half = step(s, 0.5 * dt, o).state;
  half = step(half, 0.5 * dt, o).state;
  const double richardson = 2.0 * (s.energy.F - half.energy.F) - drop;
  CHECK(std::abs(drop - richardson) <= 0.1 * richardson);
}

TEST_CASE("parabolic rescaling: the flow of c g at time c^2 t is c times the flow of g at t") {
  const MetricField g0 = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 5);
  const double c = 1.7;
  FlowOptions o = fast_options();
  const double t = 20.0 * dt_stable(make_state(g0, 0.0), o);
  const FlowTrace a = run(g0, t, SampleSchedule::uniform(2, t), o);
  const FlowTrace b = run(g0.scaled(c), c * c * t, SampleSchedule::uniform(2, c * c * t), o);
  REQUIRE(a.completed());
  REQUIRE(b.completed());
  const MetricField ga = a.sample_metric(a.sample_count() - 1).scaled(c);
  const MetricField& gb = b.sample_metric(b.sample_count() - 1);
  const double dev = max_abs_diff(ga, gb);
  const double moved = max_abs_diff(ga, g0.scaled(c));
  MESSAGE("rescaling deviation " << dev << " against displacement " << moved);
  CHECK(dev <= 1e-8 * moved);
}

TEST_CASE("perturbed run: monotone energy, conserved volume, energy identity") {
  const MetricField g0 = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 9);
  FlowOptions o = fast_options();
  o.integrator = Integrator::Midpoint;
  const double t = 60.0 * dt_stable(make_state(g0, 0.0), o);
  const FlowTrace tr = run(g0, t, SampleSchedule::uniform(6, t), o);
  REQUIRE(tr.completed());
  CHECK(tr.sample_count() == 7);
  const HistoryRecord first = tr.record(0);
  double vol_drift = 0.0;
  for (std::size_t k = 1; k < tr.record_count(); ++k) {
    CHECK(tr.record(k).F <= tr.record(k - 1).F);
    CHECK(tr.record(k).t > tr.record(k - 1).t);
    vol_drift = std::max(vol_drift, std::abs(tr.record(k).vol - first.vol) / first.vol);
  }
  const HistoryRecord last = tr.record(tr.record_count() - 1);
  MESSAGE("F " << first.F << " -> " << last.F << ", volume drift " << vol_drift);
  CHECK(last.F < 0.7 * first.F);
  CHECK(vol_drift <= 1e-3);

  const double res = energy_identity_residual(tr);
  FlowOptions o2 = o;
  o2.dt_safety = 0.5 * o.dt_safety;
  const double res_half = energy_identity_residual(run(g0, t, SampleSchedule::uniform(6, t), o2));
  MESSAGE("energy identity residual " << res << ", with dt halved " << res_half);
  CHECK(res <= 0.02);
  CHECK(res_half <= 0.5 * res);
}

TEST_CASE("time reversal is an involution and mirrors the energy history") {
  const MetricField g0 = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 11);
  FlowOptions o = fast_options();
  const double t = 10.0 * dt_stable(make_state(g0, 0.0), o);
  const FlowTrace tr = run(g0, t, SampleSchedule::uniform(3, t), o);
  const FlowTrace rev = tr.time_reversed_view();
  const FlowTrace back = rev.time_reversed_view();
  CHECK(rev.reversed());
  CHECK_FALSE(back.reversed());
  REQUIRE(back.record_count() == tr.record_count());
  for (std::size_t k = 0; k < tr.record_count(); ++k) {
    const HistoryRecord a = tr.record(k), b = back.record(k);
    CHECK(std::memcmp(&a, &b, sizeof a) == 0);
  }
  for (std::size_t k = 0; k < tr.sample_count(); ++k) {
    CHECK(back.sample_time(k) == tr.sample_time(k));
    CHECK(back.sample_metric(k).data() == tr.sample_metric(k).data());
  }
  for (std::size_t k = 1; k < rev.record_count(); ++k) {
    CHECK(rev.record(k).F >= rev.record(k - 1).F);
    CHECK(rev.record(k).t > rev.record(k - 1).t);
  }
  CHECK(rev.sample_time(0) == doctest::Approx(0.0).epsilon(1e-15));
  // The reversed velocity is the gradient itself.
  const SymTensorField vf = tr.sample_velocity(0);
  const SymTensorField vr = rev.sample_velocity(rev.sample_count() - 1);
  for (std::size_t i = 0; i < vf.data().size(); ++i) REQUIRE(vr.data()[i] == -vf.data()[i]);
}

TEST_CASE("flat run: constant histories, zero fits") {
  const MetricField g0 = flat_metric(TorusGrid::unit(8));
  FlowOptions o;
  o.monitor_order = 1;
  o.dt_max = 1e-6;
  const FlowTrace tr = run(g0, 1e-5, SampleSchedule::uniform(4, 1e-5), o);
  REQUIRE(tr.completed());
  for (std::size_t k = 0; k < tr.record_count(); ++k) {
    CHECK(tr.record(k).F == 0.0);
    CHECK(tr.record(k).vol == tr.record(0).vol);
  }
  CHECK(energy_identity_residual(tr) == 0.0);
  const DecayFit fit = decay_monitors(tr);
  CHECK(fit.K == 0.0);
  CHECK(fit.C[0] == 0.0);
  std::vector<std::size_t> slab;
  for (std::size_t p = 0; p < g0.points(); ++p)
    if (g0.grid().coords(p)[0] < 4) slab.push_back(p);
  CHECK(open_set_volume_check(tr, slab).c_emp == 0.0);
}

TEST_CASE("decay monitors and the open-set volume estimate on a perturbed run") {
  const MetricField g0 = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 12);
  FlowOptions o = fast_options();
  o.monitor_order = 3;
  o.monitor_stride = 5;
  const double t = 20.0 * dt_stable(make_state(g0, 0.0), o);
  const FlowTrace tr = run(g0, t, SampleSchedule::geometric(5, t, 0.1), o);
  const DecayFit fit = decay_monitors(tr);
  MESSAGE("K_fit " << fit.K << ", C_m " << fit.C[0] << " " << fit.C[1] << " " << fit.C[2]);
  CHECK(fit.K > 0.0);
  for (int m = 0; m < 3; ++m) {
    CHECK(std::isfinite(fit.C[m]));
    CHECK(fit.monitored_records[m] >= 5);
  }
  CHECK(std::isnan(tr.record(1).sup_drm[0]) != (tr.record(1).t == tr.sample_time(1)));

  std::vector<std::size_t> slab, all;
  for (std::size_t p = 0; p < g0.points(); ++p) {
    all.push_back(p);
    if (g0.grid().coords(p)[0] < 4) slab.push_back(p);
  }
  const VolumeSetCheck whole = open_set_volume_check(tr, all);
  const VolumeSetCheck half = open_set_volume_check(tr, slab);
  MESSAGE("C_emp slab " << half.c_emp << ", whole torus " << whole.c_emp << " (drift " << whole.max_relative_drift << ")");
  CHECK(std::isfinite(half.c_emp));
  CHECK(whole.max_relative_drift <= 1e-6);
  CHECK(whole.c_emp <= 1e-3);
}

TEST_CASE("positivity loss aborts with the grid index") {
  const FlowState s = make_state(random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 13), 0.0);
  FlowOptions o;
  try {
    step(s, 1e3, o);
    FAIL("expected an abort");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::Numerical);
    CHECK(std::string(e.what()).find("grid index") != std::string::npos);
  }
  // run() keeps the last stable state and reports the reason.
  FlowOptions big;
  big.dt_max = 1e3;
  big.dt_safety = 1e12;
  const FlowTrace tr = run(s.metric, 1.0, SampleSchedule::uniform(1, 1.0), big);
  CHECK_FALSE(tr.completed());
  CHECK(tr.termination().find("grid index") != std::string::npos);
  CHECK(tr.sample_count() == 1);
}

TEST_CASE("frozen stiffness constant matches a fresh power iteration") {
  const double kappa = measure_stiffness(TorusGrid::unit(8), 60, 7);
  MESSAGE("lambda_max h^4 = " << kappa);
  CHECK(kappa == doctest::Approx(kFlowStiffness).epsilon(0.01));
}

TEST_CASE("history CSV has the documented header and one row per record") {
  const MetricField g0 = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 14);
  FlowOptions o = fast_options();
  const double t = 3.0 * dt_stable(make_state(g0, 0.0), o);
  const FlowTrace tr = run(g0, t, SampleSchedule::uniform(1, t), o);
  const auto path = std::filesystem::temp_directory_path() / "l2flow_history_test.csv";
  write_history_csv(tr, path.string());
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  CHECK(line == "step,t,dt,F,G,vol,sup_rm,sup_d1rm,sup_d2rm,sup_d3rm,grad_l2_sq");
  std::size_t rows = 0;
  while (std::getline(is, line)) ++rows;
  CHECK(rows == tr.record_count());
  std::filesystem::remove(path);
}
