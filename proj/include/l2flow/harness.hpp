#pragma once

#include <optional>
#include <string>

#include "l2flow/flow.hpp"
#include "l2flow/report.hpp"
#include "l2flow/scenario.hpp"

namespace l2flow {

/// Flow of the scenario's initial metric; dt_factor scales the safety factor (0.5 halves dt).
/// A run that loses positivity or runs out of retries is returned incomplete.
FlowTrace run_flow(const Scenario& s, double dt_factor = 1.0);

struct ScenarioTraces {
  Scenario scenario;
  FlowTrace trace;
  std::optional<FlowTrace> half_dt;  // present when the scenario asks for dt-halving comparisons
};

/// Runs every enabled check on completed traces. Asserted checks pass or fail; checks on
/// non-constructive constants are report-only.
VerificationReport verify(const ScenarioTraces& t);

/// Output directory after the L2FLOW_OUTPUT_DIR override.
std::string resolve_output_dir(const Scenario& s);

/// Builds the initial metric, runs the flow (and the half-dt rerun if enabled), writes
/// scenario.txt, history.csv, trace.json and snapshots/, then runs the checks and writes
/// report.json and summary.txt. A flow abort throws Error(Numerical) after the partial
/// artifacts are written.
VerificationReport run_scenario(const Scenario& s, ScenarioTraces* traces = nullptr);

/// Reads back what run_scenario wrote; samples are bit-identical to the run.
ScenarioTraces load_trace_dir(const std::string& dir);
/// load_trace_dir + verify, rewriting report.json and summary.txt.
VerificationReport verify_trace_dir(const std::string& dir);
VerificationReport load_report(const std::string& dir);

void write_trace_dir(const Scenario& s, const FlowTrace& trace, const std::string& dir);

/// Analytic gradient against the discrete oracle, grad F against 4 grad G, and per-component
/// probes of the discrete F against the adjoint gradient, on the scenario's initial metric.
struct GradientCheck {
  double analytic_error = 0.0;  // |grad_analytic - grad_discrete| / |grad_discrete|, L^2(g)
  double gauss_bonnet_error = 0.0;  // |grad F - 4 grad G| / |grad F|
  double probe_error = 0.0;     // max relative deviation of probed partials
  int probes = 0;
  double tolerance = 0.0;       // 5 h^2 for the first two
  double probe_tolerance = 1e-6;  // absolute 1e-4 where the adjoint gradient vanishes
  bool passed() const {
    return analytic_error <= tolerance && gauss_bonnet_error <= tolerance && probe_error <= probe_tolerance;
  }
};
GradientCheck gradient_check(const Scenario& s);

}  // namespace l2flow
