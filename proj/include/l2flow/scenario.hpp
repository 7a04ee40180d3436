#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "l2flow/flow.hpp"

namespace l2flow {

enum class Generator { Flat, ConformalMode, RandomBandLimited, AnisotropicFlat };
enum class Sampler { Uniform, Geometric };

/// An enabled check and the tolerance it is asserted against (NaN: check default).
struct CheckSpec {
  std::string name;
  double tolerance = std::numeric_limits<double>::quiet_NaN();
};

/// Parsed from "key = value" lines; '#' starts a comment. Keys:
///   name, grid.N, grid.periods (4 numbers),
///   generator (flat | conformal | band_limited | anisotropic_flat),
///   generator.eps, generator.axis, generator.wavenumber, generator.max_wavenumber, generator.seed,
///   flow.t_final, flow.dt_safety, flow.integrator (euler | midpoint),
///   flow.monitor_order (0..3, highest derivative of Rm monitored), flow.monitor_stride,
///   flow.sampler (uniform | geometric), flow.samples, flow.first_fraction,
///   flow.dt_halving_check (true | false: rerun at half dt for the refinement comparisons),
///   checks (space separated names), check.<name>.tolerance,
///   points.count, points.seed, output_dir
struct Scenario {
  std::string name = "scenario";
  int N = 12;
  std::array<double, 4> periods{1.0, 1.0, 1.0, 1.0};
  Generator generator = Generator::RandomBandLimited;
  double eps = 0.05;
  int axis = 0;
  int wavenumber = 1;
  int max_wavenumber = 1;
  std::uint64_t seed = 1;
  double t_final = 1.6e-5;
  double dt_safety = 1.0;
  Integrator integrator = Integrator::Midpoint;
  int monitor_order = 3;
  int monitor_stride = 10;
  Sampler sampler = Sampler::Geometric;
  int samples = 12;
  double first_fraction = 0.02;
  bool dt_halving_check = false;
  std::vector<CheckSpec> checks;
  int point_count = 16;
  std::uint64_t point_seed = 1;
  std::string output_dir = "l2flow_out";

  static constexpr double kMaxStableEps = 0.1;

  bool enabled(const std::string& check) const;
  double tolerance(const std::string& check, double fallback) const;
};

/// Every check run_scenario knows, in report order.
const std::vector<std::string>& known_checks();

/// Throws Error(Config) naming the line for unknown keys, bad values and unknown checks.
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
/// Round-trips through parse_scenario.
std::string scenario_text(const Scenario& s);

TorusGrid scenario_grid(const Scenario& s);
/// Bit-reproducible for a fixed seed.
MetricField initial_metric(const Scenario& s);
FlowOptions flow_options(const Scenario& s);
SampleSchedule sample_schedule(const Scenario& s);

}  // namespace l2flow
