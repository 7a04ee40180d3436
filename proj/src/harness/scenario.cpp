#include "l2flow/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace l2flow {

namespace {

const std::map<std::string, Generator> kGenerators = {{"flat", Generator::Flat},
                                                       {"conformal", Generator::ConformalMode},
                                                       {"band_limited", Generator::RandomBandLimited},
                                                       {"anisotropic_flat", Generator::AnisotropicFlat}};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r") - b + 1);
}

[[noreturn]] void config_error(int line, const std::string& msg) {
  throw Error(ErrorKind::Config, "scenario line " + std::to_string(line) + ": " + msg);
}

double to_double(const std::string& v, int line) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used == v.size()) return d;
  } catch (const std::exception&) {
  }
  config_error(line, "expected a number, got '" + v + "'");
}

long to_int(const std::string& v, int line) {
  const double d = to_double(v, line);
  if (d != std::floor(d)) config_error(line, "expected an integer, got '" + v + "'");
  return static_cast<long>(d);
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> names = {
      "energy_monotone",   "energy_identity", "volume_invariance",       "gauss_bonnet",
      "decay_monitors",    "open_set_volume", "quasi_geodesic_forward",  "quasi_geodesic_backward",
      "tube",              "noncollapsing",   "injectivity",             "distance_holder",
      "gh_trend",          "length_derivative", "vector_ratio",          "acceleration_derivative"};
  return names;
}

bool Scenario::enabled(const std::string& check) const {
  return std::any_of(checks.begin(), checks.end(), [&](const CheckSpec& c) { return c.name == check; });
}

double Scenario::tolerance(const std::string& check, double fallback) const {
  for (const CheckSpec& c : checks)
    if (c.name == check && !std::isnan(c.tolerance)) return c.tolerance;
  return fallback;
}

Scenario parse_scenario(const std::string& text) {
  Scenario s;
  bool checks_given = false;
  std::map<std::string, double> tolerances;
  std::istringstream in(text);
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string content = trim(raw.substr(0, raw.find('#')));
    if (content.empty()) continue;
    const auto eq = content.find('=');
    if (eq == std::string::npos) config_error(line, "expected key = value");
    const std::string key = trim(content.substr(0, eq));
    const std::string value = trim(content.substr(eq + 1));
    if (value.empty()) config_error(line, "empty value for '" + key + "'");

    if (key == "name") {
      s.name = value;
    } else if (key == "grid.N") {
      s.N = static_cast<int>(to_int(value, line));
      if (s.N < 8) config_error(line, "grid.N must be at least 8");
    } else if (key == "grid.periods") {
      std::istringstream v(value);
      std::string tok;
      int a = 0;
      while (v >> tok) {
        if (a == 4) config_error(line, "grid.periods takes 4 numbers");
        s.periods[a] = to_double(tok, line);
        if (!(s.periods[a] > 0.0)) config_error(line, "periods must be positive");
        ++a;
      }
      if (a != 4) config_error(line, "grid.periods takes 4 numbers");
    } else if (key == "generator") {
      const auto it = kGenerators.find(value);
      if (it == kGenerators.end()) config_error(line, "unknown generator '" + value + "'");
      s.generator = it->second;
    } else if (key == "generator.eps") {
      s.eps = to_double(value, line);
      if (s.eps < 0.0) config_error(line, "generator.eps must be non-negative");
    } else if (key == "generator.axis") {
      s.axis = static_cast<int>(to_int(value, line));
      if (s.axis < 0 || s.axis > 3) config_error(line, "generator.axis must be 0..3");
    } else if (key == "generator.wavenumber") {
      s.wavenumber = static_cast<int>(to_int(value, line));
    } else if (key == "generator.max_wavenumber") {
      s.max_wavenumber = static_cast<int>(to_int(value, line));
      if (s.max_wavenumber < 1) config_error(line, "generator.max_wavenumber must be at least 1");
    } else if (key == "generator.seed") {
      s.seed = static_cast<std::uint64_t>(to_int(value, line));
    } else if (key == "flow.t_final") {
      s.t_final = to_double(value, line);
      if (!(s.t_final > 0.0)) config_error(line, "flow.t_final must be positive");
    } else if (key == "flow.dt_safety") {
      s.dt_safety = to_double(value, line);
      if (!(s.dt_safety > 0.0)) config_error(line, "flow.dt_safety must be positive");
    } else if (key == "flow.integrator") {
      if (value == "euler") s.integrator = Integrator::Euler;
      else if (value == "midpoint") s.integrator = Integrator::Midpoint;
      else config_error(line, "flow.integrator is euler or midpoint");
    } else if (key == "flow.monitor_order") {
      s.monitor_order = static_cast<int>(to_int(value, line));
      if (s.monitor_order < 0 || s.monitor_order > 3) config_error(line, "flow.monitor_order must be in 0..3");
    } else if (key == "flow.monitor_stride") {
      s.monitor_stride = static_cast<int>(to_int(value, line));
      if (s.monitor_stride < 1) config_error(line, "flow.monitor_stride must be at least 1");
    } else if (key == "flow.sampler") {
      if (value == "uniform") s.sampler = Sampler::Uniform;
      else if (value == "geometric") s.sampler = Sampler::Geometric;
      else config_error(line, "flow.sampler is uniform or geometric");
    } else if (key == "flow.samples") {
      s.samples = static_cast<int>(to_int(value, line));
      if (s.samples < 1) config_error(line, "flow.samples must be at least 1");
    } else if (key == "flow.first_fraction") {
      s.first_fraction = to_double(value, line);
      if (!(s.first_fraction > 0.0 && s.first_fraction <= 1.0)) config_error(line, "flow.first_fraction must be in (0, 1]");
    } else if (key == "flow.dt_halving_check") {
      if (value == "true") s.dt_halving_check = true;
      else if (value == "false") s.dt_halving_check = false;
      else config_error(line, "flow.dt_halving_check is true or false");
    } else if (key == "checks") {
      checks_given = true;
      s.checks.clear();
      std::istringstream v(value);
      std::string name;
      while (v >> name) {
        if (name == "all") {
          for (const std::string& n : known_checks()) s.checks.push_back({n});
          continue;
        }
        const auto& known = known_checks();
        if (std::find(known.begin(), known.end(), name) == known.end()) config_error(line, "unknown check '" + name + "'");
        s.checks.push_back({name});
      }
    } else if (key.rfind("check.", 0) == 0 && key.size() > 16 && key.compare(key.size() - 10, 10, ".tolerance") == 0) {
      const std::string name = key.substr(6, key.size() - 16);
      const auto& known = known_checks();
      if (std::find(known.begin(), known.end(), name) == known.end()) config_error(line, "unknown check '" + name + "'");
      tolerances[name] = to_double(value, line);
    } else if (key == "points.count") {
      s.point_count = static_cast<int>(to_int(value, line));
      if (s.point_count < 4) config_error(line, "points.count must be at least 4");
    } else if (key == "points.seed") {
      s.point_seed = static_cast<std::uint64_t>(to_int(value, line));
    } else if (key == "output_dir") {
      s.output_dir = value;
    } else {
      config_error(line, "unknown key '" + key + "'");
    }
  }
  if (!checks_given)
    for (const std::string& n : known_checks()) s.checks.push_back({n});
  for (CheckSpec& c : s.checks) {
    const auto it = tolerances.find(c.name);
    if (it != tolerances.end()) c.tolerance = it->second;
  }
  return s;
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Config, "cannot read scenario file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scenario(ss.str());
}

std::string scenario_text(const Scenario& s) {
  std::ostringstream o;
  o << "name = " << s.name << "\n";
  o << "grid.N = " << s.N << "\n";
  o << "grid.periods = " << fmt(s.periods[0]) << ' ' << fmt(s.periods[1]) << ' ' << fmt(s.periods[2]) << ' '
    << fmt(s.periods[3]) << "\n";
  for (const auto& [key, g] : kGenerators)
    if (g == s.generator) o << "generator = " << key << "\n";
  o << "generator.eps = " << fmt(s.eps) << "\n";
  o << "generator.axis = " << s.axis << "\n";
  o << "generator.wavenumber = " << s.wavenumber << "\n";
  o << "generator.max_wavenumber = " << s.max_wavenumber << "\n";
  o << "generator.seed = " << s.seed << "\n";
  o << "flow.t_final = " << fmt(s.t_final) << "\n";
  o << "flow.dt_safety = " << fmt(s.dt_safety) << "\n";
  o << "flow.integrator = " << (s.integrator == Integrator::Euler ? "euler" : "midpoint") << "\n";
  o << "flow.monitor_order = " << s.monitor_order << "\n";
  o << "flow.monitor_stride = " << s.monitor_stride << "\n";
  o << "flow.sampler = " << (s.sampler == Sampler::Uniform ? "uniform" : "geometric") << "\n";
  o << "flow.samples = " << s.samples << "\n";
  o << "flow.first_fraction = " << fmt(s.first_fraction) << "\n";
  o << "flow.dt_halving_check = " << (s.dt_halving_check ? "true" : "false") << "\n";
  o << "checks =";
  for (const CheckSpec& c : s.checks) o << ' ' << c.name;
  o << "\n";
  for (const CheckSpec& c : s.checks)
    if (!std::isnan(c.tolerance)) o << "check." << c.name << ".tolerance = " << fmt(c.tolerance) << "\n";
  o << "points.count = " << s.point_count << "\n";
  o << "points.seed = " << s.point_seed << "\n";
  o << "output_dir = " << s.output_dir << "\n";
  return o.str();
}

TorusGrid scenario_grid(const Scenario& s) { return TorusGrid(s.N, s.periods); }

MetricField initial_metric(const Scenario& s) {
  const TorusGrid grid = scenario_grid(s);
  switch (s.generator) {
    case Generator::Flat: return flat_metric(grid);
    case Generator::AnisotropicFlat: return anisotropic_flat_metric(grid);
    case Generator::ConformalMode: return conformal_mode_metric(grid, s.eps, s.axis, s.wavenumber);
    case Generator::RandomBandLimited: break;
  }
  return random_band_limited_metric(grid, s.eps, s.max_wavenumber, s.seed);
}

FlowOptions flow_options(const Scenario& s) {
  FlowOptions o;
  o.dt_safety = s.dt_safety;
  o.integrator = s.integrator;
  o.monitor_order = s.monitor_order;
  o.monitor_stride = s.monitor_stride;
  return o;
}

SampleSchedule sample_schedule(const Scenario& s) {
  return s.sampler == Sampler::Uniform ? SampleSchedule::uniform(s.samples, s.t_final)
                                       : SampleSchedule::geometric(s.samples, s.t_final, s.first_fraction);
}

}  // namespace l2flow
