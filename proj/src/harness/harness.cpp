#include "l2flow/harness.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <future>
#include <limits>
#include <sstream>

#include "l2flow/checks.hpp"
#include "l2flow/field_io.hpp"
#include "l2flow/functionals.hpp"
#include "l2flow/parallel.hpp"
#include "l2flow/quasi_geodesic.hpp"
#include "l2flow/tube.hpp"
#include "l2flow/vec4.hpp"

namespace fs = std::filesystem;

namespace l2flow {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kCriticalProbeTolerance = 1e-4;

// Anchors quote the statement each check evaluates.
const char* kAnchorMonotone = "F(g(t)) is monotone decreasing along dg/dt = -grad F";
const char* kAnchorEnergy = "int_0^t int_M |grad F|^2 dV ds = F(g(0)) - F(g(t))";
const char* kAnchorVolume = "Vol_g(t)(M) = Vol_g(0)(M)";
const char* kAnchorGaussBonnet = "int_M |Rm|^2 - 4|Rc|^2 + R^2 = c0 pi^2 chi(M); chi(T^4) = 0 gives F = 4G";
const char* kAnchorDecay = "||Rm|| <= K t^(-1/2); ||nabla^m Rm|| <= C((A+1) t^(-1/2))^(1+m/2)";
const char* kAnchorOpenSetVolume = "Vol_g(t)(U)^(1/2) >= Vol_g(0)(U)^(1/2) - C t^(1/2) (int_0^t int_U |grad F|^2 dV ds)^(1/2)";
const char* kAnchorQgForward =
    "d(x,y,t) <= L(gamma_t,t) <= d(x,y,t) + beta; |gamma'| in [(1+beta)^-1 d_j, (1+beta) d_j]; |nabla_gamma' gamma'| <= beta d_j^2";
const char* kAnchorQgBackward =
    "same three conditions for the family built on the time-reversed flow, segments frozen at t2 - jS";
const char* kAnchorTube = "D(gamma,R) is foliated by the discs exp(B(0,r) in <gamma'>^perp) and |d pi| <= 2; Area(D(gamma(s),r)) >= c r^3";
const char* kAnchorNoncollapsing = "Vol(B(x,r)) >= delta omega_4 r^4";
const char* kAnchorInjectivity = "inj_g(t)(M) >= iota t^(1/4); diam_g(t)(M) <= 2(1+D)";
const char* kAnchorHolder = "|d(x,y,t2) - d(x,y,t1)| <= C Lambda^(1/2) (t2^(1/8) - t1^(1/8))^(1/2) + C (t2^(1/24) - t1^(1/24))";
const char* kAnchorGh = "d_GH((M,d_g),(M,d_g(t))) < 1/k for t in [0,1/j], bounded by half the distortion of the identity";
const char* kAnchorLength = "|d/dt L(gamma,t)| <= int_gamma |g'(t)|_g(t) dsigma";
const char* kAnchorVector = "|log(|v|^2_g(t2) / |v|^2_g(t1))| <= int_t1^t2 ||g'(t)||_inf dt";
const char* kAnchorAcceleration =
    "|d/dt |nabla_gamma' gamma'|^2| <= |g'| |nabla_gamma' gamma'|^2 + C(n) |gamma'|^2 |nabla_gamma' gamma'| |nabla g'|";

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CheckRecord asserted(const std::string& name, const char* anchor, double measured, double tolerance, bool ok) {
  CheckRecord r;
  r.name = name;
  r.anchor = anchor;
  r.status = ok ? CheckStatus::Pass : CheckStatus::Fail;
  r.measured = measured;
  r.tolerance = tolerance;
  return r;
}

CheckRecord reported(const std::string& name, const char* anchor, double measured) {
  CheckRecord r;
  r.name = name;
  r.anchor = anchor;
  r.status = CheckStatus::ReportOnly;
  r.measured = measured;
  r.tolerance = kNaN;
  return r;
}

nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }
nlohmann::json point_json(const Vec4& x) { return nlohmann::json::array({x[0], x[1], x[2], x[3]}); }

double max_volume_drift(const FlowTrace& tr) {
  const double v0 = tr.record(0).vol;
  double m = 0.0;
  for (std::size_t k = 0; k < tr.record_count(); ++k) m = std::max(m, std::abs(tr.record(k).vol - v0) / v0);
  return m;
}

double gauss_bonnet_ratio(const MetricField& g) {
  const EnergyReport e = energy(g);
  return e.F > 0.0 ? std::abs(e.gauss_bonnet_residual) / e.F : std::abs(e.gauss_bonnet_residual);
}

// Lazily computed quantities shared between checks.
class Context {
public:
  explicit Context(const ScenarioTraces& t) : t_(t) {
    points_ = sample_points(t.trace.grid(), t.scenario.point_count, t.scenario.point_seed);
  }
  const Scenario& scenario() const { return t_.scenario; }
  const FlowTrace& trace() const { return t_.trace; }
  const std::optional<FlowTrace>& half() const { return t_.half_dt; }
  const std::vector<Vec4>& points() const { return points_; }

  const DistanceSeries& distances() {
    if (!distances_) distances_ = distance_series(trace(), points_);
    return *distances_;
  }
  const DistanceSeries& half_distances() {
    if (!half_distances_) half_distances_ = distance_series(*half(), points_);
    return *half_distances_;
  }
  const InjEstimate& final_inj() {
    if (!final_inj_) final_inj_ = inj_estimate(trace().sample_metric(trace().sample_count() - 1));
    return *final_inj_;
  }
  const QuasiGeodesicFamily& family(QgDirection dir) {
    auto& slot = dir == QgDirection::Forward ? forward_ : backward_;
    if (!slot) slot = quasi_geodesic(trace(), points_[0], points_[1], dir);
    return *slot;
  }

private:
  const ScenarioTraces& t_;
  std::vector<Vec4> points_;
  std::optional<DistanceSeries> distances_, half_distances_;
  std::optional<InjEstimate> final_inj_;
  std::optional<QuasiGeodesicFamily> forward_, backward_;
};

CheckRecord check_energy_monotone(Context& c) {
  const FlowTrace& tr = c.trace();
  const double f0 = tr.record(0).F;
  const double slack = c.scenario().tolerance("energy_monotone", 1e-12);
  double worst = 0.0;
  long worst_step = 0;
  for (std::size_t k = 1; k < tr.record_count(); ++k) {
    const double rise = (tr.record(k).F - tr.record(k - 1).F) / std::max(f0, 1e-300);
    if (rise > worst) {
      worst = rise;
      worst_step = tr.record(k).step;
    }
  }
  CheckRecord r = asserted("energy_monotone", kAnchorMonotone, worst, slack, worst <= slack);
  r.details = {{"largest_relative_increase", worst}, {"at_step", worst_step}, {"records", tr.record_count()}};
  return r;
}

CheckRecord check_energy_identity(Context& c) {
  const double tol = c.scenario().tolerance("energy_identity", 0.02);
  const double res = energy_identity_residual(c.trace());
  bool ok = res <= tol;
  CheckRecord r = asserted("energy_identity", kAnchorEnergy, res, tol, ok);
  r.details = {{"residual", res}, {"energy_drop", c.trace().record(0).F - c.trace().record(c.trace().record_count() - 1).F}};
  if (c.half()) {
    const double half = energy_identity_residual(*c.half());
    // Halving dt must at least halve the residual (unless both sit at rounding level).
    const bool halves = half <= 0.5 * res || res <= 1e-12;
    r.details["half_dt_residual"] = half;
    r.details["reduction_factor"] = half > 0.0 ? num(res / half) : nlohmann::json(nullptr);
    r.details["halves"] = halves;
    if (!halves) r.status = CheckStatus::Fail;
  }
  return r;
}

CheckRecord check_volume(Context& c) {
  const double tol = c.scenario().tolerance("volume_invariance", 1e-3);
  const double drift = max_volume_drift(c.trace());
  CheckRecord r = asserted("volume_invariance", kAnchorVolume, drift, tol, drift <= tol);
  r.details = {{"vol0", c.trace().record(0).vol}, {"max_relative_drift", drift}};
  return r;
}

CheckRecord check_gauss_bonnet(Context& c) {
  const double tol = c.scenario().tolerance("gauss_bonnet", 0.02);
  const FlowTrace& tr = c.trace();
  double worst = 0.0;
  nlohmann::json per = nlohmann::json::array();
  for (std::size_t k : {std::size_t{0}, tr.sample_count() - 1}) {
    const double q = gauss_bonnet_ratio(tr.sample_metric(k));
    worst = std::max(worst, q);
    per.push_back({{"t", tr.sample_time(k)}, {"relative_residual", q}});
  }
  CheckRecord r = asserted("gauss_bonnet", kAnchorGaussBonnet, worst, tol, worst <= tol);
  r.details = {{"samples", per}, {"grid_N", tr.grid().n()}};
  return r;
}

CheckRecord check_decay(Context& c) {
  const DecayFit fit = decay_monitors(c.trace());
  CheckRecord r = reported("decay_monitors", kAnchorDecay, fit.K);
  r.details = {{"K_fit", fit.K},
               {"C_fit", {fit.C[0], fit.C[1], fit.C[2]}},
               {"monitored_records", {fit.monitored_records[0], fit.monitored_records[1], fit.monitored_records[2]}}};
  if (c.half()) {
    const DecayFit h = decay_monitors(*c.half());
    r.details["half_dt_K_fit"] = h.K;
    r.details["K_relative_change"] = fit.K > 0.0 ? std::abs(h.K - fit.K) / fit.K : 0.0;
  }
  return r;
}

std::vector<std::size_t> half_slab(const TorusGrid& grid) {
  std::vector<std::size_t> region;
  for (std::size_t p = 0; p < grid.size(); ++p)
    if (grid.coords(p)[0] < grid.n() / 2) region.push_back(p);
  return region;
}

CheckRecord check_open_set_volume(Context& c) {
  const TorusGrid& grid = c.trace().grid();
  const VolumeSetCheck slab = open_set_volume_check(c.trace(), half_slab(grid));
  std::vector<std::size_t> all(grid.size());
  for (std::size_t p = 0; p < all.size(); ++p) all[p] = p;
  const VolumeSetCheck whole = open_set_volume_check(c.trace(), all);
  CheckRecord r = reported("open_set_volume", kAnchorOpenSetVolume, slab.c_emp);
  r.details = {{"region", "half-torus slab x0 < L0/2"},
               {"C_emp", slab.c_emp},
               {"max_relative_drift", slab.max_relative_drift},
               {"worst_t", slab.worst_t},
               {"whole_torus_C_emp", whole.c_emp},
               {"direction", "checked as >=, the direction the derivation supports; the statement is written with ="}};
  if (c.half()) {
    const VolumeSetCheck h = open_set_volume_check(*c.half(), half_slab(grid));
    r.details["half_dt_C_emp"] = h.c_emp;
    r.details["C_relative_change"] = slab.c_emp > 0.0 ? std::abs(h.c_emp - slab.c_emp) / slab.c_emp : 0.0;
  }
  return r;
}

nlohmann::json family_summary(const QuasiGeodesicFamily& f) {
  nlohmann::json checks = nlohmann::json::array();
  for (const QgCheck& q : f.checks)
    checks.push_back({{"t", q.t},
                      {"d", q.d},
                      {"length", q.length},
                      {"length_margin", q.length_margin},
                      {"speed_margin", q.speed_margin},
                      {"acceleration_margin", q.acceleration_margin}});
  return {{"x", point_json(f.x)},
          {"y", point_json(f.y)},
          {"beta", f.beta},
          {"A", f.A},
          {"S", f.S},
          {"S_terms", {num(f.S_terms[0]), num(f.S_terms[1]), num(f.S_terms[2])}},
          {"d_bar", f.d_bar},
          {"segments", f.segments.size()},
          {"degenerate", f.degenerate},
          {"checks", checks}};
}

CheckRecord check_family(Context& c, QgDirection dir) {
  const std::string name = dir == QgDirection::Forward ? "quasi_geodesic_forward" : "quasi_geodesic_backward";
  const QuasiGeodesicFamily& f = c.family(dir);
  const double tol = c.scenario().tolerance(name, 0.0);
  const double m = f.min_margin();
  CheckRecord r = asserted(name, dir == QgDirection::Forward ? kAnchorQgForward : kAnchorQgBackward, m, tol, m >= tol);
  r.details = family_summary(f);
  r.details["criterion"] = "min margin >= tolerance";
  return r;
}

CheckRecord check_tube(Context& c) {
  const double tol = c.scenario().tolerance("tube", 2.1);
  const FlowTrace& tr = c.trace();
  const MetricField& g = tr.sample_metric(tr.sample_count() - 1);
  const GeodesicSolver solver(g);
  const Curve curve = solver.geodesic(c.points()[0], c.points()[1]);
  const double r_tube = 0.5 * c.final_inj().value;
  const Tube tube = build_tube(solver.interpolator(), curve, r_tube);
  const TubeDiagnostics& d = tube.diagnostics();
  const bool ok = d.foliation_ok && d.sup_dpi <= tol && d.area_constant > 0.0;
  CheckRecord r = asserted("tube", kAnchorTube, d.sup_dpi, tol, ok);
  r.details = {{"t", tr.sample_time(tr.sample_count() - 1)},
               {"radius", r_tube},
               {"length", tube.length()},
               {"foliation_ok", d.foliation_ok},
               {"multi_leaf_points", d.multi_leaf_points},
               {"min_leaf_slope", d.min_leaf_slope},
               {"sup_dpi", d.sup_dpi},
               {"min_area", d.min_area},
               {"area_constant", d.area_constant},
               {"criterion", "foliated, sup |d pi| <= tolerance, area constant > 0"}};
  return r;
}

CheckRecord check_noncollapsing(Context& c) {
  const FlowTrace& tr = c.trace();
  const std::vector<Vec4> centers(c.points().begin(), c.points().begin() + std::min<std::size_t>(4, c.points().size()));
  const std::vector<double> radii{0.1, 0.2};
  const double delta = c.scenario().tolerance("noncollapsing", 0.9);
  double worst = std::numeric_limits<double>::infinity();
  nlohmann::json per = nlohmann::json::array();
  // The final metric only: the statement concerns g(t) for t > 0.
  const std::size_t k = tr.sample_count() - 1;
  // Margin at delta = 1 is the fitted ratio minus one.
  const double m1 = noncollapsing_check(tr.sample_metric(k), 1.0, centers, radii);
  worst = std::min(worst, m1 + 1.0);
  per.push_back({{"t", tr.sample_time(k)}, {"delta_emp", m1 + 1.0}});
  CheckRecord r = reported("noncollapsing", kAnchorNoncollapsing, worst);
  r.details = {{"delta_emp", worst}, {"radii", radii}, {"samples", per}, {"margin_at_delta", worst / delta - 1.0}, {"delta", delta}};
  return r;
}

CheckRecord check_injectivity(Context& c) {
  const FlowTrace& tr = c.trace();
  const InjEstimate i0 = inj_estimate(tr.sample_metric(0));
  const InjEstimate& i1 = c.final_inj();
  const double tf = tr.sample_time(tr.sample_count() - 1);
  const DistanceSeries& ds = c.distances();
  double diam = 0.0;
  for (const auto& m : ds.d)
    for (const auto& row : m)
      for (double v : row) diam = std::max(diam, v);
  const double iota = tf > 0.0 ? std::min(i0.value, i1.value) / std::pow(std::min(tf, 1.0), 0.25) : i1.value;
  CheckRecord r = reported("injectivity", kAnchorInjectivity, std::min(i0.value, i1.value));
  r.details = {{"inj_initial", i0.value},
               {"inj_final", i1.value},
               {"axis_loops_final", i1.axis_loops},
               {"curvature_product", i1.curvature_product},
               {"low_confidence", i0.low_confidence || i1.low_confidence},
               {"iota_fit", iota},
               {"sampled_diameter", diam},
               {"D_fit", diam / 2.0 - 1.0},
               {"heuristic", "axis-class closed geodesics only, conjugate points ignored"}};
  return r;
}

nlohmann::json fit_json(const HolderFit& f) {
  return {{"a", f.a},
          {"b", f.b},
          {"majorant_at_widest_interval", f.majorant_max},
          {"max_delta", f.max_delta},
          {"constraints", f.constraints},
          {"binding", {{"t1", f.worst_t1}, {"t2", f.worst_t2}, {"pair", {f.worst_i, f.worst_j}}, {"delta", f.worst_delta}}}};
}

CheckRecord check_holder(Context& c) {
  const HolderFit fit = distance_holder_fit(c.distances());
  const double tol = c.scenario().tolerance("distance_holder", 0.3);
  CheckRecord r = asserted("distance_holder", kAnchorHolder, fit.majorant_max, tol, fit.finite());
  r.details = fit_json(fit);
  if (c.half()) {
    const HolderFit half = distance_holder_fit(c.half_distances());
    const HolderStability st = holder_stability(fit, half, tol);
    r.details["half_dt"] = fit_json(half);
    r.details["a_change"] = st.a_change;
    r.details["b_change"] = st.b_change;
    r.details["majorant_change"] = st.majorant_change;
    r.measured = st.majorant_change;
    if (!st.stable) r.status = CheckStatus::Fail;
    r.details["criterion"] = "finite fit; |da| Phi1 + |db| Phi2 <= tolerance * majorant under dt halving";
  } else {
    r.tolerance = kNaN;
    r.details["criterion"] = "finite fit (no dt-halving rerun in this scenario)";
  }
  return r;
}

CheckRecord check_gh(Context& c) {
  const GhTrend tr = gh_trend(c.distances());
  CheckRecord r = asserted("gh_trend", kAnchorGh, tr.worst_drop, 0.0, tr.non_decreasing);
  r.details = {{"times", tr.times}, {"bound", tr.bound}, {"smoothed", tr.smoothed},
               {"criterion", "3-record trailing mean of the bound against g(0) is non-decreasing in t"}};
  return r;
}

Curve probe_segment(const Vec4& x, const Vec4& y, int nodes) {
  Curve c;
  for (int k = 0; k < nodes; ++k) c.points.push_back(v4::lerp(x, y, static_cast<double>(k) / (nodes - 1)));
  return c;
}

CheckRecord check_length_derivative(Context& c) {
  const double tol = c.scenario().tolerance("length_derivative", 0.05);
  // The frozen first member of the forward family.
  const Curve& curve = c.family(QgDirection::Forward).segments.front().curve;
  const BoundCheck res = length_derivative_check(c.trace(), curve);
  CheckRecord r = asserted("length_derivative", kAnchorLength, res.worst_ratio, 1.0 + tol, res.holds(tol));
  nlohmann::json iv = nlohmann::json::array();
  for (const IntervalBound& b : res.intervals) iv.push_back({{"t1", b.t1}, {"t2", b.t2}, {"lhs", b.lhs}, {"rhs", b.rhs}});
  r.details = {{"curve", "first frozen member of the forward quasi-geodesic family"}, {"intervals", iv},
               {"criterion", "max lhs / rhs <= 1 + tolerance"}};
  return r;
}

CheckRecord check_vector_ratio(Context& c) {
  const double tol = c.scenario().tolerance("vector_ratio", 0.05);
  const BoundCheck res = vector_ratio_check(c.trace(), c.points());
  CheckRecord r = asserted("vector_ratio", kAnchorVector, res.worst_ratio, 1.0 + tol, res.holds(tol));
  double worst_lhs = 0.0;
  for (const IntervalBound& b : res.intervals) worst_lhs = std::max(worst_lhs, b.lhs);
  r.details = {{"probes", "coordinate vectors at the grid nodes nearest the sample points"},
               {"pairs", res.intervals.size()},
               {"max_lhs", worst_lhs},
               {"criterion", "max lhs / rhs <= 1 + tolerance"}};
  return r;
}

CheckRecord check_acceleration_derivative(Context& c) {
  // A straight coordinate segment is not a geodesic of the perturbed metric, so its
  // acceleration is nonzero and both sides are exercised.
  const Curve curve = probe_segment(c.points()[0], v4::add(c.points()[0], {0.3, 0.2, -0.1, 0.25}), 33);
  const AccelerationFit fit = acceleration_derivative_fit(c.trace(), curve);
  CheckRecord r = reported("acceleration_derivative", kAnchorAcceleration, fit.C);
  r.details = {{"C_fit", fit.C}, {"worst_t1", fit.worst_t1}, {"worst_t2", fit.worst_t2}, {"worst_node", fit.worst_node}, {"samples", fit.samples}};
  return r;
}

std::string sample_name(const char* stem, std::size_t k) {
  char name[64];
  std::snprintf(name, sizeof name, "%s_%03zu.bin", stem, k);
  return name;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read " + p.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write " + p.string());
  out << text;
  if (!out) throw Error(ErrorKind::Io, "write failed: " + p.string());
}

std::vector<HistoryRecord> read_history_csv(const fs::path& p) {
  std::istringstream in(read_file(p));
  std::string line;
  std::getline(in, line);
  std::vector<HistoryRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    HistoryRecord r;
    std::vector<double> v;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) v.push_back(std::strtod(cell.c_str(), nullptr));
    if (v.size() != 11) throw Error(ErrorKind::Io, "malformed history row in " + p.string());
    r.step = static_cast<long>(v[0]);
    r.t = v[1];
    r.dt = v[2];
    r.F = v[3];
    r.G = v[4];
    r.vol = v[5];
    r.sup_rm = v[6];
    r.sup_drm[0] = v[7];
    r.sup_drm[1] = v[8];
    r.sup_drm[2] = v[9];
    r.grad_l2_sq = v[10];
    out.push_back(r);
  }
  return out;
}

FlowTrace read_trace(const fs::path& dir) {
  const nlohmann::json meta = nlohmann::json::parse(read_file(dir / "trace.json"));
  auto data = std::make_shared<FlowTrace::Data>();
  data->t_begin = meta.at("t_begin").get<double>();
  data->t_end = meta.at("t_end").get<double>();
  data->completed = meta.at("completed").get<bool>();
  data->termination = meta.at("termination").get<std::string>();
  const auto& samples = meta.at("samples");
  for (std::size_t k = 0; k < samples.size(); ++k) {
    SampledState s;
    s.t = samples[k].at("t").get<double>();
    s.grad_l2_sq = samples[k].at("grad_l2_sq").get<double>();
    const Field m = read_field_binary((dir / "snapshots" / sample_name("metric", k)).string());
    const Field gr = read_field_binary((dir / "snapshots" / sample_name("grad", k)).string());
    s.metric = MetricField(m.grid());
    s.metric.data() = m.data();
    s.grad = SymTensorField(gr.grid(), "grad");
    s.grad.data() = gr.data();
    data->samples.push_back(std::move(s));
  }
  data->history = read_history_csv(dir / "history.csv");
  if (data->samples.empty()) throw Error(ErrorKind::Io, "trace in " + dir.string() + " has no samples");
  return FlowTrace(data);
}

}  // namespace

FlowTrace run_flow(const Scenario& s, double dt_factor) {
  FlowOptions o = flow_options(s);
  o.dt_safety *= dt_factor;
  return run(initial_metric(s), s.t_final, sample_schedule(s), o);
}

VerificationReport verify(const ScenarioTraces& t) {
  VerificationReport rep;
  rep.scenario = t.scenario.name;
  if (t.scenario.eps > Scenario::kMaxStableEps)
    rep.notes.push_back("generator.eps above the documented stability range (0.1)");
  if (!t.trace.completed()) throw Error(ErrorKind::Numerical, "flow aborted: " + t.trace.termination());
  if (t.half_dt && !t.half_dt->completed()) throw Error(ErrorKind::Numerical, "half-dt flow aborted: " + t.half_dt->termination());
  Context ctx(t);
  using Fn = std::function<CheckRecord(Context&)>;
  const std::vector<std::pair<std::string, Fn>> table = {
      {"energy_monotone", check_energy_monotone},
      {"energy_identity", check_energy_identity},
      {"volume_invariance", check_volume},
      {"gauss_bonnet", check_gauss_bonnet},
      {"decay_monitors", check_decay},
      {"open_set_volume", check_open_set_volume},
      {"quasi_geodesic_forward", [](Context& c) { return check_family(c, QgDirection::Forward); }},
      {"quasi_geodesic_backward", [](Context& c) { return check_family(c, QgDirection::Backward); }},
      {"tube", check_tube},
      {"noncollapsing", check_noncollapsing},
      {"injectivity", check_injectivity},
      {"distance_holder", check_holder},
      {"gh_trend", check_gh},
      {"length_derivative", check_length_derivative},
      {"vector_ratio", check_vector_ratio},
      {"acceleration_derivative", check_acceleration_derivative},
  };
  const Scenario& s = t.scenario;
  // Shared quantities are filled before the checks fan out, so the checks only read them.
  if (s.enabled("injectivity") || s.enabled("distance_holder") || s.enabled("gh_trend")) ctx.distances();
  if (s.enabled("injectivity") || s.enabled("tube")) ctx.final_inj();
  if (s.enabled("quasi_geodesic_forward") || s.enabled("length_derivative")) ctx.family(QgDirection::Forward);

  auto timed = [&ctx](const Fn& fn) {
    const auto t0 = std::chrono::steady_clock::now();
    CheckRecord r = fn(ctx);
    r.runtime = seconds_since(t0);
    return r;
  };
  std::vector<std::future<CheckRecord>> pending;
  const auto policy = thread_count() > 1 ? std::launch::async : std::launch::deferred;
  for (const auto& [name, fn] : table)
    if (s.enabled(name)) pending.push_back(std::async(policy, timed, fn));
  for (auto& f : pending) rep.add(f.get());
  rep.notes.push_back("report-only checks fit constants the source leaves non-constructive; they never fail the run");
  return rep;
}

std::string resolve_output_dir(const Scenario& s) {
  const char* env = std::getenv("L2FLOW_OUTPUT_DIR");
  return env && *env ? std::string(env) : s.output_dir;
}

void write_trace_dir(const Scenario& s, const FlowTrace& trace, const std::string& dir) {
  const fs::path root(dir);
  fs::create_directories(root / "snapshots");
  write_file(root / "scenario.txt", scenario_text(s));
  write_history_csv(trace, (root / "history.csv").string());
  nlohmann::json samples = nlohmann::json::array();
  for (std::size_t k = 0; k < trace.sample_count(); ++k) {
    samples.push_back({{"t", trace.sample_time(k)}, {"grad_l2_sq", trace.sample_grad_l2_sq(k)}});
    write_field_binary(trace.sample_metric(k), (root / "snapshots" / sample_name("metric", k)).string());
    SymTensorField grad = trace.sample_velocity(k);
    for (double& v : grad.data()) v = -v;
    write_field_binary(grad, (root / "snapshots" / sample_name("grad", k)).string());
  }
  const nlohmann::json meta = {{"t_begin", trace.t_begin()},
                               {"t_end", trace.t_end()},
                               {"completed", trace.completed()},
                               {"termination", trace.termination()},
                               {"samples", samples}};
  write_file(root / "trace.json", meta.dump(2) + "\n");
}

VerificationReport run_scenario(const Scenario& s, ScenarioTraces* traces) {
  const std::string dir = resolve_output_dir(s);
  ScenarioTraces t{s, run_flow(s), std::nullopt};
  write_trace_dir(s, t.trace, dir);
  if (!t.trace.completed()) throw Error(ErrorKind::Numerical, "flow aborted: " + t.trace.termination());
  if (s.dt_halving_check) {
    t.half_dt = run_flow(s, 0.5);
    write_trace_dir(s, *t.half_dt, (fs::path(dir) / "half_dt").string());
  }
  VerificationReport rep = verify(t);
  write_file(fs::path(dir) / "report.json", rep.to_json().dump(2) + "\n");
  write_file(fs::path(dir) / "summary.txt", rep.summary());
  if (traces) *traces = std::move(t);
  return rep;
}

ScenarioTraces load_trace_dir(const std::string& dir) {
  const fs::path root(dir);
  ScenarioTraces t{load_scenario((root / "scenario.txt").string()), read_trace(root), std::nullopt};
  if (fs::exists(root / "half_dt" / "trace.json")) t.half_dt = read_trace(root / "half_dt");
  return t;
}

VerificationReport verify_trace_dir(const std::string& dir) {
  const ScenarioTraces t = load_trace_dir(dir);
  VerificationReport rep = verify(t);
  write_file(fs::path(dir) / "report.json", rep.to_json().dump(2) + "\n");
  write_file(fs::path(dir) / "summary.txt", rep.summary());
  return rep;
}

VerificationReport load_report(const std::string& dir) {
  const fs::path p = fs::path(dir) / "report.json";
  try {
    return VerificationReport::from_json(nlohmann::json::parse(read_file(p)));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::Io, p.string() + ": " + e.what());
  }
}

GradientCheck gradient_check(const Scenario& s) {
  const MetricField g = initial_metric(s);
  g.validate();
  GradientCheck out;
  const double h = g.grid().max_spacing();
  out.tolerance = 5.0 * h * h;
  const GradientField disc = grad_F_discrete(g);
  const GradientField ana = grad_F_analytic(g);
  const GradientField gg = grad_G_discrete(g);
  const double norm = std::sqrt(l2_inner(disc.grad, disc.grad, g));
  SymTensorField four_g = gg.grad;
  for (double& v : four_g.data()) v *= 4.0;
  if (norm > 0.0) {
    out.analytic_error = relative_l2_error(ana.grad, disc.grad, g);
    out.gauss_bonnet_error = relative_l2_error(four_g, disc.grad, g);
  } else {
    out.analytic_error = std::sqrt(l2_inner(ana.grad, ana.grad, g));
    out.gauss_bonnet_error = std::sqrt(l2_inner(four_g, four_g, g));
  }
  const double cv = g.grid().cell_volume();
  for (std::size_t p : {std::size_t{0}, g.points() / 3, 2 * g.points() / 3}) {
    double partials[kSymComponents];
    for (int c = 0; c < kSymComponents; ++c) partials[c] = grad_F_probe_component(g, p, c, 1e-5);
    const Mat4 probe = partials_to_gradient(partials, g.matrix(p), g.sqrt_det(p), cv);
    const Mat4 adj = disc.grad.matrix(p);
    double scale = 0.0, diff = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        scale = std::max(scale, std::abs(adj[i][j]));
        diff = std::max(diff, std::abs(probe[i][j] - adj[i][j]));
      }
    // At a critical point only the probe's O(spacing^2) truncation remains, compared absolutely.
    out.probe_error = std::max(out.probe_error, scale > 0.0 ? diff / scale : diff);
    if (scale == 0.0) out.probe_tolerance = kCriticalProbeTolerance;
    out.probes += kSymComponents;
  }
  return out;
}

}  // namespace l2flow
