#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>

#include "l2flow/geometry_io.hpp"
#include "l2flow/quasi_geodesic.hpp"
#include "l2flow/tube.hpp"
#include "l2flow/vec4.hpp"
#include "oracles/conformal.hpp"

using namespace l2flow;

namespace {

constexpr double kPi = std::numbers::pi;

// Trace whose samples all hold the same metric with zero velocity.
FlowTrace static_trace(const MetricField& g, double t_final, int samples) {
  auto data = std::make_shared<FlowTrace::Data>();
  for (int k = 0; k < samples; ++k) {
    SampledState s;
    s.t = t_final * k / (samples - 1);
    s.metric = g;
    s.grad = SymTensorField(g.grid(), "grad");
    data->samples.push_back(std::move(s));
  }
  data->t_end = t_final;
  data->completed = true;
  return FlowTrace(data);
}

FlowTrace short_perturbed_trace() {
  const MetricField g0 = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 2);
  FlowOptions o;
  o.dt_safety = 1.0;
  o.integrator = Integrator::Midpoint;
  o.monitor_order = 0;
  const FlowState s = make_state(g0, 0.0);
  const double t_final = 12.0 * dt_stable(s, o);
  return run(g0, t_final, SampleSchedule::uniform(4, t_final), o);
}

double flat_disc_area(double r) { return 4.0 / 3.0 * kPi * r * r * r; }

}  // namespace

TEST_CASE("flat distances: half period, diagonal and zero") {
  const MetricField g = flat_metric(TorusGrid::unit(12));
  const GeodesicSolver s(g);
  CHECK(s.distance({0, 0, 0, 0}, {0.5, 0, 0, 0}) == doctest::Approx(0.5).epsilon(1e-10));
  CHECK(s.distance({0.9, 0, 0, 0}, {0.1, 0, 0, 0}) == doctest::Approx(0.2).epsilon(1e-10));
  CHECK(s.distance({0.3, 0.2, 0.1, 0.7}, {0.3, 0.2, 0.1, 0.7}) == 0.0);
  const Curve c = s.geodesic({0.3, 0.2, 0.1, 0.7}, {0.3, 0.2, 0.1, 0.7});
  CHECK(curve_length(s.interpolator(), c) == 0.0);
  CHECK(diameter(g, {{0, 0, 0, 0}, {0.5, 0.5, 0.5, 0.5}, {0.25, 0.5, 0, 0.75}}) == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("flat geodesic is a straight segment with zero acceleration") {
  const MetricField g = flat_metric(TorusGrid::unit(12));
  const GeodesicSolver s(g);
  const Vec4 x{0.1, 0.2, 0.3, 0.4}, y{0.35, 0.1, 0.5, 0.3};
  const Curve c = s.geodesic(x, y);
  CHECK(c.certified);
  const Vec4 d = v4::sub(c.points.back(), c.points.front());
  const double n = static_cast<double>(c.size() - 1);
  for (std::size_t k = 0; k < c.size(); ++k) {
    const Vec4 expect = v4::add(c.points.front(), d, k / n);
    CHECK(v4::inf_norm(v4::sub(c.points[k], expect)) <= 1e-9);
  }
  for (double a : curve_accelerations(s.interpolator(), c)) CHECK(a <= 1e-9);
}

TEST_CASE("scaling the metric by c^2 scales distances by c") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(12), 0.05, 1, 4);
  const MetricField g2 = g.scaled(1.21);
  const std::vector<Vec4> pts = sample_points(g.grid(), 5, 7);
  const auto d1 = all_pairs_distances(g, pts);
  const auto d2 = all_pairs_distances(g2, pts);
  for (std::size_t i = 0; i < pts.size(); ++i)
    for (std::size_t j = i + 1; j < pts.size(); ++j) CHECK(d2[i][j] == doctest::Approx(1.1 * d1[i][j]).epsilon(0.01));
}

TEST_CASE("all-pairs distances form a metric on the sample set") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(12), 0.05, 1, 1);
  const std::vector<Vec4> pts = sample_points(g.grid(), 8, 3);
  const auto d = all_pairs_distances(g, pts);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    CHECK(d[i][i] == 0.0);
    for (std::size_t j = 0; j < pts.size(); ++j) {
      CHECK(d[i][j] == d[j][i]);
      if (i != j) CHECK(d[i][j] > 0.0);
      for (std::size_t k = 0; k < pts.size(); ++k) CHECK(d[i][k] <= d[i][j] + d[j][k] + 1e-14);
    }
  }
}

TEST_CASE("relaxed geodesic on a perturbed metric: certified, no longer than the graph path, curve bounds") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(12), 0.05, 1, 1);
  const GeodesicSolver s(g);
  const Vec4 x{0.1, 0.2, 0.3, 0.4}, y{0.5, 0.3, 0.1, 0.7};
  const Curve c = s.geodesic(x, y);
  const double len = curve_length(s.interpolator(), c);
  CHECK(c.certified);
  CHECK(len <= curve_length(s.interpolator(), s.graph_path(x, y)));
  // Continuum length of the unperturbed straight segment: the metric deviates by at most 5%.
  const double flat = std::sqrt(0.4 * 0.4 + 0.1 * 0.1 + 0.2 * 0.2 + 0.3 * 0.3);
  CHECK(std::abs(len / flat - 1.0) <= 0.05);
  // Samples no farther apart than 2h and uniform speed.
  for (std::size_t k = 0; k + 1 < c.size(); ++k) CHECK(v4::inf_norm(v4::sub(c.points[k + 1], c.points[k])) < 2.0 / 12.0);
  for (double v : curve_speeds(s.interpolator(), c)) CHECK(v == doctest::Approx(len).epsilon(1e-3));
  for (double a : curve_accelerations(s.interpolator(), c)) CHECK(a <= 0.01 * len * len);
}

TEST_CASE("closed loops and injectivity estimate on flat tori") {
  const InjEstimate unit = inj_estimate(flat_metric(TorusGrid::unit(12)));
  CHECK(unit.value == doctest::Approx(0.5).epsilon(1e-9));
  CHECK_FALSE(unit.low_confidence);
  const InjEstimate aniso = inj_estimate(anisotropic_flat_metric(TorusGrid(12, {1.0, 2.0, 2.0, 2.0})));
  CHECK(aniso.value == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(aniso.axis_loops[1] == doctest::Approx(2.0).epsilon(1e-9));
}

TEST_CASE("injectivity estimate on a conformal metric stays within eps of 0.5") {
  const double eps = 0.05;
  const InjEstimate e = inj_estimate(conformal_mode_metric(TorusGrid::unit(12), eps, 0, 1));
  // Loops along axis 0 see the averaged factor; transverse loops can sit where exp(u) = exp(-eps).
  CHECK(std::abs(e.value - 0.5) <= eps * 0.5 * 1.1);
  CHECK(e.value <= 0.5);
  CHECK(e.axis_loops[1] == doctest::Approx(std::exp(-eps)).epsilon(2e-3));
}

TEST_CASE("ball volume on the flat torus matches the Euclidean ball") {
  const MetricField g = flat_metric(TorusGrid::unit(16));
  const double omega4 = kPi * kPi / 2.0;
  const double v = ball_volume(g, {0.3, 0.4, 0.5, 0.6}, 0.2);
  CHECK(v == doctest::Approx(omega4 * std::pow(0.2, 4)).epsilon(0.03));
}

TEST_CASE("perturbed metric is non-collapsed at delta 0.9") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(12), 0.05, 1, 1);
  const double margin = noncollapsing_check(g, 0.9, sample_points(g.grid(), 3, 11), {0.1, 0.2});
  CHECK(margin > 0.0);
  CHECK(margin < 0.3);
}

TEST_CASE("normal disc area: flat ball and the curvature correction on a conformal metric") {
  {
    const MetricField g = flat_metric(TorusGrid::unit(12));
    const MetricInterpolator mi(g);
    const NormalDisc d = exp_normal_disc(mi, {0.5, 0.5, 0.5, 0.5}, {0.6, 0.8, 0.0, 0.0}, 0.1, 3, 32);
    CHECK(d.area == doctest::Approx(flat_disc_area(0.1)).epsilon(1e-9));
    const NormalDisc small = exp_normal_disc(mi, {0.5, 0.5, 0.5, 0.5}, {1, 0, 0, 0}, 1e-6, 3, 32);
    for (const DiscPoint& p : small.points) CHECK(v4::inf_norm(v4::sub(p.x, small.center)) <= 1e-6);
  }
  // exp of a 3-plane V through p has sqrt det = 1 - Ric_V(x, x)/6 + O(|x|^3) in normal coordinates,
  // Ric_V(x, x) = sum_{e in V} K(e, x) |x|^2. Integrated over the r-ball:
  // Area = (4/3) pi r^3 (1 - r^2 S_V / 30), S_V = sum of sectional curvatures over ordered pairs in V.
  const oracle::ConformalMode mode{0.1, 0, 1, 1.0};
  const MetricField g = conformal_mode_metric(TorusGrid::unit(16), mode.eps, 0, 1);
  const MetricInterpolator mi(g);
  const double x0 = 0.25, r = 0.15;
  const oracle::Tensor4 R = mode.riemann(x0);
  const double e4u = std::exp(4.0 * mode.u(x0));
  const int plane[3] = {0, 2, 3};  // normal to e_1
  double sv = 0.0;
  for (int i : plane)
    for (int j : plane)
      if (i != j) sv += R[i][j][j][i] / e4u;
  const double expected = flat_disc_area(r) * (1.0 - r * r * sv / 30.0);
  const NormalDisc d = exp_normal_disc(mi, {x0, 0.5, 0.5, 0.5}, {0, 1, 0, 0}, r, 4, 64);
  CHECK(d.area == doctest::Approx(expected).epsilon(0.05));
  // The correction is resolved, not just the flat leading term.
  CHECK(std::abs(d.area - expected) < 0.5 * std::abs(flat_disc_area(r) - expected));
}

TEST_CASE("flat straight tube: exact foliation, unit projection gradient, coarea") {
  const MetricField g = flat_metric(TorusGrid::unit(12));
  const MetricInterpolator mi(g);
  const GeodesicSolver s(g);
  const Curve c = s.geodesic({0.25, 0.5, 0.5, 0.5}, {0.75, 0.5, 0.5, 0.5});
  const Tube t = build_tube(mi, c, 0.1);
  const TubeDiagnostics& d = t.diagnostics();
  CHECK(d.foliation_ok);
  CHECK(d.multi_leaf_points == 0);
  for (const NormalDisc& disc : t.discs()) {
    CHECK(disc.area == doctest::Approx(flat_disc_area(0.1)).epsilon(1e-9));
    for (const DiscPoint& p : disc.points) {
      CHECK(p.dpi == doctest::Approx(1.0).epsilon(1e-6));
      CHECK(*t.project(p.x, disc.s) == doctest::Approx(disc.s).epsilon(1e-9));
    }
  }
  // Disc spacing at most r/4.
  for (std::size_t k = 0; k + 1 < t.discs().size(); ++k) CHECK(t.discs()[k + 1].s - t.discs()[k].s <= 0.025 + 1e-12);
  CHECK_FALSE(t.project({0.5, 0.5, 0.5, 0.7}).has_value());

  const CoareaResult coarse = coarea_residual(t, [](const Vec4&) { return 1.0; }, 0.125);
  CHECK(coarse.fiber_side == doctest::Approx(0.5 * flat_disc_area(0.1)).epsilon(1e-6));
  const CoareaResult fine = coarea_residual(t, [](const Vec4&) { return 1.0; }, 0.1);
  CHECK(fine.residual <= 0.02);
  CHECK(fine.residual < coarse.residual);
  const CoareaResult half = coarea_residual(t, [](const Vec4& q) { return q[1] > 0.5 ? 1.0 : 0.0; }, 0.1);
  CHECK(half.residual <= 0.05);
  CHECK(half.fiber_side == doctest::Approx(0.5 * fine.fiber_side).epsilon(0.02));
}

TEST_CASE("flat tube around a gently bent curve: |d pi| <= 2") {
  const MetricField g = flat_metric(TorusGrid::unit(12));
  const MetricInterpolator mi(g);
  // Curvature amplitude a (2 pi / 0.5)^2 stays below beta = 0.05.
  const double a = 2.5e-4;
  Curve c;
  const int n = 48;
  for (int k = 0; k <= n; ++k) {
    const double s = 0.5 * k / n;
    c.points.push_back({0.25 + s, 0.5 + a * std::sin(2.0 * kPi * s / 0.5), 0.5, 0.5});
  }
  const Tube t = build_tube(mi, c, 0.1);
  CHECK(t.diagnostics().foliation_ok);
  CHECK(t.diagnostics().sup_dpi <= 2.0);
  CHECK(t.diagnostics().sup_dpi >= 0.99);
}

TEST_CASE("tightly bent curve: tube beyond its reach is not foliated, and hypotheses reject it") {
  const MetricField g = flat_metric(TorusGrid::unit(12));
  const MetricInterpolator mi(g);
  const double radius = 0.08;
  Curve c;
  for (int k = 0; k <= 64; ++k) {
    const double a = 1.5 * kPi * k / 64;
    c.points.push_back({0.5 + radius * std::cos(a), 0.5 + radius * std::sin(a), 0.5, 0.5});
  }
  TubeOptions o;
  o.check_hypotheses = false;
  CHECK(build_tube(mi, c, 0.04, o).diagnostics().foliation_ok);
  const Tube wide = build_tube(mi, c, 0.12, o);
  CHECK_FALSE(wide.diagnostics().foliation_ok);
  CHECK(wide.diagnostics().multi_leaf_points > 0);
  CHECK_THROWS_WITH_AS(build_tube(mi, c, 0.04), doctest::Contains("L(gamma) <= d("), Error);
}

TEST_CASE("perturbed tube at half the injectivity estimate") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(12), 0.05, 1, 1);
  const MetricInterpolator mi(g);
  const GeodesicSolver s(g);
  const Curve c = s.geodesic({0.1, 0.2, 0.3, 0.4}, {0.5, 0.3, 0.1, 0.7});
  const double r = 0.5 * inj_estimate(g).value;
  const Tube t = build_tube(mi, c, r);
  CHECK(t.diagnostics().foliation_ok);
  CHECK(t.diagnostics().sup_dpi <= 2.1);
  TubeOptions fine;
  fine.directions = 64;
  fine.radial_nodes = 6;
  const Tube tf = build_tube(mi, c, r, fine);
  CHECK(t.diagnostics().area_constant > 0.0);
  CHECK(tf.diagnostics().area_constant == doctest::Approx(t.diagnostics().area_constant).epsilon(0.2));
}

TEST_CASE("normal-coordinate Christoffel norm") {
  const MetricField flat = flat_metric(TorusGrid::unit(12));
  const GammaNorm f = gamma_norm(flat, {0.3, 0.6, 0.1, 0.8}, 0.1);
  CHECK(f.center <= 1e-10);
  CHECK(f.max_probe <= 1e-6);

  const double eps = 0.05;
  const MetricField g = conformal_mode_metric(TorusGrid::unit(12), eps, 0, 1);
  const Vec4 p{0.25, 0.5, 0.5, 0.5};
  const GammaNorm a = gamma_norm(g, p, 0.1);
  CHECK(a.center <= 1e-3 * a.max_probe);
  // Gamma ~ Rm r in normal coordinates, and Rm ~ eps k^2.
  const double scale = eps * 4.0 * kPi * kPi * 0.1;
  CHECK(a.max_probe > 0.1 * scale);
  CHECK(a.max_probe < 3.0 * scale);
  const GammaNorm refined = gamma_norm(g, p, 0.1, 0.5e-4);
  CHECK(refined.max_probe == doctest::Approx(a.max_probe).epsilon(0.2));
}

TEST_CASE("quasi-geodesic family on a static flow") {
  const FlowTrace trace = static_trace(flat_metric(TorusGrid::unit(12)), 1e-4, 5);
  const Vec4 x{0.1, 0.2, 0.3, 0.4}, y{0.4, 0.1, 0.5, 0.2};
  for (QgDirection dir : {QgDirection::Forward, QgDirection::Backward}) {
    const QuasiGeodesicFamily f = quasi_geodesic(trace, x, y, dir);
    CHECK(f.A == 0.0);
    CHECK(f.S == doctest::Approx(1e-4));
    CHECK(f.checks.size() == 20);
    for (const QgCheck& c : f.checks) {
      CHECK(c.length == doctest::Approx(c.d).epsilon(1e-12));
      CHECK(c.length_margin == doctest::Approx(0.05).epsilon(1e-9));
      CHECK(c.acceleration <= 1e-9);
    }
    CHECK(f.holds());
  }
  const QuasiGeodesicFamily same = quasi_geodesic(trace, x, x, QgDirection::Forward);
  CHECK(same.degenerate);
  CHECK(same.holds());
}

TEST_CASE("quasi-geodesic families on a perturbed flow, forward and backward") {
  const FlowTrace trace = short_perturbed_trace();
  REQUIRE(trace.completed());
  const Vec4 x{0.1, 0.2, 0.3, 0.4}, y{0.4, 0.1, 0.5, 0.2};
  const QuasiGeodesicFamily fwd = quasi_geodesic(trace, x, y, QgDirection::Forward);
  const QuasiGeodesicFamily bwd = quasi_geodesic(trace, x, y, QgDirection::Backward);
  CHECK(fwd.A > 0.0);
  CHECK(bwd.A == doctest::Approx(fwd.A).epsilon(1e-12));
  CHECK(fwd.S <= fwd.t2 - fwd.t1);
  for (const QuasiGeodesicFamily* f : {&fwd, &bwd}) {
    CHECK(f->checks.size() == 20);
    CHECK(f->holds());
    for (const QgCheck& c : f->checks) {
      CHECK(c.d <= c.length + 1e-12);
      CHECK(c.length <= c.d + f->beta);
    }
  }
  // Backward segments start at t2 - jS in the forward clock: the first one uses the final metric.
  CHECK(bwd.segments.front().d_start == doctest::Approx(distance(trace.sample_metric(trace.sample_count() - 1), x, y)).epsilon(1e-9));
}

TEST_CASE("stiff trace: interval underflow names the measured A") {
  const FlowTrace trace = short_perturbed_trace();
  QuasiGeodesicOptions o;
  o.max_segments = 1;
  CHECK_THROWS_WITH_AS(quasi_geodesic(trace, {0.1, 0.2, 0.3, 0.4}, {0.4, 0.1, 0.5, 0.2}, QgDirection::Forward, o),
                       doctest::Contains("A = "), Error);
}

TEST_CASE("curves, tubes and distance matrices serialise") {
  const MetricField g = flat_metric(TorusGrid::unit(8));
  const MetricInterpolator mi(g);
  const Curve c = geodesic(g, {0.2, 0.5, 0.5, 0.5}, {0.6, 0.5, 0.5, 0.5});
  const nlohmann::json jc = to_json(c);
  CHECK(jc["points"].size() == c.size());
  CHECK(jc["parameters"].back().get<double>() == doctest::Approx(1.0));
  TubeOptions o;
  o.directions = 8;
  o.radial_nodes = 1;
  const nlohmann::json jt = to_json(build_tube(mi, c, 0.1, o), true);
  CHECK(jt["diagnostics"]["foliation_ok"].get<bool>());
  CHECK(jt["discs"][0]["samples"].size() == 8);

  const auto path = std::filesystem::temp_directory_path() / "l2flow_distances.csv";
  write_distance_csv({{0.0, 0.5}, {0.5, 0.0}}, path.string());
  std::ifstream in(path);
  std::string header, row;
  std::getline(in, header);
  std::getline(in, row);
  CHECK(header == "i,0,1");
  CHECK(row == "0,0,0.5");
  std::filesystem::remove(path);
}
