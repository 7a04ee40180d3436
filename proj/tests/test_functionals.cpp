#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "l2flow/calibration.hpp"
#include "l2flow/curvature.hpp"
#include "l2flow/functionals.hpp"
#include "l2flow/linalg4.hpp"
#include "oracles/conformal.hpp"

using namespace l2flow;

namespace {

SymTensorField random_direction(const TorusGrid& grid, std::uint64_t seed) {
  // Smooth random symmetric perturbation: reuse the band-limited generator minus delta.
  const MetricField m = random_band_limited_metric(grid, 1.0, 1, seed);
  SymTensorField h(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    Mat4 a = m.matrix(p);
    for (int i = 0; i < 4; ++i) a[i][i] -= 1.0;
    h.set(p, a);
  }
  return h;
}

MetricField plus(const MetricField& g, const SymTensorField& h, double s) {
  MetricField out = g;
  for (std::size_t i = 0; i < out.data().size(); ++i) out.data()[i] += s * h.data()[i];
  return out;
}

}  // namespace

TEST_CASE("flat metric: zero energies and zero gradients") {
  const MetricField g = flat_metric(TorusGrid::unit(8));
  const EnergyReport e = energy(g);
  CHECK(e.F == 0.0);
  CHECK(e.G == 0.0);
  CHECK(e.gauss_bonnet_residual == 0.0);
  CHECK(e.volume == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sup_norm(grad_F_discrete(g).grad) == 0.0);
  CHECK(sup_norm(grad_G_discrete(g).grad) == 0.0);
  CHECK(sup_norm(grad_F_analytic(g).grad) == 0.0);
}

TEST_CASE("F is invariant under constant scaling in dimension four") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 4);
  const double f = energy(g).F;
  for (double c : {0.5, 3.7}) CHECK(std::abs(energy(g.scaled(c)).F - f) <= 1e-10 * f);
}

TEST_CASE("adjoint gradient reproduces directional derivatives of the discrete F") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 21);
  const GradientField grad = grad_F_discrete(g);
  CHECK(grad.functional_value == doctest::Approx(energy(g).F).epsilon(1e-12));
  for (std::uint64_t s = 100; s < 110; ++s) {
    const SymTensorField h = random_direction(g.grid(), s);
    const double eps = 1e-4;
    const double fd = (energy(plus(g, h, eps)).F - energy(plus(g, h, -eps)).F) / (2.0 * eps);
    const double ad = l2_inner(grad.grad, h, g);
    CHECK(ad == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("adjoint gradient of G reproduces directional derivatives of the discrete G") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 22);
  const GradientField grad = grad_G_discrete(g);
  for (std::uint64_t s = 200; s < 203; ++s) {
    const SymTensorField h = random_direction(g.grid(), s);
    const double eps = 1e-4;
    const double fd = (energy(plus(g, h, eps)).G - energy(plus(g, h, -eps)).G) / (2.0 * eps);
    CHECK(l2_inner(grad.grad, h, g) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("per-component probing agrees with the adjoint gradient") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 23);
  const GradientField grad = grad_F_discrete(g);
  const double cv = g.grid().cell_volume();
  for (std::size_t p : {std::size_t{0}, std::size_t{1234}, std::size_t{4000}}) {
    double partials[kSymComponents];
    for (int c = 0; c < kSymComponents; ++c) partials[c] = grad_F_probe_component(g, p, c, 1e-5);
    const Mat4 probe = partials_to_gradient(partials, g.matrix(p), g.sqrt_det(p), cv);
    const Mat4 adj = grad.grad.matrix(p);
    double scale = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) scale = std::max(scale, std::abs(adj[i][j]));
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(std::abs(probe[i][j] - adj[i][j]) <= 1e-6 * scale);
  }
}

TEST_CASE("Gauss-Bonnet residual on T^4 converges at stencil order") {
  auto residual = [](int n) {
    const EnergyReport e = energy(conformal_mode_metric(TorusGrid::unit(n), 0.05, 0, 1));
    return std::abs(e.gauss_bonnet_residual);
  };
  const double r16 = residual(16);
  const double r32 = residual(32);
  MESSAGE("|F-4G| N=16: " << r16 << "  N=32: " << r32 << "  ratio " << r16 / r32);
  CHECK(r16 / r32 >= 12.0);
  CHECK(r16 / r32 <= 20.0);
}

TEST_CASE("energy quadrature matches the conformal closed form") {
  const double eps = 0.05;
  const EnergyReport e = energy(conformal_mode_metric(TorusGrid::unit(16), eps, 0, 1));
  const oracle::ConformalMode mode{eps, 0, 1, 1.0};
  double f = 0.0, g = 0.0;
  const int m = 4096;
  for (int i = 0; i < m; ++i) {
    const double x = (i + 0.5) / m;
    f += mode.rm_sq(x) * mode.sqrt_det(x) / m;
    g += mode.traceless_sq(x) * mode.sqrt_det(x) / m;
  }
  const double h = 1.0 / 16;
  CHECK(std::abs(e.F - f) / f <= h * h);
  CHECK(std::abs(e.G - g) / g <= h * h);
}

TEST_CASE("zeroth-order part of grad F is trace free") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 8);
  const CurvatureBundle cb = build_curvature(g, 0);
  for (std::size_t p = 0; p < g.points(); p += 53) {
    Mat4 gi;
    double sq;
    spd_inverse4(g.matrix(p), gi, sq);
    const Mat4 chk = cb.check.matrix(p);
    const Mat4 gm = g.matrix(p);
    double tr = 0.0;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) tr += gi[i][j] * (2.0 * chk[i][j] - 0.5 * cb.rm_norm_sq(p, 0) * gm[i][j]);
    CHECK(std::abs(tr) <= 1e-12 * cb.rm_norm_sq(p, 0));
  }
}

TEST_CASE("analytic gradient matches the discrete oracle on a conformal metric") {
  const int n = 16;
  const double h = 1.0 / n;
  const MetricField g = conformal_mode_metric(TorusGrid::unit(n), 0.01, 0, 1);
  const double err = relative_l2_error(grad_F_analytic(g).grad, grad_F_discrete(g).grad, g);
  MESSAGE("analytic vs discrete relative error: " << err);
  CHECK(err <= 5.0 * h * h);
}

TEST_CASE("grad F and 4 grad G agree to discretisation accuracy") {
  const int n = 12;
  const double h = 1.0 / n;
  const MetricField g = random_band_limited_metric(TorusGrid::unit(n), 0.05, 1, 2);
  SymTensorField four_g = grad_G_discrete(g).grad;
  for (double& v : four_g.data()) v *= 4.0;
  const double err = relative_l2_error(four_g, grad_F_discrete(g).grad, g);
  MESSAGE("|grad F - 4 grad G| / |grad F| = " << err);
  CHECK(err <= 5.0 * h * h);
}

TEST_CASE("frozen codifferential sign is the calibration minimiser") {
  const SignCalibration cal = calibrate_codifferential_sign(12, 0.05, {1, 2, 3, 4, 5});
  MESSAGE("mean error with +1: " << cal.error_plus << ", with -1: " << cal.error_minus);
  CHECK(cal.chosen_sign == kCodifferentialSign);
  CHECK(std::min(cal.error_plus, cal.error_minus) < 0.1 * std::max(cal.error_plus, cal.error_minus));
}
