#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

#include "l2flow/curvature.hpp"
#include "l2flow/field_io.hpp"
#include "l2flow/linalg4.hpp"
#include "l2flow/metric.hpp"
#include "l2flow/pointwise.hpp"
#include "oracles/conformal.hpp"

using namespace l2flow;

namespace {

Tensor4 full_riemann_at(const CurvatureBundle& cb, std::size_t p) { return riemann_full(riemann_expand(cb.riemann.at(p))); }

// Relative L2 distance between the stencil Riemann tensor and the closed form.
double conformal_error(int n, double eps) {
  const TorusGrid grid = TorusGrid::unit(n);
  const MetricField g = conformal_mode_metric(grid, eps, 0, 1);
  const CurvatureBundle cb = build_curvature(g, 0);
  const oracle::ConformalMode mode{eps, 0, 1, 1.0};
  double num = 0.0, den = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double x = grid.position(p)[0];
    const auto exact = mode.riemann(x);
    const Tensor4 r = full_riemann_at(cb, p);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k)
          for (int l = 0; l < 4; ++l) {
            const double d = r[i][j][k][l] - exact[i][j][k][l];
            num += d * d;
            den += exact[i][j][k][l] * exact[i][j][k][l];
          }
  }
  return std::sqrt(num / den);
}

}  // namespace

TEST_CASE("grid index arithmetic wraps on every axis") {
  const TorusGrid grid = TorusGrid::unit(8);
  CHECK(grid.size() == 4096);
  CHECK(grid.index(-1, 0, 0, 0) == grid.index(7, 0, 0, 0));
  CHECK(grid.index(0, 9, 0, 0) == grid.index(0, 1, 0, 0));
  const std::size_t p = grid.index(3, 7, 0, 5);
  CHECK(grid.shifted(p, 1, 2) == grid.index(3, 1, 0, 5));
  CHECK(grid.shifted(p, 2, -1) == grid.index(3, 7, 7, 5));
  CHECK(grid.coords(p) == std::array<int, 4>{3, 7, 0, 5});
  CHECK_THROWS_AS(TorusGrid::unit(7), Error);
  CHECK_THROWS_AS(TorusGrid(8, {1.0, 0.0, 1.0, 1.0}), Error);
}

TEST_CASE("flat metric has identically zero curvature and f_k") {
  const MetricField g = flat_metric(TorusGrid::unit(8));
  const CurvatureBundle cb = build_curvature(g, 3);
  CHECK(sup_norm(cb.riemann) == 0.0);
  CHECK(sup_norm(cb.ricci) == 0.0);
  for (int k = 0; k <= 3; ++k) CHECK(sup_norm(cb.fk[k]) == 0.0);
  CHECK(lp_norm(cb.nabla_norm[0], 2.0, g) == 0.0);
}

TEST_CASE("non positive definite metric is rejected with its grid index") {
  MetricField g = flat_metric(TorusGrid::unit(8));
  Mat4 bad = identity_mat();
  bad[2][2] = -0.5;
  g.set(g.grid().index(1, 2, 3, 4), bad);
  try {
    build_curvature(g, 0);
    FAIL("expected rejection");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NotPositiveDefinite);
    CHECK(std::string(e.what()).find("(1,2,3,4)") != std::string::npos);
  }
  CHECK_THROWS_AS(build_curvature(flat_metric(TorusGrid::unit(8)), 4), Error);
}

TEST_CASE("stencil Riemann tensor matches the conformal closed form") {
  const double e16 = conformal_error(16, 0.01);
  const double h = 1.0 / 16;
  MESSAGE("relative L2 error at N=16: " << e16);
  CHECK(e16 <= h * h);
  const double e32 = conformal_error(32, 0.01);
  MESSAGE("refinement ratio 16->32: " << e16 / e32);
  CHECK(e16 / e32 > 12.0);
}

TEST_CASE("constant rescaling ladder") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 7);
  const double c = 3.7;
  const CurvatureBundle a = build_curvature(g, 1);
  const CurvatureBundle b = build_curvature(g.scaled(c), 1);
  double dr = 0.0, dsc = 0.0, drc = 0.0, dnorm = 0.0, rmax = 0.0, smax = 0.0;
  for (std::size_t p = 0; p < g.points(); ++p) {
    for (int s = 0; s < kRiemannComponents; ++s) {
      dr = std::max(dr, std::abs(b.riemann(p, s) - c * a.riemann(p, s)));
      rmax = std::max(rmax, std::abs(a.riemann(p, s)));
    }
    dsc = std::max(dsc, std::abs(b.scalar(p, 0) - a.scalar(p, 0) / c));
    smax = std::max(smax, std::abs(a.scalar(p, 0)));
    for (int s = 0; s < kSymComponents; ++s) drc = std::max(drc, std::abs(b.ricci(p, s) - a.ricci(p, s)));
    dnorm = std::max(dnorm, std::abs(b.rm_norm_sq(p, 0) - a.rm_norm_sq(p, 0) / (c * c)) / a.rm_norm_sq(p, 0));
  }
  CHECK(dr <= 1e-12 * rmax * c);
  CHECK(dsc <= 1e-12 * smax);
  CHECK(drc <= 1e-12);
  CHECK(dnorm <= 1e-10);
}

TEST_CASE("Riemann symmetries and first Bianchi on generated metrics") {
  for (std::uint64_t seed = 1; seed <= 4; ++seed) {
    const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.08, 2, seed);
    CHECK(riemann_symmetry_violation(g) <= 1e-9);
  }
  CHECK(riemann_symmetry_violation(conformal_mode_metric(TorusGrid::unit(8), 0.05, 2, 1)) <= 1e-9);
}

TEST_CASE("traceless Ricci identity and trace-free by construction") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 3);
  const CurvatureBundle cb = build_curvature(g, 0);
  for (std::size_t p = 0; p < g.points(); p += 37) {
    const double rc2 = cb.rc_norm_sq(p, 0);
    const double r = cb.scalar(p, 0);
    CHECK(cb.traceless_norm_sq(p, 0) == doctest::Approx(rc2 - 0.25 * r * r).epsilon(1e-10).scale(rc2));
    Mat4 gi;
    double sq;
    spd_inverse4(g.matrix(p), gi, sq);
    CHECK(std::abs(frob4(gi, cb.traceless_ricci.matrix(p))) <= 1e-12 * (std::abs(r) + 1e-30) + 1e-15);
    const Mat4 rc = cb.ricci.matrix(p);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) CHECK(rc[i][j] == rc[j][i]);
  }
}

TEST_CASE("f_k scales like an inverse metric") {
  const MetricField flat = flat_metric(TorusGrid::unit(8));
  for (int k = 0; k <= 3; ++k) CHECK(fk_scaling_check(flat, k, 2.0) == 0.0);
  const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.05, 1, 11);
  CHECK(fk_scaling_check(g, 1, 1.0) == 0.0);
  CHECK(fk_scaling_check(g, 2, 3.7) <= 1e-10);
}

TEST_CASE("frame norm of nabla Rm agrees with index raising by the inverse metric") {
  const MetricField g = random_band_limited_metric(TorusGrid::unit(8), 0.06, 1, 5);
  const CurvatureBundle cb = build_curvature(g, 1);
  for (std::size_t p = 0; p < g.points(); p += 997) {
    Mat4 gi;
    double sq;
    spd_inverse4(g.matrix(p), gi, sq);
    // T_cijkl T^cijkl with all five indices raised explicitly.
    std::array<Tensor4, 4> t{};
    for (int c = 0; c < 4; ++c) t[c] = riemann_full(riemann_expand(cb.nabla_rm[0].at(p) + c * kRiemannComponents));
    double s = 0.0;
    for (int c = 0; c < 4; ++c)
      for (int c2 = 0; c2 < 4; ++c2)
        for (int i = 0; i < 4; ++i)
          for (int i2 = 0; i2 < 4; ++i2)
            for (int j = 0; j < 4; ++j)
              for (int j2 = 0; j2 < 4; ++j2)
                for (int k = 0; k < 4; ++k)
                  for (int k2 = 0; k2 < 4; ++k2)
                    for (int l = 0; l < 4; ++l)
                      for (int l2 = 0; l2 < 4; ++l2)
                        s += gi[c][c2] * gi[i][i2] * gi[j][j2] * gi[k][k2] * gi[l][l2] * t[c][i][j][k][l] * t[c2][i2][j2][k2][l2];
    CHECK(cb.nabla_norm[1](p, 0) == doctest::Approx(std::sqrt(s)).epsilon(1e-10));
  }
}

TEST_CASE("second Bianchi identity holds to stencil accuracy") {
  auto violation = [](int n) {
    const MetricField g = random_band_limited_metric(TorusGrid::unit(n), 0.05, 1, 9);
    const CurvatureBundle cb = build_curvature(g, 1);
    double worst = 0.0, scale = 0.0;
    for (std::size_t p = 0; p < g.points(); ++p) {
      std::array<Tensor4, 4> t{};
      for (int c = 0; c < 4; ++c) t[c] = riemann_full(riemann_expand(cb.nabla_rm[0].at(p) + c * kRiemannComponents));
      for (int a = 0; a < 4; ++a)
        for (int b = 0; b < 4; ++b)
          for (int c = 0; c < 4; ++c)
            for (int i = 0; i < 4; ++i)
              for (int j = 0; j < 4; ++j) {
                scale = std::max(scale, std::abs(t[a][b][c][i][j]));
                worst = std::max(worst, std::abs(t[a][b][c][i][j] + t[b][c][a][i][j] + t[c][a][b][i][j]));
              }
    }
    return worst / scale;
  };
  const double v12 = violation(12);
  const double v24 = violation(24);
  MESSAGE("second Bianchi residual N=12: " << v12 << "  N=24: " << v24);
  CHECK(v12 < 0.05);
  CHECK(v12 / v24 > 8.0);
}

TEST_CASE("L^p norms: homogeneity and the conformal quadrature") {
  const MetricField g = conformal_mode_metric(TorusGrid::unit(16), 0.01, 0, 1);
  const CurvatureBundle cb = build_curvature(g, 0);
  Field scaled = cb.nabla_norm[0];
  for (double& v : scaled.data()) v *= 5.0;
  CHECK(lp_norm(scaled, 2.0, g) == doctest::Approx(5.0 * lp_norm(cb.nabla_norm[0], 2.0, g)).epsilon(1e-13));
  CHECK_THROWS_AS(lp_norm(scaled, 0.5, g), Error);

  const oracle::ConformalMode mode{0.01, 0, 1, 1.0};
  double exact = 0.0;
  // The closed-form integrand depends on x^0 only; a fine midpoint rule is exact to rounding.
  const int m = 4096;
  for (int i = 0; i < m; ++i) {
    const double x = (i + 0.5) / m;
    exact += mode.rm_sq(x) * mode.sqrt_det(x) / m;
  }
  const double l2sq = std::pow(lp_norm(cb.nabla_norm[0], 2.0, g), 2.0);
  const double h = 1.0 / 16;
  CHECK(std::abs(l2sq - exact) / exact <= h * h);
  CHECK(sup_norm(cb.nabla_norm[0]) > 0.0);
}

TEST_CASE("binary snapshot round trip is exact") {
  const MetricField g = random_band_limited_metric(TorusGrid(8, {1.0, 2.0, 1.5, 1.0}), 0.05, 1, 2);
  const auto path = (std::filesystem::temp_directory_path() / "l2flow_field_roundtrip.bin").string();
  write_field_binary(g, path);
  const Field back = read_field_binary(path);
  CHECK(back.name() == "metric");
  CHECK(back.components() == 10);
  CHECK(back.grid().same_shape(g.grid()));
  CHECK(back.data() == g.data());
  std::remove(path.c_str());
}

TEST_CASE("seeded band-limited metric is reproducible and bounded") {
  const TorusGrid grid = TorusGrid::unit(8);
  const MetricField a = random_band_limited_metric(grid, 0.05, 2, 42);
  const MetricField b = random_band_limited_metric(grid, 0.05, 2, 42);
  const MetricField c = random_band_limited_metric(grid, 0.05, 2, 43);
  CHECK(a.data() == b.data());
  CHECK(a.data() != c.data());
  double dev = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const Mat4 m = a.matrix(p);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) dev = std::max(dev, std::abs(m[i][j] - (i == j ? 1.0 : 0.0)));
  }
  CHECK(dev <= 0.05 + 1e-15);
  CHECK(dev > 0.01);
}
