#include "l2flow/metric.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include "l2flow/linalg4.hpp"
#include "l2flow/parallel.hpp"

namespace l2flow {

void sym_eig_range4(const Mat4& a, double& lo, double& hi) {
  Eigen::Matrix4d m;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) m(i, j) = a[i][j];
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(m, Eigen::EigenvaluesOnly);
  lo = es.eigenvalues()(0);
  hi = es.eigenvalues()(3);
}

double Rng::normal() {
  // Box-Muller; the sine branch is discarded to keep the draw count fixed per call.
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

bool MetricField::is_positive_definite(std::size_t p) const noexcept {
  Mat4 l;
  return cholesky4(matrix(p), l);
}

void MetricField::validate() const {
  for (std::size_t p = 0; p < points(); ++p) {
    const double* v = at(p);
    for (int c = 0; c < kSymComponents; ++c) {
      if (!std::isfinite(v[c])) {
        const auto ix = grid().coords(p);
        throw Error(ErrorKind::NotPositiveDefinite, "non-finite metric component at grid index (" + std::to_string(ix[0]) + "," +
                                                        std::to_string(ix[1]) + "," + std::to_string(ix[2]) + "," +
                                                        std::to_string(ix[3]) + ")");
      }
    }
    if (!is_positive_definite(p)) {
      const auto ix = grid().coords(p);
      throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite at grid index (" + std::to_string(ix[0]) + "," +
                                                      std::to_string(ix[1]) + "," + std::to_string(ix[2]) + "," +
                                                      std::to_string(ix[3]) + ")");
    }
  }
}

double MetricField::sqrt_det(std::size_t p) const noexcept {
  Mat4 l;
  if (!cholesky4(matrix(p), l)) return std::nan("");
  return l[0][0] * l[1][1] * l[2][2] * l[3][3];
}

double MetricField::volume() const {
  double v = 0.0;
  for (std::size_t p = 0; p < points(); ++p) v += sqrt_det(p);
  return v * grid().cell_volume();
}

MetricField MetricField::scaled(double c) const {
  MetricField out(grid());
  for (std::size_t i = 0; i < data().size(); ++i) out.data()[i] = c * data()[i];
  return out;
}

MetricField flat_metric(const TorusGrid& grid) {
  MetricField g(grid);
  for (std::size_t p = 0; p < grid.size(); ++p) g.set(p, identity_mat());
  return g;
}

MetricField anisotropic_flat_metric(const TorusGrid& grid) { return flat_metric(grid); }

MetricField conformal_mode_metric(const TorusGrid& grid, double eps, int axis, int wavenumber) {
  if (axis < 0 || axis > 3) throw Error(ErrorKind::InvalidArgument, "conformal mode axis must be 0..3");
  MetricField g(grid);
  const double k = 2.0 * std::numbers::pi * wavenumber / grid.period(axis);
  for (std::size_t p = 0; p < grid.size(); ++p) {
    const double x = grid.position(p)[axis];
    const double f = std::exp(2.0 * eps * std::sin(k * x));
    Mat4 m{};
    for (int i = 0; i < 4; ++i) m[i][i] = f;
    g.set(p, m);
  }
  return g;
}

MetricField random_band_limited_metric(const TorusGrid& grid, double eps, int max_wavenumber, std::uint64_t seed) {
  if (max_wavenumber < 1) throw Error(ErrorKind::InvalidArgument, "band-limited metric needs max_wavenumber >= 1");
  const int kmax = max_wavenumber;
  const int width = 2 * kmax + 1;

  // Half of the wavevector lattice: the first nonzero entry is positive.
  std::vector<std::array<int, 4>> waves;
  for (int a = -kmax; a <= kmax; ++a)
    for (int b = -kmax; b <= kmax; ++b)
      for (int c = -kmax; c <= kmax; ++c)
        for (int d = -kmax; d <= kmax; ++d) {
          const std::array<int, 4> k{a, b, c, d};
          int lead = 0;
          for (int v : k)
            if (v != 0) {
              lead = v;
              break;
            }
          if (lead > 0) waves.push_back(k);
        }

  Rng rng(seed);
  std::vector<std::complex<double>> coef(waves.size() * kSymComponents);
  std::array<double, kSymComponents> abs_sum{};
  for (std::size_t w = 0; w < waves.size(); ++w) {
    double k2 = 0.0;
    for (int v : waves[w]) k2 += v * v;
    for (int c = 0; c < kSymComponents; ++c) {
      const double amp = rng.normal() / (1.0 + k2);
      const double phase = 2.0 * std::numbers::pi * rng.uniform();
      coef[w * kSymComponents + c] = std::polar(amp, phase);
      abs_sum[c] += std::abs(amp);
    }
  }
  double worst = 0.0;
  for (double s : abs_sum) worst = std::max(worst, s);
  const double norm = worst > 0.0 ? eps / worst : 0.0;

  // Per-axis phase tables: exp(2 pi i k x_a / L_a) on grid nodes.
  const int n = grid.n();
  std::vector<std::complex<double>> table(4 * width * n);
  for (int ax = 0; ax < 4; ++ax)
    for (int k = -kmax; k <= kmax; ++k)
      for (int i = 0; i < n; ++i)
        table[(ax * width + (k + kmax)) * n + i] = std::polar(1.0, 2.0 * std::numbers::pi * k * i / n);

  MetricField g(grid);
  parallel_for(grid.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t p = begin; p < end; ++p) {
      const auto ix = grid.coords(p);
      std::array<double, kSymComponents> h{};
      for (std::size_t w = 0; w < waves.size(); ++w) {
        std::complex<double> e(1.0, 0.0);
        for (int ax = 0; ax < 4; ++ax) e *= table[(ax * width + (waves[w][ax] + kmax)) * n + ix[ax]];
        for (int c = 0; c < kSymComponents; ++c) h[c] += (coef[w * kSymComponents + c] * e).real();
      }
      double* v = g.at(p);
      for (int c = 0; c < kSymComponents; ++c) v[c] = (SymIndex::row[c] == SymIndex::col[c] ? 1.0 : 0.0) + norm * h[c];
    }
  });
  return g;
}

}  // namespace l2flow
