#include "l2flow/functionals.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>

#include "l2flow/calibration.hpp"
#include "l2flow/curvature.hpp"
#include "l2flow/linalg4.hpp"
#include "l2flow/parallel.hpp"
#include "l2flow/pointwise.hpp"

namespace l2flow {
namespace {

[[noreturn]] void throw_not_pd(const TorusGrid& grid, std::size_t p) {
  const auto ix = grid.coords(p);
  throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite at grid index (" + std::to_string(ix[0]) + "," +
                                                  std::to_string(ix[1]) + "," + std::to_string(ix[2]) + "," +
                                                  std::to_string(ix[3]) + ")");
}

using Density = double (*)(const PointGeometry&, Tensor4&, Mat4&, double&);

struct PointSideValues {
  double traceless_sq = 0.0;
  double sqrt_det = 0.0;
};

// Reverse sweep: per-point jet sensitivities, then the transposed stencils. When
// `side` is given it also receives |traceless Rc|^2 and sqrt(det g) per point.
GradientField discrete_gradient(const MetricField& metric, Density density, std::vector<PointSideValues>* side = nullptr,
                                std::vector<double>* density_values = nullptr) {
  metric.validate();
  const TorusGrid& grid = metric.grid();
  const double cv = grid.cell_volume();
  Field bars(grid, kJetSize, "jet_bar");
  std::vector<double> values(grid.size());
  if (side) side->assign(grid.size(), {});
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    PointGeometry geo;
    Tensor4 r_bar;
    Mat4 ginv_bar;
    double sq_bar;
    for (std::size_t p = b; p < e; ++p) {
      if (!point_geometry(metric_jet(metric, p), geo)) throw_not_pd(grid, p);
      values[p] = density(geo, r_bar, ginv_bar, sq_bar);
      if (side) (*side)[p] = {traceless_ricci_sq(geo), geo.sqrt_det};
      double* jb = bars.at(p);
      backprop_geometry(geo, r_bar, ginv_bar, sq_bar, jb);
      for (int c = 0; c < kJetSize; ++c) jb[c] *= cv;
    }
  });
  if (density_values) *density_values = values;

  Field partials(grid, kSymComponents);
  jet_transpose(bars, partials);

  GradientField out{SymTensorField(grid, "grad"), GradientProvenance::DiscreteOracle, 0.0};
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      const Mat4 g = metric.matrix(p);
      out.grad.set(p, partials_to_gradient(partials.at(p), g, metric.sqrt_det(p), cv));
    }
  });
  double total = 0.0;
  for (double v : values) total += v;
  out.functional_value = total * cv;
  return out;
}

double rm_sq_density_only(const PointGeometry& geo) {
  return point_curvature(geo).rm_sq * geo.sqrt_det;
}

}  // namespace

EnergyReport energy(const MetricField& metric) {
  metric.validate();
  const TorusGrid& grid = metric.grid();
  std::vector<double> f(grid.size()), g(grid.size()), v(grid.size());
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    PointGeometry geo;
    for (std::size_t p = b; p < e; ++p) {
      if (!point_geometry(metric_jet(metric, p), geo)) throw_not_pd(grid, p);
      const PointCurvature pc = point_curvature(geo);
      f[p] = pc.rm_sq * geo.sqrt_det;
      g[p] = pc.traceless_sq * geo.sqrt_det;
      v[p] = geo.sqrt_det;
    }
  });
  // Serial sums keep the result independent of the thread count.
  EnergyReport r;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    r.F += f[p];
    r.G += g[p];
    r.volume += v[p];
  }
  const double cv = grid.cell_volume();
  r.F *= cv;
  r.G *= cv;
  r.volume *= cv;
  r.gauss_bonnet_residual = r.F - 4.0 * r.G;
  return r;
}

Mat4 partials_to_gradient(const double* partials, const Mat4& g, double sqrt_det, double cell_volume) {
  // dF(h) = sum_c partial_c h_c = sum_ij E^ij h_ij with E symmetric, so off-diagonal
  // partials are split over the two mirrored entries.
  Mat4 e{};
  for (int c = 0; c < kSymComponents; ++c) {
    const int i = SymIndex::row[c], j = SymIndex::col[c];
    const double v = partials[c] / (sqrt_det * cell_volume);
    if (i == j) {
      e[i][i] = v;
    } else {
      e[i][j] = e[j][i] = 0.5 * v;
    }
  }
  Mat4 grad = matmul4(matmul4(g, e), g);
  for (int i = 0; i < 4; ++i)
    for (int j = i + 1; j < 4; ++j) grad[i][j] = grad[j][i] = 0.5 * (grad[i][j] + grad[j][i]);
  return grad;
}

GradientField grad_F_discrete(const MetricField& metric) { return discrete_gradient(metric, &density_rm_sq); }

GradientField grad_G_discrete(const MetricField& metric) { return discrete_gradient(metric, &density_traceless_sq); }

FlowEvaluation evaluate_for_flow(const MetricField& metric) {
  std::vector<PointSideValues> side;
  std::vector<double> dens;
  FlowEvaluation ev;
  ev.gradient = discrete_gradient(metric, &density_rm_sq, &side, &dens);
  const double cv = metric.grid().cell_volume();
  double g = 0.0, vol = 0.0, sup = 0.0;
  for (std::size_t p = 0; p < side.size(); ++p) {
    g += side[p].traceless_sq * side[p].sqrt_det;
    vol += side[p].sqrt_det;
    sup = std::max(sup, std::sqrt(std::max(dens[p] / side[p].sqrt_det, 0.0)));
  }
  ev.energy.F = ev.gradient.functional_value;
  ev.energy.G = g * cv;
  ev.energy.volume = vol * cv;
  ev.energy.gauss_bonnet_residual = ev.energy.F - 4.0 * ev.energy.G;
  ev.sup_rm = sup;
  ev.grad_l2_sq = l2_inner(ev.gradient.grad, ev.gradient.grad, metric);
  return ev;
}

double grad_F_probe_component(const MetricField& metric, std::size_t point, int component, double probe_spacing) {
  if (!(probe_spacing > 0.0)) throw Error(ErrorKind::InvalidArgument, "probe spacing must be positive");
  const TorusGrid& grid = metric.grid();
  const int reach = kStencilHalfWidth;
  // Points whose stencil touches `point`: offsets within the half width on every axis.
  std::vector<std::size_t> touched;
  const auto c0 = grid.coords(point);
  for (int a = -reach; a <= reach; ++a)
    for (int b = -reach; b <= reach; ++b)
      for (int c = -reach; c <= reach; ++c)
        for (int d = -reach; d <= reach; ++d) touched.push_back(grid.index(c0[0] + a, c0[1] + b, c0[2] + c, c0[3] + d));

  MetricField probe = metric;
  auto local_f = [&](double shift) {
    probe(point, component) = metric(point, component) + shift;
    double s = 0.0;
    PointGeometry geo;
    for (std::size_t q : touched) {
      if (!point_geometry(metric_jet(probe, q), geo)) throw_not_pd(grid, q);
      s += rm_sq_density_only(geo);
    }
    return s * grid.cell_volume();
  };
  const double fp = local_f(probe_spacing);
  const double fm = local_f(-probe_spacing);
  const double d = (fp - fm) / (2.0 * probe_spacing);
  if (!std::isfinite(d)) {
    const auto ix = grid.coords(point);
    throw Error(ErrorKind::Numerical, "non-finite probe for component " + std::to_string(component) + " at grid index (" +
                                          std::to_string(ix[0]) + "," + std::to_string(ix[1]) + "," + std::to_string(ix[2]) +
                                          "," + std::to_string(ix[3]) + ")");
  }
  return d;
}

GradientField grad_F_analytic(const MetricField& metric) {
  if (!kCodifferentialCalibrated)
    throw Error(ErrorKind::Uncalibrated, "codifferential sign has not been calibrated against the discrete gradient");
  GradientField g = grad_F_analytic_with_sign(metric, kCodifferentialSign);
  return g;
}

GradientField grad_F_analytic_with_sign(const MetricField& metric, double sign) {
  const CurvatureBundle cb = build_curvature(metric, 0);
  const TorusGrid& grid = metric.grid();
  const Field& chr = cb.christoffel;
  auto gam = [&chr](std::size_t p, int e, int a, int b) { return chr(p, e * kSymComponents + SymIndex::of[a][b]); };

  // D_c Rc_jk, 4 blocks of 10.
  Field nabla_rc(grid, 4 * kSymComponents, "nabla_ricci");
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    double d[kSymComponents];
    for (std::size_t p = b; p < e; ++p) {
      const Mat4 rc = cb.ricci.matrix(p);
      for (int c = 0; c < 4; ++c) {
        d1_point(cb.ricci, p, c, d);
        for (int s = 0; s < kSymComponents; ++s) {
          const int j = SymIndex::row[s], k = SymIndex::col[s];
          double corr = 0.0;
          for (int x = 0; x < 4; ++x) corr += gam(p, x, c, j) * rc[x][k] + gam(p, x, c, k) * rc[j][x];
          nabla_rc(p, c * kSymComponents + s) = d[s] - corr;
        }
      }
    }
  });

  // w_ijk = D_i Rc_jk - D_j Rc_ik, stored for i<j as 6 blocks of 4.
  Field omega(grid, 6 * 4, "d_ricci");
  for (std::size_t p = 0; p < grid.size(); ++p) {
    for (int A = 0; A < 6; ++A) {
      const int i = Bivector::first[A], j = Bivector::second[A];
      for (int k = 0; k < 4; ++k)
        omega(p, A * 4 + k) = nabla_rc(p, i * kSymComponents + SymIndex::of[j][k]) - nabla_rc(p, j * kSymComponents + SymIndex::of[i][k]);
    }
  }

  GradientField out{SymTensorField(grid, "grad"), GradientProvenance::Analytic, 0.0};
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    double dw[4][24];
    for (std::size_t p = b; p < e; ++p) {
      auto w = [&omega, p](int i, int j, int k) {
        if (i == j) return 0.0;
        return Bivector::sign[i][j] * omega(p, Bivector::of[i][j] * 4 + k);
      };
      for (int a = 0; a < 4; ++a) d1_point(omega, p, a, dw[a]);
      Mat4 g = metric.matrix(p), ginv;
      double sq;
      if (!spd_inverse4(g, ginv, sq)) throw_not_pd(grid, p);

      Mat4 delta{};
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) {
          double acc = 0.0;
          for (int a = 0; a < 4; ++a)
            for (int i = 0; i < 4; ++i) {
              if (i == j || ginv[a][i] == 0.0) continue;
              double dwa = Bivector::sign[i][j] * dw[a][Bivector::of[i][j] * 4 + k];
              for (int x = 0; x < 4; ++x) dwa -= gam(p, x, a, i) * w(x, j, k) + gam(p, x, a, j) * w(i, x, k) + gam(p, x, a, k) * w(i, j, x);
              acc += ginv[a][i] * dwa;
            }
          // Adjoint of d for the full index contraction (the pairing |Rm|^2 uses):
          // <dRc, w> = 2 sum D_i Rc_jk w^ijk, hence the factor 2.
          delta[j][k] = -2.0 * acc;
        }

      const Mat4 chk = cb.check.matrix(p);
      const double rm2 = cb.rm_norm_sq(p, 0);
      Mat4 grad{};
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k) grad[j][k] = sign * (delta[j][k] + delta[k][j]) - 2.0 * chk[j][k] + 0.5 * rm2 * g[j][k];
      out.grad.set(p, grad);
    }
  });
  return out;
}

double l2_inner(const SymTensorField& a, const SymTensorField& b, const MetricField& metric) {
  const TorusGrid& grid = metric.grid();
  std::vector<double> v(grid.size());
  parallel_for(grid.size(), [&](std::size_t lo, std::size_t hi) {
    for (std::size_t p = lo; p < hi; ++p) {
      Mat4 ginv;
      double sq;
      if (!spd_inverse4(metric.matrix(p), ginv, sq)) throw_not_pd(grid, p);
      const Mat4 au = matmul4(matmul4(ginv, a.matrix(p)), ginv);
      v[p] = frob4(au, b.matrix(p)) * sq;
    }
  });
  double s = 0.0;
  for (double x : v) s += x;
  return s * grid.cell_volume();
}

double relative_l2_error(const SymTensorField& a, const SymTensorField& b, const MetricField& metric) {
  SymTensorField d(metric.grid());
  for (std::size_t i = 0; i < d.data().size(); ++i) d.data()[i] = a.data()[i] - b.data()[i];
  const double nb = l2_inner(b, b, metric);
  const double nd = l2_inner(d, d, metric);
  if (nb == 0.0) return nd == 0.0 ? 0.0 : INFINITY;
  return std::sqrt(nd / nb);
}

SignCalibration calibrate_codifferential_sign(int n, double eps, const std::vector<std::uint64_t>& seeds) {
  SignCalibration cal;
  if (seeds.empty()) throw Error(ErrorKind::InvalidArgument, "calibration needs at least one metric");
  for (std::uint64_t seed : seeds) {
    const MetricField g = random_band_limited_metric(TorusGrid::unit(n), eps, 1, seed);
    const GradientField disc = grad_F_discrete(g);
    cal.error_plus += relative_l2_error(grad_F_analytic_with_sign(g, 1.0).grad, disc.grad, g);
    cal.error_minus += relative_l2_error(grad_F_analytic_with_sign(g, -1.0).grad, disc.grad, g);
  }
  cal.error_plus /= static_cast<double>(seeds.size());
  cal.error_minus /= static_cast<double>(seeds.size());
  cal.chosen_sign = cal.error_plus <= cal.error_minus ? 1.0 : -1.0;
  return cal;
}

void append_energy_csv(const std::string& path, double t, const EnergyReport& e) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream os(path, std::ios::app);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path);
  if (fresh) os << "t,F,G,residual,volume\n";
  os << std::setprecision(17) << t << ',' << e.F << ',' << e.G << ',' << e.gauss_bonnet_residual << ',' << e.volume << '\n';
}

}  // namespace l2flow
