#include "l2flow/curvature.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "l2flow/linalg4.hpp"
#include "l2flow/parallel.hpp"
#include "l2flow/pointwise.hpp"

namespace l2flow {
namespace {

int pow4(int m) { return 1 << (2 * m); }

[[noreturn]] void throw_not_pd(const TorusGrid& grid, std::size_t p) {
  const auto ix = grid.coords(p);
  throw Error(ErrorKind::NotPositiveDefinite, "metric not positive definite at grid index (" + std::to_string(ix[0]) + "," +
                                                  std::to_string(ix[1]) + "," + std::to_string(ix[2]) + "," +
                                                  std::to_string(ix[3]) + ")");
}

// Q[A][B] with sum_e Gamma^e_{ci} T_{ej..} + Gamma^e_{cj} T_{ie..} = sum_B Q[A][B] T_{B..}.
BivMat connection_on_bivectors(const double* chr, int c) {
  BivMat q{};
  auto gam = [chr, c](int e, int i) { return chr[e * kSymComponents + SymIndex::of[c][i]]; };
  for (int A = 0; A < 6; ++A) {
    const int i = Bivector::first[A], j = Bivector::second[A];
    for (int e = 0; e < 4; ++e) {
      if (e != j) q[A][Bivector::of[e][j]] += Bivector::sign[e][j] * gam(e, i);
      if (e != i) q[A][Bivector::of[i][e]] += Bivector::sign[i][e] * gam(e, j);
    }
  }
  return q;
}

// nabla T at one point for a 4^m x 20 field; writes 4^(m+1) x 20 values.
void covariant_derivative_point(const Field& t, int m, const Field& christoffel, std::size_t p, std::vector<double>& dbuf,
                                std::vector<BivMat>& tb, double* out) {
  const int nblk = pow4(m);
  const int nc = nblk * kRiemannComponents;
  const double* chr = christoffel.at(p);
  const double* tp = t.at(p);
  tb.resize(nblk);
  for (int a = 0; a < nblk; ++a) tb[a] = riemann_expand(tp + a * kRiemannComponents);
  dbuf.resize(nc);

  for (int c = 0; c < 4; ++c) {
    d1_point(t, p, c, dbuf.data());
    const BivMat q = connection_on_bivectors(chr, c);
    for (int a = 0; a < nblk; ++a) {
      BivMat r = riemann_expand(dbuf.data() + a * kRiemannComponents);
      const BivMat& x = tb[a];
      for (int A = 0; A < 6; ++A)
        for (int B = 0; B < 6; ++B) {
          double acc = 0.0;
          for (int K = 0; K < 6; ++K) acc += q[A][K] * x[K][B] + x[A][K] * q[B][K];
          r[A][B] -= acc;
        }
      // Derivative slots of T: digit s of a, slowest first.
      for (int s = 0; s < m; ++s) {
        const int place = pow4(m - 1 - s);
        const int digit = (a / place) % 4;
        const int base = a - digit * place;
        for (int e = 0; e < 4; ++e) {
          const double w = chr[e * kSymComponents + SymIndex::of[c][digit]];
          if (w == 0.0) continue;
          const BivMat& y = tb[base + e * place];
          for (int A = 0; A < 6; ++A)
            for (int B = 0; B < 6; ++B) r[A][B] -= w * y[A][B];
        }
      }
      riemann_compress(r, out + (c * nblk + a) * kRiemannComponents);
    }
  }
}

double curvature_norm_point(const double* tp, int m, const Mat4& frame, const BivMat& pb) {
  const int nblk = pow4(m);
  std::vector<BivMat> tf(nblk);
  for (int a = 0; a < nblk; ++a) {
    const BivMat x = riemann_expand(tp + a * kRiemannComponents);
    BivMat y{};
    for (int A = 0; A < 6; ++A)
      for (int K = 0; K < 6; ++K) {
        double acc = 0.0;
        for (int B = 0; B < 6; ++B) acc += pb[A][B] * x[B][K];
        y[A][K] = acc;
      }
    for (int A = 0; A < 6; ++A)
      for (int C = 0; C < 6; ++C) {
        double acc = 0.0;
        for (int K = 0; K < 6; ++K) acc += y[A][K] * pb[C][K];
        tf[a][A][C] = acc;
      }
  }
  std::vector<BivMat> tmp(nblk);
  for (int s = 0; s < m; ++s) {
    const int place = pow4(m - 1 - s);
    for (int a = 0; a < nblk; ++a) {
      const int digit = (a / place) % 4;
      const int base = a - digit * place;
      BivMat acc{};
      for (int e = 0; e < 4; ++e) {
        const double w = frame[digit][e];
        if (w == 0.0) continue;
        const BivMat& y = tf[base + e * place];
        for (int A = 0; A < 6; ++A)
          for (int B = 0; B < 6; ++B) acc[A][B] += w * y[A][B];
      }
      tmp[a] = acc;
    }
    tf.swap(tmp);
  }
  double sum = 0.0;
  for (const auto& b : tf)
    for (int A = 0; A < 6; ++A)
      for (int B = 0; B < 6; ++B) sum += b[A][B] * b[A][B];
  return std::sqrt(4.0 * sum);
}

// Orthonormal coframe M = L^{-1} for g = L L^T and its bivector action.
bool frame_at(const MetricField& metric, std::size_t p, Mat4& frame, BivMat& pb) {
  Mat4 l;
  if (!cholesky4(metric.matrix(p), l)) return false;
  frame = lower_inverse4(l);
  pb = bivector_transform(frame);
  return true;
}

}  // namespace

Field covariant_derivative_rm(const Field& t, int vector_indices, const Field& christoffel) {
  const TorusGrid& grid = t.grid();
  Field out(grid, 4 * pow4(vector_indices) * kRiemannComponents, "nabla" + std::to_string(vector_indices + 1) + "_rm");
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    std::vector<double> dbuf;
    std::vector<BivMat> tb;
    for (std::size_t p = b; p < e; ++p) covariant_derivative_point(t, vector_indices, christoffel, p, dbuf, tb, out.at(p));
  });
  return out;
}

Field curvature_tensor_norm(const Field& t, int vector_indices, const MetricField& metric) {
  const TorusGrid& grid = t.grid();
  Field out(grid, 1, "nabla" + std::to_string(vector_indices) + "_rm_norm");
  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t p = b; p < e; ++p) {
      Mat4 frame;
      BivMat pb;
      if (!frame_at(metric, p, frame, pb)) throw_not_pd(grid, p);
      out(p, 0) = curvature_norm_point(t.at(p), vector_indices, frame, pb);
    }
  });
  return out;
}

CurvatureBundle build_curvature(const MetricField& metric, int max_order) {
  if (max_order < 0 || max_order > 3) throw Error(ErrorKind::InvalidArgument, "curvature derivative order must be 0..3");
  const TorusGrid& grid = metric.grid();
  if (grid.n() < 2 * kStencilHalfWidth + 1) throw Error(ErrorKind::InvalidArgument, "grid too small for the derivative stencil");
  metric.validate();

  CurvatureBundle cb;
  cb.max_order = max_order;
  cb.christoffel = Field(grid, 4 * kSymComponents, "christoffel");
  cb.riemann = Field(grid, kRiemannComponents, "riemann");
  cb.ricci = SymTensorField(grid, "ricci");
  cb.scalar = Field(grid, 1, "scalar");
  cb.traceless_ricci = SymTensorField(grid, "traceless_ricci");
  cb.check = SymTensorField(grid, "check");
  cb.rm_norm_sq = Field(grid, 1, "rm_norm_sq");
  cb.rc_norm_sq = Field(grid, 1, "rc_norm_sq");
  cb.traceless_norm_sq = Field(grid, 1, "traceless_norm_sq");
  Field rm_norm(grid, 1, "nabla0_rm_norm");

  parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
    PointGeometry geo;
    for (std::size_t p = b; p < e; ++p) {
      if (!point_geometry(metric_jet(metric, p), geo)) throw_not_pd(grid, p);
      const PointCurvature pc = point_curvature(geo);
      double* chr = cb.christoffel.at(p);
      for (int k = 0; k < 4; ++k)
        for (int c = 0; c < kSymComponents; ++c) chr[k * kSymComponents + c] = geo.gamma2[k][SymIndex::row[c]][SymIndex::col[c]];
      riemann_compress(riemann_bivector(geo.riem), cb.riemann.at(p));
      cb.ricci.set(p, pc.ricci);
      cb.scalar(p, 0) = pc.scalar;
      cb.traceless_ricci.set(p, pc.traceless_ricci);
      cb.check.set(p, pc.check);
      cb.rm_norm_sq(p, 0) = pc.rm_sq;
      cb.rc_norm_sq(p, 0) = pc.rc_sq;
      cb.traceless_norm_sq(p, 0) = pc.traceless_sq;
      rm_norm(p, 0) = std::sqrt(std::max(pc.rm_sq, 0.0));
    }
  });
  cb.nabla_norm.push_back(std::move(rm_norm));

  if (max_order >= 1) {
    cb.nabla_rm.push_back(covariant_derivative_rm(cb.riemann, 0, cb.christoffel));
    cb.nabla_norm.push_back(curvature_tensor_norm(cb.nabla_rm[0], 1, metric));
  }
  if (max_order >= 2) {
    cb.nabla_rm.push_back(covariant_derivative_rm(cb.nabla_rm[0], 1, cb.christoffel));
    cb.nabla_norm.push_back(curvature_tensor_norm(cb.nabla_rm[1], 2, metric));
  }
  if (max_order >= 3) {
    Field n3(grid, 1, "nabla3_rm_norm");
    const Field& t2 = cb.nabla_rm[1];
    parallel_for(grid.size(), [&](std::size_t b, std::size_t e) {
      std::vector<double> dbuf, out(64 * kRiemannComponents);
      std::vector<BivMat> tb;
      for (std::size_t p = b; p < e; ++p) {
        covariant_derivative_point(t2, 2, cb.christoffel, p, dbuf, tb, out.data());
        Mat4 frame;
        BivMat pb;
        if (!frame_at(metric, p, frame, pb)) throw_not_pd(grid, p);
        n3(p, 0) = curvature_norm_point(out.data(), 3, frame, pb);
      }
    });
    cb.nabla_norm.push_back(std::move(n3));
  }

  for (int k = 0; k <= max_order; ++k) {
    Field f(grid, 1, "f" + std::to_string(k));
    for (std::size_t p = 0; p < grid.size(); ++p) {
      double acc = 0.0;
      for (int j = 0; j <= k; ++j) acc += std::pow(cb.nabla_norm[j](p, 0), 2.0 / (2.0 + j));
      f(p, 0) = acc;
    }
    cb.fk.push_back(std::move(f));
  }
  return cb;
}

double sup_norm(const Field& f) {
  double m = 0.0;
  for (double v : f.data()) m = std::max(m, std::abs(v));
  return m;
}

double lp_norm(const Field& f, double p, const MetricField& metric) {
  if (!(p >= 1.0)) throw Error(ErrorKind::InvalidArgument, "L^p norm needs p >= 1");
  if (!f.grid().same_shape(metric.grid())) throw Error(ErrorKind::InvalidArgument, "field and metric live on different grids");
  double acc = 0.0;
  for (std::size_t x = 0; x < f.points(); ++x) {
    const double* v = f.at(x);
    double s = 0.0;
    for (int c = 0; c < f.components(); ++c) s += v[c] * v[c];
    acc += std::pow(std::sqrt(s), p) * metric.sqrt_det(x);
  }
  return std::pow(acc * metric.grid().cell_volume(), 1.0 / p);
}

double fk_scaling_check(const MetricField& metric, int k, double c) {
  if (!(c > 0.0)) throw Error(ErrorKind::InvalidArgument, "scaling constant must be positive");
  if (k < 0 || k > 3) throw Error(ErrorKind::InvalidArgument, "f_k needs k in 0..3");
  const CurvatureBundle base = build_curvature(metric, k);
  const CurvatureBundle scaled = build_curvature(metric.scaled(c), k);
  constexpr double kEpsDiv = 1e-30;
  double worst = 0.0;
  for (std::size_t p = 0; p < metric.points(); ++p) {
    const double f = base.fk[k](p, 0);
    const double fc = scaled.fk[k](p, 0);
    worst = std::max(worst, std::abs(fc - f / c) / (f + kEpsDiv));
  }
  return worst;
}

double riemann_symmetry_violation(const MetricField& metric) {
  metric.validate();
  const TorusGrid& grid = metric.grid();
  double worst = 0.0, scale = 0.0;
  for (std::size_t p = 0; p < grid.size(); ++p) {
    PointGeometry geo;
    if (!point_geometry(metric_jet(metric, p), geo)) throw_not_pd(grid, p);
    const Tensor4& r = geo.riem;
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        for (int k = 0; k < 4; ++k)
          for (int l = 0; l < 4; ++l) {
            const double v = r[i][j][k][l];
            scale = std::max(scale, std::abs(v));
            worst = std::max({worst, std::abs(v + r[j][i][k][l]), std::abs(v + r[i][j][l][k]), std::abs(v - r[k][l][i][j]),
                              std::abs(v + r[j][k][i][l] + r[k][i][j][l])});
          }
  }
  return scale > 0.0 ? worst / scale : 0.0;
}

}  // namespace l2flow
