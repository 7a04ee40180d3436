#include "l2flow/pointwise.hpp"

#include "l2flow/linalg4.hpp"

namespace l2flow {
namespace {

// T_i^{pqr} from T_ipqr.
Tensor4 raise_last3(const Tensor4& r, const Mat4& ginv) {
  Tensor4 a{}, b{};
  for (int i = 0; i < 4; ++i)
    for (int p = 0; p < 4; ++p)
      for (int x = 0; x < 4; ++x) {
        const double w = ginv[p][x];
        for (int k = 0; k < 4; ++k)
          for (int l = 0; l < 4; ++l) a[i][p][k][l] += w * r[i][x][k][l];
      }
  for (int i = 0; i < 4; ++i)
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q)
        for (int x = 0; x < 4; ++x) {
          const double w = ginv[q][x];
          for (int l = 0; l < 4; ++l) b[i][p][q][l] += w * a[i][p][x][l];
        }
  Tensor4 c{};
  for (int i = 0; i < 4; ++i)
    for (int p = 0; p < 4; ++p)
      for (int q = 0; q < 4; ++q)
        for (int s = 0; s < 4; ++s) {
          double acc = 0.0;
          for (int x = 0; x < 4; ++x) acc += ginv[s][x] * b[i][p][q][x];
          c[i][p][q][s] = acc;
        }
  return c;
}

Mat4 check_tensor(const Tensor4& r, const Tensor4& r_up) {
  Mat4 out{};
  for (int i = 0; i < 4; ++i)
    for (int j = i; j < 4; ++j) {
      double acc = 0.0;
      for (int p = 0; p < 4; ++p)
        for (int q = 0; q < 4; ++q)
          for (int s = 0; s < 4; ++s) acc += r_up[i][p][q][s] * r[j][p][q][s];
      out[i][j] = out[j][i] = acc;
    }
  return out;
}

Mat4 ricci_of(const Tensor4& r, const Mat4& ginv) {
  Mat4 rc{};
  for (int j = 0; j < 4; ++j)
    for (int k = j; k < 4; ++k) {
      double acc = 0.0;
      for (int i = 0; i < 4; ++i)
        for (int l = 0; l < 4; ++l) acc += ginv[i][l] * r[i][j][k][l];
      rc[j][k] = rc[k][j] = acc;
    }
  return rc;
}

}  // namespace

bool point_geometry(const MetricJet& jet, PointGeometry& out) {
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) out.g[i][j] = jet.g[SymIndex::of[i][j]];
  if (!spd_inverse4(out.g, out.ginv, out.sqrt_det)) return false;

  for (int a = 0; a < 4; ++a)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) out.dg[a][i][j] = jet.dg[a][SymIndex::of[i][j]];

  for (int m = 0; m < 4; ++m)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) out.gamma1[m][i][j] = 0.5 * (out.dg[i][j][m] + out.dg[j][i][m] - out.dg[m][i][j]);
  for (int m = 0; m < 4; ++m)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (int x = 0; x < 4; ++x) acc += out.ginv[m][x] * out.gamma1[x][i][j];
        out.gamma2[m][i][j] = acc;
      }

  auto h = [&jet](int a, int b, int i, int j) { return jet.ddg[SymIndex::of[a][b]][SymIndex::of[i][j]]; };
  const Tensor3& g1 = out.gamma1;
  const Tensor3& g2 = out.gamma2;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          double v = 0.5 * (h(i, k, j, l) - h(i, l, j, k) - h(j, k, i, l) + h(j, l, i, k));
          for (int m = 0; m < 4; ++m) v += g1[m][j][l] * g2[m][i][k] - g1[m][i][l] * g2[m][j][k];
          out.riem[i][j][k][l] = v;
        }
  return true;
}

PointCurvature point_curvature(const PointGeometry& geo) {
  PointCurvature pc{};
  pc.ricci = ricci_of(geo.riem, geo.ginv);
  pc.scalar = frob4(geo.ginv, pc.ricci);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) pc.traceless_ricci[i][j] = pc.ricci[i][j] - 0.25 * pc.scalar * geo.g[i][j];

  const Tensor4 up = raise_last3(geo.riem, geo.ginv);
  pc.check = check_tensor(geo.riem, up);
  pc.rm_sq = frob4(geo.ginv, pc.check);

  const Mat4 rc_up = matmul4(matmul4(geo.ginv, pc.ricci), geo.ginv);
  pc.rc_sq = frob4(rc_up, pc.ricci);
  const Mat4 trc_up = matmul4(matmul4(geo.ginv, pc.traceless_ricci), geo.ginv);
  pc.traceless_sq = frob4(trc_up, pc.traceless_ricci);
  return pc;
}

double traceless_ricci_sq(const PointGeometry& geo) {
  const Mat4 rc = ricci_of(geo.riem, geo.ginv);
  const double scal = frob4(geo.ginv, rc);
  const Mat4 rc_up = matmul4(matmul4(geo.ginv, rc), geo.ginv);
  return frob4(rc_up, rc) - 0.25 * scal * scal;
}

BivMat riemann_bivector(const Tensor4& r) {
  BivMat b{};
  for (int I = 0; I < 6; ++I)
    for (int J = 0; J < 6; ++J) b[I][J] = r[Bivector::first[I]][Bivector::second[I]][Bivector::first[J]][Bivector::second[J]];
  return b;
}

void riemann_compress(const BivMat& b, double* out20) {
  for (int s = 0; s < kRiemannComponents; ++s) out20[s] = b[RiemannIndex::I[s]][RiemannIndex::J[s]];
}

BivMat riemann_expand(const double* in20) {
  BivMat b{};
  for (int s = 0; s < kRiemannComponents; ++s) {
    b[RiemannIndex::I[s]][RiemannIndex::J[s]] = in20[s];
    b[RiemannIndex::J[s]][RiemannIndex::I[s]] = in20[s];
  }
  const double v = b[0][5] + b[2][3];
  b[RiemannIndex::kBianchiI][RiemannIndex::kBianchiJ] = v;
  b[RiemannIndex::kBianchiJ][RiemannIndex::kBianchiI] = v;
  return b;
}

Tensor4 riemann_full(const BivMat& b) {
  Tensor4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) {
      if (i == j) continue;
      const int I = Bivector::of[i][j];
      const int si = Bivector::sign[i][j];
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          if (k == l) continue;
          r[i][j][k][l] = si * Bivector::sign[k][l] * b[I][Bivector::of[k][l]];
        }
    }
  return r;
}

double riemann_norm_sq(const BivMat& r, const Mat4& ginv) {
  BivMat gb{};
  for (int I = 0; I < 6; ++I)
    for (int K = 0; K < 6; ++K) {
      const int i = Bivector::first[I], j = Bivector::second[I];
      const int k = Bivector::first[K], l = Bivector::second[K];
      gb[I][K] = ginv[i][k] * ginv[j][l] - ginv[i][l] * ginv[j][k];
    }
  BivMat rg{};
  for (int I = 0; I < 6; ++I)
    for (int K = 0; K < 6; ++K) {
      double acc = 0.0;
      for (int J = 0; J < 6; ++J) acc += r[I][J] * gb[J][K];
      rg[I][K] = acc;
    }
  double tr = 0.0;
  for (int I = 0; I < 6; ++I)
    for (int K = 0; K < 6; ++K) tr += rg[I][K] * rg[K][I];
  return 4.0 * tr;
}

BivMat bivector_transform(const Mat4& m) {
  BivMat p{};
  for (int A = 0; A < 6; ++A) {
    const int a = Bivector::first[A], b = Bivector::second[A];
    for (int B = 0; B < 6; ++B) {
      const int i = Bivector::first[B], j = Bivector::second[B];
      p[A][B] = m[a][i] * m[b][j] - m[a][j] * m[b][i];
    }
  }
  return p;
}

void backprop_geometry(const PointGeometry& geo, const Tensor4& r_bar, const Mat4& ginv_bar_in, double sqrt_det_bar, double* jet_bar) {
  double* g_bar = jet_bar;
  double* dg_bar = jet_bar + kSymComponents;
  double* ddg_bar = jet_bar + 5 * kSymComponents;

  Tensor3 g1_bar{}, g2_bar{};
  const Tensor3& g1 = geo.gamma1;
  const Tensor3& g2 = geo.gamma2;
  auto add_h = [ddg_bar](int a, int b, int i, int j, double v) {
    ddg_bar[SymIndex::of[a][b] * kSymComponents + SymIndex::of[i][j]] += v;
  };
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          const double r = r_bar[i][j][k][l];
          if (r == 0.0) continue;
          const double hr = 0.5 * r;
          add_h(i, k, j, l, hr);
          add_h(i, l, j, k, -hr);
          add_h(j, k, i, l, -hr);
          add_h(j, l, i, k, hr);
          for (int m = 0; m < 4; ++m) {
            g1_bar[m][j][l] += r * g2[m][i][k];
            g2_bar[m][i][k] += r * g1[m][j][l];
            g1_bar[m][i][l] -= r * g2[m][j][k];
            g2_bar[m][j][k] -= r * g1[m][i][l];
          }
        }

  Mat4 ginv_bar = ginv_bar_in;
  for (int k = 0; k < 4; ++k)
    for (int m = 0; m < 4; ++m) {
      double acc = 0.0;
      for (int i = 0; i < 4; ++i)
        for (int j = 0; j < 4; ++j) acc += g2_bar[k][i][j] * g1[m][i][j];
      ginv_bar[k][m] += acc;
    }
  for (int m = 0; m < 4; ++m)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += geo.ginv[k][m] * g2_bar[k][i][j];
        g1_bar[m][i][j] += acc;
      }

  Tensor3 dgb{};
  for (int m = 0; m < 4; ++m)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) {
        const double v = 0.5 * g1_bar[m][i][j];
        dgb[i][j][m] += v;
        dgb[j][i][m] += v;
        dgb[m][i][j] -= v;
      }
  for (int a = 0; a < 4; ++a)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) dg_bar[a * kSymComponents + SymIndex::of[i][j]] += dgb[a][i][j];

  // d(ginv) = -ginv dG ginv; d sqrt(det) = 1/2 sqrt(det) tr(ginv dG).
  const Mat4 gg = matmul4(matmul4(geo.ginv, ginv_bar), geo.ginv);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) g_bar[SymIndex::of[i][j]] += -gg[i][j] + 0.5 * sqrt_det_bar * geo.sqrt_det * geo.ginv[j][i];
}

double density_rm_sq(const PointGeometry& geo, Tensor4& r_bar, Mat4& ginv_bar, double& sqrt_det_bar) {
  const Tensor4 up = raise_last3(geo.riem, geo.ginv);
  const Mat4 check = check_tensor(geo.riem, up);
  const double rm_sq = frob4(geo.ginv, check);
  const double sq = geo.sqrt_det;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          double acc = 0.0;
          for (int a = 0; a < 4; ++a) acc += geo.ginv[i][a] * up[a][j][k][l];
          r_bar[i][j][k][l] = 2.0 * sq * acc;
        }
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) ginv_bar[i][j] = 4.0 * sq * check[i][j];
  sqrt_det_bar = rm_sq;
  return rm_sq * sq;
}

double density_traceless_sq(const PointGeometry& geo, Tensor4& r_bar, Mat4& ginv_bar, double& sqrt_det_bar) {
  const Mat4& gi = geo.ginv;
  const Mat4 rc = ricci_of(geo.riem, gi);
  const double scal = frob4(gi, rc);
  const Mat4 rc_up = matmul4(matmul4(gi, rc), gi);
  const double rc_sq = frob4(rc_up, rc);
  const double val = rc_sq - 0.25 * scal * scal;
  const double sq = geo.sqrt_det;

  Mat4 rc_bar{};
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) rc_bar[j][k] = sq * (2.0 * rc_up[j][k] - 0.5 * scal * gi[j][k]);
  const Mat4 rgr = matmul4(matmul4(rc, gi), rc);
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) ginv_bar[a][b] = sq * (2.0 * rgr[a][b] - 0.5 * scal * rc[a][b]);

  // Rc_jk = g^{il} R_ijkl
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      for (int k = 0; k < 4; ++k)
        for (int l = 0; l < 4; ++l) {
          r_bar[i][j][k][l] = rc_bar[j][k] * gi[i][l];
          ginv_bar[i][l] += rc_bar[j][k] * geo.riem[i][j][k][l];
        }
  sqrt_det_bar = val;
  return val * sq;
}

}  // namespace l2flow
