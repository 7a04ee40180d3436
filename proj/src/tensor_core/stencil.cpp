#include "l2flow/stencil.hpp"

#include "l2flow/parallel.hpp"

namespace l2flow {

namespace {

// Paired forms: 8(f1 - f-1) - (f2 - f-2) and 16(f1 + f-1) - (f2 + f-2) - 30 f0 give
// exactly zero on constant data, so flat metrics produce no rounding curvature.
inline double d1_combine(double m2, double m1, double p1, double p2) { return (8.0 * (p1 - m1) - (p2 - m2)) / 12.0; }
inline double d2_combine(double m2, double m1, double c, double p1, double p2) {
  return (16.0 * (p1 + m1) - (p2 + m2) - 30.0 * c) / 12.0;
}

}  // namespace

MetricJet metric_jet(const SymTensorField& g, std::size_t p) {
  const TorusGrid& grid = g.grid();
  MetricJet jet{};
  const double* g0 = g.at(p);
  for (int c = 0; c < kSymComponents; ++c) jet.g[c] = g0[c];

  // d_b g at the four off-center points along each axis a, for the mixed terms.
  std::array<std::array<std::array<double, kSymComponents>, 4>, 4> side_d1{};
  for (int a = 0; a < 4; ++a) {
    const double ih = 1.0 / grid.spacing(a);
    const double* m2 = g.at(grid.shifted(p, a, -2));
    const double* m1 = g.at(grid.shifted(p, a, -1));
    const double* p1 = g.at(grid.shifted(p, a, 1));
    const double* p2 = g.at(grid.shifted(p, a, 2));
    auto& dd = jet.ddg[SymIndex::of[a][a]];
    for (int c = 0; c < kSymComponents; ++c) {
      jet.dg[a][c] = d1_combine(m2[c], m1[c], p1[c], p2[c]) * ih;
      dd[c] = d2_combine(m2[c], m1[c], g0[c], p1[c], p2[c]) * ih * ih;
    }
  }

  for (int a = 0; a < 4; ++a) {
    for (int b = a + 1; b < 4; ++b) {
      const double ihb = 1.0 / grid.spacing(b);
      const std::array<int, 4> offs = {-2, -1, 1, 2};
      for (int t = 0; t < 4; ++t) {
        const std::size_t pa = grid.shifted(p, a, offs[t]);
        const double* m2 = g.at(grid.shifted(pa, b, -2));
        const double* m1 = g.at(grid.shifted(pa, b, -1));
        const double* p1 = g.at(grid.shifted(pa, b, 1));
        const double* p2 = g.at(grid.shifted(pa, b, 2));
        for (int c = 0; c < kSymComponents; ++c) side_d1[b][t][c] = d1_combine(m2[c], m1[c], p1[c], p2[c]) * ihb;
      }
      const double iha = 1.0 / grid.spacing(a);
      auto& dd = jet.ddg[SymIndex::of[a][b]];
      for (int c = 0; c < kSymComponents; ++c)
        dd[c] = d1_combine(side_d1[b][0][c], side_d1[b][1][c], side_d1[b][2][c], side_d1[b][3][c]) * iha;
    }
  }
  return jet;
}

void d1_point(const Field& f, std::size_t p, int axis, double* out) {
  const TorusGrid& grid = f.grid();
  const int nc = f.components();
  const double ih = 1.0 / grid.spacing(axis);
  const double* m2 = f.at(grid.shifted(p, axis, -2));
  const double* m1 = f.at(grid.shifted(p, axis, -1));
  const double* p1 = f.at(grid.shifted(p, axis, 1));
  const double* p2 = f.at(grid.shifted(p, axis, 2));
  for (int c = 0; c < nc; ++c) out[c] = d1_combine(m2[c], m1[c], p1[c], p2[c]) * ih;
}

void jet_transpose(const Field& bars, Field& out) {
  const TorusGrid& grid = bars.grid();
  constexpr int kG = 0;
  constexpr int kDg = kSymComponents;
  constexpr int kDdg = kSymComponents * 5;
  parallel_for(grid.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t y = begin; y < end; ++y) {
      double acc[kSymComponents];
      const double* self = bars.at(y);
      for (int c = 0; c < kSymComponents; ++c) acc[c] = self[kG + c];
      for (int a = 0; a < 4; ++a) {
        const double ih = 1.0 / grid.spacing(a);
        const int dd = kDdg + kSymComponents * SymIndex::of[a][a];
        for (int c = 0; c < kSymComponents; ++c) acc[c] += kD2[2] * ih * ih * self[dd + c];
        for (int o = -2; o <= 2; ++o) {
          if (o == 0) continue;
          const double* v = bars.at(grid.shifted(y, a, o));
          // Transpose of an antisymmetric stencil flips its sign; the symmetric one is unchanged.
          const double w1 = -kD1[o + 2] * ih;
          const double w2 = kD2[o + 2] * ih * ih;
          for (int c = 0; c < kSymComponents; ++c) acc[c] += w1 * v[kDg + kSymComponents * a + c] + w2 * v[dd + c];
        }
      }
      for (int a = 0; a < 4; ++a)
        for (int b = a + 1; b < 4; ++b) {
          const double ihh = 1.0 / (grid.spacing(a) * grid.spacing(b));
          const int dd = kDdg + kSymComponents * SymIndex::of[a][b];
          for (int o = -2; o <= 2; ++o) {
            if (o == 0) continue;
            const std::size_t ya = grid.shifted(y, a, o);
            for (int q = -2; q <= 2; ++q) {
              if (q == 0) continue;
              const double* v = bars.at(grid.shifted(ya, b, q));
              const double w = kD1[o + 2] * kD1[q + 2] * ihh;
              for (int c = 0; c < kSymComponents; ++c) acc[c] += w * v[dd + c];
            }
          }
        }
      double* dst = out.at(y);
      for (int c = 0; c < kSymComponents; ++c) dst[c] = acc[c];
    }
  });
}

}  // namespace l2flow
