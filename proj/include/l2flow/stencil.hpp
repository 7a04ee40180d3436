#pragma once

#include <array>

#include "l2flow/field.hpp"

namespace l2flow {

// Fourth-order centered weights for offsets -2..2.
inline constexpr std::array<double, 5> kD1 = {1.0 / 12.0, -8.0 / 12.0, 0.0, 8.0 / 12.0, -1.0 / 12.0};
inline constexpr std::array<double, 5> kD2 = {-1.0 / 12.0, 16.0 / 12.0, -30.0 / 12.0, 16.0 / 12.0, -1.0 / 12.0};
inline constexpr int kStencilHalfWidth = 2;

// Second-derivative pair index (a<=b), same ordering as SymIndex.
using PairIndex = SymIndex;

/// Metric values and their first and second partial derivatives at one point.
/// dg[a][c] = d_a g_c, ddg[SymIndex::of[a][b]][c] = d_a d_b g_c.
struct MetricJet {
  std::array<double, kSymComponents> g;
  std::array<std::array<double, kSymComponents>, 4> dg;
  std::array<std::array<double, kSymComponents>, kSymComponents> ddg;
};

/// Pure derivatives use the five-point first/second stencils; mixed ones are
/// products of first-derivative stencils along the two axes.
MetricJet metric_jet(const SymTensorField& g, std::size_t p);

/// d_axis of every component of `f` at point p, written to out[0..components).
void d1_point(const Field& f, std::size_t p, int axis, double* out);

/// Adjoint of the jet map: given per-point sensitivities to (g, dg, ddg) stored in
/// `bars` (150 doubles per point, layout g|dg|ddg), returns dF/dg_c at each point.
void jet_transpose(const Field& bars, Field& out);

inline constexpr int kJetSize = kSymComponents * (1 + 4 + kSymComponents);

}  // namespace l2flow
