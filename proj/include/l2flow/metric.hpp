#pragma once

#include <cstdint>
#include <random>

#include "l2flow/field.hpp"

namespace l2flow {

/// Metric components g_ij on the torus grid, coordinate basis.
class MetricField : public SymTensorField {
public:
  MetricField() = default;
  explicit MetricField(const TorusGrid& grid) : SymTensorField(grid, "metric") {}

  /// Cholesky test at every point; throws NotPositiveDefinite naming the first bad index.
  void validate() const;
  bool is_positive_definite(std::size_t p) const noexcept;
  double sqrt_det(std::size_t p) const noexcept;
  double volume() const;
  MetricField scaled(double c) const;
};

MetricField flat_metric(const TorusGrid& grid);

/// g = exp(2 eps sin(2 pi k x^axis / L_axis)) delta.
MetricField conformal_mode_metric(const TorusGrid& grid, double eps, int axis, int wavenumber);

/// delta plus a random trigonometric polynomial in every component with integer
/// wavevectors |k_a| <= max_wavenumber, rescaled so the largest component deviation is eps.
MetricField random_band_limited_metric(const TorusGrid& grid, double eps, int max_wavenumber, std::uint64_t seed);

/// Flat metric; anisotropy comes from the grid periods.
MetricField anisotropic_flat_metric(const TorusGrid& grid);

/// mt19937_64 with fixed conversions to uniform and normal draws. The engine output is
/// pinned by the standard; the distributions are not, so they are done by hand.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double normal();

private:
  std::mt19937_64 engine_;
};

}  // namespace l2flow
