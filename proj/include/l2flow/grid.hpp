#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "l2flow/types.hpp"

namespace l2flow {

/// Uniform periodic grid on the 4-torus. Axis 0 varies slowest in the linear index.
class TorusGrid {
public:
  TorusGrid() = default;
  TorusGrid(int points_per_axis, std::array<double, 4> periods);
  static TorusGrid unit(int points_per_axis) { return TorusGrid(points_per_axis, {1.0, 1.0, 1.0, 1.0}); }

  int n() const noexcept { return n_; }
  double period(int axis) const noexcept { return period_[axis]; }
  const std::array<double, 4>& periods() const noexcept { return period_; }
  double spacing(int axis) const noexcept { return period_[axis] / n_; }
  double min_spacing() const noexcept;
  double max_spacing() const noexcept;
  double cell_volume() const noexcept;
  std::size_t size() const noexcept { return size_; }
  std::size_t stride(int axis) const noexcept { return stride_[axis]; }

  int wrap(int i) const noexcept {
    int r = i % n_;
    return r < 0 ? r + n_ : r;
  }
  std::size_t index(int i0, int i1, int i2, int i3) const noexcept {
    return ((static_cast<std::size_t>(wrap(i0)) * n_ + wrap(i1)) * n_ + wrap(i2)) * n_ + wrap(i3);
  }
  std::size_t index(const std::array<int, 4>& c) const noexcept { return index(c[0], c[1], c[2], c[3]); }
  std::array<int, 4> coords(std::size_t idx) const noexcept;
  /// Index of the point displaced by `offset` cells along `axis`, with wrap.
  std::size_t shifted(std::size_t idx, int axis, int offset) const noexcept;
  Vec4 position(std::size_t idx) const noexcept;

  bool same_shape(const TorusGrid& o) const noexcept { return n_ == o.n_ && period_ == o.period_; }

private:
  int n_ = 0;
  std::array<double, 4> period_{};
  std::array<std::size_t, 4> stride_{};
  std::size_t size_ = 0;
};

}  // namespace l2flow
