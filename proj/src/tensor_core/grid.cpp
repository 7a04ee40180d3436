#include "l2flow/grid.hpp"

#include <algorithm>
#include <string>

namespace l2flow {

TorusGrid::TorusGrid(int points_per_axis, std::array<double, 4> periods) : n_(points_per_axis), period_(periods) {
  if (n_ < 8) throw Error(ErrorKind::InvalidArgument, "grid needs at least 8 points per axis, got " + std::to_string(n_));
  for (int a = 0; a < 4; ++a) {
    if (!(period_[a] > 0.0)) throw Error(ErrorKind::InvalidArgument, "grid period must be positive on axis " + std::to_string(a));
  }
  const auto n = static_cast<std::size_t>(n_);
  stride_ = {n * n * n, n * n, n, 1};
  size_ = n * n * n * n;
}

double TorusGrid::min_spacing() const noexcept {
  return *std::min_element(period_.begin(), period_.end()) / n_;
}

double TorusGrid::max_spacing() const noexcept {
  return *std::max_element(period_.begin(), period_.end()) / n_;
}

double TorusGrid::cell_volume() const noexcept {
  return spacing(0) * spacing(1) * spacing(2) * spacing(3);
}

std::array<int, 4> TorusGrid::coords(std::size_t idx) const noexcept {
  std::array<int, 4> c{};
  for (int a = 3; a >= 0; --a) {
    c[a] = static_cast<int>(idx % n_);
    idx /= n_;
  }
  return c;
}

std::size_t TorusGrid::shifted(std::size_t idx, int axis, int offset) const noexcept {
  const int c = static_cast<int>((idx / stride_[axis]) % n_);
  const int w = wrap(c + offset);
  return idx + (static_cast<std::ptrdiff_t>(w) - c) * static_cast<std::ptrdiff_t>(stride_[axis]);
}

Vec4 TorusGrid::position(std::size_t idx) const noexcept {
  const auto c = coords(idx);
  return {c[0] * spacing(0), c[1] * spacing(1), c[2] * spacing(2), c[3] * spacing(3)};
}

}  // namespace l2flow
