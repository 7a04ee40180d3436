#pragma once

#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "l2flow/grid.hpp"
#include "l2flow/types.hpp"

namespace l2flow {

/// Point-major multi-component field: value(p, c) lives at data[p * components + c].
class Field {
public:
  Field() = default;
  Field(TorusGrid grid, int components, std::string name = {})
      : grid_(std::move(grid)), components_(components), name_(std::move(name)),
        data_(grid_.size() * static_cast<std::size_t>(components), 0.0) {}

  const TorusGrid& grid() const noexcept { return grid_; }
  int components() const noexcept { return components_; }
  const std::string& name() const noexcept { return name_; }
  void set_name(std::string n) { name_ = std::move(n); }
  std::size_t points() const noexcept { return grid_.size(); }

  double* at(std::size_t p) noexcept { return data_.data() + p * components_; }
  const double* at(std::size_t p) const noexcept { return data_.data() + p * components_; }
  double& operator()(std::size_t p, int c) noexcept { return data_[p * components_ + c]; }
  double operator()(std::size_t p, int c) const noexcept { return data_[p * components_ + c]; }

  std::vector<double>& data() noexcept { return data_; }
  const std::vector<double>& data() const noexcept { return data_; }

private:
  TorusGrid grid_;
  int components_ = 0;
  std::string name_;
  std::vector<double> data_;
};

/// Symmetric 2-tensor field stored as 10 components per point in SymIndex order.
class SymTensorField : public Field {
public:
  SymTensorField() = default;
  explicit SymTensorField(const TorusGrid& grid, std::string name = {}) : Field(grid, kSymComponents, std::move(name)) {}

  Mat4 matrix(std::size_t p) const noexcept {
    const double* v = at(p);
    Mat4 m{};
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) m[i][j] = v[SymIndex::of[i][j]];
    return m;
  }
  void set(std::size_t p, const Mat4& m) noexcept {
    double* v = at(p);
    for (int c = 0; c < kSymComponents; ++c) v[c] = m[SymIndex::row[c]][SymIndex::col[c]];
  }
};

}  // namespace l2flow
