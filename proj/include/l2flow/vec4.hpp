#pragma once

#include <algorithm>
#include <cmath>

#include "l2flow/pointwise.hpp"
#include "l2flow/types.hpp"

namespace l2flow::v4 {

inline Vec4 add(const Vec4& a, const Vec4& b, double s = 1.0) {
  return {a[0] + s * b[0], a[1] + s * b[1], a[2] + s * b[2], a[3] + s * b[3]};
}
inline Vec4 sub(const Vec4& a, const Vec4& b) { return {a[0] - b[0], a[1] - b[1], a[2] - b[2], a[3] - b[3]}; }
inline Vec4 scale(const Vec4& a, double s) { return {s * a[0], s * a[1], s * a[2], s * a[3]}; }
inline Vec4 lerp(const Vec4& a, const Vec4& b, double s) { return add(a, sub(b, a), s); }
inline Vec4 matvec(const Mat4& m, const Vec4& v) {
  Vec4 r{};
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) r[i] += m[i][j] * v[j];
  return r;
}
inline double inf_norm(const Vec4& v) {
  return std::max(std::max(std::abs(v[0]), std::abs(v[1])), std::max(std::abs(v[2]), std::abs(v[3])));
}
inline double norm(const Vec4& v) { return std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2] + v[3] * v[3]); }
/// Gamma^k_ij a^i b^j
inline Vec4 contract(const Tensor3& gamma, const Vec4& a, const Vec4& b) {
  Vec4 r{};
  for (int k = 0; k < 4; ++k)
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j) r[k] += gamma[k][i][j] * a[i] * b[j];
  return r;
}

}  // namespace l2flow::v4
