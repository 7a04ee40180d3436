#pragma once

#include <array>
#include <cstddef>
#include <stdexcept>
#include <string>

namespace l2flow {

constexpr int kDim = 4;
constexpr int kSymComponents = 10;    // independent entries of a symmetric 4x4
constexpr int kBivectors = 6;         // index pairs i<j
constexpr int kRiemannComponents = 20;

using Vec4 = std::array<double, 4>;
using Mat4 = std::array<std::array<double, 4>, 4>;

enum class ErrorKind { InvalidArgument, NotPositiveDefinite, Numerical, Config, Io, Uncalibrated };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

// Symmetric-component ordering: (0,0),(0,1),(0,2),(0,3),(1,1),(1,2),(1,3),(2,2),(2,3),(3,3).
struct SymIndex {
  static constexpr std::array<std::array<int, 4>, 4> of = {{{0, 1, 2, 3}, {1, 4, 5, 6}, {2, 5, 7, 8}, {3, 6, 8, 9}}};
  static constexpr std::array<int, 10> row = {0, 0, 0, 0, 1, 1, 1, 2, 2, 3};
  static constexpr std::array<int, 10> col = {0, 1, 2, 3, 1, 2, 3, 2, 3, 3};
};

// Bivector (antisymmetric index pair) ordering: 01,02,03,12,13,23.
struct Bivector {
  static constexpr std::array<int, 6> first = {0, 0, 0, 1, 1, 2};
  static constexpr std::array<int, 6> second = {1, 2, 3, 2, 3, 3};
  // of[i][j] = bivector index for i<j, -1 on the diagonal; sign[i][j] = +1 if i<j, -1 if i>j.
  static constexpr std::array<std::array<int, 4>, 4> of = {{{-1, 0, 1, 2}, {0, -1, 3, 4}, {1, 3, -1, 5}, {2, 4, 5, -1}}};
  static constexpr std::array<std::array<int, 4>, 4> sign = {{{0, 1, 1, 1}, {-1, 0, 1, 1}, {-1, -1, 0, 1}, {-1, -1, -1, 0}}};
};

// Compressed Riemann storage. The curvature operator is a symmetric 6x6 matrix over
// bivectors (21 entries); first Bianchi removes one more. Component R_0213, i.e.
// bivector pair (1,4), is reconstructed as R_0123 + R_0312.
struct RiemannIndex {
  // The 20 stored (I,J) bivector pairs with I<=J, skipping (1,4).
  static constexpr std::array<int, 20> I = {0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 2, 2, 2, 2, 3, 3, 3, 4, 4, 5};
  static constexpr std::array<int, 20> J = {0, 1, 2, 3, 4, 5, 1, 2, 3, 5, 2, 3, 4, 5, 3, 4, 5, 4, 5, 5};
  static constexpr int kBianchiI = 1;
  static constexpr int kBianchiJ = 4;
};

inline Mat4 zero_mat() { return Mat4{}; }

inline Mat4 identity_mat() {
  Mat4 m{};
  for (int i = 0; i < 4; ++i) m[i][i] = 1.0;
  return m;
}

}  // namespace l2flow
