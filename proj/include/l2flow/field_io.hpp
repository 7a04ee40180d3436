#pragma once

#include <string>

#include "l2flow/field.hpp"

namespace l2flow {

// Binary snapshot layout, all little-endian:
//   "L2FFIELD" | u32 version | i32 N | f64 L[4] | u32 name_len | name | u32 components |
//   f64 values, point-major then component.
void write_field_binary(const Field& f, const std::string& path);
Field read_field_binary(const std::string& path);

/// One row per point: i0,i1,i2,i3,c0,c1,... Intended for small grids.
void write_field_csv(const Field& f, const std::string& path);

}  // namespace l2flow
