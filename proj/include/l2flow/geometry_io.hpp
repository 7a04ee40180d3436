#pragma once

#include <json.hpp>
#include <string>
#include <vector>

#include "l2flow/quasi_geodesic.hpp"
#include "l2flow/tube.hpp"

namespace l2flow {

nlohmann::json to_json(const Curve& c);
/// Diagnostics, disc centres and areas; disc samples only when with_samples is set.
nlohmann::json to_json(const Tube& t, bool with_samples = false);
nlohmann::json to_json(const QuasiGeodesicFamily& f);

/// Square matrix as CSV with a header row of point indices.
void write_distance_csv(const std::vector<std::vector<double>>& d, const std::string& path);

}  // namespace l2flow
