#include "l2flow/geometry_io.hpp"

#include <cstdio>
#include <memory>

namespace l2flow {

using nlohmann::json;

namespace {

json point(const Vec4& x) { return json::array({x[0], x[1], x[2], x[3]}); }

}  // namespace

json to_json(const Curve& c) {
  json pts = json::array();
  for (const Vec4& x : c.points) pts.push_back(point(x));
  json params = json::array();
  for (std::size_t k = 0; k < c.size(); ++k) params.push_back(c.size() > 1 ? static_cast<double>(k) * c.du() : 0.0);
  return {{"points", pts}, {"parameters", params}, {"metric_time", c.metric_time}, {"certified", c.certified}};
}

json to_json(const Tube& t, bool with_samples) {
  const TubeDiagnostics& d = t.diagnostics();
  json discs = json::array();
  for (const NormalDisc& disc : t.discs()) {
    json jd = {{"s", disc.s}, {"center", point(disc.center)}, {"tangent", point(disc.tangent)}, {"area", disc.area}};
    if (with_samples) {
      json samples = json::array();
      for (const DiscPoint& p : disc.points)
        samples.push_back({{"x", point(p.x)}, {"weight", p.weight}, {"dpi", p.dpi}, {"rho", p.rho}});
      jd["samples"] = samples;
    }
    discs.push_back(jd);
  }
  return {{"radius", t.radius()},
          {"length", t.length()},
          {"curve", to_json(t.curve())},
          {"diagnostics",
           {{"foliation_ok", d.foliation_ok},
            {"multi_leaf_points", d.multi_leaf_points},
            {"min_leaf_slope", d.min_leaf_slope},
            {"sup_dpi", d.sup_dpi},
            {"min_area", d.min_area},
            {"area_constant", d.area_constant}}},
          {"discs", discs}};
}

json to_json(const QuasiGeodesicFamily& f) {
  json segs = json::array();
  for (const QgSegment& s : f.segments) segs.push_back({{"t_start", s.t_start}, {"d_start", s.d_start}, {"curve", to_json(s.curve)}});
  json checks = json::array();
  for (const QgCheck& c : f.checks)
    checks.push_back({{"t", c.t},
                      {"segment", c.segment},
                      {"d", c.d},
                      {"length", c.length},
                      {"length_margin", c.length_margin},
                      {"speed_min", c.speed_min},
                      {"speed_max", c.speed_max},
                      {"speed_margin", c.speed_margin},
                      {"acceleration", c.acceleration},
                      {"acceleration_margin", c.acceleration_margin}});
  auto finite = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"x", point(f.x)},
          {"y", point(f.y)},
          {"direction", f.direction == QgDirection::Forward ? "forward" : "backward"},
          {"beta", f.beta},
          {"t1", f.t1},
          {"t2", f.t2},
          {"A", f.A},
          {"S", f.S},
          {"S_terms", json::array({finite(f.S_terms[0]), finite(f.S_terms[1]), finite(f.S_terms[2])})},
          {"d_bar", f.d_bar},
          {"degenerate", f.degenerate},
          {"min_margin", f.min_margin()},
          {"segments", segs},
          {"checks", checks}};
}

void write_distance_csv(const std::vector<std::vector<double>>& d, const std::string& path) {
  std::unique_ptr<FILE, int (*)(FILE*)> f(std::fopen(path.c_str(), "w"), &std::fclose);
  if (!f) throw Error(ErrorKind::Io, "cannot write " + path);
  std::fprintf(f.get(), "i");
  for (std::size_t j = 0; j < d.size(); ++j) std::fprintf(f.get(), ",%zu", j);
  std::fprintf(f.get(), "\n");
  for (std::size_t i = 0; i < d.size(); ++i) {
    std::fprintf(f.get(), "%zu", i);
    for (double v : d[i]) std::fprintf(f.get(), ",%.17g", v);
    std::fprintf(f.get(), "\n");
  }
}

}  // namespace l2flow
