#include "l2flow/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "l2flow/types.hpp"

namespace l2flow {

namespace {

nlohmann::json number(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

double number_or_nan(const nlohmann::json& j) {
  return j.is_number() ? j.get<double>() : std::numeric_limits<double>::quiet_NaN();
}

CheckStatus parse_status(const std::string& s) {
  if (s == "pass") return CheckStatus::Pass;
  if (s == "fail") return CheckStatus::Fail;
  if (s == "report-only") return CheckStatus::ReportOnly;
  throw Error(ErrorKind::Config, "unknown check status '" + s + "'");
}

}  // namespace

const char* status_name(CheckStatus s) {
  switch (s) {
    case CheckStatus::Pass: return "pass";
    case CheckStatus::Fail: return "fail";
    case CheckStatus::ReportOnly: break;
  }
  return "report-only";
}

void VerificationReport::add(CheckRecord r) {
  const auto it = std::find_if(records_.begin(), records_.end(), [&](const CheckRecord& c) { return c.name == r.name; });
  if (it != records_.end()) *it = std::move(r);
  else records_.push_back(std::move(r));
}

const CheckRecord* VerificationReport::find(const std::string& name) const {
  for (const CheckRecord& r : records_)
    if (r.name == name) return &r;
  return nullptr;
}

int VerificationReport::failures() const {
  return static_cast<int>(std::count_if(records_.begin(), records_.end(), [](const CheckRecord& r) { return r.status == CheckStatus::Fail; }));
}

bool VerificationReport::passed() const { return failures() == 0; }

nlohmann::json VerificationReport::to_json() const {
  nlohmann::json checks = nlohmann::json::array();
  for (const CheckRecord& r : records_)
    checks.push_back({{"name", r.name},
                      {"anchor", r.anchor},
                      {"status", status_name(r.status)},
                      {"measured", number(r.measured)},
                      {"tolerance", number(r.tolerance)},
                      {"runtime", r.runtime},
                      {"details", r.details}});
  return {{"scenario", scenario}, {"passed", passed()}, {"notes", notes}, {"checks", checks}};
}

VerificationReport VerificationReport::from_json(const nlohmann::json& j) {
  VerificationReport rep;
  try {
    rep.scenario = j.at("scenario").get<std::string>();
    rep.notes = j.value("notes", std::vector<std::string>{});
    for (const auto& c : j.at("checks")) {
      CheckRecord r;
      r.name = c.at("name").get<std::string>();
      r.anchor = c.at("anchor").get<std::string>();
      r.status = parse_status(c.at("status").get<std::string>());
      r.measured = number_or_nan(c.at("measured"));
      r.tolerance = number_or_nan(c.at("tolerance"));
      r.runtime = c.value("runtime", 0.0);
      r.details = c.value("details", nlohmann::json::object());
      rep.add(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Config, std::string("malformed report: ") + e.what());
  }
  return rep;
}

std::string VerificationReport::summary() const {
  std::string out = "scenario: " + scenario + "\n";
  char line[512];
  for (const CheckRecord& r : records_) {
    if (r.status == CheckStatus::ReportOnly)
      std::snprintf(line, sizeof line, "%-12s %-24s measured %-12.5g %28s %7.1fs\n", status_name(r.status), r.name.c_str(),
                    r.measured, "", r.runtime);
    else
      std::snprintf(line, sizeof line, "%-12s %-24s measured %-12.5g tolerance %-17.5g %7.1fs\n", status_name(r.status),
                    r.name.c_str(), r.measured, r.tolerance, r.runtime);
    out += line;
    out += "    " + r.anchor + "\n";
  }
  for (const std::string& n : notes) out += "note: " + n + "\n";
  std::snprintf(line, sizeof line, "%d checks, %d failed: %s\n", static_cast<int>(records_.size()), failures(),
                passed() ? "PASS" : "FAIL");
  out += line;
  return out;
}

}  // namespace l2flow
