#pragma once

#include <json.hpp>
#include <string>
#include <vector>

namespace l2flow {

enum class CheckStatus { Pass, Fail, ReportOnly };

struct CheckRecord {
  std::string name;
  std::string anchor;  // the statement checked, quoted from the source result
  CheckStatus status = CheckStatus::ReportOnly;
  double measured = 0.0;
  double tolerance = 0.0;  // NaN for report-only records
  double runtime = 0.0;    // seconds
  nlohmann::json details = nlohmann::json::object();
};

const char* status_name(CheckStatus s);

class VerificationReport {
public:
  std::string scenario;
  std::vector<std::string> notes;

  /// Replaces an earlier record of the same name, so each check appears once.
  void add(CheckRecord r);
  const std::vector<CheckRecord>& records() const noexcept { return records_; }
  const CheckRecord* find(const std::string& name) const;
  bool passed() const;
  int failures() const;

  /// {"scenario", "passed", "notes", "checks": [...]}; non-finite numbers become null.
  nlohmann::json to_json() const;
  static VerificationReport from_json(const nlohmann::json& j);
  std::string summary() const;

private:
  std::vector<CheckRecord> records_;
};

}  // namespace l2flow
