#include "l2flow/l2flow.h"

#include <exception>
#include <new>
#include <string>
#include <vector>

#include "l2flow/harness.hpp"
#include "l2flow/parallel.hpp"

struct l2flow_scenario {
  l2flow::Scenario scenario;
  std::string output_dir;
};

struct l2flow_report {
  l2flow::VerificationReport report;
  std::string summary;
  std::string json;
};

namespace {

thread_local std::string last_error;

l2flow_status status_of(l2flow::ErrorKind k) {
  switch (k) {
    case l2flow::ErrorKind::InvalidArgument: return L2FLOW_ERR_INVALID_ARGUMENT;
    case l2flow::ErrorKind::NotPositiveDefinite: return L2FLOW_ERR_NOT_POSITIVE_DEFINITE;
    case l2flow::ErrorKind::Numerical: return L2FLOW_ERR_NUMERICAL;
    case l2flow::ErrorKind::Config: return L2FLOW_ERR_CONFIG;
    case l2flow::ErrorKind::Io: return L2FLOW_ERR_IO;
    case l2flow::ErrorKind::Uncalibrated: return L2FLOW_ERR_UNCALIBRATED;
  }
  return L2FLOW_ERR_INTERNAL;
}

template <class F>
l2flow_status guarded(F&& body) {
  try {
    last_error.clear();
    body();
    return L2FLOW_OK;
  } catch (const l2flow::Error& e) {
    last_error = e.what();
    return status_of(e.kind());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return L2FLOW_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return L2FLOW_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return L2FLOW_ERR_INTERNAL;
  }
}

l2flow_status null_argument(const char* what) {
  last_error = std::string("null argument: ") + what;
  return L2FLOW_ERR_INVALID_ARGUMENT;
}

l2flow_scenario* wrap(l2flow::Scenario s) {
  auto* h = new l2flow_scenario{std::move(s), {}};
  h->output_dir = l2flow::resolve_output_dir(h->scenario);
  return h;
}

l2flow_report* wrap(l2flow::VerificationReport r) {
  auto* h = new l2flow_report{std::move(r), {}, {}};
  h->summary = h->report.summary();
  h->json = h->report.to_json().dump(2);
  return h;
}

}  // namespace

extern "C" {

const char* l2flow_last_error(void) { return last_error.c_str(); }

const char* l2flow_status_name(l2flow_status s) {
  switch (s) {
    case L2FLOW_OK: return "ok";
    case L2FLOW_ERR_INVALID_ARGUMENT: return "invalid argument";
    case L2FLOW_ERR_NOT_POSITIVE_DEFINITE: return "metric not positive definite";
    case L2FLOW_ERR_NUMERICAL: return "numerical failure";
    case L2FLOW_ERR_CONFIG: return "configuration error";
    case L2FLOW_ERR_IO: return "i/o error";
    case L2FLOW_ERR_UNCALIBRATED: return "uncalibrated";
    case L2FLOW_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

l2flow_status l2flow_scenario_load(const char* path, l2flow_scenario** out) {
  if (!path || !out) return null_argument("path/out");
  *out = nullptr;
  return guarded([&] { *out = wrap(l2flow::load_scenario(path)); });
}

l2flow_status l2flow_scenario_parse(const char* text, l2flow_scenario** out) {
  if (!text || !out) return null_argument("text/out");
  *out = nullptr;
  return guarded([&] { *out = wrap(l2flow::parse_scenario(text)); });
}

void l2flow_scenario_free(l2flow_scenario* s) { delete s; }

const char* l2flow_scenario_name(const l2flow_scenario* s) { return s ? s->scenario.name.c_str() : ""; }

const char* l2flow_scenario_output_dir(const l2flow_scenario* s) { return s ? s->output_dir.c_str() : ""; }

l2flow_status l2flow_run(const l2flow_scenario* s, l2flow_report** out) {
  if (!s || !out) return null_argument("scenario/out");
  *out = nullptr;
  return guarded([&] { *out = wrap(l2flow::run_scenario(s->scenario)); });
}

l2flow_status l2flow_verify(const char* trace_dir, l2flow_report** out) {
  if (!trace_dir || !out) return null_argument("trace_dir/out");
  *out = nullptr;
  return guarded([&] { *out = wrap(l2flow::verify_trace_dir(trace_dir)); });
}

l2flow_status l2flow_report_load(const char* trace_dir, l2flow_report** out) {
  if (!trace_dir || !out) return null_argument("trace_dir/out");
  *out = nullptr;
  return guarded([&] { *out = wrap(l2flow::load_report(trace_dir)); });
}

void l2flow_report_free(l2flow_report* r) { delete r; }

int l2flow_report_passed(const l2flow_report* r) { return r && r->report.passed() ? 1 : 0; }

size_t l2flow_report_check_count(const l2flow_report* r) { return r ? r->report.records().size() : 0; }

l2flow_status l2flow_report_check(const l2flow_report* r, size_t index, l2flow_check_info* out) {
  if (!r || !out) return null_argument("report/out");
  const auto& recs = r->report.records();
  if (index >= recs.size()) {
    last_error = "check index " + std::to_string(index) + " out of range";
    return L2FLOW_ERR_INVALID_ARGUMENT;
  }
  const l2flow::CheckRecord& c = recs[index];
  out->name = c.name.c_str();
  out->anchor = c.anchor.c_str();
  out->status = c.status == l2flow::CheckStatus::Pass   ? L2FLOW_CHECK_PASS
                : c.status == l2flow::CheckStatus::Fail ? L2FLOW_CHECK_FAIL
                                                        : L2FLOW_CHECK_REPORT_ONLY;
  out->measured = c.measured;
  out->tolerance = c.tolerance;
  out->runtime = c.runtime;
  return L2FLOW_OK;
}

const char* l2flow_report_summary(const l2flow_report* r) { return r ? r->summary.c_str() : ""; }

const char* l2flow_report_json(const l2flow_report* r) { return r ? r->json.c_str() : ""; }

l2flow_status l2flow_gradcheck(const l2flow_scenario* s, l2flow_gradcheck_result* out) {
  if (!s || !out) return null_argument("scenario/out");
  return guarded([&] {
    const l2flow::GradientCheck g = l2flow::gradient_check(s->scenario);
    out->analytic_error = g.analytic_error;
    out->gauss_bonnet_error = g.gauss_bonnet_error;
    out->probe_error = g.probe_error;
    out->tolerance = g.tolerance;
    out->probe_tolerance = g.probe_tolerance;
    out->probes = g.probes;
    out->passed = g.passed() ? 1 : 0;
  });
}

void l2flow_set_threads(int n) { l2flow::set_thread_count(n); }

int l2flow_threads(void) { return l2flow::thread_count(); }

}  // extern "C"
