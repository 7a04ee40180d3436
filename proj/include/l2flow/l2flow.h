#ifndef L2FLOW_H
#define L2FLOW_H

#include <stddef.h>

#if defined(L2FLOW_BUILDING_CAPI)
#define L2FLOW_API __attribute__((visibility("default")))
#else
#define L2FLOW_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum l2flow_status {
  L2FLOW_OK = 0,
  L2FLOW_ERR_INVALID_ARGUMENT = 1,
  L2FLOW_ERR_NOT_POSITIVE_DEFINITE = 2,
  L2FLOW_ERR_NUMERICAL = 3,
  L2FLOW_ERR_CONFIG = 4,
  L2FLOW_ERR_IO = 5,
  L2FLOW_ERR_UNCALIBRATED = 6,
  L2FLOW_ERR_INTERNAL = 7
} l2flow_status;

typedef enum l2flow_check_status {
  L2FLOW_CHECK_PASS = 0,
  L2FLOW_CHECK_FAIL = 1,
  L2FLOW_CHECK_REPORT_ONLY = 2
} l2flow_check_status;

typedef struct l2flow_scenario l2flow_scenario;
typedef struct l2flow_report l2flow_report;

/* Strings stay valid until the owning handle is freed. */
typedef struct l2flow_check_info {
  const char* name;
  const char* anchor;
  l2flow_check_status status;
  double measured;
  double tolerance; /* NaN for report-only checks */
  double runtime;   /* seconds */
} l2flow_check_info;

typedef struct l2flow_gradcheck_result {
  double analytic_error;
  double gauss_bonnet_error;
  double probe_error;
  double tolerance;
  double probe_tolerance;
  int probes;
  int passed;
} l2flow_gradcheck_result;

/* Message of the last failed call on this thread ("" if none). */
L2FLOW_API const char* l2flow_last_error(void);
L2FLOW_API const char* l2flow_status_name(l2flow_status s);

L2FLOW_API l2flow_status l2flow_scenario_load(const char* path, l2flow_scenario** out);
L2FLOW_API l2flow_status l2flow_scenario_parse(const char* text, l2flow_scenario** out);
L2FLOW_API void l2flow_scenario_free(l2flow_scenario* s);
L2FLOW_API const char* l2flow_scenario_name(const l2flow_scenario* s);
/* After the L2FLOW_OUTPUT_DIR override. */
L2FLOW_API const char* l2flow_scenario_output_dir(const l2flow_scenario* s);

/* Runs the flow and the enabled checks, writing artifacts to the output directory.
   A flow abort returns L2FLOW_ERR_NUMERICAL or L2FLOW_ERR_NOT_POSITIVE_DEFINITE with the
   partial artifacts on disk. */
L2FLOW_API l2flow_status l2flow_run(const l2flow_scenario* s, l2flow_report** out);
/* Re-runs the checks on a trace directory written by l2flow_run. */
L2FLOW_API l2flow_status l2flow_verify(const char* trace_dir, l2flow_report** out);
/* Reads report.json from a trace directory. */
L2FLOW_API l2flow_status l2flow_report_load(const char* trace_dir, l2flow_report** out);

L2FLOW_API void l2flow_report_free(l2flow_report* r);
L2FLOW_API int l2flow_report_passed(const l2flow_report* r);
L2FLOW_API size_t l2flow_report_check_count(const l2flow_report* r);
L2FLOW_API l2flow_status l2flow_report_check(const l2flow_report* r, size_t index, l2flow_check_info* out);
L2FLOW_API const char* l2flow_report_summary(const l2flow_report* r);
L2FLOW_API const char* l2flow_report_json(const l2flow_report* r);

L2FLOW_API l2flow_status l2flow_gradcheck(const l2flow_scenario* s, l2flow_gradcheck_result* out);

L2FLOW_API void l2flow_set_threads(int n);
L2FLOW_API int l2flow_threads(void);

#ifdef __cplusplus
}
#endif

#endif
