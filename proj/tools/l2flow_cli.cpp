// Command-line front end over the C API.
#include <CLI11.hpp>

#include <cstdio>
#include <string>

#include "l2flow/l2flow.h"

namespace {

constexpr int kExitPass = 0;
constexpr int kExitCheckFailure = 1;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

int exit_code(l2flow_status s) {
  switch (s) {
    case L2FLOW_OK: return kExitPass;
    case L2FLOW_ERR_CONFIG:
    case L2FLOW_ERR_IO:
    case L2FLOW_ERR_INVALID_ARGUMENT: return kExitConfig;
    default: return kExitNumerical;
  }
}

int fail(l2flow_status s) {
  std::fprintf(stderr, "l2flow: %s: %s\n", l2flow_status_name(s), l2flow_last_error());
  return exit_code(s);
}

int finish(l2flow_report* r, bool json) {
  std::fputs(json ? l2flow_report_json(r) : l2flow_report_summary(r), stdout);
  if (json) std::fputc('\n', stdout);
  const int code = l2flow_report_passed(r) ? kExitPass : kExitCheckFailure;
  l2flow_report_free(r);
  return code;
}

int cmd_run(const std::string& path, bool json) {
  l2flow_scenario* s = nullptr;
  l2flow_status st = l2flow_scenario_load(path.c_str(), &s);
  if (st != L2FLOW_OK) return fail(st);
  std::fprintf(stderr, "l2flow: running %s -> %s\n", l2flow_scenario_name(s), l2flow_scenario_output_dir(s));
  l2flow_report* r = nullptr;
  st = l2flow_run(s, &r);
  if (st != L2FLOW_OK) {
    std::fprintf(stderr, "l2flow: partial artifacts kept in %s\n", l2flow_scenario_output_dir(s));
    l2flow_scenario_free(s);
    return fail(st);
  }
  l2flow_scenario_free(s);
  return finish(r, json);
}

int cmd_verify(const std::string& dir, bool json) {
  l2flow_report* r = nullptr;
  const l2flow_status st = l2flow_verify(dir.c_str(), &r);
  return st == L2FLOW_OK ? finish(r, json) : fail(st);
}

int cmd_report(const std::string& dir, bool json) {
  l2flow_report* r = nullptr;
  const l2flow_status st = l2flow_report_load(dir.c_str(), &r);
  return st == L2FLOW_OK ? finish(r, json) : fail(st);
}

int cmd_gradcheck(const std::string& path) {
  l2flow_scenario* s = nullptr;
  l2flow_status st = l2flow_scenario_load(path.c_str(), &s);
  if (st != L2FLOW_OK) return fail(st);
  l2flow_gradcheck_result g{};
  st = l2flow_gradcheck(s, &g);
  l2flow_scenario_free(s);
  if (st != L2FLOW_OK) return fail(st);
  std::printf("analytic vs discrete   %.3e  (tolerance %.3e)\n", g.analytic_error, g.tolerance);
  std::printf("grad F vs 4 grad G     %.3e  (tolerance %.3e)\n", g.gauss_bonnet_error, g.tolerance);
  std::printf("probed partials        %.3e  (tolerance %.1e, %d probes)\n", g.probe_error, g.probe_tolerance, g.probes);
  std::printf("%s\n", g.passed ? "PASS" : "FAIL");
  return g.passed ? kExitPass : kExitCheckFailure;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"L2 curvature flow on flat 4-tori: runs scenarios and checks the flow estimates"};
  app.require_subcommand(1);
  int threads = 0;
  bool json = false;
  app.add_option("--threads", threads, "worker threads (default: L2FLOW_THREADS or hardware concurrency)")->check(CLI::PositiveNumber);
  app.add_flag("--json", json, "print report.json instead of the summary");

  std::string scenario_path, trace_dir;
  auto* run = app.add_subcommand("run", "run a scenario file and write its trace directory");
  run->add_option("scenario", scenario_path, "scenario file")->required();
  auto* verify = app.add_subcommand("verify", "re-run the checks on a trace directory");
  verify->add_option("trace_dir", trace_dir, "directory written by run")->required();
  auto* report = app.add_subcommand("report", "print the stored report of a trace directory");
  report->add_option("trace_dir", trace_dir, "directory written by run")->required();
  auto* oracle = app.add_subcommand("oracle", "independent oracle checks");
  oracle->require_subcommand(1);
  auto* gradcheck = oracle->add_subcommand("gradcheck", "analytic and probed gradients against the discrete adjoint");
  gradcheck->add_option("scenario", scenario_path, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  if (threads > 0) l2flow_set_threads(threads);
  if (*run) return cmd_run(scenario_path, json);
  if (*verify) return cmd_verify(trace_dir, json);
  if (*report) return cmd_report(trace_dir, json);
  return cmd_gradcheck(scenario_path);
}
