#pragma once

#include <filesystem>
#include <optional>
#include <ostream>
#include <stdexcept>
#include <string>

#include "config.hpp"
#include "diagnostics.hpp"
#include "errors.hpp"
#include "report.hpp"

namespace fractalaw {

enum ExitCode : int {
  exit_ok = 0,
  exit_verdict_failed = 1,
  exit_config_error = 2,
  exit_hypothesis_violated = 3,
  exit_runtime_error = 4,
};

struct RunOutcome {
  int exit_code = exit_ok;
  std::optional<Report> report;
  std::string message;
};

// Runs a parsed config and maps failures onto exit codes. Reports are written
// to out_dir (when given) for every run that completes, passing or not.
inline RunOutcome run_parsed(const ExperimentConfig& cfg, const std::optional<std::filesystem::path>& out_dir) {
  RunOutcome o;
  try {
    o.report = run_config(cfg);
    if (out_dir) write_report(*o.report, *out_dir);
    o.exit_code = o.report->passed() ? exit_ok : exit_verdict_failed;
    if (!o.report->passed()) {
      o.message = "failed verdicts:";
      for (const auto& v : o.report->verdicts)
        if (!v.passed) o.message += " " + v.name;
    }
  } catch (const HypothesisError& e) {
    o.exit_code = exit_hypothesis_violated;
    o.message = e.what();
  } catch (const ConfigError& e) {
    o.exit_code = exit_config_error;
    o.message = e.what();
  } catch (const std::invalid_argument& e) {
    // inconsistent inputs that only surface once the experiment runs
    o.exit_code = exit_config_error;
    o.message = e.what();
  } catch (const std::exception& e) {
    o.exit_code = exit_runtime_error;
    o.message = e.what();
  }
  return o;
}

inline RunOutcome run_experiment(const std::string& config_path, const std::optional<std::filesystem::path>& out_dir,
                                 const ConfigOverrides& over = {}) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(config_path, over);
  } catch (const ConfigError& e) {
    return {exit_config_error, std::nullopt, e.what()};
  }
  return run_parsed(cfg, out_dir);
}

} // namespace fractalaw
