#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "fractalaw/experiment.hpp"

int main(int argc, char** argv) {
  using namespace fractalaw;
  CLI::App app{"Run a fractal-measure convergence experiment from a JSON config"};
  std::string experiment, config, out = "out";
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  app.add_option("experiment", experiment, "Experiment to run")->required()->check(CLI::IsMember(experiment_names()));
  app.add_option("--config", config, "Experiment config (JSON)")->required();
  app.add_option("--out", out, "Directory for report.json and curves.csv")->capture_default_str();
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  auto* threads_opt = app.add_option("--threads", threads, "Worker threads (0 = all cores)");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? exit_ok : exit_config_error;
  }

  ConfigOverrides over;
  over.experiment = experiment;
  if (*seed_opt) over.seed = seed;
  if (*threads_opt) over.threads = threads;

  const RunOutcome o = run_experiment(config, out, over);
  if (o.report) {
    for (const auto& v : o.report->verdicts)
      std::cout << (v.passed ? "PASS " : "FAIL ") << v.name << ": " << v.observed << " " << v.relation << " " << v.threshold
                << "\n";
    std::cout << "wrote " << out << "/report.json and " << out << "/curves.csv\n";
  }
  if (!o.message.empty()) std::cerr << "fractalaw: " << o.message << "\n";
  return o.exit_code;
}
