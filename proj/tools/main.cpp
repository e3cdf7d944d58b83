// Benchmark command line for the nextsca library.
//
//   nextsca run <config> [--out DIR] [--reps N] [--threads K]
//   nextsca validate <config>
//   nextsca graph-dump <config>
//
// `run` executes every configured algorithm on every repetition of the
// configured problem and writes metric CSVs, instance manifests, and a
// summary table.  `validate` checks the file and dry-builds the first
// repetition without running anything.  `graph-dump` prints the first
// repetition's communication schedule in the reloadable text format.
//
// Exit codes: 0 success, 2 configuration or usage problem, 3 numerical
// failure during a run.  The output directory is chosen from, in order:
// --out, the config's [run] output key, the NEXTSCA_OUT environment
// variable, and finally ./nextsca-out/<experiment name>.

#include "CLI11.hpp"
#include "nextsca/config.hpp"
#include "nextsca/experiment.hpp"

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

std::optional<nextsca::ExperimentConfig> load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    std::cerr << "error: cannot open config file '" << path << "'\n";
    return std::nullopt;
  }
  std::vector<std::string> diagnostics;
  auto cfg = nextsca::parse_experiment(in, diagnostics);
  if (!cfg) {
    for (const auto& d : diagnostics) std::cerr << path << ": " << d << "\n";
    std::cerr << "error: " << diagnostics.size() << " problem(s) in '" << path << "'\n";
  }
  return cfg;
}

std::string resolve_output_dir(const nextsca::ExperimentConfig& cfg,
                               const std::string& cli_out) {
  if (!cli_out.empty()) return cli_out;
  if (!cfg.run.output_dir.empty()) return cfg.run.output_dir;
  if (const char* env = std::getenv("NEXTSCA_OUT"); env && *env) return env;
  return std::string("nextsca-out/") + cfg.name;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"distributed nonconvex optimization benchmark"};
  app.require_subcommand(1);

  std::string config_path, out_dir;
  int reps_override = 0;
  int threads = 1;

  CLI::App* run = app.add_subcommand("run", "execute an experiment and write its artifacts");
  run->add_option("config", config_path, "experiment config file")->required();
  run->add_option("--out", out_dir, "output directory (overrides config and NEXTSCA_OUT)");
  run->add_option("--reps", reps_override, "override the number of repetitions")
      ->check(CLI::PositiveNumber);
  run->add_option("--threads", threads, "worker threads across repetitions")
      ->check(CLI::PositiveNumber);

  CLI::App* validate = app.add_subcommand("validate", "check a config without running it");
  validate->add_option("config", config_path, "experiment config file")->required();

  CLI::App* dump = app.add_subcommand("graph-dump", "print the communication schedule");
  dump->add_option("config", config_path, "experiment config file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;  // usage problems share the config-error exit code
  }

  auto cfg = load_config(config_path);
  if (!cfg) return 2;

  if (run->parsed()) {
    if (reps_override > 0) cfg->run.repetitions = reps_override;
    return nextsca::run_experiment(*cfg, resolve_output_dir(*cfg, out_dir), threads, std::cout,
                                   std::cerr);
  }
  if (validate->parsed()) return nextsca::validate_experiment(*cfg, std::cout, std::cerr);
  if (dump->parsed()) return nextsca::dump_schedule(*cfg, std::cout, std::cerr);
  return 2;  // unreachable: require_subcommand(1) guarantees one branch
}
