#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "cohortsim/commands.hpp"

namespace {

struct Args {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::size_t> workers;

  cohortsim::CommandOverrides overrides() const { return {seed, output, workers}; }
};

void add_common(CLI::App* cmd, Args& a, const char* output_help) {
  cmd->add_option("config", a.config, "Path to the JSON configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--seed", a.seed, "Override the master seed");
  cmd->add_option("--output", a.output, output_help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cohortsim: federated optimization simulator with cohort-size diagnostics"};
  app.require_subcommand(1);

  Args run_args, sweep_args, datagen_args;
  auto* run = app.add_subcommand("run", "Run one experiment and write a metrics CSV plus JSON summary");
  add_common(run, run_args, "Metrics CSV path");
  run->add_option("--workers", run_args.workers, "Client worker threads")->check(CLI::PositiveNumber);

  auto* sweep = app.add_subcommand("sweep", "Run a cohort-size / local-steps grid");
  add_common(sweep, sweep_args, "Output directory");
  sweep->add_option("--workers", sweep_args.workers, "Concurrent grid points")->check(CLI::PositiveNumber);

  auto* datagen = app.add_subcommand("datagen", "Generate a synthetic federated dataset file");
  add_common(datagen, datagen_args, "Dataset file path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) return cohortsim::cmd_run_file(run_args.config, run_args.overrides());
    if (*sweep) return cohortsim::cmd_sweep_file(sweep_args.config, sweep_args.overrides());
    if (*datagen) return cohortsim::cmd_datagen_file(datagen_args.config, datagen_args.overrides());
  } catch (const cohortsim::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cohortsim::kExitError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return cohortsim::kExitError;
  }
  return cohortsim::kExitError;
}
