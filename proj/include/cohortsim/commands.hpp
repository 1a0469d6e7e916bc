#pragma once

// Command implementations behind the `cohortsim` executable.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include "cohortsim/config.hpp"
#include "cohortsim/dataset_io.hpp"
#include "cohortsim/metrics_io.hpp"
#include "cohortsim/orchestrator.hpp"
#include "cohortsim/summary.hpp"
#include "cohortsim/sweep.hpp"

namespace cohortsim {

enum ExitCode : int { kExitOk = 0, kExitError = 1, kExitAborted = 2 };

struct CommandOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output;
  std::optional<std::size_t> workers;
};

inline std::string read_text_file(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

namespace detail {

/// Resolves a relative data file against the config file's directory.
inline void anchor_paths(ExperimentConfig& cfg, const std::string& config_path) {
  const auto dir = std::filesystem::path(config_path).parent_path();
  if (auto* f = std::get_if<FileData>(&cfg.data)) {
    if (std::filesystem::path(f->path).is_relative() && !dir.empty() && !std::filesystem::exists(f->path))
      f->path = (dir / f->path).string();
  }
}

inline void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

}  // namespace detail

/// Runs one experiment; writes the metrics CSV and its JSON summary.
inline int cmd_run(ExperimentConfig cfg, const CommandOverrides& ov, std::ostream& log = std::cerr) {
  if (ov.seed) cfg.seed = *ov.seed;
  if (ov.output) cfg.output = *ov.output;
  if (ov.workers) cfg.workers = *ov.workers;
  validate(cfg);
  const auto result = run_experiment(cfg);
  detail::ensure_parent(cfg.output);
  save_metrics_csv(cfg.output, result.metrics);
  const auto summary_path = summary_path_for(cfg.output);
  std::ofstream os(summary_path);
  if (!os) throw std::runtime_error("cannot open '" + summary_path + "' for writing");
  os << run_summary(cfg, result).dump(2) << '\n';
  log << "wrote " << result.metrics.size() << " rounds to " << cfg.output << " (" << result.failure_rounds.size()
      << " failures)\n";
  if (result.aborted) {
    log << "run halted at round " << result.failure_rounds.back() << ": " << result.failure_reasons.back() << '\n';
    return kExitAborted;
  }
  return kExitOk;
}

inline int cmd_run_file(const std::string& config_path, const CommandOverrides& ov, std::ostream& log = std::cerr) {
  auto cfg = parse_config(read_text_file(config_path));
  detail::anchor_paths(cfg, config_path);
  return cmd_run(std::move(cfg), ov, log);
}

inline int cmd_sweep(SweepSpec spec, const CommandOverrides& ov, std::ostream& log = std::cerr) {
  if (ov.seed) spec.base.seed = *ov.seed;
  if (ov.output) spec.output_dir = *ov.output;
  if (ov.workers) spec.workers = *ov.workers;
  const auto res = run_sweep(spec);
  log << "ran " << res.runs.size() << " grid points into " << spec.output_dir << '\n';
  return res.aborted ? kExitAborted : kExitOk;
}

inline int cmd_sweep_file(const std::string& path, const CommandOverrides& ov, std::ostream& log = std::cerr) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("syntax error: ") + e.what());
  }
  auto spec = sweep_from_json(j, std::filesystem::path(path).parent_path().string());
  detail::anchor_paths(spec.base, path);
  return cmd_sweep(std::move(spec), ov, log);
}

/// Datagen input is either {"generator": {...}, "seed": N, "output": "path"}
/// or a full experiment config whose data source is a generator.
struct DatagenRequest {
  GeneratorSpec generator;
  std::uint64_t seed = 0;
  std::string output = "dataset.txt";
};

inline DatagenRequest datagen_from_json(const json& j) {
  if (j.is_object() && j.contains("generator")) {
    ObjectReader r(j, "");
    DatagenRequest d;
    d.generator = generator_from_json(r.raw("generator"), "generator");
    d.seed = r.get_or<std::uint64_t>("seed", 0);
    d.output = r.get_or<std::string>("output", d.output);
    r.finish();
    return d;
  }
  const auto cfg = config_from_json(j);
  const auto* g = std::get_if<GeneratedData>(&cfg.data);
  if (!g) throw ConfigError("data", "datagen needs a generator data source");
  return {g->spec, g->seed.value_or(cfg.seed), "dataset.txt"};
}

inline int cmd_datagen(DatagenRequest req, const CommandOverrides& ov, std::ostream& log = std::cerr) {
  if (ov.seed) req.seed = *ov.seed;
  if (ov.output) req.output = *ov.output;
  DatasetFile file{generate_synthetic(req.generator, req.seed), req.generator, req.seed};
  detail::ensure_parent(req.output);
  save_dataset(req.output, file);
  log << "wrote " << file.data.train_clients.size() << " train and " << file.data.test_clients.size()
      << " test clients to " << req.output << '\n';
  return kExitOk;
}

inline int cmd_datagen_file(const std::string& path, const CommandOverrides& ov, std::ostream& log = std::cerr) {
  json j;
  try {
    j = json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("syntax error: ") + e.what());
  }
  return cmd_datagen(datagen_from_json(j), ov, log);
}

}  // namespace cohortsim
