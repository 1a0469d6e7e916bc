#pragma once

// Grid sweeps over cohort size and local steps, with repeated trials.
//
// Sweep file:
// {
//   "base": { ...experiment config... },     (or "base_config": "path.json")
//   "cohort_sizes": [16, 32], "local_steps": [1, 2, 4],
//   "trials": 3, "threshold": 0.5, "workers": 2, "output_dir": "sweep"
// }
//
// Trial k runs with seed base.seed + k on the dataset of the base seed. Each
// run writes <output_dir>/run_M<m>_S<s>_trial<k>.csv; S is "base" when the
// local-steps axis is absent. The grid summary (JSON and CSV) keys cells by
// (local_steps, cohort_size): the median rounds-to-threshold across trials
// (a trial that never crosses counts as infinitely slow, and an infinite
// median prints as "none") and the mean final test accuracy.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "cohortsim/config.hpp"
#include "cohortsim/metrics_io.hpp"
#include "cohortsim/orchestrator.hpp"
#include "cohortsim/summary.hpp"

namespace cohortsim {

struct SweepSpec {
  ExperimentConfig base;
  std::vector<std::size_t> cohort_sizes;
  std::vector<std::size_t> local_steps;
  std::size_t trials = 1;
  std::optional<double> threshold;
  std::size_t workers = 1;
  std::string output_dir = "sweep";

  double resolved_threshold() const {
    if (threshold) return *threshold;
    return base.thresholds.empty() ? 0.5 : base.thresholds.front();
  }
};

inline SweepSpec sweep_from_json(const json& j, const std::string& base_dir = ".") {
  ObjectReader r(j, "");
  SweepSpec s;
  if (r.has("base") == r.has("base_config")) throw ConfigError("", "exactly one of 'base' or 'base_config' is required");
  if (r.has("base")) {
    s.base = config_from_json(r.raw("base"));
  } else {
    auto rel = std::filesystem::path(r.get<std::string>("base_config"));
    if (rel.is_relative()) rel = std::filesystem::path(base_dir) / rel;
    std::ifstream is(rel);
    if (!is) throw ConfigError("base_config", "cannot open '" + rel.string() + "'");
    std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    s.base = parse_config(text);
  }
  const auto list = [&](const char* key) {
    std::vector<std::size_t> out;
    if (!r.has(key)) return out;
    const json& a = r.raw(key);
    if (!a.is_array() || a.empty()) throw ConfigError(key, "expected a nonempty array");
    for (std::size_t i = 0; i < a.size(); ++i) {
      const auto v = ObjectReader::convert<std::size_t>(a[i], std::string(key) + "[" + std::to_string(i) + "]");
      if (v < 1) throw ConfigError(std::string(key) + "[" + std::to_string(i) + "]", "must be at least 1");
      out.push_back(v);
    }
    return out;
  };
  s.cohort_sizes = list("cohort_sizes");
  s.local_steps = list("local_steps");
  if (s.cohort_sizes.empty() && s.local_steps.empty())
    throw ConfigError("", "at least one of 'cohort_sizes' or 'local_steps' is required");
  s.trials = r.get_or<std::size_t>("trials", 1);
  if (s.trials < 1) throw ConfigError("trials", "must be at least 1");
  s.threshold = r.get_optional<double>("threshold");
  s.workers = r.get_or<std::size_t>("workers", 1);
  if (s.workers < 1) throw ConfigError("workers", "must be at least 1");
  s.output_dir = r.get_or<std::string>("output_dir", s.output_dir);
  r.finish();
  return s;
}

struct SweepPoint {
  /// 0 when the axis is absent (base value used).
  std::size_t cohort_size = 0;
  std::size_t local_steps = 0;
  std::size_t trial = 0;
  ExperimentConfig config;
};

inline std::string sweep_run_name(std::size_t cohort_size, std::size_t local_steps, std::size_t trial) {
  return "run_M" + std::to_string(cohort_size) + "_S" + (local_steps ? std::to_string(local_steps) : "base") + "_trial" +
         std::to_string(trial);
}

inline std::vector<SweepPoint> expand_sweep(const SweepSpec& s) {
  const std::vector<std::size_t> ms = s.cohort_sizes.empty() ? std::vector<std::size_t>{0} : s.cohort_sizes;
  const std::vector<std::size_t> ss = s.local_steps.empty() ? std::vector<std::size_t>{0} : s.local_steps;
  std::vector<SweepPoint> out;
  for (std::size_t steps : ss) {
    for (std::size_t m : ms) {
      for (std::size_t k = 0; k < s.trials; ++k) {
        ExperimentConfig c = s.base;
        if (auto* g = std::get_if<GeneratedData>(&c.data); g && !g->seed) g->seed = s.base.seed;
        c.seed = s.base.seed + k;
        if (m) c.cohort = CohortSchedule::fixed(m);
        if (steps) c.budget = LocalBudget::steps(steps, s.base.budget.batch_size);
        const std::size_t label_m = m ? m : c.cohort.size;
        c.output = (std::filesystem::path(s.output_dir) / (sweep_run_name(label_m, steps, k) + ".csv")).string();
        c.norm_reference.reset();
        out.push_back({label_m, steps, k, std::move(c)});
      }
    }
  }
  return out;
}

struct GridCell {
  std::size_t local_steps = 0;
  std::size_t cohort_size = 0;
  std::optional<double> rounds_to_threshold;
  std::optional<double> final_test_acc;
  std::vector<std::optional<std::int64_t>> trial_rounds;
  std::vector<std::optional<double>> trial_final_acc;
};

struct GridSummary {
  double threshold = 0.0;
  std::string field;
  std::vector<GridCell> cells;
};

namespace detail {

inline std::optional<double> median_rounds(const std::vector<std::optional<std::int64_t>>& v) {
  std::vector<double> x;
  for (const auto& r : v) x.push_back(r ? static_cast<double>(*r) : std::numeric_limits<double>::infinity());
  std::sort(x.begin(), x.end());
  const std::size_t n = x.size();
  const double med = n % 2 ? x[n / 2] : 0.5 * (x[n / 2 - 1] + x[n / 2]);
  if (!std::isfinite(med)) return std::nullopt;
  return med;
}

}  // namespace detail

/// Cells from per-run metrics, in the order the points were expanded.
inline GridSummary summarize_grid(const std::vector<SweepPoint>& points,
                                  const std::vector<std::vector<RoundMetrics>>& runs, double threshold,
                                  const std::string& field) {
  GridSummary g{threshold, field, {}};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    auto it = std::find_if(g.cells.begin(), g.cells.end(), [&](const GridCell& c) {
      return c.local_steps == p.local_steps && c.cohort_size == p.cohort_size;
    });
    if (it == g.cells.end()) {
      g.cells.push_back({p.local_steps, p.cohort_size, {}, {}, {}, {}});
      it = std::prev(g.cells.end());
    }
    it->trial_rounds.push_back(rounds_to_threshold(runs[i], field, threshold));
    it->trial_final_acc.push_back(final_value(runs[i], "test_acc"));
  }
  for (auto& c : g.cells) {
    c.rounds_to_threshold = detail::median_rounds(c.trial_rounds);
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& a : c.trial_final_acc)
      if (a) sum += *a, ++n;
    if (n) c.final_test_acc = sum / static_cast<double>(n);
  }
  return g;
}

inline json to_json(const GridSummary& g) {
  json cells = json::array();
  for (const auto& c : g.cells) {
    json rounds = json::array();
    for (const auto& r : c.trial_rounds) rounds.push_back(r ? json(*r) : json("none"));
    json accs = json::array();
    for (const auto& a : c.trial_final_acc) accs.push_back(opt_json(a));
    cells.push_back({{"local_steps", c.local_steps ? json(c.local_steps) : json("base")},
                     {"cohort_size", c.cohort_size},
                     {"rounds_to_threshold", c.rounds_to_threshold ? json(*c.rounds_to_threshold) : json("none")},
                     {"final_test_acc", opt_json(c.final_test_acc)},
                     {"trial_rounds_to_threshold", rounds},
                     {"trial_final_test_acc", accs}});
  }
  return {{"threshold", g.threshold}, {"threshold_field", g.field}, {"cells", cells}};
}

inline void write_grid_csv(std::ostream& os, const GridSummary& g) {
  os << "local_steps,cohort_size,rounds_to_threshold,final_test_acc\n";
  for (const auto& c : g.cells) {
    os << (c.local_steps ? std::to_string(c.local_steps) : std::string("base")) << ',' << c.cohort_size << ','
       << (c.rounds_to_threshold ? format_double(*c.rounds_to_threshold) : std::string("none")) << ','
       << (c.final_test_acc ? format_double(*c.final_test_acc) : std::string("none")) << '\n';
  }
}

struct SweepResult {
  std::vector<SweepPoint> points;
  std::vector<RunResult> runs;
  GridSummary grid;
  /// Number of runs stopped by halt_on_failure.
  std::size_t aborted = 0;
};

/// Runs every grid point, writing one CSV and summary per run plus the grid summary.
inline SweepResult run_sweep(const SweepSpec& spec) {
  namespace fs = std::filesystem;
  fs::create_directories(spec.output_dir);
  SweepResult res;
  res.points = expand_sweep(spec);
  res.runs.resize(res.points.size());

  // One dataset per distinct data source; trials share the base seed's data.
  const FederatedDataset data = load_data(res.points.front().config);

  parallel_for(res.points.size(), spec.workers, [&](std::size_t i) {
    const auto& cfg = res.points[i].config;
    Experiment exp(cfg, data);
    res.runs[i] = run_experiment(exp);
    save_metrics_csv(cfg.output, res.runs[i].metrics);
    std::ofstream os(summary_path_for(cfg.output));
    os << run_summary(cfg, res.runs[i]).dump(2) << '\n';
  });

  std::vector<std::vector<RoundMetrics>> metrics;
  for (const auto& r : res.runs) {
    metrics.push_back(r.metrics);
    if (r.aborted) ++res.aborted;
  }
  res.grid = summarize_grid(res.points, metrics, spec.resolved_threshold(), spec.base.threshold_field);
  {
    std::ofstream os(fs::path(spec.output_dir) / "grid_summary.json");
    os << to_json(res.grid).dump(2) << '\n';
  }
  {
    std::ofstream os(fs::path(spec.output_dir) / "grid_summary.csv");
    write_grid_csv(os, res.grid);
  }
  return res;
}

}  // namespace cohortsim
