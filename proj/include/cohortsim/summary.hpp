#pragma once

// JSON run summary written next to the metrics CSV.

#include <optional>
#include <span>
#include <string>

#include "cohortsim/config.hpp"
#include "cohortsim/diagnostics.hpp"
#include "cohortsim/orchestrator.hpp"
#include "cohortsim/text_format.hpp"

namespace cohortsim {

/// Last row where `field` is defined.
inline std::optional<double> final_value(std::span<const RoundMetrics> metrics, std::string_view field) {
  for (auto it = metrics.rbegin(); it != metrics.rend(); ++it)
    if (auto v = field_value(*it, field)) return v;
  return std::nullopt;
}

inline json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

inline json run_summary(const ExperimentConfig& cfg, const RunResult& r) {
  json s;
  s["rounds_completed"] = r.metrics.size();
  s["aborted"] = r.aborted;
  s["failure_count"] = r.failure_rounds.size();
  s["failure_rounds"] = r.failure_rounds;
  s["failure_reasons"] = r.failure_reasons;
  s["skipped_rounds"] = r.skipped_rounds;
  s["final"] = {{"train_loss", opt_json(final_value(r.metrics, "train_loss"))},
                {"train_acc", opt_json(final_value(r.metrics, "train_acc"))},
                {"test_loss", opt_json(final_value(r.metrics, "test_loss"))},
                {"test_acc", opt_json(final_value(r.metrics, "test_acc"))}};
  s["threshold_field"] = cfg.threshold_field;
  json thresholds = json::object();
  for (double th : cfg.thresholds) {
    const auto round = rounds_to_threshold(r.metrics, cfg.threshold_field, th);
    thresholds[format_double(th)] = round ? json(*round) : json(nullptr);
  }
  s["rounds_to_threshold"] = thresholds;
  if (r.last_test_eval) {
    s["per_client_test_accuracy"] = r.last_test_eval->per_client_accuracy;
    json pct = json::object();
    for (const auto& [p, v] : accuracy_percentiles(r.last_test_eval->per_client_accuracy))
      pct[format_double(p)] = v;
    s["test_accuracy_percentiles"] = pct;
  } else {
    s["per_client_test_accuracy"] = json::array();
    s["test_accuracy_percentiles"] = json::object();
  }
  s["examples_cum"] = r.metrics.empty() ? 0 : r.metrics.back().examples_cum;
  s["runtime_cum"] = r.metrics.empty() ? 0.0 : r.metrics.back().runtime_cum;
  return s;
}

/// metrics.csv -> metrics.summary.json
inline std::string summary_path_for(const std::string& csv_path) {
  const auto slash = csv_path.find_last_of('/');
  const auto dot = csv_path.find_last_of('.');
  const bool has_ext = dot != std::string::npos && (slash == std::string::npos || dot > slash);
  return (has_ext ? csv_path.substr(0, dot) : csv_path) + ".summary.json";
}

}  // namespace cohortsim
