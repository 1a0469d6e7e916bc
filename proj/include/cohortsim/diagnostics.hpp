#pragma once

// Per-round metrics and the measurement instruments computed from them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cohortsim/params.hpp"
#include "cohortsim/straggler.hpp"

namespace cohortsim {

/// One row of the metrics CSV. Optional fields are empty when undefined:
/// evaluation columns on non-evaluated rounds, cosine with fewer than two
/// nonzero updates, clip columns when clipping is off, norms on failed rounds.
struct RoundMetrics {
  std::int64_t round = 0;
  std::size_t cohort_size = 0;
  std::optional<double> train_loss;
  std::optional<double> train_acc;
  std::optional<double> test_loss;
  std::optional<double> test_acc;
  std::optional<double> pg_norm;
  std::optional<double> pg_norm_predicted;
  std::optional<double> cosine_avg;
  std::optional<double> clip_fraction;
  std::optional<double> clip_level;
  double lr_server = 0.0;
  std::uint64_t examples_round = 0;
  std::uint64_t examples_cum = 0;
  double runtime_round = 0.0;
  double runtime_cum = 0.0;
  bool failure = false;

  bool operator==(const RoundMetrics&) const = default;
};

inline constexpr std::array<std::string_view, 17> kMetricsColumns = {
    "round",         "cohort_size",  "train_loss", "train_acc",     "test_loss",     "test_acc",
    "pg_norm",       "pg_norm_predicted",          "cosine_avg",    "clip_fraction", "clip_level",
    "lr_server",     "examples_round", "examples_cum", "runtime_round", "runtime_cum", "failure"};

/// Numeric value of a named column; throws std::invalid_argument for unknown names.
inline std::optional<double> field_value(const RoundMetrics& m, std::string_view field) {
  if (field == "round") return static_cast<double>(m.round);
  if (field == "cohort_size") return static_cast<double>(m.cohort_size);
  if (field == "train_loss") return m.train_loss;
  if (field == "train_acc") return m.train_acc;
  if (field == "test_loss") return m.test_loss;
  if (field == "test_acc") return m.test_acc;
  if (field == "pg_norm") return m.pg_norm;
  if (field == "pg_norm_predicted") return m.pg_norm_predicted;
  if (field == "cosine_avg") return m.cosine_avg;
  if (field == "clip_fraction") return m.clip_fraction;
  if (field == "clip_level") return m.clip_level;
  if (field == "lr_server") return m.lr_server;
  if (field == "examples_round") return static_cast<double>(m.examples_round);
  if (field == "examples_cum") return static_cast<double>(m.examples_cum);
  if (field == "runtime_round") return m.runtime_round;
  if (field == "runtime_cum") return m.runtime_cum;
  if (field == "failure") return m.failure ? 1.0 : 0.0;
  throw std::invalid_argument("unknown metrics field '" + std::string(field) + "'");
}

/// Inverse square-root rule: norm_ref * sqrt(M_ref / M).
inline double predicted_norm(double norm_ref, double reference_cohort, double cohort) {
  if (!(reference_cohort > 0.0) || !(cohort > 0.0)) throw std::invalid_argument("cohort sizes must be positive");
  return norm_ref * std::sqrt(reference_cohort / cohort);
}

namespace detail {

/// sqrt(fl(d * d)) == d, so identical vectors give exactly 1 on this path.
inline double cosine(const LayeredParams& a, const LayeredParams& b, double norm_a, double norm_b) {
  const double aa = dot(a, a), bb = dot(b, b), ab = dot(a, b);
  const double denom = aa * bb;
  if (std::isnormal(denom) && std::isfinite(ab)) return ab / std::sqrt(denom);
  return dot(scale(1.0 / norm_a, a), scale(1.0 / norm_b, b));
}

}  // namespace detail

/// Mean pairwise cosine similarity over all unordered pairs. Empty when
/// fewer than two updates are given or any update has zero norm.
inline std::optional<double> avg_cosine_similarity(std::span<const LayeredParams> updates) {
  if (updates.size() < 2) return std::nullopt;
  std::vector<double> norms;
  norms.reserve(updates.size());
  for (const auto& u : updates) {
    norms.push_back(l2_norm(u));
    if (norms.back() == 0.0) return std::nullopt;
  }
  double sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < updates.size(); ++i) {
    for (std::size_t j = i + 1; j < updates.size(); ++j) {
      sum += std::clamp(detail::cosine(updates[i], updates[j], norms[i], norms[j]), -1.0, 1.0);
      ++pairs;
    }
  }
  return sum / static_cast<double>(pairs);
}

/// Training accuracy fell to half (or less) of its previous evaluated value.
inline bool detect_catastrophic(double acc_prev, double acc_curr) { return acc_prev > 0.0 && acc_curr <= acc_prev / 2.0; }

inline constexpr std::array<double, 5> kDefaultPercentiles = {5.0, 25.0, 50.0, 75.0, 95.0};

/// Linear-interpolation percentiles: the p-th value sits at fractional rank (n-1)*p/100.
inline std::map<double, double> accuracy_percentiles(std::span<const double> values,
                                                     std::span<const double> percentiles = kDefaultPercentiles) {
  if (values.empty()) throw std::invalid_argument("accuracy_percentiles: empty input");
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  std::map<double, double> out;
  for (double p : percentiles) {
    if (!(p >= 0.0 && p <= 100.0)) throw std::invalid_argument("percentile outside [0, 100]");
    const double rank = static_cast<double>(sorted.size() - 1) * p / 100.0;
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    out[p] = sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
  }
  return out;
}

/// First round whose `field` reaches `threshold`.
inline std::optional<std::int64_t> rounds_to_threshold(std::span<const RoundMetrics> metrics, std::string_view field,
                                                       double threshold) {
  if (metrics.empty()) {
    (void)field_value(RoundMetrics{}, field);
    return std::nullopt;
  }
  for (const auto& m : metrics) {
    const auto v = field_value(m, field);
    if (v && *v >= threshold) return m.round;
  }
  return std::nullopt;
}

/// Ratio of cumulative simulated runtime needed to reach `threshold` in `a`
/// versus `b`; empty if either run never gets there.
inline std::optional<double> relative_time_to_accuracy(std::span<const RoundMetrics> a, std::span<const RoundMetrics> b,
                                                       double threshold, std::string_view field = "test_acc") {
  const auto time_at = [&](std::span<const RoundMetrics> run) -> std::optional<double> {
    std::vector<std::optional<double>> values;
    std::vector<double> runtime;
    for (const auto& m : run) {
      values.push_back(field_value(m, field));
      runtime.push_back(m.runtime_cum);
    }
    return runtime_to_threshold(values, runtime, threshold);
  };
  const auto ta = time_at(a);
  const auto tb = time_at(b);
  if (!ta || !tb) return std::nullopt;
  if (*tb == 0.0) return *ta == 0.0 ? std::optional<double>(1.0) : std::nullopt;
  return *ta / *tb;
}

}  // namespace cohortsim
