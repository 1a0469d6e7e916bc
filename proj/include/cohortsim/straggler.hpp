#pragma once

// Shifted-exponential client runtimes. A client processing N examples takes
// alpha*N + Exp(mean lambda*N) simulated seconds; a synchronous round lasts as
// long as its slowest client. Only client compute time is modelled.

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "cohortsim/params.hpp"

namespace cohortsim {

struct StragglerConfig {
  double alpha = 1.0;
  double lambda = 0.0;

  bool operator==(const StragglerConfig&) const = default;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha)) throw std::invalid_argument("straggler alpha must be nonnegative");
    if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw std::invalid_argument("straggler lambda must be nonnegative");
  }
};

inline double client_runtime(std::size_t num_examples, const StragglerConfig& cfg, RngStream stream) {
  const double n = static_cast<double>(num_examples);
  const double base = cfg.alpha * n;
  if (cfg.lambda == 0.0 || num_examples == 0) return base;
  return base + stream.exponential(cfg.lambda * n);
}

inline double round_runtime(std::span<const double> client_runtimes) {
  if (client_runtimes.empty()) throw std::invalid_argument("round_runtime: empty cohort");
  return *std::max_element(client_runtimes.begin(), client_runtimes.end());
}

/// Cumulative runtime at the first round whose value reaches `threshold`.
inline std::optional<double> runtime_to_threshold(std::span<const std::optional<double>> values,
                                                  std::span<const double> runtime_cum, double threshold) {
  const std::size_t n = std::min(values.size(), runtime_cum.size());
  for (std::size_t i = 0; i < n; ++i)
    if (values[i] && *values[i] >= threshold) return runtime_cum[i];
  return std::nullopt;
}

}  // namespace cohortsim
