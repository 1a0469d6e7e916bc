#pragma once

// Pseudo-gradient aggregation and server optimizers.
//
// The aggregated pseudo-gradient g is treated as a gradient estimate:
//
//   sgd             x -= lr * g
//   sgdm            m = b1*m + g;                      x -= lr * m
//   adagrad         v += g^2;                          x -= lr * g / (sqrt(v) + eps)
//   adam            m = b1*m + (1-b1)*g; v = b2*v + (1-b2)*g^2
//                   x -= lr * mh / (sqrt(vh) + eps)    (mh, vh bias-corrected if enabled)
//   lars  (layer)   m = b1*m + (g + wd*x)
//                   x -= lr * (|x| / (|m| + eps)) * m
//   lamb  (layer)   adam moments, u = mh / (sqrt(vh) + eps) + wd*x
//                   x -= lr * (|x| / |u|) * u
//   normalized_sgd  x -= lr * g / |g|                  (skipped when |g| == 0)
//
// Layer trust ratios fall back to 1 when either norm is zero.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "cohortsim/client.hpp"
#include "cohortsim/errors.hpp"
#include "cohortsim/params.hpp"

namespace cohortsim {

enum class ServerOptKind { kSgd, kSgdm, kAdagrad, kAdam, kLars, kLamb, kNormalizedSgd };

inline constexpr ServerOptKind kAllServerOptKinds[] = {
    ServerOptKind::kSgd,  ServerOptKind::kSgdm, ServerOptKind::kAdagrad,      ServerOptKind::kAdam,
    ServerOptKind::kLars, ServerOptKind::kLamb, ServerOptKind::kNormalizedSgd};

inline const char* to_string(ServerOptKind k) {
  switch (k) {
    case ServerOptKind::kSgd: return "sgd";
    case ServerOptKind::kSgdm: return "sgdm";
    case ServerOptKind::kAdagrad: return "adagrad";
    case ServerOptKind::kAdam: return "adam";
    case ServerOptKind::kLars: return "lars";
    case ServerOptKind::kLamb: return "lamb";
    case ServerOptKind::kNormalizedSgd: return "normalized_sgd";
  }
  return "?";
}

inline std::optional<ServerOptKind> parse_server_opt_kind(std::string_view s) {
  for (auto k : kAllServerOptKinds)
    if (s == to_string(k)) return k;
  return std::nullopt;
}

struct ServerOptConfig {
  ServerOptKind kind = ServerOptKind::kSgd;
  double lr = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.99;
  double epsilon = 1e-3;
  double weight_decay = 0.0;
  bool bias_correction = false;

  bool operator==(const ServerOptConfig&) const = default;

  /// ε may be zero only for internal property checks; configs require ε > 0.
  void validate(bool allow_zero_epsilon = false) const {
    if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("server learning rate must be positive");
    if (!(beta1 >= 0.0 && beta1 < 1.0)) throw std::invalid_argument("beta1 must lie in [0, 1)");
    if (!(beta2 >= 0.0 && beta2 < 1.0)) throw std::invalid_argument("beta2 must lie in [0, 1)");
    if (!(allow_zero_epsilon ? epsilon >= 0.0 : epsilon > 0.0) || !std::isfinite(epsilon))
      throw std::invalid_argument("epsilon must be positive");
    if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay))
      throw std::invalid_argument("weight_decay must be nonnegative");
  }
};

struct OptimizerSlots {
  LayeredParams first_moment;
  LayeredParams second_moment;
  std::uint64_t steps = 0;

  static OptimizerSlots zeros(const LayeredParams& like) { return {zeros_like(like), zeros_like(like), 0}; }

  bool operator==(const OptimizerSlots&) const = default;
};

struct Aggregate {
  LayeredParams delta;
  /// Unweighted mean of clip indicators.
  double clip_fraction = 0.0;
};

/// Weighted mean sum_k p_k h_k / sum_k p_k, reduced in ascending client_id order.
inline Aggregate aggregate(std::span<const ClientUpdate> updates) {
  if (updates.empty()) throw std::invalid_argument("aggregate: empty cohort");
  std::vector<std::size_t> order(updates.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return updates[a].client_id < updates[b].client_id; });

  LayeredParams sum = zeros_like(updates[order[0]].delta);
  double weight_sum = 0.0;
  double indicator_sum = 0.0;
  for (std::size_t k : order) {
    const auto& u = updates[k];
    require_compatible(sum, u.delta);
    for (std::size_t i = 0; i < sum.num_layers(); ++i) {
      auto dst = sum.values(i);
      auto src = u.delta.values(i);
      for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += u.weight * src[j];
    }
    weight_sum += u.weight;
    indicator_sum += u.clip_indicator;
  }
  if (!(weight_sum > 0.0)) throw std::invalid_argument("aggregate: client weights sum to a nonpositive value");
  for (std::size_t i = 0; i < sum.num_layers(); ++i)
    for (double& v : sum.values(i)) v /= weight_sum;
  return {std::move(sum), indicator_sum / static_cast<double>(updates.size())};
}

struct ServerStepResult {
  LayeredParams x;
  OptimizerSlots slots;
  /// Set when normalized_sgd met a zero pseudo-gradient and left x alone.
  bool skipped = false;
};

namespace detail {

inline double trust_ratio(double param_norm, double update_norm, double eps) {
  if (param_norm == 0.0 || update_norm == 0.0) return 1.0;
  return param_norm / (update_norm + eps);
}

}  // namespace detail

/// One server optimizer step with effective learning rate `lr`. `round` only
/// labels non-finite diagnostics.
inline ServerStepResult server_step(const ServerOptConfig& cfg, OptimizerSlots slots, const LayeredParams& x,
                                    double lr, const LayeredParams& delta, std::int64_t round = -1) {
  require_compatible(x, delta);
  require_compatible(x, slots.first_moment);
  require_compatible(x, slots.second_moment);
  if (!(lr > 0.0)) throw std::invalid_argument("effective server learning rate must be positive");

  ServerStepResult r{x, std::move(slots), false};
  auto& m = r.slots.first_moment;
  auto& v = r.slots.second_moment;
  const double b1 = cfg.beta1, b2 = cfg.beta2, eps = cfg.epsilon;

  if (cfg.kind == ServerOptKind::kNormalizedSgd) {
    const double norm = l2_norm(delta);
    if (norm == 0.0) {
      r.skipped = true;
      return r;
    }
    for (std::size_t i = 0; i < x.num_layers(); ++i) {
      auto w = r.x.values(i);
      auto g = delta.values(i);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * (g[j] / norm);
    }
    ++r.slots.steps;
    check_finite(r.x, round, "model after server step");
    return r;
  }

  ++r.slots.steps;
  const double t = static_cast<double>(r.slots.steps);
  const double c1 = cfg.bias_correction ? 1.0 - std::pow(b1, t) : 1.0;
  const double c2 = cfg.bias_correction ? 1.0 - std::pow(b2, t) : 1.0;

  for (std::size_t i = 0; i < x.num_layers(); ++i) {
    auto w = r.x.values(i);
    auto g = delta.values(i);
    auto mi = m.values(i);
    auto vi = v.values(i);
    const std::size_t n = w.size();
    switch (cfg.kind) {
      case ServerOptKind::kSgd:
        for (std::size_t j = 0; j < n; ++j) w[j] -= lr * g[j];
        break;
      case ServerOptKind::kSgdm:
        for (std::size_t j = 0; j < n; ++j) {
          mi[j] = b1 * mi[j] + g[j];
          w[j] -= lr * mi[j];
        }
        break;
      case ServerOptKind::kAdagrad:
        for (std::size_t j = 0; j < n; ++j) {
          vi[j] += g[j] * g[j];
          w[j] -= lr * g[j] / (std::sqrt(vi[j]) + eps);
        }
        break;
      case ServerOptKind::kAdam:
        for (std::size_t j = 0; j < n; ++j) {
          mi[j] = b1 * mi[j] + (1.0 - b1) * g[j];
          vi[j] = b2 * vi[j] + (1.0 - b2) * g[j] * g[j];
          w[j] -= lr * (mi[j] / c1) / (std::sqrt(vi[j] / c2) + eps);
        }
        break;
      case ServerOptKind::kLars: {
        for (std::size_t j = 0; j < n; ++j) mi[j] = b1 * mi[j] + (g[j] + cfg.weight_decay * w[j]);
        const double ratio = detail::trust_ratio(l2_norm(std::span<const double>(w)), l2_norm(std::span<const double>(mi)), eps);
        for (std::size_t j = 0; j < n; ++j) w[j] -= lr * ratio * mi[j];
        break;
      }
      case ServerOptKind::kLamb: {
        std::vector<double> u(n);
        for (std::size_t j = 0; j < n; ++j) {
          mi[j] = b1 * mi[j] + (1.0 - b1) * g[j];
          vi[j] = b2 * vi[j] + (1.0 - b2) * g[j] * g[j];
          u[j] = (mi[j] / c1) / (std::sqrt(vi[j] / c2) + eps) + cfg.weight_decay * w[j];
        }
        const double ratio = detail::trust_ratio(l2_norm(std::span<const double>(w)), l2_norm(std::span<const double>(u)), 0.0);
        for (std::size_t j = 0; j < n; ++j) w[j] -= lr * ratio * u[j];
        break;
      }
      case ServerOptKind::kNormalizedSgd:
        break;
    }
  }
  check_finite(r.x, round, "model after server step");
  check_finite(m, round, "first moment");
  check_finite(v, round, "second moment");
  return r;
}

// ---------------------------------------------------------------------------
// Server learning-rate scaling with warmup

enum class LrScalingRule { kNone, kSqrt, kLinear };
enum class WarmupStart { kReference, kZero };

struct LrScaling {
  LrScalingRule rule = LrScalingRule::kNone;
  /// Cohort size the reference learning rate was tuned for; 0 means "initial cohort size".
  std::size_t reference_cohort = 0;
  std::size_t warmup_rounds = 0;
  WarmupStart warmup_start = WarmupStart::kReference;

  bool operator==(const LrScaling&) const = default;
};

/// Effective server learning rate for round t (1-based) at cohort size `cohort`.
inline double scaled_server_lr(double reference_lr, std::size_t reference_cohort, std::size_t cohort, LrScalingRule rule,
                               std::size_t warmup_rounds, WarmupStart start, std::int64_t t) {
  if (reference_cohort == 0 || cohort == 0) throw std::invalid_argument("cohort sizes must be positive");
  if (t < 1) throw std::invalid_argument("round index must be at least 1");
  const double ratio = static_cast<double>(cohort) / static_cast<double>(reference_cohort);
  double target = reference_lr;
  if (rule == LrScalingRule::kSqrt) target = reference_lr * std::sqrt(ratio);
  else if (rule == LrScalingRule::kLinear) target = reference_lr * ratio;

  if (warmup_rounds == 0 || t >= static_cast<std::int64_t>(warmup_rounds)) return target;
  const double from = start == WarmupStart::kReference ? reference_lr : 0.0;
  const double frac = static_cast<double>(t) / static_cast<double>(warmup_rounds);
  return from + (target - from) * frac;
}

}  // namespace cohortsim
