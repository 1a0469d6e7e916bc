#pragma once

// Local client training and update clipping.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cohortsim/errors.hpp"
#include "cohortsim/model.hpp"
#include "cohortsim/params.hpp"

namespace cohortsim {

/// E epochs or S batch-steps of mini-batch SGD with batch size B.
struct LocalBudget {
  enum class Mode { kEpochs, kSteps };
  Mode mode = Mode::kEpochs;
  std::size_t value = 1;
  std::size_t batch_size = 1;

  bool operator==(const LocalBudget&) const = default;

  static LocalBudget epochs(std::size_t e, std::size_t b) { return {Mode::kEpochs, e, b}; }
  static LocalBudget steps(std::size_t s, std::size_t b) { return {Mode::kSteps, s, b}; }

  void validate() const {
    if (value == 0) throw std::invalid_argument("local budget must be at least 1");
    if (batch_size == 0) throw std::invalid_argument("batch size must be at least 1");
  }
};

struct ClientUpdate {
  std::string client_id;
  LayeredParams delta;
  double weight = 0.0;
  /// 1 iff the pre-clip norm was within the clip level.
  int clip_indicator = 1;
  double pre_clip_norm = 0.0;
  std::size_t examples_processed = 0;
  double runtime = 0.0;
};

namespace detail {

inline void shuffle(std::vector<std::size_t>& idx, RngStream& s) {
  for (std::size_t i = idx.size(); i > 1; --i) std::swap(idx[i - 1], idx[s.below(i)]);
}

/// Batch slices of one epoch: floor(N/B) full batches then the remainder.
inline std::vector<std::size_t> epoch_batch_sizes(std::size_t n, std::size_t b) {
  std::vector<std::size_t> sizes(n / b, b);
  if (n % b) sizes.push_back(n % b);
  return sizes;
}

}  // namespace detail

/// Mini-batch SGD from `x` on one client. Every epoch draws a fresh
/// permutation from `stream`; batches are consecutive slices and the final
/// short batch is kept. Step mode runs exactly S batch-steps, reshuffling at
/// each epoch boundary.
inline LayeredParams local_train(const ModelSpec& spec, const LayeredParams& x, const ClientDataset& client,
                                 double client_lr, const LocalBudget& budget, RngStream stream) {
  budget.validate();
  if (!(client_lr >= 0.0)) throw std::invalid_argument("client learning rate must be nonnegative");
  LayeredParams xk = x;
  if (client_lr == 0.0) return xk;

  const std::size_t n = client.num_examples();
  const std::size_t b = std::min(budget.batch_size, n);
  std::vector<std::size_t> perm(n);
  std::vector<std::size_t> batch;
  batch.reserve(b);

  const std::size_t batches_per_epoch = (n + b - 1) / b;
  const std::size_t total_steps =
      budget.mode == LocalBudget::Mode::kEpochs ? budget.value * batches_per_epoch : budget.value;

  std::size_t pos = n;
  for (std::size_t step = 0; step < total_steps; ++step) {
    if (pos >= n) {
      std::iota(perm.begin(), perm.end(), std::size_t{0});
      detail::shuffle(perm, stream);
      pos = 0;
    }
    const std::size_t len = std::min(b, n - pos);
    batch.assign(perm.begin() + static_cast<std::ptrdiff_t>(pos), perm.begin() + static_cast<std::ptrdiff_t>(pos + len));
    // Summation order within a batch is fixed so a full batch reproduces
    // the natural-order gradient bit for bit.
    std::sort(batch.begin(), batch.end());
    pos += len;

    auto [loss, grad] = loss_and_grad(spec, xk, client, batch);
    if (!std::isfinite(loss)) throw DivergenceError(client.client_id, step);
    for (std::size_t i = 0; i < xk.num_layers(); ++i) {
      auto w = xk.values(i);
      auto g = grad.values(i);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= client_lr * g[j];
    }
  }
  for (std::size_t i = 0; i < xk.num_layers(); ++i)
    for (double v : xk.values(i))
      if (!std::isfinite(v)) throw DivergenceError(client.client_id, total_steps);
  return xk;
}

/// x - x_k; the server subtracts this (scaled) in plain SGD.
inline LayeredParams compute_update(const LayeredParams& x, const LayeredParams& xk) { return subtract(x, xk); }

struct ClipResult {
  LayeredParams delta;
  int indicator = 1;
  double pre_clip_norm = 0.0;
};

/// Whole-vector clipping to norm `level`. The boundary counts as unclipped.
inline ClipResult clip_update(const LayeredParams& delta, double level) {
  if (!(level > 0.0)) throw std::invalid_argument("clip level must be positive");
  const double norm = l2_norm(delta);
  if (norm <= level) return {delta, 1, norm};
  return {scale(level / norm, delta), 0, norm};
}

/// Examples consumed by one client under `budget`.
inline std::size_t examples_this_client(const LocalBudget& budget, std::size_t num_examples) {
  if (num_examples == 0) throw std::invalid_argument("client has no examples");
  if (budget.mode == LocalBudget::Mode::kEpochs) return budget.value * num_examples;
  const auto sizes = detail::epoch_batch_sizes(num_examples, std::min(budget.batch_size, num_examples));
  const std::size_t full_epochs = budget.value / sizes.size();
  const std::size_t rest = budget.value % sizes.size();
  std::size_t total = full_epochs * num_examples;
  for (std::size_t i = 0; i < rest; ++i) total += sizes[i];
  return total;
}

}  // namespace cohortsim
