#pragma once

// Synchronous federated training loop with adaptive clipping.
//
// Each round t: pick M_t clients uniformly without replacement, train each
// from the current model, clip updates to rho_t, average them with weights
// p_k, take one server optimizer step, then move rho towards the q-th
// quantile of update norms: rho_{t+1} = rho_t * exp(-eta_a * (b_t - q)).

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "cohortsim/client.hpp"
#include "cohortsim/config.hpp"
#include "cohortsim/dataset_io.hpp"
#include "cohortsim/diagnostics.hpp"
#include "cohortsim/metrics_io.hpp"
#include "cohortsim/model.hpp"
#include "cohortsim/params.hpp"
#include "cohortsim/server_opt.hpp"
#include "cohortsim/straggler.hpp"
#include "cohortsim/synth.hpp"

namespace cohortsim {

inline std::size_t cohort_size_at(const CohortSchedule& s, std::int64_t t, std::size_t population) {
  if (t < 1) throw std::invalid_argument("round index must be at least 1");
  std::size_t m = s.size;
  if (s.kind == CohortSchedule::Kind::kDoubling) {
    const auto doublings = static_cast<std::uint64_t>(t - 1) / s.period;
    for (std::uint64_t i = 0; i < doublings && m < population; ++i) m *= 2;
    if (s.cap) m = std::min(m, *s.cap);
  }
  return std::min(m, population);
}

/// M distinct ids drawn uniformly without replacement, returned sorted.
inline std::vector<std::string> sample_cohort(RngStream stream, std::span<const std::string> client_ids, std::size_t m) {
  if (m < 1) throw std::invalid_argument("cohort size must be at least 1");
  if (m > client_ids.size())
    throw std::invalid_argument("cohort size " + std::to_string(m) + " exceeds population " +
                                std::to_string(client_ids.size()));
  std::vector<std::size_t> idx(client_ids.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < m; ++i) std::swap(idx[i], idx[i + stream.below(idx.size() - i)]);
  std::vector<std::string> out;
  out.reserve(m);
  for (std::size_t i = 0; i < m; ++i) out.push_back(client_ids[idx[i]]);
  std::sort(out.begin(), out.end());
  return out;
}

inline double update_clip_level(double level, double unclipped_fraction, double lr, double target_quantile) {
  return level * std::exp(-lr * (unclipped_fraction - target_quantile));
}

struct ServerState {
  /// Index of the next round to run, starting at 1.
  std::int64_t round = 1;
  LayeredParams model;
  OptimizerSlots slots;
  double clip_level = 1.0;
  std::optional<double> last_train_acc;
  std::uint64_t examples_cum = 0;
  double runtime_cum = 0.0;
};

struct RoundRecord {
  RoundMetrics metrics;
  std::vector<std::string> cohort;
  /// normalized_sgd met a zero pseudo-gradient.
  bool step_skipped = false;
  /// Set when the round failed; describes why.
  std::optional<std::string> failure_reason;
  /// Test-client evaluation, present on evaluated rounds.
  std::optional<EvalResult> test_eval;
};

/// Runs fn(i) for i in [0, n) on up to `workers` threads.
template <typename Fn>
void parallel_for(std::size_t n, std::size_t workers, Fn&& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i; (i = next.fetch_add(1)) < n;) fn(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Everything a round needs besides the evolving server state.
class Experiment {
 public:
  Experiment(ExperimentConfig config, FederatedDataset data)
      : config_(std::move(config)), data_(std::move(data)) {
    validate(config_);
    data_.validate();
    model_ = resolve_model(config_.model, data_);
    model_.validate();
    by_id_.reserve(data_.train_clients.size());
    for (const auto& c : data_.train_clients) ids_.push_back(c.client_id);
    std::sort(ids_.begin(), ids_.end());
    for (const auto& id : ids_) {
      const auto it = std::find_if(data_.train_clients.begin(), data_.train_clients.end(),
                                   [&](const ClientDataset& c) { return c.client_id == id; });
      by_id_.push_back(&*it);
    }
    if (config_.norm_reference) {
      for (const auto& m : load_metrics_csv(config_.norm_reference->csv))
        if (m.pg_norm) reference_norms_[m.round] = *m.pg_norm;
    }
  }

  Experiment(const Experiment&) = delete;
  Experiment& operator=(const Experiment&) = delete;

  const ExperimentConfig& config() const noexcept { return config_; }
  const FederatedDataset& data() const noexcept { return data_; }
  const ModelSpec& model_spec() const noexcept { return model_; }
  std::span<const std::string> train_ids() const noexcept { return ids_; }

  ServerState initial_state() const {
    ServerState s;
    s.model = init_params(model_, derive_stream(config_.seed, {tag(StreamDomain::kInit)}));
    s.slots = OptimizerSlots::zeros(s.model);
    s.clip_level = config_.clipping.initial_level;
    return s;
  }

  double server_lr_at(std::int64_t t, std::size_t cohort) const {
    const auto& s = config_.lr_scaling;
    const std::size_t ref = s.reference_cohort ? s.reference_cohort : cohort_size_at(config_.cohort, 1, ids_.size());
    return scaled_server_lr(config_.algorithm.lr, ref, cohort, s.rule, s.warmup_rounds, s.warmup_start, t);
  }

  bool evaluates_at(std::int64_t t) const { return t % config_.eval_period == 0 || t == config_.rounds; }

  /// One full round; mutates `state` and returns the round's record.
  RoundRecord run_round(ServerState& state) const {
    const std::int64_t t = state.round;
    const auto& cfg = config_;
    RoundRecord rec;
    auto& m = rec.metrics;
    m.round = t;

    const std::size_t cohort_size = cohort_size_at(cfg.cohort, t, ids_.size());
    m.cohort_size = cohort_size;
    rec.cohort = cohort_size >= ids_.size()
                     ? ids_
                     : sample_cohort(derive_stream(cfg.seed, {tag(StreamDomain::kSampling), static_cast<std::uint64_t>(t)}),
                                     ids_, cohort_size);

    const double level = state.clip_level;
    std::vector<ClientUpdate> updates(rec.cohort.size());
    std::vector<LayeredParams> raw_deltas(rec.cohort.size());
    std::vector<std::optional<std::string>> client_errors(rec.cohort.size());

    parallel_for(rec.cohort.size(), cfg.workers, [&](std::size_t i) {
      const ClientDataset& client = *by_id_[index_of(rec.cohort[i])];
      const std::uint64_t id_tag = hash_tag(client.client_id);
      auto& u = updates[i];
      u.client_id = client.client_id;
      u.weight = client.weight;
      u.examples_processed = examples_this_client(cfg.budget, client.num_examples());
      u.runtime = client_runtime(
          u.examples_processed, cfg.straggler,
          derive_stream(cfg.seed, {tag(StreamDomain::kRuntime), static_cast<std::uint64_t>(t), id_tag}));
      try {
        const auto xk = local_train(
            model_, state.model, client, cfg.client_lr, cfg.budget,
            derive_stream(cfg.seed, {tag(StreamDomain::kLocalTraining), static_cast<std::uint64_t>(t), id_tag}));
        raw_deltas[i] = compute_update(state.model, xk);
        if (cfg.clipping.enabled) {
          auto clipped = clip_update(raw_deltas[i], level);
          u.delta = std::move(clipped.delta);
          u.clip_indicator = clipped.indicator;
          u.pre_clip_norm = clipped.pre_clip_norm;
        } else {
          u.delta = raw_deltas[i];
          u.pre_clip_norm = l2_norm(u.delta);
          u.clip_indicator = 1;
        }
      } catch (const DivergenceError& e) {
        client_errors[i] = e.what();
      } catch (const NonFiniteError& e) {
        client_errors[i] = std::string("client '") + client.client_id + "': " + e.what();
      }
    });

    std::vector<double> runtimes;
    for (const auto& u : updates) {
      m.examples_round += u.examples_processed;
      runtimes.push_back(u.runtime);
    }
    m.runtime_round = round_runtime(runtimes);
    m.lr_server = server_lr_at(t, cohort_size);
    if (cfg.clipping.enabled) m.clip_level = level;

    for (const auto& e : client_errors) {
      if (e && !rec.failure_reason) rec.failure_reason = *e;
    }

    if (!rec.failure_reason) {
      try {
        auto agg = aggregate(updates);
        check_finite(agg.delta, t, "pseudo-gradient");
        m.pg_norm = l2_norm(agg.delta);
        if (cfg.clipping.enabled) m.clip_fraction = agg.clip_fraction;

        const std::size_t cap = cfg.cosine_cap ? std::min(cfg.cosine_cap, raw_deltas.size()) : raw_deltas.size();
        m.cosine_avg = avg_cosine_similarity(std::span<const LayeredParams>(raw_deltas).first(cap));

        if (cfg.norm_reference) {
          if (auto it = reference_norms_.find(t); it != reference_norms_.end())
            m.pg_norm_predicted = predicted_norm(it->second, static_cast<double>(cfg.norm_reference->cohort_size),
                                                 static_cast<double>(cohort_size));
        }

        auto step = server_step(cfg.algorithm, state.slots, state.model, m.lr_server, agg.delta, t);
        state.model = std::move(step.x);
        state.slots = std::move(step.slots);
        rec.step_skipped = step.skipped;
        if (cfg.clipping.enabled)
          state.clip_level =
              update_clip_level(level, agg.clip_fraction, cfg.clipping.learning_rate, cfg.clipping.target_quantile);
      } catch (const NonFiniteError& e) {
        rec.failure_reason = e.what();
      }
    }

    if (evaluates_at(t)) {
      const auto train = evaluate(model_, state.model, data_.train_clients);
      m.train_loss = train.loss;
      m.train_acc = train.accuracy;
      if (!data_.test_clients.empty()) {
        auto test = evaluate(model_, state.model, data_.test_clients);
        m.test_loss = test.loss;
        m.test_acc = test.accuracy;
        rec.test_eval = std::move(test);
      }
      if (state.last_train_acc && detect_catastrophic(*state.last_train_acc, train.accuracy) && !rec.failure_reason)
        rec.failure_reason = "train accuracy fell from " + format_double(*state.last_train_acc) + " to " +
                             format_double(train.accuracy);
      state.last_train_acc = train.accuracy;
    }

    m.failure = rec.failure_reason.has_value();
    state.examples_cum += m.examples_round;
    state.runtime_cum += m.runtime_round;
    m.examples_cum = state.examples_cum;
    m.runtime_cum = state.runtime_cum;
    ++state.round;
    return rec;
  }

 private:
  std::size_t index_of(const std::string& id) const {
    return static_cast<std::size_t>(std::lower_bound(ids_.begin(), ids_.end(), id) - ids_.begin());
  }

  ExperimentConfig config_;
  FederatedDataset data_;
  ModelSpec model_;
  std::vector<std::string> ids_;
  std::vector<const ClientDataset*> by_id_;
  std::map<std::int64_t, double> reference_norms_;
};

struct RunResult {
  std::vector<RoundMetrics> metrics;
  std::vector<std::int64_t> failure_rounds;
  std::vector<std::string> failure_reasons;
  std::vector<std::int64_t> skipped_rounds;
  /// Stopped early by halt_on_failure.
  bool aborted = false;
  ServerState final_state;
  /// Most recent test evaluation (per-client accuracies feed percentiles).
  std::optional<EvalResult> last_test_eval;
};

using RoundObserver = std::function<void(const ServerState& after, const RoundRecord& record)>;

inline RunResult run_experiment(const Experiment& exp, const RoundObserver& observer = {}) {
  RunResult result;
  ServerState state = exp.initial_state();
  for (std::int64_t t = 1; t <= exp.config().rounds; ++t) {
    RoundRecord rec = exp.run_round(state);
    if (observer) observer(state, rec);
    if (rec.test_eval) result.last_test_eval = rec.test_eval;
    if (rec.step_skipped) result.skipped_rounds.push_back(t);
    result.metrics.push_back(rec.metrics);
    if (rec.failure_reason) {
      result.failure_rounds.push_back(t);
      result.failure_reasons.push_back(*rec.failure_reason);
      if (exp.config().halt_on_failure) {
        result.aborted = true;
        break;
      }
    }
  }
  result.final_state = std::move(state);
  return result;
}

/// Dataset named by the config's data source.
inline FederatedDataset load_data(const ExperimentConfig& cfg) {
  if (const auto* g = std::get_if<GeneratedData>(&cfg.data)) return generate_synthetic(g->spec, g->seed.value_or(cfg.seed));
  return load_dataset(std::get<FileData>(cfg.data).path).data;
}

inline RunResult run_experiment(const ExperimentConfig& cfg, const RoundObserver& observer = {}) {
  Experiment exp(cfg, load_data(cfg));
  return run_experiment(exp, observer);
}

}  // namespace cohortsim
