#pragma once

// Experiment configuration: a single JSON document, parsed strictly.
//
// {
//   "seed": 1, "rounds": 100, "eval_period": 1, "workers": 1,
//   "algorithm":  {"kind": "adam", "server_lr": 0.01, "beta1": 0.9, "beta2": 0.99,
//                  "epsilon": 0.001, "weight_decay": 0, "bias_correction": false},
//   "client":     {"lr": 0.1, "epochs": 1, "batch_size": 10}      (or "steps": S)
//   "cohort":     {"kind": "fixed", "size": 10}
//                 {"kind": "doubling", "initial": 50, "period": 300, "cap": 800}
//   "clipping":   {"enabled": true, "target_quantile": 0.8, "initial_level": 1, "learning_rate": 0.2},
//   "lr_scaling": {"rule": "none|sqrt|linear", "reference_cohort": 50,
//                  "warmup_rounds": 100, "warmup_start": "reference|zero"},
//   "straggler":  {"alpha": 1, "lambda": 0},
//   "model":      {"kind": "linear|softmax|mlp", "hidden_dim": 16, "init_scale": 0.1},
//   "data":       {"generator": {...}, "seed": 7}                  (or "file": "path")
//   "halt_on_failure": false, "cosine_cap": 0,
//   "thresholds": [0.3, 0.5, 0.7], "threshold_field": "test_acc",
//   "output": "metrics.csv",
//   "norm_reference": {"csv": "reference.csv", "cohort_size": 50}
// }

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "cohortsim/client.hpp"
#include "cohortsim/diagnostics.hpp"
#include "cohortsim/errors.hpp"
#include "cohortsim/json_fields.hpp"
#include "cohortsim/model.hpp"
#include "cohortsim/server_opt.hpp"
#include "cohortsim/straggler.hpp"
#include "cohortsim/synth.hpp"

namespace cohortsim {

struct CohortSchedule {
  enum class Kind { kFixed, kDoubling };
  Kind kind = Kind::kFixed;
  /// Fixed size, or the initial size when doubling.
  std::size_t size = 10;
  std::size_t period = 300;
  std::optional<std::size_t> cap;

  bool operator==(const CohortSchedule&) const = default;

  static CohortSchedule fixed(std::size_t m) { return {Kind::kFixed, m, 300, std::nullopt}; }
  static CohortSchedule doubling(std::size_t m0, std::size_t period, std::optional<std::size_t> cap = std::nullopt) {
    return {Kind::kDoubling, m0, period, cap};
  }
};

struct ClipConfig {
  bool enabled = true;
  double target_quantile = 0.8;
  double initial_level = 1.0;
  double learning_rate = 0.2;

  bool operator==(const ClipConfig&) const = default;
};

struct ModelConfig {
  /// Defaults to linear for regression data and softmax for classification.
  std::optional<ModelKind> kind;
  std::size_t hidden_dim = 16;
  double init_scale = 0.1;

  bool operator==(const ModelConfig&) const = default;
};

struct GeneratedData {
  GeneratorSpec spec;
  /// Defaults to the experiment seed.
  std::optional<std::uint64_t> seed;

  bool operator==(const GeneratedData&) const = default;
};

struct FileData {
  std::string path;

  bool operator==(const FileData&) const = default;
};

using DataSource = std::variant<GeneratedData, FileData>;

struct NormReference {
  std::string csv;
  std::size_t cohort_size = 0;

  bool operator==(const NormReference&) const = default;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::int64_t rounds = 0;
  std::int64_t eval_period = 1;
  std::size_t workers = 1;
  ServerOptConfig algorithm;
  double client_lr = 0.1;
  LocalBudget budget = LocalBudget::epochs(1, 10);
  CohortSchedule cohort;
  ClipConfig clipping;
  LrScaling lr_scaling;
  StragglerConfig straggler;
  ModelConfig model;
  DataSource data = GeneratedData{};
  bool halt_on_failure = false;
  /// 0 means all cohort members.
  std::size_t cosine_cap = 0;
  std::vector<double> thresholds = {0.3, 0.5, 0.7};
  std::string threshold_field = "test_acc";
  std::string output = "metrics.csv";
  std::optional<NormReference> norm_reference;

  bool operator==(const ExperimentConfig&) const = default;
};

// ---------------------------------------------------------------------------

inline const char* to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kLinear: return "linear";
    case ModelKind::kSoftmax: return "softmax";
    case ModelKind::kMlp: return "mlp";
  }
  return "?";
}

inline const char* to_string(LrScalingRule r) {
  switch (r) {
    case LrScalingRule::kNone: return "none";
    case LrScalingRule::kSqrt: return "sqrt";
    case LrScalingRule::kLinear: return "linear";
  }
  return "?";
}

inline const char* to_string(WarmupStart w) { return w == WarmupStart::kReference ? "reference" : "zero"; }

/// Checks every cross-field invariant; throws ConfigError with the field path.
inline void validate(const ExperimentConfig& c) {
  if (c.rounds < 0) throw ConfigError("rounds", "must be nonnegative");
  if (c.eval_period < 1) throw ConfigError("eval_period", "must be at least 1");
  if (c.workers < 1) throw ConfigError("workers", "must be at least 1");

  const auto& a = c.algorithm;
  if (!(a.lr > 0.0) || !std::isfinite(a.lr)) throw ConfigError("algorithm.server_lr", "must be positive");
  if (!(a.beta1 >= 0.0 && a.beta1 < 1.0)) throw ConfigError("algorithm.beta1", "must lie in [0, 1)");
  if (!(a.beta2 >= 0.0 && a.beta2 < 1.0)) throw ConfigError("algorithm.beta2", "must lie in [0, 1)");
  if (!(a.epsilon > 0.0) || !std::isfinite(a.epsilon)) throw ConfigError("algorithm.epsilon", "must be positive");
  if (!(a.weight_decay >= 0.0) || !std::isfinite(a.weight_decay))
    throw ConfigError("algorithm.weight_decay", "must be nonnegative");

  if (!(c.client_lr >= 0.0) || !std::isfinite(c.client_lr)) throw ConfigError("client.lr", "must be nonnegative");
  if (c.budget.value < 1)
    throw ConfigError(c.budget.mode == LocalBudget::Mode::kEpochs ? "client.epochs" : "client.steps", "must be at least 1");
  if (c.budget.batch_size < 1) throw ConfigError("client.batch_size", "must be at least 1");

  if (c.cohort.size < 1)
    throw ConfigError(c.cohort.kind == CohortSchedule::Kind::kFixed ? "cohort.size" : "cohort.initial", "must be at least 1");
  if (c.cohort.period < 1) throw ConfigError("cohort.period", "must be at least 1");
  if (c.cohort.cap && *c.cohort.cap < 1) throw ConfigError("cohort.cap", "must be at least 1");

  const auto& k = c.clipping;
  if (!(k.target_quantile >= 0.0 && k.target_quantile <= 1.0))
    throw ConfigError("clipping.target_quantile", "must lie in [0, 1]");
  if (!(k.initial_level > 0.0) || !std::isfinite(k.initial_level))
    throw ConfigError("clipping.initial_level", "must be positive");
  if (!(k.learning_rate >= 0.0) || !std::isfinite(k.learning_rate))
    throw ConfigError("clipping.learning_rate", "must be nonnegative");

  if (!(c.straggler.alpha >= 0.0) || !std::isfinite(c.straggler.alpha))
    throw ConfigError("straggler.alpha", "must be nonnegative");
  if (!(c.straggler.lambda >= 0.0) || !std::isfinite(c.straggler.lambda))
    throw ConfigError("straggler.lambda", "must be nonnegative");

  if (c.model.hidden_dim < 1) throw ConfigError("model.hidden_dim", "must be at least 1");
  if (!(c.model.init_scale >= 0.0) || !std::isfinite(c.model.init_scale))
    throw ConfigError("model.init_scale", "must be finite and nonnegative");

  if (const auto* g = std::get_if<GeneratedData>(&c.data)) g->spec.validate("data.generator");
  if (const auto* f = std::get_if<FileData>(&c.data); f && f->path.empty())
    throw ConfigError("data.file", "must not be empty");

  try {
    (void)field_value(RoundMetrics{}, c.threshold_field);
  } catch (const std::invalid_argument&) {
    throw ConfigError("threshold_field", "unknown metrics column '" + c.threshold_field + "'");
  }
  for (std::size_t i = 0; i < c.thresholds.size(); ++i)
    if (!std::isfinite(c.thresholds[i])) throw ConfigError("thresholds[" + std::to_string(i) + "]", "must be finite");
  if (c.norm_reference) {
    if (c.norm_reference->csv.empty()) throw ConfigError("norm_reference.csv", "must not be empty");
    if (c.norm_reference->cohort_size < 1) throw ConfigError("norm_reference.cohort_size", "must be at least 1");
  }
}

inline ExperimentConfig config_from_json(const json& j) {
  ObjectReader r(j, "");
  ExperimentConfig c;
  c.seed = r.get<std::uint64_t>("seed");
  c.rounds = r.get<std::int64_t>("rounds");
  c.eval_period = r.get_or<std::int64_t>("eval_period", c.eval_period);
  c.workers = r.get_or<std::size_t>("workers", c.workers);

  {
    auto a = r.object("algorithm");
    const auto kind = a.get<std::string>("kind");
    const auto parsed = parse_server_opt_kind(kind);
    if (!parsed) throw ConfigError(a.child_path("kind"), "unknown server optimizer '" + kind + "'");
    c.algorithm.kind = *parsed;
    c.algorithm.lr = a.get<double>("server_lr");
    c.algorithm.beta1 = a.get_or<double>("beta1", c.algorithm.beta1);
    c.algorithm.beta2 = a.get_or<double>("beta2", c.algorithm.beta2);
    c.algorithm.epsilon = a.get_or<double>("epsilon", c.algorithm.epsilon);
    c.algorithm.weight_decay = a.get_or<double>("weight_decay", c.algorithm.weight_decay);
    c.algorithm.bias_correction = a.get_or<bool>("bias_correction", c.algorithm.bias_correction);
    a.finish();
  }
  {
    auto cl = r.object("client");
    c.client_lr = cl.get<double>("lr");
    if (cl.has("epochs") && cl.has("steps")) throw ConfigError(cl.path(), "'epochs' and 'steps' are exclusive");
    const auto batch = cl.get_or<std::size_t>("batch_size", c.budget.batch_size);
    c.budget = cl.has("steps") ? LocalBudget::steps(cl.get<std::size_t>("steps"), batch)
                               : LocalBudget::epochs(cl.get_or<std::size_t>("epochs", 1), batch);
    cl.finish();
  }
  {
    auto co = r.object("cohort");
    const auto kind = co.get_or<std::string>("kind", "fixed");
    if (kind == "fixed") {
      c.cohort = CohortSchedule::fixed(co.get<std::size_t>("size"));
    } else if (kind == "doubling") {
      c.cohort = CohortSchedule::doubling(co.get<std::size_t>("initial"), co.get_or<std::size_t>("period", 300),
                                          co.get_optional<std::size_t>("cap"));
    } else {
      throw ConfigError(co.child_path("kind"), "unknown cohort schedule '" + kind + "'");
    }
    co.finish();
  }
  if (r.has("clipping")) {
    auto k = r.object("clipping");
    c.clipping.enabled = k.get_or<bool>("enabled", c.clipping.enabled);
    c.clipping.target_quantile = k.get_or<double>("target_quantile", c.clipping.target_quantile);
    c.clipping.initial_level = k.get_or<double>("initial_level", c.clipping.initial_level);
    c.clipping.learning_rate = k.get_or<double>("learning_rate", c.clipping.learning_rate);
    k.finish();
  }
  if (r.has("lr_scaling")) {
    auto s = r.object("lr_scaling");
    const auto rule = s.get_or<std::string>("rule", "none");
    if (rule == "none") c.lr_scaling.rule = LrScalingRule::kNone;
    else if (rule == "sqrt") c.lr_scaling.rule = LrScalingRule::kSqrt;
    else if (rule == "linear") c.lr_scaling.rule = LrScalingRule::kLinear;
    else throw ConfigError(s.child_path("rule"), "unknown scaling rule '" + rule + "'");
    c.lr_scaling.reference_cohort = s.get_or<std::size_t>("reference_cohort", 0);
    c.lr_scaling.warmup_rounds = s.get_or<std::size_t>("warmup_rounds", 0);
    const auto start = s.get_or<std::string>("warmup_start", "reference");
    if (start == "reference") c.lr_scaling.warmup_start = WarmupStart::kReference;
    else if (start == "zero") c.lr_scaling.warmup_start = WarmupStart::kZero;
    else throw ConfigError(s.child_path("warmup_start"), "expected 'reference' or 'zero'");
    s.finish();
  }
  if (r.has("straggler")) {
    auto s = r.object("straggler");
    c.straggler.alpha = s.get_or<double>("alpha", c.straggler.alpha);
    c.straggler.lambda = s.get_or<double>("lambda", c.straggler.lambda);
    s.finish();
  }
  if (r.has("model")) {
    auto m = r.object("model");
    if (auto kind = m.get_optional<std::string>("kind")) {
      if (*kind == "linear") c.model.kind = ModelKind::kLinear;
      else if (*kind == "softmax") c.model.kind = ModelKind::kSoftmax;
      else if (*kind == "mlp") c.model.kind = ModelKind::kMlp;
      else throw ConfigError(m.child_path("kind"), "unknown model kind '" + *kind + "'");
    }
    c.model.hidden_dim = m.get_or<std::size_t>("hidden_dim", c.model.hidden_dim);
    c.model.init_scale = m.get_or<double>("init_scale", c.model.init_scale);
    m.finish();
  }
  {
    auto d = r.object("data");
    if (d.has("generator") == d.has("file")) throw ConfigError(d.path(), "exactly one of 'generator' or 'file' is required");
    if (d.has("file")) {
      c.data = FileData{d.get<std::string>("file")};
    } else {
      GeneratedData g{generator_from_json(d.raw("generator"), d.child_path("generator")),
                      d.get_optional<std::uint64_t>("seed")};
      c.data = std::move(g);
    }
    d.finish();
  }
  c.halt_on_failure = r.get_or<bool>("halt_on_failure", c.halt_on_failure);
  c.cosine_cap = r.get_or<std::size_t>("cosine_cap", c.cosine_cap);
  if (r.has("thresholds")) {
    const json& t = r.raw("thresholds");
    if (!t.is_array()) throw ConfigError("thresholds", "expected an array of numbers");
    c.thresholds.clear();
    for (std::size_t i = 0; i < t.size(); ++i)
      c.thresholds.push_back(ObjectReader::convert<double>(t[i], "thresholds[" + std::to_string(i) + "]"));
  }
  c.threshold_field = r.get_or<std::string>("threshold_field", c.threshold_field);
  c.output = r.get_or<std::string>("output", c.output);
  if (r.has("norm_reference") && !j.at("norm_reference").is_null()) {
    auto n = r.object("norm_reference");
    c.norm_reference = NormReference{n.get<std::string>("csv"), n.get<std::size_t>("cohort_size")};
    n.finish();
  } else if (r.has("norm_reference")) {
    (void)r.raw("norm_reference");
  }
  r.finish();
  validate(c);
  return c;
}

inline ExperimentConfig parse_config(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError("", std::string("syntax error: ") + e.what());
  }
  return config_from_json(j);
}

inline json to_json(const ExperimentConfig& c) {
  json j;
  j["seed"] = c.seed;
  j["rounds"] = c.rounds;
  j["eval_period"] = c.eval_period;
  j["workers"] = c.workers;
  j["algorithm"] = {{"kind", to_string(c.algorithm.kind)},
                    {"server_lr", c.algorithm.lr},
                    {"beta1", c.algorithm.beta1},
                    {"beta2", c.algorithm.beta2},
                    {"epsilon", c.algorithm.epsilon},
                    {"weight_decay", c.algorithm.weight_decay},
                    {"bias_correction", c.algorithm.bias_correction}};
  json client = {{"lr", c.client_lr}, {"batch_size", c.budget.batch_size}};
  client[c.budget.mode == LocalBudget::Mode::kEpochs ? "epochs" : "steps"] = c.budget.value;
  j["client"] = client;
  if (c.cohort.kind == CohortSchedule::Kind::kFixed) {
    j["cohort"] = {{"kind", "fixed"}, {"size", c.cohort.size}};
  } else {
    j["cohort"] = {{"kind", "doubling"}, {"initial", c.cohort.size}, {"period", c.cohort.period}};
    if (c.cohort.cap) j["cohort"]["cap"] = *c.cohort.cap;
  }
  j["clipping"] = {{"enabled", c.clipping.enabled},
                   {"target_quantile", c.clipping.target_quantile},
                   {"initial_level", c.clipping.initial_level},
                   {"learning_rate", c.clipping.learning_rate}};
  j["lr_scaling"] = {{"rule", to_string(c.lr_scaling.rule)},
                     {"reference_cohort", c.lr_scaling.reference_cohort},
                     {"warmup_rounds", c.lr_scaling.warmup_rounds},
                     {"warmup_start", to_string(c.lr_scaling.warmup_start)}};
  j["straggler"] = {{"alpha", c.straggler.alpha}, {"lambda", c.straggler.lambda}};
  j["model"] = {{"hidden_dim", c.model.hidden_dim}, {"init_scale", c.model.init_scale}};
  if (c.model.kind) j["model"]["kind"] = to_string(*c.model.kind);
  if (const auto* g = std::get_if<GeneratedData>(&c.data)) {
    j["data"] = {{"generator", to_json(g->spec)}};
    if (g->seed) j["data"]["seed"] = *g->seed;
  } else {
    j["data"] = {{"file", std::get<FileData>(c.data).path}};
  }
  j["halt_on_failure"] = c.halt_on_failure;
  j["cosine_cap"] = c.cosine_cap;
  j["thresholds"] = c.thresholds;
  j["threshold_field"] = c.threshold_field;
  j["output"] = c.output;
  if (c.norm_reference) j["norm_reference"] = {{"csv", c.norm_reference->csv}, {"cohort_size", c.norm_reference->cohort_size}};
  return j;
}

inline std::string serialize_config(const ExperimentConfig& c) { return to_json(c).dump(2) + "\n"; }

/// Concrete model for a dataset: kind defaults by task, dimensions come from the data.
inline ModelSpec resolve_model(const ModelConfig& m, const FederatedDataset& fed) {
  ModelSpec spec;
  spec.kind = m.kind.value_or(fed.task == TaskKind::kRegression ? ModelKind::kLinear : ModelKind::kSoftmax);
  spec.input_dim = fed.input_dim;
  spec.num_classes = fed.task == TaskKind::kRegression ? 1 : fed.num_classes;
  spec.hidden_dim = spec.kind == ModelKind::kMlp ? m.hidden_dim : 0;
  spec.init_scale = m.init_scale;
  if (fed.task == TaskKind::kRegression && spec.kind == ModelKind::kSoftmax)
    throw ConfigError("model.kind", "softmax model needs classification data");
  if (fed.task == TaskKind::kClassification && spec.kind == ModelKind::kLinear)
    throw ConfigError("model.kind", "linear model needs regression data");
  return spec;
}

}  // namespace cohortsim
