#pragma once

// Synthetic heterogeneous federated datasets.
//
// A global linear map W* is drawn once. Every client k gets its own map
// W_k = W* + het * U_k and a feature mean mu_k = feature_shift * het * z_k,
// with U_k, z_k standard normal. Features are N(mu_k, I). Regression labels
// are W_k x + noise * e; classification labels are argmax_c of
// (W_k x)_c + noise * e_c. Test clients are fresh draws from the same law.

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include "cohortsim/json_fields.hpp"
#include "cohortsim/model.hpp"
#include "cohortsim/params.hpp"

namespace cohortsim {

struct ClientSizeLaw {
  enum class Kind { kFixed, kLogUniform };
  Kind kind = Kind::kFixed;
  std::size_t fixed = 20;
  std::size_t min = 1;
  std::size_t max = 1;

  /// Compares only the fields the kind uses.
  bool operator==(const ClientSizeLaw& o) const {
    if (kind != o.kind) return false;
    return kind == Kind::kFixed ? fixed == o.fixed : min == o.min && max == o.max;
  }

  static ClientSizeLaw fixed_size(std::size_t n) { return {Kind::kFixed, n, n, n}; }
  static ClientSizeLaw log_uniform(std::size_t lo, std::size_t hi) { return {Kind::kLogUniform, 0, lo, hi}; }

  std::size_t draw(RngStream& s) const {
    if (kind == Kind::kFixed) return fixed;
    const double lo = std::log(static_cast<double>(min));
    const double hi = std::log(static_cast<double>(max));
    const auto n = static_cast<std::size_t>(std::llround(std::exp(lo + (hi - lo) * s.uniform())));
    return std::clamp(n, min, max);
  }
};

struct GeneratorSpec {
  TaskKind task = TaskKind::kClassification;
  std::size_t num_train_clients = 10;
  std::size_t num_test_clients = 10;
  std::size_t input_dim = 5;
  /// Ignored (forced to 1) for regression.
  std::size_t num_classes = 2;
  double heterogeneity = 0.5;
  ClientSizeLaw client_size;
  double label_noise = 0.0;
  double feature_shift = 1.0;

  bool operator==(const GeneratorSpec&) const = default;

  std::size_t output_width() const noexcept { return task == TaskKind::kRegression ? 1 : num_classes; }

  void validate(const std::string& prefix = "") const {
    const auto at = [&](const char* key) { return prefix.empty() ? std::string(key) : prefix + "." + key; };
    if (num_train_clients == 0) throw ConfigError(at("train_clients"), "must be at least 1");
    if (input_dim == 0) throw ConfigError(at("input_dim"), "must be at least 1");
    if (task == TaskKind::kClassification && num_classes < 2)
      throw ConfigError(at("num_classes"), "classification needs at least 2 classes");
    if (!(heterogeneity >= 0.0) || !std::isfinite(heterogeneity))
      throw ConfigError(at("heterogeneity"), "must be finite and nonnegative");
    if (!(label_noise >= 0.0) || !std::isfinite(label_noise))
      throw ConfigError(at("label_noise"), "must be finite and nonnegative");
    if (!(feature_shift >= 0.0) || !std::isfinite(feature_shift))
      throw ConfigError(at("feature_shift"), "must be finite and nonnegative");
    if (client_size.kind == ClientSizeLaw::Kind::kFixed) {
      if (client_size.fixed == 0) throw ConfigError(at("client_size.fixed"), "must be at least 1");
    } else if (client_size.min == 0 || client_size.max < client_size.min) {
      throw ConfigError(at("client_size.log_uniform"), "need 1 <= min <= max");
    }
  }
};

inline const char* to_string(TaskKind k) { return k == TaskKind::kRegression ? "regression" : "classification"; }

inline TaskKind parse_task_kind(const std::string& s, const std::string& path) {
  if (s == "regression") return TaskKind::kRegression;
  if (s == "classification") return TaskKind::kClassification;
  throw ConfigError(path, "unknown task kind '" + s + "'");
}

inline json to_json(const GeneratorSpec& g) {
  json size;
  if (g.client_size.kind == ClientSizeLaw::Kind::kFixed) {
    size["fixed"] = g.client_size.fixed;
  } else {
    size["log_uniform"] = json::array({g.client_size.min, g.client_size.max});
  }
  json j;
  j["task"] = to_string(g.task);
  j["train_clients"] = g.num_train_clients;
  j["test_clients"] = g.num_test_clients;
  j["input_dim"] = g.input_dim;
  j["num_classes"] = g.num_classes;
  j["heterogeneity"] = g.heterogeneity;
  j["client_size"] = size;
  j["label_noise"] = g.label_noise;
  j["feature_shift"] = g.feature_shift;
  return j;
}

inline GeneratorSpec generator_from_json(const json& j, const std::string& path) {
  ObjectReader r(j, path);
  GeneratorSpec g;
  g.task = parse_task_kind(r.get_or<std::string>("task", "classification"), r.child_path("task"));
  g.num_train_clients = r.get<std::size_t>("train_clients");
  g.num_test_clients = r.get_or<std::size_t>("test_clients", g.num_train_clients);
  g.input_dim = r.get<std::size_t>("input_dim");
  g.num_classes = r.get_or<std::size_t>("num_classes", g.task == TaskKind::kRegression ? 1 : 2);
  g.heterogeneity = r.get_or<double>("heterogeneity", g.heterogeneity);
  g.label_noise = r.get_or<double>("label_noise", g.label_noise);
  g.feature_shift = r.get_or<double>("feature_shift", g.feature_shift);
  if (r.has("client_size")) {
    auto s = r.object("client_size");
    if (s.has("fixed") == s.has("log_uniform"))
      throw ConfigError(s.path(), "exactly one of 'fixed' or 'log_uniform' is required");
    if (s.has("fixed")) {
      g.client_size = ClientSizeLaw::fixed_size(s.get<std::size_t>("fixed"));
    } else {
      const json& range = s.raw("log_uniform");
      const auto rp = s.child_path("log_uniform");
      if (!range.is_array() || range.size() != 2) throw ConfigError(rp, "expected [min, max]");
      g.client_size = ClientSizeLaw::log_uniform(ObjectReader::convert<std::size_t>(range[0], rp + "[0]"),
                                                 ObjectReader::convert<std::size_t>(range[1], rp + "[1]"));
    }
    s.finish();
  }
  r.finish();
  if (g.task == TaskKind::kRegression) g.num_classes = 1;
  g.validate(path);
  return g;
}

namespace detail {

inline std::string client_name(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu", prefix, i);
  return buf;
}

inline ClientDataset draw_client(const GeneratorSpec& g, const std::vector<double>& global_map, std::string id,
                                 RngStream s, std::vector<double>* map_out) {
  const std::size_t d = g.input_dim;
  const std::size_t c = g.output_width();
  std::vector<double> map = global_map;
  for (double& w : map) w += g.heterogeneity * s.normal();
  std::vector<double> mean(d);
  for (double& m : mean) m = g.feature_shift * g.heterogeneity * s.normal();
  if (map_out) *map_out = map;

  const std::size_t n = g.client_size.draw(s);
  ClientDataset client{std::move(id), d, std::vector<double>(n * d), std::vector<double>(n),
                       static_cast<double>(n)};
  std::vector<double> scores(c);
  for (std::size_t i = 0; i < n; ++i) {
    double* x = client.features.data() + i * d;
    for (std::size_t j = 0; j < d; ++j) x[j] = mean[j] + s.normal();
    for (std::size_t k = 0; k < c; ++k) {
      double v = 0.0;
      for (std::size_t j = 0; j < d; ++j) v += map[k * d + j] * x[j];
      scores[k] = v + g.label_noise * s.normal();
    }
    client.labels[i] = g.task == TaskKind::kRegression
                           ? scores[0]
                           : static_cast<double>(std::max_element(scores.begin(), scores.end()) - scores.begin());
  }
  return client;
}

}  // namespace detail

/// Generating maps, kept for tests and analysis.
struct SyntheticTruth {
  std::vector<double> global_map;
  std::vector<std::vector<double>> train_maps;
  std::vector<std::vector<double>> test_maps;
};

inline FederatedDataset generate_synthetic(const GeneratorSpec& g, std::uint64_t master_seed,
                                           SyntheticTruth* truth = nullptr) {
  g.validate();
  const std::size_t d = g.input_dim;
  const std::size_t c = g.output_width();
  RngStream global = derive_stream(master_seed, {tag(StreamDomain::kData), 0});
  std::vector<double> global_map(c * d);
  for (double& w : global_map) w = global.normal();
  if (truth) *truth = SyntheticTruth{global_map, {}, {}};

  FederatedDataset fed;
  fed.task = g.task;
  fed.input_dim = d;
  fed.num_classes = c;
  fed.train_clients.reserve(g.num_train_clients);
  for (std::size_t i = 0; i < g.num_train_clients; ++i) {
    fed.train_clients.push_back(detail::draw_client(g, global_map, detail::client_name("train", i),
                                                    derive_stream(master_seed, {tag(StreamDomain::kData), 1, i}),
                                                    truth ? &truth->train_maps.emplace_back() : nullptr));
  }
  fed.test_clients.reserve(g.num_test_clients);
  for (std::size_t i = 0; i < g.num_test_clients; ++i) {
    fed.test_clients.push_back(detail::draw_client(g, global_map, detail::client_name("test", i),
                                                   derive_stream(master_seed, {tag(StreamDomain::kData), 2, i}),
                                                   truth ? &truth->test_maps.emplace_back() : nullptr));
  }
  return fed;
}

}  // namespace cohortsim
