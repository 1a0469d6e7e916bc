#pragma once

// Built-in differentiable models and per-client datasets.
//
// Layer layouts (weights row-major, output index major):
//   linear   weight[d], bias[1]                   squared error
//   softmax  weight[C*d], bias[C]                 cross-entropy
//   mlp      hidden.weight[H*d], hidden.bias[H],  tanh hidden layer,
//            output.weight[C*H], output.bias[C]   C == 1 regresses
//
// Squared error is 0.5*(prediction - label)^2.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "cohortsim/errors.hpp"
#include "cohortsim/params.hpp"

namespace cohortsim {

enum class TaskKind { kRegression, kClassification };
enum class ModelKind { kLinear, kSoftmax, kMlp };

struct ModelSpec {
  ModelKind kind = ModelKind::kSoftmax;
  std::size_t input_dim = 1;
  /// Output width. Must be 1 for linear, >= 2 for softmax; mlp regresses when 1.
  std::size_t num_classes = 2;
  std::size_t hidden_dim = 0;
  double init_scale = 0.1;

  bool operator==(const ModelSpec&) const = default;

  std::size_t num_outputs() const noexcept { return kind == ModelKind::kLinear ? 1 : num_classes; }
  bool is_regression() const noexcept { return num_outputs() == 1; }

  void validate() const {
    if (input_dim == 0) throw std::invalid_argument("model.input_dim must be positive");
    if (!(init_scale >= 0.0) || !std::isfinite(init_scale))
      throw std::invalid_argument("model.init_scale must be finite and nonnegative");
    switch (kind) {
      case ModelKind::kLinear:
        if (num_classes != 1) throw std::invalid_argument("linear model has exactly one output");
        break;
      case ModelKind::kSoftmax:
        if (num_classes < 2) throw std::invalid_argument("softmax model needs num_classes >= 2");
        break;
      case ModelKind::kMlp:
        if (num_classes == 0) throw std::invalid_argument("mlp model needs num_classes >= 1");
        if (hidden_dim == 0) throw std::invalid_argument("mlp model needs hidden_dim >= 1");
        break;
    }
  }
};

struct ClientDataset {
  std::string client_id;
  std::size_t input_dim = 0;
  /// Row-major, num_examples() x input_dim.
  std::vector<double> features;
  /// Real targets for regression, class indices stored as doubles otherwise.
  std::vector<double> labels;
  double weight = 0.0;

  bool operator==(const ClientDataset&) const = default;

  std::size_t num_examples() const noexcept { return labels.size(); }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(features).subspan(i * input_dim, input_dim);
  }

  void validate() const {
    if (client_id.empty()) throw std::invalid_argument("client with empty id");
    if (labels.empty()) throw std::invalid_argument("client '" + client_id + "' has no examples");
    if (features.size() != labels.size() * input_dim)
      throw std::invalid_argument("client '" + client_id + "' feature matrix has wrong size");
    if (!(weight > 0.0) || !std::isfinite(weight))
      throw std::invalid_argument("client '" + client_id + "' weight must be positive");
  }
};

/// Train/test client populations sharing one feature space.
struct FederatedDataset {
  TaskKind task = TaskKind::kClassification;
  std::size_t input_dim = 0;
  /// 1 for regression.
  std::size_t num_classes = 1;
  std::vector<ClientDataset> train_clients;
  std::vector<ClientDataset> test_clients;

  bool operator==(const FederatedDataset&) const = default;

  void validate() const {
    if (train_clients.empty()) throw std::invalid_argument("dataset has no train clients");
    for (const auto* split : {&train_clients, &test_clients}) {
      std::vector<std::string> ids;
      for (const auto& c : *split) {
        c.validate();
        if (c.input_dim != input_dim)
          throw std::invalid_argument("client '" + c.client_id + "' has mismatched feature dimension");
        if (task == TaskKind::kClassification) {
          for (double y : c.labels) {
            if (y < 0 || y >= static_cast<double>(num_classes) || y != std::floor(y))
              throw std::invalid_argument("client '" + c.client_id + "' has an invalid class label");
          }
        }
        ids.push_back(c.client_id);
      }
      std::sort(ids.begin(), ids.end());
      if (std::adjacent_find(ids.begin(), ids.end()) != ids.end())
        throw std::invalid_argument("duplicate client id '" + *std::adjacent_find(ids.begin(), ids.end()) + "'");
    }
  }
};

// ---------------------------------------------------------------------------

namespace detail {

struct LayerShape {
  const char* name;
  std::size_t size;
  bool is_weight;
};

inline std::vector<LayerShape> layout(const ModelSpec& spec) {
  const std::size_t d = spec.input_dim;
  const std::size_t c = spec.num_outputs();
  switch (spec.kind) {
    case ModelKind::kLinear:
    case ModelKind::kSoftmax:
      return {{"weight", c * d, true}, {"bias", c, false}};
    case ModelKind::kMlp:
      return {{"hidden.weight", spec.hidden_dim * d, true},
              {"hidden.bias", spec.hidden_dim, false},
              {"output.weight", c * spec.hidden_dim, true},
              {"output.bias", c, false}};
  }
  return {};
}

inline void require_model_shape(const ModelSpec& spec, const LayeredParams& params) {
  const auto shape = layout(spec);
  if (params.num_layers() != shape.size())
    throw ShapeError("expected " + std::to_string(shape.size()) + " layers, got " +
                     std::to_string(params.num_layers()));
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (params.name(i) != shape[i].name || params.values(i).size() != shape[i].size)
      throw ShapeError("layer " + std::to_string(i) + " does not match model layout ('" +
                       std::string(shape[i].name) + "', " + std::to_string(shape[i].size) + ")");
  }
}

/// out = W x + b, W is rows x cols row-major.
inline void affine(std::span<const double> w, std::span<const double> b, std::span<const double> x,
                   std::span<double> out) {
  const std::size_t cols = x.size();
  for (std::size_t r = 0; r < out.size(); ++r) {
    double s = b[r];
    const double* wr = w.data() + r * cols;
    for (std::size_t j = 0; j < cols; ++j) s += wr[j] * x[j];
    out[r] = s;
  }
}

/// Loss of one example given raw outputs; writes dloss/doutput into `dout`.
inline double head_loss(bool regression, std::span<const double> out, double label, std::span<double> dout) {
  if (regression) {
    const double r = out[0] - label;
    dout[0] = r;
    return 0.5 * r * r;
  }
  const double mx = *std::max_element(out.begin(), out.end());
  double z = 0.0;
  for (std::size_t c = 0; c < out.size(); ++c) {
    dout[c] = std::exp(out[c] - mx);
    z += dout[c];
  }
  for (double& p : dout) p /= z;
  const auto y = static_cast<std::size_t>(label);
  const double loss = std::log(z) + mx - out[y];
  dout[y] -= 1.0;
  return loss;
}

inline bool head_correct(bool regression, std::span<const double> out, double label) {
  if (regression) return std::abs(out[0] - label) < 0.5;
  const auto best = static_cast<std::size_t>(std::max_element(out.begin(), out.end()) - out.begin());
  return best == static_cast<std::size_t>(label);
}

/// Forward pass for one example; fills `hidden` (mlp only) and `out`.
inline void forward(const ModelSpec& spec, const LayeredParams& p, std::span<const double> x,
                    std::span<double> hidden, std::span<double> out) {
  if (spec.kind == ModelKind::kMlp) {
    affine(p.values(0), p.values(1), x, hidden);
    for (double& h : hidden) h = std::tanh(h);
    affine(p.values(2), p.values(3), hidden, out);
  } else {
    affine(p.values(0), p.values(1), x, out);
  }
}

inline void require_finite_row(const ClientDataset& c, std::span<const double> x) {
  for (double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite feature on client '" + c.client_id + "'");
}

}  // namespace detail

/// Weights i.i.d. uniform in [-init_scale, init_scale], biases zero.
inline LayeredParams init_params(const ModelSpec& spec, RngStream stream) {
  spec.validate();
  std::vector<Layer> layers;
  for (const auto& s : detail::layout(spec)) {
    Layer l{s.name, std::vector<double>(s.size, 0.0)};
    if (s.is_weight && spec.init_scale > 0.0) {
      for (double& v : l.values) v = spec.init_scale * (2.0 * stream.uniform() - 1.0);
    }
    layers.push_back(std::move(l));
  }
  return LayeredParams(std::move(layers));
}

struct LossAndGrad {
  double loss = 0.0;
  LayeredParams grad;
};

/// Mean loss over the selected examples of `client` and its exact gradient.
inline LossAndGrad loss_and_grad(const ModelSpec& spec, const LayeredParams& params, const ClientDataset& client,
                                 std::span<const std::size_t> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (client.input_dim != spec.input_dim) throw ShapeError("feature dimension does not match model input_dim");
  detail::require_model_shape(spec, params);

  const bool regression = spec.is_regression();
  const std::size_t d = spec.input_dim;
  const std::size_t c = spec.num_outputs();
  const std::size_t h = spec.kind == ModelKind::kMlp ? spec.hidden_dim : 0;

  LayeredParams grad = zeros_like(params);
  std::vector<double> hidden(h), out(c), dout(c), dhidden(h);
  double total = 0.0;

  for (std::size_t idx : batch) {
    const auto x = client.row(idx);
    detail::require_finite_row(client, x);
    detail::forward(spec, params, x, hidden, out);
    total += detail::head_loss(regression, out, client.labels[idx], dout);

    if (spec.kind == ModelKind::kMlp) {
      auto gw2 = grad.values(2);
      auto gb2 = grad.values(3);
      auto w2 = params.values(2);
      std::fill(dhidden.begin(), dhidden.end(), 0.0);
      for (std::size_t k = 0; k < c; ++k) {
        gb2[k] += dout[k];
        for (std::size_t j = 0; j < h; ++j) {
          gw2[k * h + j] += dout[k] * hidden[j];
          dhidden[j] += dout[k] * w2[k * h + j];
        }
      }
      auto gw1 = grad.values(0);
      auto gb1 = grad.values(1);
      for (std::size_t j = 0; j < h; ++j) {
        const double dz = dhidden[j] * (1.0 - hidden[j] * hidden[j]);
        gb1[j] += dz;
        for (std::size_t i = 0; i < d; ++i) gw1[j * d + i] += dz * x[i];
      }
    } else {
      auto gw = grad.values(0);
      auto gb = grad.values(1);
      for (std::size_t k = 0; k < c; ++k) {
        gb[k] += dout[k];
        for (std::size_t i = 0; i < d; ++i) gw[k * d + i] += dout[k] * x[i];
      }
    }
  }

  const double inv = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < grad.num_layers(); ++i)
    for (double& g : grad.values(i)) g *= inv;
  return {total * inv, std::move(grad)};
}

/// Full-batch loss and gradient on one client.
inline LossAndGrad loss_and_grad(const ModelSpec& spec, const LayeredParams& params, const ClientDataset& client) {
  std::vector<std::size_t> all(client.num_examples());
  std::iota(all.begin(), all.end(), std::size_t{0});
  return loss_and_grad(spec, params, client, all);
}

/// Raw model outputs for one feature row (probabilities for classification).
inline std::vector<double> predict(const ModelSpec& spec, const LayeredParams& params, std::span<const double> x) {
  detail::require_model_shape(spec, params);
  std::vector<double> hidden(spec.kind == ModelKind::kMlp ? spec.hidden_dim : 0), out(spec.num_outputs());
  detail::forward(spec, params, x, hidden, out);
  if (!spec.is_regression()) {
    const double mx = *std::max_element(out.begin(), out.end());
    double z = 0.0;
    for (double& o : out) z += (o = std::exp(o - mx));
    for (double& o : out) o /= z;
  }
  return out;
}

struct ClientEval {
  double loss = 0.0;
  double accuracy = 0.0;
  std::size_t num_examples = 0;
};

inline ClientEval evaluate_client(const ModelSpec& spec, const LayeredParams& params, const ClientDataset& client) {
  detail::require_model_shape(spec, params);
  const bool regression = spec.is_regression();
  std::vector<double> hidden(spec.kind == ModelKind::kMlp ? spec.hidden_dim : 0), out(spec.num_outputs()),
      dout(spec.num_outputs());
  double loss = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < client.num_examples(); ++i) {
    detail::forward(spec, params, client.row(i), hidden, out);
    loss += detail::head_loss(regression, out, client.labels[i], dout);
    if (detail::head_correct(regression, out, client.labels[i])) ++correct;
  }
  const double n = static_cast<double>(client.num_examples());
  return {loss / n, static_cast<double>(correct) / n, client.num_examples()};
}

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
  std::vector<double> per_client_accuracy;
};

/// Example-weighted loss and accuracy over `clients`, plus each client's own accuracy.
inline EvalResult evaluate(const ModelSpec& spec, const LayeredParams& params, std::span<const ClientDataset> clients) {
  if (clients.empty()) throw std::invalid_argument("evaluate: no clients");
  EvalResult r;
  r.per_client_accuracy.reserve(clients.size());
  double loss_sum = 0.0, correct_sum = 0.0, n_sum = 0.0;
  for (const auto& c : clients) {
    const auto e = evaluate_client(spec, params, c);
    const double n = static_cast<double>(e.num_examples);
    loss_sum += e.loss * n;
    correct_sum += e.accuracy * n;
    n_sum += n;
    r.per_client_accuracy.push_back(e.accuracy);
  }
  r.loss = loss_sum / n_sum;
  r.accuracy = correct_sum / n_sum;
  return r;
}

/// Sum_k p_k f_k(x) / Sum_k p_k over the train clients, f_k the client's mean loss.
inline double global_objective(const ModelSpec& spec, const LayeredParams& params, const FederatedDataset& fed) {
  if (fed.train_clients.empty()) throw std::invalid_argument("global_objective: no train clients");
  double num = 0.0, den = 0.0;
  for (const auto& c : fed.train_clients) {
    num += c.weight * evaluate_client(spec, params, c).loss;
    den += c.weight;
  }
  return num / den;
}

}  // namespace cohortsim
