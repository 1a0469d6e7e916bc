#pragma once

// Layered parameter containers, elementwise arithmetic, norms, and
// path-keyed deterministic random streams.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <numbers>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "cohortsim/errors.hpp"

namespace cohortsim {

struct Layer {
  std::string name;
  std::vector<double> values;

  bool operator==(const Layer&) const = default;
};

/// Ordered list of named numeric layers. Holds a model, a client update, an
/// aggregated pseudo-gradient or an optimizer slot.
///
/// Construction validates that names are unique and nonempty, the total size
/// is positive, and every value is finite. The mutable accessors exist for
/// in-place kernels (local SGD, optimizer slots); callers that mutate are
/// responsible for calling check_finite() before publishing the result.
class LayeredParams {
 public:
  LayeredParams() = default;

  explicit LayeredParams(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw ShapeError("parameter set has no layers");
    std::unordered_set<std::string_view> seen;
    std::size_t total = 0;
    for (const auto& l : layers_) {
      if (l.name.empty()) throw ShapeError("layer with empty name");
      if (!seen.insert(l.name).second) throw ShapeError("duplicate layer name '" + l.name + "'");
      for (double v : l.values) {
        if (!std::isfinite(v)) throw ShapeError("non-finite value in layer '" + l.name + "'");
      }
      total += l.values.size();
    }
    if (total == 0) throw ShapeError("parameter set has zero elements");
  }

  LayeredParams(std::initializer_list<std::pair<std::string, std::vector<double>>> init)
      : LayeredParams(to_layers(init)) {}

  std::size_t num_layers() const noexcept { return layers_.size(); }
  const std::vector<Layer>& layers() const noexcept { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }
  const std::string& name(std::size_t i) const { return layers_.at(i).name; }

  std::span<const double> values(std::size_t i) const { return layers_.at(i).values; }
  std::span<double> values(std::size_t i) { return layers_.at(i).values; }

  std::size_t total_size() const noexcept {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.values.size();
    return n;
  }

  /// Index of the named layer, or num_layers() if absent.
  std::size_t find(std::string_view name) const noexcept {
    for (std::size_t i = 0; i < layers_.size(); ++i)
      if (layers_[i].name == name) return i;
    return layers_.size();
  }

  /// All values concatenated in layer order.
  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(total_size());
    for (const auto& l : layers_) out.insert(out.end(), l.values.begin(), l.values.end());
    return out;
  }

  bool operator==(const LayeredParams&) const = default;

 private:
  static std::vector<Layer> to_layers(
      std::initializer_list<std::pair<std::string, std::vector<double>>> init) {
    std::vector<Layer> out;
    out.reserve(init.size());
    for (const auto& [n, v] : init) out.push_back({n, v});
    return out;
  }

  std::vector<Layer> layers_;
};

inline bool is_compatible(const LayeredParams& p, const LayeredParams& q) noexcept {
  if (p.num_layers() != q.num_layers()) return false;
  for (std::size_t i = 0; i < p.num_layers(); ++i) {
    if (p.name(i) != q.name(i) || p.values(i).size() != q.values(i).size()) return false;
  }
  return true;
}

/// Throws ShapeError naming the first layer where p and q disagree.
inline void require_compatible(const LayeredParams& p, const LayeredParams& q) {
  const std::size_t n = std::min(p.num_layers(), q.num_layers());
  for (std::size_t i = 0; i < n; ++i) {
    if (p.name(i) != q.name(i))
      throw ShapeError("layer " + std::to_string(i) + ": name '" + p.name(i) + "' vs '" +
                       q.name(i) + "'");
    if (p.values(i).size() != q.values(i).size())
      throw ShapeError("layer '" + p.name(i) + "': length " + std::to_string(p.values(i).size()) +
                       " vs " + std::to_string(q.values(i).size()));
  }
  if (p.num_layers() != q.num_layers()) {
    const auto& longer = p.num_layers() > q.num_layers() ? p : q;
    throw ShapeError("layer '" + longer.name(n) + "' present on one side only");
  }
}

/// Throws NonFiniteError identifying the round and first offending layer.
inline void check_finite(const LayeredParams& p, std::int64_t round, std::string_view what) {
  for (std::size_t i = 0; i < p.num_layers(); ++i) {
    for (double v : p.values(i)) {
      if (!std::isfinite(v)) throw NonFiniteError(round, p.name(i), std::string(what) + " is not finite");
    }
  }
}

inline LayeredParams zeros_like(const LayeredParams& p) {
  std::vector<Layer> layers;
  layers.reserve(p.num_layers());
  for (const auto& l : p.layers()) layers.push_back({l.name, std::vector<double>(l.values.size(), 0.0)});
  return LayeredParams(std::move(layers));
}

/// a*p + q, layerwise.
inline LayeredParams axpy(double a, const LayeredParams& p, const LayeredParams& q) {
  require_compatible(p, q);
  LayeredParams out = q;
  for (std::size_t i = 0; i < out.num_layers(); ++i) {
    auto dst = out.values(i);
    auto src = p.values(i);
    for (std::size_t j = 0; j < dst.size(); ++j) dst[j] += a * src[j];
  }
  check_finite(out, -1, "axpy result");
  return out;
}

inline LayeredParams scale(double a, const LayeredParams& p) {
  LayeredParams out = p;
  for (std::size_t i = 0; i < out.num_layers(); ++i)
    for (double& v : out.values(i)) v *= a;
  check_finite(out, -1, "scale result");
  return out;
}

/// p - q.
inline LayeredParams subtract(const LayeredParams& p, const LayeredParams& q) { return axpy(-1.0, q, p); }

inline double dot(const LayeredParams& p, const LayeredParams& q) {
  require_compatible(p, q);
  double s = 0.0;
  for (std::size_t i = 0; i < p.num_layers(); ++i) {
    auto a = p.values(i);
    auto b = q.values(i);
    for (std::size_t j = 0; j < a.size(); ++j) s += a[j] * b[j];
  }
  return s;
}

inline double l2_norm(std::span<const double> v) {
  // Scaled accumulation keeps huge or tiny magnitudes from overflowing.
  double max_abs = 0.0;
  for (double x : v) max_abs = std::max(max_abs, std::abs(x));
  if (max_abs == 0.0 || !std::isfinite(max_abs)) return max_abs;
  double s = 0.0;
  for (double x : v) {
    const double r = x / max_abs;
    s += r * r;
  }
  return max_abs * std::sqrt(s);
}

inline std::vector<double> layer_norms(const LayeredParams& p) {
  std::vector<double> out;
  out.reserve(p.num_layers());
  for (std::size_t i = 0; i < p.num_layers(); ++i) out.push_back(l2_norm(p.values(i)));
  return out;
}

inline double l2_norm(const LayeredParams& p) {
  double max_norm = 0.0;
  const auto norms = layer_norms(p);
  for (double n : norms) max_norm = std::max(max_norm, n);
  if (max_norm == 0.0) return 0.0;
  double s = 0.0;
  for (double n : norms) {
    const double r = n / max_norm;
    s += r * r;
  }
  return max_norm * std::sqrt(s);
}

// ---------------------------------------------------------------------------
// Random streams

namespace detail {

inline constexpr std::uint64_t kGolden = 0x9E3779B97F4A7C15ULL;

constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept { return (x << k) | (x >> (64 - k)); }

}  // namespace detail

/// FNV-1a, used to turn string identifiers into stream path tags.
constexpr std::uint64_t hash_tag(std::string_view s) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (char c : s) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001B3ULL;
  }
  return h;
}

/// Counter-based random stream. Output is a pure function of
/// (master_seed, path, draw index); streams never share state, so clients may
/// draw concurrently in any order.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::span<const std::uint64_t> path) : key_(derive(master_seed, path)) {}
  RngStream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path)
      : RngStream(master_seed, std::span<const std::uint64_t>(path.begin(), path.size())) {}

  std::uint64_t next_u64() noexcept {
    const std::uint64_t c = ++counter_;
    const std::uint64_t z = detail::mix64(key_ + c * detail::kGolden);
    return detail::mix64(z ^ detail::rotl(key_, 29));
  }

  /// Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform integer on [0, n) without modulo bias. n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via Box-Muller; consumes two draws.
  double normal() noexcept {
    const double u1 = 1.0 - uniform();  // (0, 1]
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  /// Exponential with the given mean (0 when mean is 0).
  double exponential(double mean) noexcept {
    if (mean <= 0.0) return 0.0;
    return -mean * std::log(1.0 - uniform());
  }

  /// Independent stream one path level below this one.
  RngStream child(std::uint64_t tag) const noexcept {
    RngStream s = *this;
    s.key_ = detail::mix64(key_ ^ detail::mix64(tag + detail::kGolden * 0x51ULL));
    s.counter_ = 0;
    return s;
  }

 private:
  static std::uint64_t derive(std::uint64_t seed, std::span<const std::uint64_t> path) noexcept {
    std::uint64_t k = detail::mix64(seed ^ 0x6A09E667F3BCC908ULL);
    std::uint64_t depth = 0;
    for (std::uint64_t tag : path) {
      ++depth;
      k = detail::mix64(k ^ detail::mix64(tag + detail::kGolden * depth));
    }
    // Fold in length so a path and its zero-extended prefix differ.
    return detail::mix64(k + depth);
  }

  std::uint64_t key_ = 0;
  std::uint64_t counter_ = 0;
};

inline RngStream derive_stream(std::uint64_t master_seed, std::span<const std::uint64_t> path) {
  return RngStream(master_seed, path);
}

inline RngStream derive_stream(std::uint64_t master_seed, std::initializer_list<std::uint64_t> path) {
  return RngStream(master_seed, path);
}

/// Domain tags that separate the uses of one master seed.
enum class StreamDomain : std::uint64_t {
  kInit = 1,
  kData = 2,
  kSampling = 3,
  kLocalTraining = 4,
  kRuntime = 5,
};

constexpr std::uint64_t tag(StreamDomain d) noexcept { return static_cast<std::uint64_t>(d); }

}  // namespace cohortsim
