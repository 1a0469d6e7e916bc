#pragma once

// Portable line-oriented dataset file.
//
//   cohortsim-dataset 1
//   task <regression|classification>
//   input_dim <d>
//   num_classes <C>
//   seed <u64|none>
//   generator <single-line JSON|none>
//   clients <num_train> <num_test>
//   client <train|test> <id> <N_k> <p_k>
//   <label> <x_1> ... <x_d>            (N_k lines)
//   ...
//
// Reals are written with 17 significant digits, so files round-trip bit-exactly.

#include <cstdint>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cohortsim/errors.hpp"
#include "cohortsim/model.hpp"
#include "cohortsim/synth.hpp"
#include "cohortsim/text_format.hpp"

namespace cohortsim {

struct DatasetFile {
  FederatedDataset data;
  std::optional<GeneratorSpec> generator;
  std::optional<std::uint64_t> seed;

  bool operator==(const DatasetFile&) const = default;
};

inline constexpr std::string_view kDatasetMagic = "cohortsim-dataset";

inline void write_dataset(std::ostream& os, const DatasetFile& file) {
  const auto& fed = file.data;
  os << kDatasetMagic << " 1\n";
  os << "task " << to_string(fed.task) << '\n';
  os << "input_dim " << fed.input_dim << '\n';
  os << "num_classes " << fed.num_classes << '\n';
  os << "seed " << (file.seed ? std::to_string(*file.seed) : std::string("none")) << '\n';
  os << "generator " << (file.generator ? to_json(*file.generator).dump() : std::string("none")) << '\n';
  os << "clients " << fed.train_clients.size() << ' ' << fed.test_clients.size() << '\n';
  const auto write_split = [&](const char* split, const std::vector<ClientDataset>& clients) {
    for (const auto& c : clients) {
      os << "client " << split << ' ' << c.client_id << ' ' << c.num_examples() << ' ' << format_double(c.weight)
         << '\n';
      for (std::size_t i = 0; i < c.num_examples(); ++i) {
        os << format_double(c.labels[i]);
        for (double x : c.row(i)) os << ' ' << format_double(x);
        os << '\n';
      }
    }
  };
  write_split("train", fed.train_clients);
  write_split("test", fed.test_clients);
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& is) : is_(is) {}

  std::vector<std::string> next(const char* what) {
    std::string line;
    if (!std::getline(is_, line)) throw DatasetFormatError(line_ + 1, std::string("unexpected end of file, expected ") + what);
    ++line_;
    std::istringstream ss(line);
    std::vector<std::string> tokens;
    for (std::string t; ss >> t;) tokens.push_back(std::move(t));
    return tokens;
  }

  /// Reads "<key> <rest of line>" and returns the rest.
  std::string keyed(const std::string& key) {
    std::string line;
    if (!std::getline(is_, line)) throw DatasetFormatError(line_ + 1, "unexpected end of file, expected '" + key + "'");
    ++line_;
    if (line.rfind(key + ' ', 0) != 0) throw DatasetFormatError(line_, "expected '" + key + "' record");
    return line.substr(key.size() + 1);
  }

  std::size_t line() const noexcept { return line_; }

  bool at_end() {
    return is_.peek() == std::char_traits<char>::eof();
  }

 private:
  std::istream& is_;
  std::size_t line_ = 0;
};

template <typename Int>
Int require_int(const std::string& s, std::size_t line, const char* what) {
  auto v = parse_int<Int>(s);
  if (!v) throw DatasetFormatError(line, std::string("invalid ") + what + " '" + s + "'");
  return *v;
}

inline double require_double(const std::string& s, std::size_t line, const char* what) {
  auto v = parse_double(s);
  if (!v) throw DatasetFormatError(line, std::string("invalid ") + what + " '" + s + "'");
  return *v;
}

}  // namespace detail

inline DatasetFile read_dataset(std::istream& is) {
  detail::LineReader in(is);
  DatasetFile file;
  auto& fed = file.data;

  const auto magic = in.next("header");
  if (magic.size() != 2 || magic[0] != kDatasetMagic) throw DatasetFormatError(in.line(), "not a cohortsim dataset file");
  if (magic[1] != "1") throw DatasetFormatError(in.line(), "unsupported dataset version '" + magic[1] + "'");

  const auto task = in.keyed("task");
  if (task == "regression") fed.task = TaskKind::kRegression;
  else if (task == "classification") fed.task = TaskKind::kClassification;
  else throw DatasetFormatError(in.line(), "unknown task kind '" + task + "'");

  const auto dim = in.keyed("input_dim");
  fed.input_dim = detail::require_int<std::size_t>(dim, in.line(), "input_dim");
  if (fed.input_dim == 0) throw DatasetFormatError(in.line(), "input_dim must be positive");
  const auto classes = in.keyed("num_classes");
  fed.num_classes = detail::require_int<std::size_t>(classes, in.line(), "num_classes");

  const auto seed = in.keyed("seed");
  if (seed != "none") file.seed = detail::require_int<std::uint64_t>(seed, in.line(), "seed");

  const auto gen = in.keyed("generator");
  if (gen != "none") {
    try {
      file.generator = generator_from_json(json::parse(gen), "generator");
    } catch (const std::exception& e) {
      throw DatasetFormatError(in.line(), std::string("invalid generator record: ") + e.what());
    }
  }

  const auto counts = in.next("clients record");
  if (counts.size() != 3 || counts[0] != "clients") throw DatasetFormatError(in.line(), "expected 'clients <train> <test>'");
  const auto n_train = detail::require_int<std::size_t>(counts[1], in.line(), "train client count");
  const auto n_test = detail::require_int<std::size_t>(counts[2], in.line(), "test client count");

  for (std::size_t k = 0; k < n_train + n_test; ++k) {
    const auto head = in.next("client record");
    if (head.size() != 5 || head[0] != "client")
      throw DatasetFormatError(in.line(), "expected 'client <split> <id> <N> <weight>'");
    const bool is_train = k < n_train;
    if (head[1] != (is_train ? "train" : "test"))
      throw DatasetFormatError(in.line(), "expected a " + std::string(is_train ? "train" : "test") + " client");
    ClientDataset c;
    c.client_id = head[2];
    c.input_dim = fed.input_dim;
    const auto n = detail::require_int<std::size_t>(head[3], in.line(), "example count");
    c.weight = detail::require_double(head[4], in.line(), "weight");
    if (n == 0) throw DatasetFormatError(in.line(), "client has no examples");
    c.labels.reserve(n);
    c.features.reserve(n * fed.input_dim);
    for (std::size_t i = 0; i < n; ++i) {
      const auto row = in.next("example row");
      if (row.size() != fed.input_dim + 1)
        throw DatasetFormatError(in.line(), "expected " + std::to_string(fed.input_dim + 1) + " values, got " +
                                                std::to_string(row.size()));
      c.labels.push_back(detail::require_double(row[0], in.line(), "label"));
      for (std::size_t j = 1; j < row.size(); ++j) c.features.push_back(detail::require_double(row[j], in.line(), "feature"));
    }
    (is_train ? fed.train_clients : fed.test_clients).push_back(std::move(c));
  }
  while (!in.at_end()) {
    const auto extra = in.next("end of file");
    if (!extra.empty()) throw DatasetFormatError(in.line(), "trailing content after last client");
  }
  try {
    fed.validate();
  } catch (const std::invalid_argument& e) {
    throw DatasetFormatError(in.line(), e.what());
  }
  return file;
}

inline void save_dataset(const std::string& path, const DatasetFile& file) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
  write_dataset(os, file);
  if (!os) throw std::runtime_error("write to '" + path + "' failed");
}

inline DatasetFile load_dataset(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open dataset '" + path + "'");
  return read_dataset(is);
}

}  // namespace cohortsim
