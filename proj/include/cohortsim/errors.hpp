#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace cohortsim {

/// Layer names, order or lengths of two parameter sets disagree.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A NaN or Inf appeared after aggregation or a server step.
class NonFiniteError : public std::runtime_error {
 public:
  NonFiniteError(std::int64_t round, std::string layer, const std::string& what)
      : std::runtime_error("round " + std::to_string(round) + ", layer '" + layer + "': " + what),
        round_(round),
        layer_(std::move(layer)) {}

  std::int64_t round() const noexcept { return round_; }
  const std::string& layer() const noexcept { return layer_; }

 private:
  std::int64_t round_;
  std::string layer_;
};

/// Local training produced a non-finite loss.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::string client_id, std::size_t step)
      : std::runtime_error("local training diverged on client '" + client_id + "' at step " +
                           std::to_string(step)),
        client_id_(std::move(client_id)),
        step_(step) {}

  const std::string& client_id() const noexcept { return client_id_; }
  std::size_t step() const noexcept { return step_; }

 private:
  std::string client_id_;
  std::size_t step_;
};

/// Configuration rejected; `path()` is the dotted location of the bad field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(std::string path, const std::string& what)
      : std::invalid_argument(path.empty() ? what : path + ": " + what), path_(std::move(path)) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

/// Malformed dataset file.
class DatasetFormatError : public std::runtime_error {
 public:
  DatasetFormatError(std::size_t line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace cohortsim
