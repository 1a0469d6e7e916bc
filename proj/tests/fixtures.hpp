#pragma once

// Small experiment configurations shared by the test binaries.

#include <filesystem>
#include <random>
#include <string>

#include "cohortsim/config.hpp"

namespace cohortsim::fixtures {

inline GeneratorSpec regression_generator(std::size_t clients, std::size_t dim = 4) {
  GeneratorSpec g;
  g.task = TaskKind::kRegression;
  g.num_train_clients = clients;
  g.num_test_clients = 4;
  g.input_dim = dim;
  g.num_classes = 1;
  g.heterogeneity = 0.5;
  g.client_size = ClientSizeLaw::log_uniform(3, 20);
  g.label_noise = 0.1;
  return g;
}

inline GeneratorSpec classification_generator(std::size_t clients, std::size_t dim = 6, std::size_t classes = 4) {
  GeneratorSpec g;
  g.task = TaskKind::kClassification;
  g.num_train_clients = clients;
  g.num_test_clients = 16;
  g.input_dim = dim;
  g.num_classes = classes;
  g.heterogeneity = 0.5;
  g.client_size = ClientSizeLaw::log_uniform(5, 30);
  g.label_noise = 0.0;
  return g;
}

/// FedAvg with SGD on the server, no clipping, fixed cohort.
inline ExperimentConfig fedavg(const GeneratorSpec& g, std::size_t cohort, std::int64_t rounds, std::uint64_t seed = 1) {
  ExperimentConfig c;
  c.seed = seed;
  c.rounds = rounds;
  c.algorithm.kind = ServerOptKind::kSgd;
  c.algorithm.lr = 1.0;
  c.client_lr = 0.05;
  c.budget = LocalBudget::epochs(1, 5);
  c.cohort = CohortSchedule::fixed(cohort);
  c.clipping.enabled = false;
  c.data = GeneratedData{g, std::nullopt};
  return c;
}

/// Fresh directory under the system temp dir, removed on destruction.
struct TempDir {
  std::filesystem::path path;

  explicit TempDir(const std::string& stem) {
    std::random_device rd;
    path = std::filesystem::temp_directory_path() / (stem + "_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace cohortsim::fixtures
