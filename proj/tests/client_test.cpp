#include <gtest/gtest.h>

#include <cmath>

#include "cohortsim/client.hpp"
#include "oracles.hpp"

namespace cohortsim {
namespace {

ClientDataset regression_client(std::size_t n, std::size_t d, std::uint64_t seed) {
  RngStream s(seed, {});
  ClientDataset c{"client", d, std::vector<double>(n * d), std::vector<double>(n), static_cast<double>(n)};
  for (double& x : c.features) x = s.normal();
  for (double& y : c.labels) y = 2.0 * s.normal();
  return c;
}

const ModelSpec kLinear3{ModelKind::kLinear, 3, 1, 0, 0.5};

TEST(LocalTrain, ZeroLearningRateIsIdentity) {
  const auto c = regression_client(6, 3, 1);
  const auto x = init_params(kLinear3, RngStream(2, {}));
  EXPECT_EQ(local_train(kLinear3, x, c, 0.0, LocalBudget::epochs(3, 2), RngStream(3, {})), x);
  EXPECT_EQ(l2_norm(compute_update(x, local_train(kLinear3, x, c, 0.0, LocalBudget::steps(5, 1), RngStream(3, {})))),
            0.0);
}

TEST(LocalTrain, FullBatchSingleEpochIsOneGradientStep) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto c = regression_client(3 + seed, 3, seed);
    const auto x = init_params(kLinear3, RngStream(seed, {9}));
    const double lr = 0.05 + 0.01 * static_cast<double>(seed);
    const auto xk = local_train(kLinear3, x, c, lr, LocalBudget::epochs(1, c.num_examples()), RngStream(seed, {4}));
    const auto expected = axpy(-lr, loss_and_grad(kLinear3, x, c).grad, x);
    EXPECT_EQ(xk, expected);

    // Against the closed-form gradient as well.
    std::vector<std::size_t> all(c.num_examples());
    std::iota(all.begin(), all.end(), std::size_t{0});
    const auto g = oracle::linear_regression_grad(x.flatten(), c, all);
    const auto flat = xk.flatten();
    for (std::size_t j = 0; j < flat.size(); ++j) EXPECT_NEAR(flat[j], x.flatten()[j] - lr * g[j], 1e-12);
  }
}

TEST(LocalTrain, TwoEpochsMatchHandSteppedOracle) {
  const auto c = regression_client(4, 3, 7);
  const auto x = init_params(kLinear3, RngStream(8, {}));
  const double lr = 0.1;
  const auto xk = local_train(kLinear3, x, c, lr, LocalBudget::epochs(2, 2), RngStream(11, {5}));

  RngStream s(11, {5});
  auto w = x.flatten();
  int steps = 0;
  for (int epoch = 0; epoch < 2; ++epoch) {
    const auto perm = oracle::permutation(4, s);
    for (std::size_t start = 0; start < 4; start += 2) {
      std::vector<std::size_t> batch{perm[start], perm[start + 1]};
      const auto g = oracle::linear_regression_grad(w, c, batch);
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
      ++steps;
    }
  }
  EXPECT_EQ(steps, 4);
  const auto flat = xk.flatten();
  for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(flat[j], w[j], 1e-12);
}

TEST(LocalTrain, StepModeWrapsIntoReshuffledEpochs) {
  // N=3, B=2: epoch batches are sizes {2, 1}; 5 steps = 2.5 epochs.
  const auto c = regression_client(3, 3, 12);
  const auto x = init_params(kLinear3, RngStream(13, {}));
  const double lr = 0.07;
  const auto xk = local_train(kLinear3, x, c, lr, LocalBudget::steps(5, 2), RngStream(14, {}));

  RngStream s(14, {});
  auto w = x.flatten();
  int steps = 0;
  std::vector<std::size_t> perm;
  std::size_t pos = 3;
  while (steps < 5) {
    if (pos >= 3) {
      perm = oracle::permutation(3, s);
      pos = 0;
    }
    const std::size_t len = std::min<std::size_t>(2, 3 - pos);
    std::vector<std::size_t> batch(perm.begin() + pos, perm.begin() + pos + len);
    pos += len;
    const auto g = oracle::linear_regression_grad(w, c, batch);
    for (std::size_t j = 0; j < w.size(); ++j) w[j] -= lr * g[j];
    ++steps;
  }
  const auto flat = xk.flatten();
  for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(flat[j], w[j], 1e-12);
}

TEST(LocalTrain, ReplayIsBitIdentical) {
  const auto c = regression_client(9, 3, 2);
  const auto x = init_params(kLinear3, RngStream(1, {}));
  const auto a = local_train(kLinear3, x, c, 0.03, LocalBudget::epochs(3, 4), RngStream(6, {1, 2}));
  const auto b = local_train(kLinear3, x, c, 0.03, LocalBudget::epochs(3, 4), RngStream(6, {1, 2}));
  EXPECT_EQ(a, b);
  const auto other = local_train(kLinear3, x, c, 0.03, LocalBudget::epochs(3, 4), RngStream(6, {1, 3}));
  EXPECT_NE(a, other);
}

TEST(LocalTrain, DivergenceCarriesClientAndStep) {
  auto c = regression_client(4, 3, 3);
  for (double& f : c.features) f *= 1e3;
  const auto x = init_params(kLinear3, RngStream(1, {}));
  try {
    local_train(kLinear3, x, c, 1e6, LocalBudget::steps(200, 1), RngStream(2, {}));
    FAIL() << "expected divergence";
  } catch (const DivergenceError& e) {
    EXPECT_EQ(e.client_id(), "client");
    EXPECT_GT(e.step(), 0u);
  }
}

TEST(ComputeUpdate, Examples) {
  EXPECT_EQ(compute_update(LayeredParams{{"w", {1.0}}}, LayeredParams{{"w", {0.2}}}), (LayeredParams{{"w", {0.8}}}));
  const LayeredParams x{{"w", {1, 2}}, {"b", {3}}};
  EXPECT_EQ(l2_norm(compute_update(x, x)), 0.0);
  EXPECT_THROW(compute_update(x, LayeredParams{{"w", {1, 2}}}), ShapeError);
}

TEST(ClipUpdate, Examples) {
  const LayeredParams d{{"w", {3}}, {"b", {4}}};
  auto r = clip_update(d, 10.0);
  EXPECT_EQ(r.delta, d);
  EXPECT_EQ(r.indicator, 1);
  r = clip_update(d, 5.0);
  EXPECT_EQ(r.delta, d);
  EXPECT_EQ(r.indicator, 1);
  r = clip_update(d, 1.0);
  EXPECT_EQ(r.indicator, 0);
  EXPECT_NEAR(r.delta.values(0)[0], 0.6, 1e-15);
  EXPECT_NEAR(r.delta.values(1)[0], 0.8, 1e-15);
  EXPECT_THROW(clip_update(d, 0.0), std::invalid_argument);
}

TEST(ClipUpdate, NormBoundDirectionAndScaleInvariance) {
  RngStream s(31, {});
  for (int trial = 0; trial < 500; ++trial) {
    LayeredParams d{{"a", {s.normal(), s.normal()}}, {"b", {s.normal(), s.normal(), s.normal()}}};
    d = scale(std::exp(4.0 * s.normal()), d);
    const double level = std::exp(4.0 * s.normal());
    const auto r = clip_update(d, level);
    EXPECT_LE(l2_norm(r.delta), level * (1 + 1e-12));
    EXPECT_EQ(r.indicator, l2_norm(d) <= level ? 1 : 0);
    // Clipped delta is a nonnegative multiple of the original.
    const double ratio = r.delta.values(0)[0] / d.values(0)[0];
    EXPECT_GE(ratio, 0.0);
    const auto flat = r.delta.flatten(), orig = d.flatten();
    for (std::size_t j = 0; j < flat.size(); ++j) EXPECT_NEAR(flat[j], ratio * orig[j], 1e-12 * std::abs(orig[j]) + 1e-300);
    // Indicator invariant under common positive rescaling.
    const double c = std::exp(2.0 * s.normal());
    EXPECT_EQ(clip_update(scale(c, d), c * level).indicator, r.indicator);
  }
}

TEST(ExamplesThisClient, Examples) {
  EXPECT_EQ(examples_this_client(LocalBudget::epochs(1, 5), 30), 30u);
  EXPECT_EQ(examples_this_client(LocalBudget::epochs(3, 4), 10), 30u);
  EXPECT_EQ(examples_this_client(LocalBudget::steps(5, 1), 3), 5u);
}

TEST(ExamplesThisClient, StepModeMatchesBruteForceSlices) {
  for (std::size_t n = 1; n <= 9; ++n) {
    for (std::size_t b = 1; b <= 11; ++b) {
      for (std::size_t steps = 1; steps <= 20; ++steps) {
        std::size_t consumed = 0, pos = n;
        for (std::size_t i = 0; i < steps; ++i) {
          if (pos >= n) pos = 0;
          const std::size_t len = std::min(std::min(b, n), n - pos);
          consumed += len;
          pos += len;
        }
        EXPECT_EQ(examples_this_client(LocalBudget::steps(steps, b), n), consumed) << n << " " << b << " " << steps;
      }
    }
  }
}

}  // namespace
}  // namespace cohortsim
