#include <gtest/gtest.h>

#include <cmath>

#include "batchplan/micro_model.hpp"
#include "oracles.hpp"

namespace batchplan {
namespace {

TEST(Quadratic, GradientExample) {
  const auto m = MicroModel::quadratic({2.0, 2.0}, {0.0, 0.0}, {1.0, 0.0});
  Rng rng(1);
  EXPECT_EQ(stochastic_gradient(m, 32, 0.0, rng), (std::vector<double>{2.0, 0.0}));
  EXPECT_EQ(m.full_gradient(), (std::vector<double>{2.0, 0.0}));
  EXPECT_EQ(m.loss(), 1.0);
  EXPECT_EQ(m.smoothness(), 2.0);
}

TEST(Quadratic, SmoothnessIsLargestCurvature) {
  const auto m = MicroModel::quadratic({0.5, 3.0, 1.0}, {1, 2, 3}, {0, 0, 0});
  EXPECT_EQ(m.smoothness(), 3.0);
  EXPECT_EQ(m.loss_at(std::vector<double>{1, 2, 3}), 0.0);
  EXPECT_EQ(MicroModel::quadratic(4.0, 5).smoothness(), 4.0);
  EXPECT_EQ(MicroModel::quadratic(4.0, 5).size(), 5u);
}

TEST(StochasticGradient, UnbiasedWithinThreeStandardErrors) {
  const auto m = MicroModel::quadratic({1.0, 2.0, 0.5}, {0, 0, 0}, {1, -1, 2});
  const auto exact = m.full_gradient();
  const double sigma = 1.0;
  const int batch = 16;
  const int draws = 10000;
  Rng rng(42);
  std::vector<double> mean(exact.size(), 0.0);
  for (int i = 0; i < draws; ++i) {
    const auto g = stochastic_gradient(m, batch, sigma, rng);
    for (std::size_t j = 0; j < g.size(); ++j) mean[j] += g[j] / draws;
  }
  const double se = sigma / std::sqrt(static_cast<double>(batch)) / std::sqrt(static_cast<double>(draws));
  for (std::size_t j = 0; j < exact.size(); ++j) EXPECT_LE(std::abs(mean[j] - exact[j]), 3 * se);
}

TEST(StochasticGradient, VarianceScalesInverselyWithBatch) {
  const auto m = MicroModel::quadratic(1.0, 4);
  const auto exact = m.full_gradient();
  Rng rng(7);
  const auto variance = [&](int batch) {
    const int draws = 10000;
    double sum = 0.0;
    for (int i = 0; i < draws; ++i) {
      const auto g = stochastic_gradient(m, batch, 1.0, rng);
      for (std::size_t j = 0; j < g.size(); ++j) sum += (g[j] - exact[j]) * (g[j] - exact[j]);
    }
    return sum / (draws * static_cast<double>(exact.size()));
  };
  const double ratio = variance(32) / variance(1024);
  EXPECT_NEAR(ratio, 32.0, 0.2 * 32.0);
}

TEST(LogisticMlp, AnalyticGradientMatchesCentralDifferences) {
  auto m = MicroModel::logistic_mlp({4, 8, 6, 1}, 64, 3);
  Rng rng(11);
  std::normal_distribution<double> n01(0.0, 0.5);
  for (int point = 0; point < 10; ++point) {
    std::vector<double> w(m.size());
    for (auto& v : w) v = n01(rng);
    const auto analytic = m.gradient_at(w);
    const auto numeric = testing::central_difference([&](const std::vector<double>& x) { return m.loss_at(x); },
                                                     w, 1e-5);
    double worst = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) {
      worst = std::max(worst, std::abs(analytic[i] - numeric[i]));
      scale = std::max(scale, std::abs(numeric[i]));
    }
    EXPECT_LE(worst / scale, 1e-5) << "point " << point;
  }
}

TEST(LogisticMlp, DeterministicForSeedAndStableSize) {
  const auto a = MicroModel::logistic_mlp({3, 5, 1}, 32, 9);
  const auto b = MicroModel::logistic_mlp({3, 5, 1}, 32, 9);
  EXPECT_EQ(a.size(), 3u * 5u + 5u + 5u + 1u);
  EXPECT_EQ(a.loss(), b.loss());
  EXPECT_FALSE(a.smoothness());
  EXPECT_GT(a.loss(), 0.0);
}

}  // namespace
}  // namespace batchplan
