#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "batchplan/domain.hpp"

namespace batchplan::cli {

struct ErrorTrialConfig {
  std::string preset = "resnet50-like";
  int trials = 100;
  double noise_pct = 0.05;
  double mem_noise_pct = 0.10;
  std::uint64_t seed = 1;
  int b_min = 32;
  int b_max = 16384;
  int n_min = 2;
  int n_max = 16;
  unsigned threads = 0;  // 0: hardware concurrency
};

struct Quartiles {
  double median = 0.0;
  double q1 = 0.0;
  double q3 = 0.0;
  std::size_t count = 0;
};

/// Linear interpolation between order statistics.
Quartiles quartiles(std::vector<double> values);

struct StrategyErrors {
  SearchStrategy strategy = SearchStrategy::Full;
  Quartiles time;    // relative error of predicted training time, every curve point
  Quartiles memory;  // relative error of predicted per-node memory, every curve batch
};

/// Plans each trial with both strategies against a freshly seeded simulator
/// and pools relative errors against the simulator truth. Trials run in
/// parallel; pooling follows trial order.
std::vector<StrategyErrors> run_error_trials(const ErrorTrialConfig& config);

}  // namespace batchplan::cli
