#include "batchplan/cli/error_trials.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <set>
#include <thread>

#include "batchplan/cluster_sim.hpp"
#include "batchplan/error.hpp"
#include "batchplan/planner.hpp"

namespace batchplan::cli {

namespace {

constexpr SearchStrategy kStrategies[] = {SearchStrategy::Full, SearchStrategy::Partial};

struct TrialErrors {
  std::vector<double> time[2];
  std::vector<double> memory[2];
};

double relative_error(double predicted, double truth) { return std::abs(predicted - truth) / truth; }

TrialErrors run_trial(const ScenarioPreset& preset, const ErrorTrialConfig& config, int trial) {
  SimCluster sim = preset.sim;
  sim.noise_pct = config.noise_pct;
  sim.mem_noise_pct = config.mem_noise_pct;
  sim.seed = config.seed + static_cast<std::uint64_t>(trial);
  sim.validate();
  const SimTraceSource source(sim);

  TrialErrors out;
  for (std::size_t k = 0; k < 2; ++k) {
    PlanRequest request;
    request.workload = preset.workload;
    request.protocol = sim.protocol;
    request.b_min = config.b_min;
    request.b_max = config.b_max;
    request.n_min = config.n_min;
    request.n_max = config.n_max;
    request.strategy = kStrategies[k];
    request.objective = Objective::MinTime;
    request.device_capacity = sim.device_capacity;
    const Plan p = plan(request, source);

    std::set<int> batches;
    for (const auto& [n, curve] : p.curves) {
      for (const auto& pt : curve.points) {
        const double truth = true_training_time(sim, n, pt.local_batch, preset.workload);
        out.time[k].push_back(relative_error(pt.time, truth));
        batches.insert(pt.local_batch);
      }
    }
    for (const int b : batches) {
      out.memory[k].push_back(relative_error(p.mem_model.total_memory(b), true_memory(sim, b)));
    }
  }
  return out;
}

}  // namespace

Quartiles quartiles(std::vector<double> values) {
  Quartiles q;
  q.count = values.size();
  if (values.empty()) return q;
  std::sort(values.begin(), values.end());
  const auto at = [&](double p) {
    const double pos = p * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return values[lo] + frac * (values[hi] - values[lo]);
  };
  q.q1 = at(0.25);
  q.median = at(0.5);
  q.q3 = at(0.75);
  return q;
}

std::vector<StrategyErrors> run_error_trials(const ErrorTrialConfig& config) {
  if (config.trials < 1) throw Error(ErrorKind::InvalidInput, "trials must be at least 1");
  const auto preset = find_preset(config.preset);
  if (!preset) throw Error(ErrorKind::InvalidInput, "unknown preset '" + config.preset + "'");

  std::vector<TrialErrors> results(static_cast<std::size_t>(config.trials));
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto worker = [&] {
    while (true) {
      const int t = next.fetch_add(1);
      if (t >= config.trials) return;
      try {
        results[static_cast<std::size_t>(t)] = run_trial(*preset, config, t);
      } catch (...) {
        const std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(config.trials);
        return;
      }
    }
  };

  unsigned threads = config.threads ? config.threads : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(config.trials));
  std::vector<std::thread> pool;
  for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& th : pool) th.join();
  if (failure) std::rethrow_exception(failure);

  std::vector<StrategyErrors> out;
  for (std::size_t k = 0; k < 2; ++k) {
    std::vector<double> time;
    std::vector<double> memory;
    for (const auto& r : results) {
      time.insert(time.end(), r.time[k].begin(), r.time[k].end());
      memory.insert(memory.end(), r.memory[k].begin(), r.memory[k].end());
    }
    out.push_back({kStrategies[k], quartiles(std::move(time)), quartiles(std::move(memory))});
  }
  return out;
}

}  // namespace batchplan::cli
