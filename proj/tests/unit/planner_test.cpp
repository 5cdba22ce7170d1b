#include <gtest/gtest.h>

#include <algorithm>
#include <tuple>

#include "batchplan/cluster_sim.hpp"
#include "batchplan/error.hpp"
#include "batchplan/planner.hpp"
#include "oracles.hpp"

namespace batchplan {
namespace {

PlanRequest request_for(const ScenarioPreset& preset, SearchStrategy strategy, Objective objective) {
  PlanRequest r;
  r.workload = preset.workload;
  r.protocol = preset.sim.protocol;
  r.strategy = strategy;
  r.objective = objective;
  r.device_capacity = preset.sim.device_capacity;
  return r;
}

// Counts every burst request passed through to the simulator.
class CountingSource final : public TraceSource {
 public:
  explicit CountingSource(SimCluster sim) : inner_(std::move(sim)) {}
  std::optional<ProfilingSample> step(int n, int b, int s) const override {
    if (s == 0) configs_.emplace_back(n, b);
    return inner_.step(n, b, s);
  }
  mutable ConfigList configs_;

 private:
  SimTraceSource inner_;
};

TEST(SelectProfileSet, Examples) {
  std::vector<int> batches;
  for (int b = 32; b <= 16384; b *= 2) batches.push_back(b);
  const std::vector<int> clusters{2, 4, 8, 16};
  const auto partial = select_profile_set(SearchStrategy::Partial, batches, clusters);
  EXPECT_EQ(partial, (ConfigList{{2, 32}, {2, 16384}, {16, 32}, {16, 16384}}));
  EXPECT_EQ(select_profile_set(SearchStrategy::Full, batches, clusters).size(), 40u);
  EXPECT_EQ(select_profile_set(SearchStrategy::Partial, batches, {4}).size(), 2u);
  EXPECT_EQ(select_profile_set(SearchStrategy::Partial, {64}, {4}).size(), 1u);
  EXPECT_THROW(select_profile_set(SearchStrategy::Full, {}, clusters), Error);
}

TEST(ProfileConfig, DiscardsWarmupAndAverages) {
  class Ramp final : public TraceSource {
   public:
    std::optional<ProfilingSample> step(int n, int b, int s) const override {
      return ProfilingSample{n, b, 1.0 + s, 2.0 * s, std::nullopt};
    }
  } ramp;
  const auto mean = profile_config(ramp, 2, 32, {10, 2});
  ASSERT_TRUE(mean);
  EXPECT_DOUBLE_EQ(mean->step_time, 6.5);  // mean of 3..10
  EXPECT_DOUBLE_EQ(*mean->peak_memory, 11.0);
  EXPECT_THROW(profile_config(ramp, 2, 32, {2, 2}), Error);
}

TimeCostCurve curve_of(int n, std::vector<std::tuple<int, double, double>> pts) {
  TimeCostCurve c;
  c.node_count = n;
  for (auto [b, t, cost] : pts) c.points.push_back({static_cast<std::int64_t>(n) * b, b, n, t, cost, 1.0});
  return c;
}

TEST(Select, SinglePointCurveWinsEveryObjective) {
  const std::map<int, TimeCostCurve> curves{{4, curve_of(4, {{64, 10.0, 5.0}})}};
  for (auto o : {Objective::MinTime, Objective::MinCost, Objective::KneePoint}) {
    const auto p = select(curves, o);
    EXPECT_EQ(p.chosen.local_batch, 64);
    EXPECT_EQ(p.chosen.cluster.node_count, 4);
  }
}

TEST(Select, MinCostPrefersCheaperClusterAtEqualTime) {
  const std::map<int, TimeCostCurve> curves{
      {4, curve_of(4, {{64, 10.0, 5.0}, {128, 8.0, 4.0}})},
      {8, curve_of(8, {{32, 10.0, 2.0}, {64, 8.0, 1.5}})},
  };
  const auto p = select(curves, Objective::MinCost);
  EXPECT_EQ(p.chosen.cluster.node_count, 8);
  EXPECT_EQ(p.chosen.local_batch, 64);
}

TEST(Select, MinTimeTiesGoToSmallerGlobalBatchThenSmallerCluster) {
  const std::map<int, TimeCostCurve> curves{
      {2, curve_of(2, {{256, 5.0, 1.0}, {512, 5.0, 1.0}})},
      {4, curve_of(4, {{128, 5.0, 1.0}})},
  };
  const auto p = select(curves, Objective::MinTime);
  EXPECT_EQ(p.chosen.cluster.node_count, 2);
  EXPECT_EQ(p.chosen.global_batch, 512);
}

TEST(Plan, MinTimePredictionIsTheMinimumOverAllCurves) {
  const auto preset = *find_preset("mobilenet-like");
  const auto p = plan(request_for(preset, SearchStrategy::Full, Objective::MinTime),
                      SimTraceSource(preset.sim));
  for (const auto& [n, c] : p.curves) {
    for (const auto& pt : c.points) EXPECT_LE(p.predicted_time, pt.time);
  }
}

TEST(Plan, ChosenPointMatchesItsCurve) {
  for (const auto& name : preset_names()) {
    const auto preset = *find_preset(name);
    for (auto o : {Objective::MinTime, Objective::MinCost, Objective::KneePoint}) {
      const auto p = plan(request_for(preset, SearchStrategy::Partial, o), SimTraceSource(preset.sim));
      const auto& c = p.curves.at(p.chosen.cluster.node_count);
      const auto it = std::find_if(c.points.begin(), c.points.end(),
                                   [&](const CurvePoint& q) { return q.local_batch == p.chosen.local_batch; });
      ASSERT_NE(it, c.points.end());
      EXPECT_EQ(it->time, p.predicted_time);
      EXPECT_EQ(it->cost, p.predicted_cost);
      EXPECT_LE(p.chosen.local_batch, p.batch_bound);
    }
  }
}

TEST(Plan, PartialMatchesFullOnNoiseFreeSimulator) {
  for (const auto& name : preset_names()) {
    const auto preset = *find_preset(name);
    for (auto o : {Objective::MinTime, Objective::MinCost, Objective::KneePoint}) {
      const SimTraceSource source(preset.sim);
      const auto full = plan(request_for(preset, SearchStrategy::Full, o), source);
      const auto partial = plan(request_for(preset, SearchStrategy::Partial, o), source);
      EXPECT_EQ(partial.chosen.cluster.node_count, full.chosen.cluster.node_count) << name;
      EXPECT_EQ(partial.chosen.local_batch, full.chosen.local_batch) << name;
    }
  }
}

TEST(Plan, PartialProfilesFourConfigsFullProfilesTheGrid) {
  const auto preset = *find_preset("resnet50-like");
  const SimTraceSource source(preset.sim);
  const auto full = plan(request_for(preset, SearchStrategy::Full, Objective::MinTime), source);
  const auto partial = plan(request_for(preset, SearchStrategy::Partial, Objective::MinTime), source);
  EXPECT_EQ(partial.profiled_configs.size(), 4u);
  std::size_t grid = 0;
  for (const auto& [n, c] : full.curves) grid += c.points.size();
  EXPECT_EQ(full.profiled_configs.size(), grid);
}

std::pair<int, int> brute_force_min_time(const ScenarioPreset& preset, int batch_bound) {
  std::tuple<double, std::int64_t, int, int> best{1e300, 0, 0, 0};
  for (int n = 2; n <= 16; n *= 2) {
    for (int b = 32; b <= batch_bound; b *= 2) {
      const std::tuple<double, std::int64_t, int, int> cand{
          true_training_time(preset.sim, n, b, preset.workload), static_cast<std::int64_t>(n) * b, n, b};
      best = std::min(best, cand);
    }
  }
  return {std::get<2>(best), std::get<3>(best)};
}

TEST(Plan, FullMinTimeMatchesBruteForceGroundTruth) {
  for (const auto& name : preset_names()) {
    const auto preset = *find_preset(name);
    const auto p = plan(request_for(preset, SearchStrategy::Full, Objective::MinTime),
                        SimTraceSource(preset.sim));
    const auto [n, b] = brute_force_min_time(preset, p.batch_bound);
    EXPECT_EQ(p.chosen.cluster.node_count, n) << name;
    EXPECT_EQ(p.chosen.local_batch, b) << name;
  }
}

TEST(Plan, NoisyPartialPlanStaysNearTrueOptimum) {
  const auto base = *find_preset("resnet50-like");
  int good = 0;
  const int trials = 1000;
  for (int t = 0; t < trials; ++t) {
    auto preset = base;
    preset.sim.noise_pct = 0.05;
    preset.sim.seed = 1000 + static_cast<std::uint64_t>(t);
    const auto p = plan(request_for(preset, SearchStrategy::Partial, Objective::MinTime),
                        SimTraceSource(preset.sim));
    const auto [n, b] = brute_force_min_time(base, p.batch_bound);
    const double best = true_training_time(base.sim, n, b, base.workload);
    const double got =
        true_training_time(base.sim, p.chosen.cluster.node_count, p.chosen.local_batch, base.workload);
    good += got <= 1.10 * best ? 1 : 0;
  }
  EXPECT_GE(good, 950);
}

TEST(Plan, KneeOnResnetLikePresetAtSixteenNodes) {
  const auto preset = *find_preset("resnet50-like");
  const auto p = plan(request_for(preset, SearchStrategy::Partial, Objective::KneePoint),
                      SimTraceSource(preset.sim));
  EXPECT_EQ(p.knees.at(16).global_batch, 8192);
}

TEST(Plan, MemoryPricedAlexnetOptimumAtSixteenNodes) {
  const auto preset = *find_preset("alexnet-like");
  auto r = request_for(preset, SearchStrategy::Partial, Objective::MinCost);
  r.pricing = PerGbHourly{0.15};
  r.select_nodes = 16;
  const auto p = plan(r, SimTraceSource(preset.sim));
  EXPECT_EQ(p.chosen.global_batch, 2048);
}

TEST(Plan, InfeasibleMinimumBatchReportsMemory) {
  auto preset = *find_preset("alexnet-like");
  preset.sim.device_capacity = 1.0;
  try {
    plan(request_for(preset, SearchStrategy::Partial, Objective::MinTime), SimTraceSource(preset.sim));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::Infeasible);
    EXPECT_STREQ(e.what(), "minimum batch exceeds memory");
  }
}

TEST(Plan, OptimisticMemoryModelIsCorrectedByProbing) {
  // Raise the true footprint above what the seed bursts reveal: the memory
  // model is fitted on small batches, so only probing finds the real limit.
  auto preset = *find_preset("resnet50-like");
  preset.sim.device_capacity = 12.0;
  auto r = request_for(preset, SearchStrategy::Partial, Objective::MinTime);
  r.device_capacity = 32.0;  // the planner believes the device is larger
  const CountingSource source(preset.sim);
  const auto p = plan(r, source);
  int truth = 0;
  for (int b = 32; b <= 16384; b *= 2) {
    if (sim_fits(preset.sim, b)) truth = b;
  }
  EXPECT_EQ(p.batch_bound, truth);
  EXPECT_EQ(p.memory_batch_bound, 8192);
  int walked = 0;
  for (int b = truth; b < p.memory_batch_bound; b *= 2) ++walked;
  EXPECT_EQ(p.oom_probes, 1 + walked);
}

TEST(Plan, SelectNodesOutsideGridIsRejected) {
  const auto preset = *find_preset("alexnet-like");
  auto r = request_for(preset, SearchStrategy::Partial, Objective::MinTime);
  r.select_nodes = 3;
  EXPECT_THROW(plan(r, SimTraceSource(preset.sim)), Error);
}

}  // namespace
}  // namespace batchplan
