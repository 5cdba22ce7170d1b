#include <benchmark/benchmark.h>

#include <cmath>
#include <vector>

#include "batchplan/ags.hpp"
#include "batchplan/cluster_sim.hpp"
#include "batchplan/kneedle.hpp"
#include "batchplan/planner.hpp"

namespace {

using namespace batchplan;

void BM_FitPerfModel(benchmark::State& state) {
  auto sim = find_preset("resnet50-like")->sim;
  sim.noise_pct = 0.05;
  std::vector<ProfilingSample> samples;
  for (int n = 2; n <= 16; n *= 2) {
    for (int b = 32; b <= 8192; b *= 2) samples.push_back(*sample_step(sim, n, b, 0));
  }
  for (auto _ : state) benchmark::DoNotOptimize(fit_perf_model(samples, sim.protocol));
}
BENCHMARK(BM_FitPerfModel);

void BM_Kneedle(benchmark::State& state) {
  std::vector<double> xs;
  std::vector<double> ys;
  for (int i = 0; i < state.range(0); ++i) {
    xs.push_back(32.0 * std::pow(2.0, i));
    ys.push_back(1.0 + 500.0 / xs.back());
  }
  for (auto _ : state) benchmark::DoNotOptimize(kneedle(xs, ys));
}
BENCHMARK(BM_Kneedle)->Arg(8)->Arg(16)->Arg(64);

void BM_Plan(benchmark::State& state) {
  const auto preset = *find_preset("resnet50-like");
  PlanRequest r;
  r.workload = preset.workload;
  r.strategy = state.range(0) ? SearchStrategy::Full : SearchStrategy::Partial;
  const SimTraceSource source(preset.sim);
  for (auto _ : state) benchmark::DoNotOptimize(plan(r, source));
}
BENCHMARK(BM_Plan)->Arg(0)->Arg(1);

void BM_AgsStep(benchmark::State& state) {
  TrainerConfig c;
  auto model = MicroModel::quadratic(1.0, static_cast<std::size_t>(state.range(0)));
  AgsState ags(model, c);
  Rng rng(1), profile(2);
  for (auto _ : state) benchmark::DoNotOptimize(ags_step(model, c, ags, rng, profile));
}
BENCHMARK(BM_AgsStep)->Arg(100)->Arg(10000);

void BM_MlpGradient(benchmark::State& state) {
  const auto model = MicroModel::logistic_mlp({16, 32, 32, 1}, 256, 1);
  for (auto _ : state) benchmark::DoNotOptimize(model.full_gradient());
}
BENCHMARK(BM_MlpGradient);

}  // namespace
BENCHMARK_MAIN();
