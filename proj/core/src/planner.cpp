#include "batchplan/planner.hpp"

#include <algorithm>
#include <set>
#include <tuple>

#include "batchplan/error.hpp"
#include "batchplan/kneedle.hpp"

namespace batchplan {

namespace {

bool better(const CurvePoint& a, const CurvePoint& b, double a_key, double b_key) {
  return std::tie(a_key, a.global_batch, a.node_count) <
         std::tie(b_key, b.global_batch, b.node_count);
}

const CurvePoint& point_at(const TimeCostCurve& curve, int local_batch) {
  for (const auto& p : curve.points) {
    if (p.local_batch == local_batch) return p;
  }
  throw Error(ErrorKind::InvalidInput, "batch not on curve");
}

}  // namespace

std::optional<ProfilingSample> profile_config(const TraceSource& source, int node_count,
                                              int local_batch, const ProfileOptions& options) {
  if (options.warmup < 0 || options.steps <= options.warmup) {
    throw Error(ErrorKind::InvalidInput, "profiling needs at least one step after warmup");
  }
  ProfilingSample mean{node_count, local_batch, 0.0, 0.0, MemoryBreakdown{}};
  int kept = 0;
  for (int s = 0; s < options.steps; ++s) {
    const auto sample = source.step(node_count, local_batch, s);
    if (!sample) return std::nullopt;
    if (s < options.warmup) continue;
    ++kept;
    mean.step_time += sample->step_time;
    if (mean.peak_memory && sample->peak_memory) {
      *mean.peak_memory += *sample->peak_memory;
    } else {
      mean.peak_memory.reset();
    }
    if (mean.memory_breakdown && sample->memory_breakdown) {
      mean.memory_breakdown->act += sample->memory_breakdown->act;
      mean.memory_breakdown->batch += sample->memory_breakdown->batch;
      mean.memory_breakdown->static_mem += sample->memory_breakdown->static_mem;
    } else {
      mean.memory_breakdown.reset();
    }
  }
  const double k = static_cast<double>(kept);
  mean.step_time /= k;
  if (mean.peak_memory) *mean.peak_memory /= k;
  if (mean.memory_breakdown) {
    mean.memory_breakdown->act /= k;
    mean.memory_breakdown->batch /= k;
    mean.memory_breakdown->static_mem /= k;
  }
  return mean;
}

ConfigList select_profile_set(SearchStrategy strategy, const std::vector<int>& batches,
                              const std::vector<int>& clusters) {
  if (batches.empty() || clusters.empty()) {
    throw Error(ErrorKind::InvalidInput, "profile grids must be non-empty");
  }
  ConfigList out;
  if (strategy == SearchStrategy::Full) {
    for (const int n : clusters) {
      for (const int b : batches) out.emplace_back(n, b);
    }
    return out;
  }
  const auto [b_lo, b_hi] = std::minmax_element(batches.begin(), batches.end());
  const auto [n_lo, n_hi] = std::minmax_element(clusters.begin(), clusters.end());
  for (const int n : {*n_lo, *n_hi}) {
    for (const int b : {*b_lo, *b_hi}) {
      if (std::find(out.begin(), out.end(), std::pair{n, b}) == out.end()) out.emplace_back(n, b);
    }
  }
  return out;
}

KneeAnnotation curve_knee(const TimeCostCurve& curve, double sensitivity) {
  const auto& pts = curve.points;
  if (pts.empty()) throw Error(ErrorKind::InvalidInput, "empty curve");
  if (pts.size() < 3) {
    std::size_t arg = 0;
    for (std::size_t i = 1; i < pts.size(); ++i) {
      if (pts[i].time < pts[arg].time) arg = i;
    }
    return {pts[arg].local_batch, pts[arg].global_batch, true};
  }
  std::vector<double> xs;
  std::vector<double> ys;
  for (const auto& p : pts) {
    xs.push_back(static_cast<double>(p.global_batch));
    ys.push_back(p.time);
  }
  const auto knee = kneedle(xs, ys, sensitivity);
  return {pts[knee.index].local_batch, pts[knee.index].global_batch, knee.weak};
}

Plan select(const std::map<int, TimeCostCurve>& curves, Objective objective, double sensitivity) {
  Plan out;
  out.objective = objective;
  out.curves = curves;

  const CurvePoint* best = nullptr;
  auto offer = [&](const CurvePoint& p, auto key) {
    if (!best || better(p, *best, key(p), key(*best))) best = &p;
  };
  const auto by_time = [](const CurvePoint& p) { return p.time; };
  const auto by_cost = [](const CurvePoint& p) { return p.cost; };

  for (const auto& [n, curve] : curves) {
    if (curve.points.empty()) continue;
    const auto knee = curve_knee(curve, sensitivity);
    out.knees[n] = knee;
    switch (objective) {
      case Objective::MinTime:
        for (const auto& p : curve.points) offer(p, by_time);
        break;
      case Objective::MinCost:
        for (const auto& p : curve.points) offer(p, by_cost);
        break;
      case Objective::KneePoint:
        offer(point_at(curve, knee.local_batch), by_cost);
        break;
    }
  }
  if (!best) throw Error(ErrorKind::Infeasible, "empty feasible set");

  out.chosen = {{best->node_count, SyncProtocol::RingAllReduce}, best->local_batch, best->global_batch};
  out.predicted_time = best->time;
  out.predicted_cost = best->cost;
  return out;
}

Plan plan(const PlanRequest& request, const TraceSource& source) {
  request.workload.validate();
  validate_pricing(request.pricing);
  const auto grid = candidate_grid(request.b_min, request.b_max, request.n_min, request.n_max);

  std::map<std::pair<int, int>, std::optional<ProfilingSample>> cache;
  auto burst = [&](int n, int b) -> const std::optional<ProfilingSample>& {
    auto it = cache.find({n, b});
    if (it == cache.end()) {
      it = cache.emplace(std::pair{n, b}, profile_config(source, n, b, request.profile)).first;
    }
    return it->second;
  };

  // Seed the memory model from the smallest batches on the smallest cluster.
  ConfigList memory_configs;
  std::vector<ProfilingSample> memory_samples;
  const std::size_t seeds = std::min<std::size_t>(3, grid.batches.size());
  for (std::size_t i = 0; i < seeds; ++i) {
    const int b = grid.batches[i];
    memory_configs.emplace_back(request.n_min, b);
    const auto& s = burst(request.n_min, b);
    if (!s) {
      if (i == 0) throw Error(ErrorKind::Infeasible, "minimum batch exceeds memory");
      break;
    }
    memory_samples.push_back(*s);
  }

  auto fit_memory = [&](const std::vector<ProfilingSample>& samples) {
    std::vector<ProfilingSample> usable;
    for (const auto& s : samples) {
      if (s.peak_memory || s.memory_breakdown) usable.push_back(s);
    }
    std::set<int> distinct;
    for (const auto& s : usable) distinct.insert(s.local_batch);
    if (distinct.size() >= 2) {
      return fit_mem_model(usable, request.workload, request.device_capacity, request.safety_factor);
    }
    // A single observed batch pins the footprint but not its slope.
    const StaticMemory fixed = static_memory(request.workload);
    MemModel flat;
    flat.m_param = fixed.param;
    flat.m_grad = fixed.grad;
    flat.m_opt = fixed.opt;
    flat.device_capacity = request.device_capacity;
    flat.safety_factor = request.safety_factor;
    if (!usable.empty()) {
      const auto& s = usable.front();
      const double peak = s.peak_memory ? *s.peak_memory
                                        : flat.static_total() + s.memory_breakdown->act +
                                              s.memory_breakdown->batch;
      flat.act_intercept = std::max(0.0, peak - flat.static_total());
    } else if (std::holds_alternative<PerGbHourly>(request.pricing)) {
      throw Error(ErrorKind::InvalidInput, "memory required for memory-based pricing");
    }
    return flat;
  };

  MemModel seed_model = fit_memory(memory_samples);
  seed_model.validate();

  Plan result;
  result.memory_batch_bound = max_feasible_batch(seed_model, grid.batches);
  const auto probed = probe_shrink(
      result.memory_batch_bound,
      [&](int b) { return burst(request.n_max, b).has_value(); }, grid.batches);
  result.batch_bound = probed.batch;
  result.oom_probes = probed.probes;

  std::vector<int> batches;
  for (const int b : grid.batches) {
    if (b <= result.batch_bound) batches.push_back(b);
  }

  const auto configs = select_profile_set(request.strategy, batches, grid.clusters);
  std::vector<ProfilingSample> samples;
  for (const auto& [n, b] : configs) {
    if (const auto& s = burst(n, b)) samples.push_back(*s);
  }
  const PerfModel perf = fit_perf_model(samples, request.protocol);

  std::vector<ProfilingSample> all;
  for (const auto& [key, s] : cache) {
    if (s) all.push_back(*s);
  }
  const MemModel mem = fit_memory(all);

  std::map<int, TimeCostCurve> curves;
  for (const int n : grid.clusters) {
    curves[n] = build_curve(perf, mem, {n, request.protocol}, batches, request.workload,
                            request.pricing);
  }

  std::map<int, TimeCostCurve> eligible = curves;
  if (request.select_nodes) {
    const auto it = curves.find(*request.select_nodes);
    if (it == curves.end()) throw Error(ErrorKind::InvalidInput, "select_nodes is not on the cluster grid");
    eligible = {{it->first, it->second}};
  }

  Plan chosen = select(eligible, request.objective, request.kneedle_sensitivity);
  result.chosen = chosen.chosen;
  result.chosen.cluster.sync_protocol = request.protocol;
  result.predicted_time = chosen.predicted_time;
  result.predicted_cost = chosen.predicted_cost;
  result.objective = request.objective;
  result.strategy = request.strategy;
  result.curves = std::move(curves);
  for (const auto& [n, curve] : result.curves) {
    result.knees[n] = curve_knee(curve, request.kneedle_sensitivity);
  }
  result.profiled_configs = configs;
  result.memory_configs = std::move(memory_configs);
  result.perf_model = perf;
  result.mem_model = mem;
  return result;
}

}  // namespace batchplan
