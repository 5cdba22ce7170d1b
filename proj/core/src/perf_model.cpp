#include "batchplan/perf_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "batchplan/error.hpp"
#include "batchplan/least_squares.hpp"
#include "batchplan/mem_model.hpp"

namespace batchplan {

double sync_factor(SyncProtocol protocol, int node_count) {
  const double n = static_cast<double>(node_count);
  return protocol == SyncProtocol::ParameterServer ? n : 1.0 - 1.0 / n;
}

PerfModel fit_perf_model(std::span<const ProfilingSample> samples, SyncProtocol protocol) {
  std::set<int> batches;
  std::set<int> nodes;
  for (const auto& s : samples) {
    s.validate();
    batches.insert(s.local_batch);
    nodes.insert(s.node_count);
  }
  if (samples.size() < 3 || batches.size() < 2 || nodes.size() < 2) {
    throw Error(ErrorKind::InsufficientSpan, "insufficient span");
  }

  Design x(3);
  std::vector<double> y;
  for (const auto& s : samples) {
    x[0].push_back(1.0);
    x[1].push_back(static_cast<double>(s.local_batch));
    x[2].push_back(sync_factor(protocol, s.node_count));
    y.push_back(s.step_time);
  }
  const auto coef = clamped_least_squares(x, y, {true, false, true});
  if (!coef) throw Error(ErrorKind::InsufficientSpan, "insufficient span");

  PerfModel model{(*coef)[0], (*coef)[1], (*coef)[2], protocol, 0.0};
  if (!(model.beta > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "fitted compute slope is not positive");
  }

  double sum_sq = 0.0;
  for (const auto& s : samples) {
    const double pred = predict_step_time(model, {s.node_count, protocol}, s.local_batch);
    const double rel = (pred - s.step_time) / s.step_time;
    sum_sq += rel * rel;
  }
  model.fit_residual = std::sqrt(sum_sq / static_cast<double>(samples.size()));
  return model;
}

double predict_step_time(const PerfModel& model, const ClusterConfig& cluster, int local_batch) {
  return model.alpha + model.beta * local_batch +
         model.gamma * sync_factor(model.protocol, cluster.node_count);
}

std::int64_t training_iterations(const WorkloadSpec& workload, std::int64_t global_batch) {
  const std::int64_t per_epoch = (workload.dataset_size + global_batch - 1) / global_batch;
  return per_epoch * workload.epochs;
}

double predict_training_time(const PerfModel& model, const ClusterConfig& cluster, int local_batch,
                             const WorkloadSpec& workload) {
  const auto iters = training_iterations(workload, global_batch(cluster, local_batch));
  return static_cast<double>(iters) * predict_step_time(model, cluster, local_batch);
}

double predict_cost(double time_s, const ClusterConfig& cluster, const PricingModel& pricing,
                    std::optional<double> mem_per_node_gb) {
  const double node_hours = time_s / 3600.0 * cluster.node_count;
  if (const auto* per_node = std::get_if<PerNodeHourly>(&pricing)) {
    return node_hours * per_node->rate;
  }
  if (!mem_per_node_gb) {
    throw Error(ErrorKind::InvalidInput, "memory required for memory-based pricing");
  }
  return node_hours * *mem_per_node_gb * std::get<PerGbHourly>(pricing).rate;
}

TimeCostCurve build_curve(const PerfModel& model, const MemModel& mem_model,
                          const ClusterConfig& cluster, std::span<const int> batches,
                          const WorkloadSpec& workload, const PricingModel& pricing) {
  if (batches.empty()) throw Error(ErrorKind::InvalidInput, "batches must be non-empty");

  TimeCostCurve curve;
  curve.node_count = cluster.node_count;
  for (const int b : batches) {
    const double mem = mem_model.total_memory(b);
    if (!mem_model.fits(b)) {
      curve.excluded_batches.push_back(b);
      continue;
    }
    CurvePoint p;
    p.local_batch = b;
    p.node_count = cluster.node_count;
    p.global_batch = global_batch(cluster, b);
    p.time = predict_training_time(model, cluster, b, workload);
    p.cost = predict_cost(p.time, cluster, pricing, mem);
    p.memory_per_node = mem;
    curve.points.push_back(p);
  }
  if (curve.points.empty()) throw Error(ErrorKind::Infeasible, "empty feasible set");
  std::sort(curve.points.begin(), curve.points.end(),
            [](const CurvePoint& a, const CurvePoint& b) { return a.global_batch < b.global_batch; });
  return curve;
}

}  // namespace batchplan
