#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "batchplan/domain.hpp"

namespace batchplan {

class MemModel;

/// Step time decomposed as alpha + beta * b + gamma * sync_factor(N).
struct PerfModel {
  double alpha = 0.0;  // seconds per step, fixed overhead
  double beta = 0.0;   // seconds per sample on one node
  double gamma = 0.0;  // seconds, scale of the synchronization term
  SyncProtocol protocol = SyncProtocol::RingAllReduce;
  double fit_residual = 0.0;  // RMS of relative residuals on the fitted samples
};

struct CurvePoint {
  std::int64_t global_batch = 0;
  int local_batch = 0;
  int node_count = 0;
  double time = 0.0;  // seconds
  double cost = 0.0;
  double memory_per_node = 0.0;  // GB, as predicted by the memory model
};

struct TimeCostCurve {
  int node_count = 0;
  std::vector<CurvePoint> points;       // ascending global batch
  std::vector<int> excluded_batches;    // local batches rejected by the memory model
};

/// N for a parameter server, (1 - 1/N) for ring-allreduce.
double sync_factor(SyncProtocol protocol, int node_count);

/// Least-squares fit over profiled samples. Requires at least three samples
/// covering two local batches and two node counts; negative alpha or gamma
/// are clamped to zero and the remaining terms refit.
PerfModel fit_perf_model(std::span<const ProfilingSample> samples, SyncProtocol protocol);

double predict_step_time(const PerfModel& model, const ClusterConfig& cluster, int local_batch);

/// E * ceil(D / (N*b)) * predicted step time.
double predict_training_time(const PerfModel& model, const ClusterConfig& cluster, int local_batch,
                             const WorkloadSpec& workload);

/// Training-time iterations per run, E * ceil(D / B).
std::int64_t training_iterations(const WorkloadSpec& workload, std::int64_t global_batch);

double predict_cost(double time_s, const ClusterConfig& cluster, const PricingModel& pricing,
                    std::optional<double> mem_per_node_gb = std::nullopt);

/// One point per batch that the memory model admits; rejected batches are
/// listed in `excluded_batches`. Throws Infeasible("empty feasible set") when
/// nothing survives.
TimeCostCurve build_curve(const PerfModel& model, const MemModel& mem_model,
                          const ClusterConfig& cluster, std::span<const int> batches,
                          const WorkloadSpec& workload, const PricingModel& pricing);

}  // namespace batchplan
