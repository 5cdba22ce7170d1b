#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "batchplan/domain.hpp"
#include "batchplan/mem_model.hpp"
#include "batchplan/perf_model.hpp"

namespace batchplan {

/// Anything that can run (or replay) a short profiling burst.
class TraceSource {
 public:
  virtual ~TraceSource() = default;

  /// One training step at (node_count, local_batch); std::nullopt means the
  /// configuration ran out of device memory.
  virtual std::optional<ProfilingSample> step(int node_count, int local_batch,
                                              int step_index) const = 0;
};

struct ProfileOptions {
  int steps = 10;
  int warmup = 2;  // leading steps discarded before averaging
};

/// Averages a profiling burst. Returns std::nullopt if any step hit OOM.
std::optional<ProfilingSample> profile_config(const TraceSource& source, int node_count,
                                              int local_batch, const ProfileOptions& options = {});

using ConfigList = std::vector<std::pair<int, int>>;  // (node_count, local_batch)

ConfigList select_profile_set(SearchStrategy strategy, const std::vector<int>& batches,
                              const std::vector<int>& clusters);

struct KneeAnnotation {
  int local_batch = 0;
  std::int64_t global_batch = 0;
  bool weak = false;
};

/// Knee of one cluster's time curve, x = global batch.
KneeAnnotation curve_knee(const TimeCostCurve& curve, double sensitivity = 1.0);

struct ChosenConfig {
  ClusterConfig cluster;
  int local_batch = 0;
  std::int64_t global_batch = 0;
};

struct Plan {
  ChosenConfig chosen;
  double predicted_time = 0.0;
  double predicted_cost = 0.0;
  Objective objective = Objective::MinTime;
  SearchStrategy strategy = SearchStrategy::Partial;
  std::map<int, TimeCostCurve> curves;  // keyed by node count
  std::map<int, KneeAnnotation> knees;

  ConfigList profiled_configs;
  ConfigList memory_configs;  // small-batch bursts used to seed the memory model
  PerfModel perf_model;
  MemModel mem_model;
  int memory_batch_bound = 0;  // from the memory model
  int batch_bound = 0;         // after OOM probing
  int oom_probes = 0;
};

/// Picks the point satisfying the objective. MinTime/MinCost are global
/// argmins; KneePoint takes each cluster's knee and keeps the cheapest. Ties go
/// to the smaller global batch, then the smaller cluster.
Plan select(const std::map<int, TimeCostCurve>& curves, Objective objective,
            double sensitivity = 1.0);

struct PlanRequest {
  WorkloadSpec workload;
  SyncProtocol protocol = SyncProtocol::RingAllReduce;
  int b_min = 32;
  int b_max = 16384;
  int n_min = 2;
  int n_max = 16;
  SearchStrategy strategy = SearchStrategy::Partial;
  Objective objective = Objective::KneePoint;
  PricingModel pricing = PerNodeHourly{2.48};
  double device_capacity = 32.0;  // GB per node
  double safety_factor = 0.9;
  ProfileOptions profile;
  double kneedle_sensitivity = 1.0;
  std::optional<int> select_nodes;  // restrict the final choice to one cluster size
};

/// End to end: seed the memory model, bound the batch grid (with OOM
/// probing), profile per strategy, fit, build curves and select.
Plan plan(const PlanRequest& request, const TraceSource& source);

}  // namespace batchplan
