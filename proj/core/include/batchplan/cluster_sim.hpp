#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "batchplan/domain.hpp"
#include "batchplan/mem_model.hpp"
#include "batchplan/perf_model.hpp"
#include "batchplan/planner.hpp"

namespace batchplan {

/// Synthetic ground-truth cluster. Noise is multiplicative and uniform, drawn
/// from a stream keyed by (seed, N, b, step) so any two consumers that ask
/// for the same configuration see the same sample.
struct SimCluster {
  double true_alpha = 0.0;
  double true_beta = 0.0;
  double true_gamma = 0.0;
  SyncProtocol protocol = SyncProtocol::RingAllReduce;
  MemModel true_mem;
  double noise_pct = 0.0;      // step-time noise, fraction in [0, 0.5]
  double mem_noise_pct = 0.0;  // activation / dataloader memory noise
  std::uint64_t seed = 1;
  double device_capacity = 32.0;  // GB; OOM above this, no safety margin

  void validate() const;
  PerfModel true_perf_model() const;
};

struct ScenarioPreset {
  std::string name;
  SimCluster sim;
  WorkloadSpec workload;
};

/// resnet50-like, alexnet-like, mobilenet-like.
std::vector<std::string> preset_names();
std::optional<ScenarioPreset> find_preset(std::string_view name);

double true_step_time(const SimCluster& sim, int node_count, int local_batch);
double true_memory(const SimCluster& sim, int local_batch);
bool sim_fits(const SimCluster& sim, int local_batch);

/// std::nullopt is the OOM marker.
std::optional<ProfilingSample> sample_step(const SimCluster& sim, int node_count, int local_batch,
                                           int step_index);

/// Noise-free E * ceil(D / Nb) * step time; throws Infeasible above capacity.
double true_training_time(const SimCluster& sim, int node_count, int local_batch,
                          const WorkloadSpec& workload);

class SimTraceSource final : public TraceSource {
 public:
  explicit SimTraceSource(SimCluster sim) : sim_(std::move(sim)) {}

  std::optional<ProfilingSample> step(int node_count, int local_batch,
                                      int step_index) const override {
    return sample_step(sim_, node_count, local_batch, step_index);
  }

  const SimCluster& sim() const { return sim_; }

 private:
  SimCluster sim_;
};

}  // namespace batchplan
