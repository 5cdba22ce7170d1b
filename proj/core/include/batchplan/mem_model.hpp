#pragma once

#include <functional>
#include <span>
#include <utility>
#include <vector>

#include "batchplan/domain.hpp"

namespace batchplan {

struct StaticMemory {
  double param = 0.0;  // GB
  double grad = 0.0;
  double opt = 0.0;

  double total() const { return param + grad + opt; }
};

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
};

/// Per-node memory as the sum of static parameter/gradient/optimizer state and
/// two batch-linear terms: activations and the input pipeline (dataloader).
class MemModel {
 public:
  double m_param = 0.0;
  double m_grad = 0.0;
  double m_opt = 0.0;
  double act_slope = 0.0;
  double act_intercept = 0.0;
  double batch_slope = 0.0;
  double batch_intercept = 0.0;
  double device_capacity = 32.0;  // GB
  double safety_factor = 0.9;

  double static_total() const { return m_param + m_grad + m_opt; }
  double total_memory(int local_batch) const;
  double usable_capacity() const { return device_capacity * safety_factor; }
  bool fits(int local_batch) const { return total_memory(local_batch) <= usable_capacity(); }

  void validate() const;
};

StaticMemory static_memory(const WorkloadSpec& workload);

/// OLS line; a negative intercept is pinned to zero and the slope refit.
LinearFit fit_linear(std::span<const std::pair<int, double>> samples);

/// Builds a MemModel from profiled samples. Activation and dataloader lines are
/// fitted separately when every sample carries a breakdown; otherwise a single
/// line is fitted to peak memory minus the static footprint and booked as
/// activation memory.
MemModel fit_mem_model(std::span<const ProfilingSample> samples, const WorkloadSpec& workload,
                       double device_capacity, double safety_factor = 0.9);

/// Largest grid batch whose predicted footprint stays within capacity * safety.
int max_feasible_batch(const MemModel& model, std::span<const int> batch_grid);

/// Answers true when a run at the given local batch fits in device memory.
using MemoryProbe = std::function<bool(int local_batch)>;

struct ProbeResult {
  int batch = 0;
  int probes = 0;  // each probe stands for one checkpoint-and-relaunch
};

/// Walks the grid downward from `start_batch` until the probe reports a fit.
ProbeResult probe_shrink(int start_batch, const MemoryProbe& probe, std::span<const int> grid);

}  // namespace batchplan
