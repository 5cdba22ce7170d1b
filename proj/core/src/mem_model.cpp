#include "batchplan/mem_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "batchplan/error.hpp"
#include "batchplan/least_squares.hpp"

namespace batchplan {

namespace {

constexpr double kBytesPerGb = 1e9;

LinearFit fit_line(const std::vector<int>& xs, const std::vector<double>& ys) {
  std::set<int> distinct(xs.begin(), xs.end());
  if (distinct.size() < 2) throw Error(ErrorKind::InsufficientSpan, "insufficient span");

  Design design(2);
  for (const int x : xs) {
    design[0].push_back(static_cast<double>(x));
    design[1].push_back(1.0);
  }
  const auto coef = clamped_least_squares(design, ys, {false, true});
  if (!coef) throw Error(ErrorKind::InsufficientSpan, "insufficient span");
  return {(*coef)[0], (*coef)[1]};
}

}  // namespace

double MemModel::total_memory(int local_batch) const {
  const double b = static_cast<double>(local_batch);
  return static_total() + (act_slope * b + act_intercept) + (batch_slope * b + batch_intercept);
}

void MemModel::validate() const {
  if (act_slope < 0.0 || batch_slope < 0.0 || m_param < 0.0 || m_grad < 0.0 || m_opt < 0.0 ||
      act_intercept < 0.0 || batch_intercept < 0.0) {
    throw Error(ErrorKind::InvalidInput, "memory model terms must be non-negative");
  }
  if (!(safety_factor > 0.0 && safety_factor <= 1.0)) {
    throw Error(ErrorKind::InvalidInput, "safety_factor must lie in (0, 1]");
  }
  if (!(device_capacity > static_total())) {
    throw Error(ErrorKind::Infeasible, "device capacity below static memory");
  }
}

StaticMemory static_memory(const WorkloadSpec& workload) {
  workload.validate();
  const double param = static_cast<double>(workload.param_count) * workload.bytes_per_param /
                       kBytesPerGb;
  return {param, param, workload.optimizer_state_multiplier * param};
}

LinearFit fit_linear(std::span<const std::pair<int, double>> samples) {
  std::vector<int> xs;
  std::vector<double> ys;
  for (const auto& [b, gb] : samples) {
    xs.push_back(b);
    ys.push_back(gb);
  }
  return fit_line(xs, ys);
}

MemModel fit_mem_model(std::span<const ProfilingSample> samples, const WorkloadSpec& workload,
                       double device_capacity, double safety_factor) {
  const StaticMemory fixed = static_memory(workload);
  MemModel model;
  model.m_param = fixed.param;
  model.m_grad = fixed.grad;
  model.m_opt = fixed.opt;
  model.device_capacity = device_capacity;
  model.safety_factor = safety_factor;

  const bool breakdown = !samples.empty() && std::all_of(samples.begin(), samples.end(), [](const auto& s) {
    return s.memory_breakdown.has_value();
  });

  std::vector<int> xs;
  std::vector<double> act;
  std::vector<double> batch;
  std::vector<double> combined;
  for (const auto& s : samples) {
    if (breakdown) {
      xs.push_back(s.local_batch);
      act.push_back(s.memory_breakdown->act);
      batch.push_back(s.memory_breakdown->batch);
    } else if (s.peak_memory) {
      xs.push_back(s.local_batch);
      combined.push_back(*s.peak_memory - fixed.total());
    }
  }

  if (breakdown) {
    const auto a = fit_line(xs, act);
    const auto d = fit_line(xs, batch);
    model.act_slope = a.slope;
    model.act_intercept = a.intercept;
    model.batch_slope = d.slope;
    model.batch_intercept = d.intercept;
  } else {
    const auto c = fit_line(xs, combined);
    model.act_slope = c.slope;
    model.act_intercept = c.intercept;
  }
  // Noise can tip a nearly flat line negative; memory never shrinks with batch.
  model.act_slope = std::max(model.act_slope, 0.0);
  model.batch_slope = std::max(model.batch_slope, 0.0);
  return model;
}

int max_feasible_batch(const MemModel& model, std::span<const int> batch_grid) {
  if (batch_grid.empty()) throw Error(ErrorKind::InvalidInput, "batch grid must be non-empty");
  std::optional<int> best;
  for (const int b : batch_grid) {
    if (model.fits(b) && (!best || b > *best)) best = b;
  }
  if (!best) throw Error(ErrorKind::Infeasible, "minimum batch exceeds memory");
  return *best;
}

ProbeResult probe_shrink(int start_batch, const MemoryProbe& probe, std::span<const int> grid) {
  std::vector<int> candidates;
  for (const int b : grid) {
    if (b <= start_batch) candidates.push_back(b);
  }
  std::sort(candidates.begin(), candidates.end(), std::greater<>());
  if (candidates.empty() || candidates.front() != start_batch) {
    candidates.insert(candidates.begin(), start_batch);
  }

  ProbeResult result;
  for (const int b : candidates) {
    ++result.probes;
    if (probe(b)) {
      result.batch = b;
      return result;
    }
  }
  throw Error(ErrorKind::Infeasible, "minimum batch exceeds memory");
}

}  // namespace batchplan
