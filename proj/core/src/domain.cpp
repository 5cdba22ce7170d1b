#include "batchplan/domain.hpp"

#include <cmath>
#include <string>

#include "batchplan/error.hpp"

namespace batchplan {

namespace {

std::vector<int> doubling(int lo, int hi) {
  std::vector<int> out;
  for (std::int64_t v = lo; v <= hi; v *= 2) out.push_back(static_cast<int>(v));
  return out;
}

}  // namespace

void WorkloadSpec::validate() const {
  if (dataset_size <= 0 || epochs <= 0 || param_count <= 0 || bytes_per_param <= 0 ||
      !(optimizer_state_multiplier >= 0.0)) {
    throw Error(ErrorKind::InvalidInput, "invalid workload");
  }
}

void ProfilingSample::validate() const {
  if (node_count < 1 || local_batch < 1) {
    throw Error(ErrorKind::InvalidInput, "sample configuration must be positive");
  }
  if (!(step_time > 0.0) || !std::isfinite(step_time)) {
    throw Error(ErrorKind::InvalidInput, "step_time must be positive");
  }
  if (peak_memory && !(*peak_memory >= 0.0)) {
    throw Error(ErrorKind::InvalidInput, "peak_memory must be non-negative");
  }
  if (memory_breakdown) {
    const auto& m = *memory_breakdown;
    if (!(m.act >= 0.0) || !(m.batch >= 0.0) || !(m.static_mem >= 0.0)) {
      throw Error(ErrorKind::InvalidInput, "memory breakdown must be non-negative");
    }
  }
}

CandidateGrid candidate_grid(int b_min, int b_max, int n_min, int n_max) {
  if (b_min < 1 || n_min < 1 || b_min > b_max || n_min > n_max) {
    throw Error(ErrorKind::InvalidInput, "invalid bounds");
  }
  return {doubling(b_min, b_max), doubling(n_min, n_max)};
}

std::int64_t global_batch(const ClusterConfig& cluster, int local_batch) {
  return static_cast<std::int64_t>(cluster.node_count) * local_batch;
}

void validate_pricing(const PricingModel& pricing) {
  const double rate = std::visit([](const auto& p) { return p.rate; }, pricing);
  if (!(rate > 0.0) || !std::isfinite(rate)) {
    throw Error(ErrorKind::InvalidInput, "pricing rate must be positive");
  }
}

std::string_view to_string(SyncProtocol protocol) {
  return protocol == SyncProtocol::RingAllReduce ? "ring" : "ps";
}

std::string_view to_string(Objective objective) {
  switch (objective) {
    case Objective::MinTime: return "mintime";
    case Objective::MinCost: return "mincost";
    case Objective::KneePoint: return "knee";
  }
  return "?";
}

std::string_view to_string(SearchStrategy strategy) {
  return strategy == SearchStrategy::Full ? "full" : "partial";
}

std::optional<SyncProtocol> parse_protocol(std::string_view text) {
  if (text == "ring" || text == "ring-allreduce") return SyncProtocol::RingAllReduce;
  if (text == "ps" || text == "parameter-server") return SyncProtocol::ParameterServer;
  return std::nullopt;
}

std::optional<Objective> parse_objective(std::string_view text) {
  if (text == "mintime" || text == "time") return Objective::MinTime;
  if (text == "mincost" || text == "cost") return Objective::MinCost;
  if (text == "knee" || text == "kneepoint") return Objective::KneePoint;
  return std::nullopt;
}

std::optional<SearchStrategy> parse_strategy(std::string_view text) {
  if (text == "full") return SearchStrategy::Full;
  if (text == "partial") return SearchStrategy::Partial;
  return std::nullopt;
}

}  // namespace batchplan
