#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

namespace batchplan {

enum class SyncProtocol { ParameterServer, RingAllReduce };

struct ClusterConfig {
  int node_count = 1;
  SyncProtocol sync_protocol = SyncProtocol::RingAllReduce;
};

struct BatchConfig {
  int local_batch = 1;
  std::int64_t global_batch = 1;
};

/// Training job description. Memory figures derived from it are in GB (1e9 bytes).
struct WorkloadSpec {
  std::int64_t dataset_size = 1;  // samples per epoch (D)
  int epochs = 1;                 // E
  std::int64_t param_count = 1;
  int bytes_per_param = 4;
  double optimizer_state_multiplier = 1.0;  // k; 1 for momentum SGD

  void validate() const;
};

struct PerNodeHourly {
  double rate = 0.0;  // currency / node / hour
};

struct PerGbHourly {
  double rate = 0.0;  // currency / GB / hour, charged per node
};

using PricingModel = std::variant<PerNodeHourly, PerGbHourly>;

enum class Objective { MinTime, MinCost, KneePoint };
enum class SearchStrategy { Full, Partial };

struct MemoryBreakdown {
  double act = 0.0;
  double batch = 0.0;
  double static_mem = 0.0;
};

struct ProfilingSample {
  int node_count = 1;
  int local_batch = 1;
  double step_time = 0.0;  // seconds
  std::optional<double> peak_memory;  // GB
  std::optional<MemoryBreakdown> memory_breakdown;

  void validate() const;
};

struct CandidateGrid {
  std::vector<int> batches;
  std::vector<int> clusters;
};

/// Doubling lattices from each minimum; maxima off the lattice are snapped down.
CandidateGrid candidate_grid(int b_min, int b_max, int n_min, int n_max);

std::int64_t global_batch(const ClusterConfig& cluster, int local_batch);

void validate_pricing(const PricingModel& pricing);

std::string_view to_string(SyncProtocol protocol);
std::string_view to_string(Objective objective);
std::string_view to_string(SearchStrategy strategy);

std::optional<SyncProtocol> parse_protocol(std::string_view text);
std::optional<Objective> parse_objective(std::string_view text);
std::optional<SearchStrategy> parse_strategy(std::string_view text);

}  // namespace batchplan
