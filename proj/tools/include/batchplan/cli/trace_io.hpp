#pragma once

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "batchplan/domain.hpp"
#include "batchplan/perf_model.hpp"
#include "batchplan/planner.hpp"

namespace batchplan::cli {

inline constexpr int kTraceSchemaVersion = 1;

struct TraceHeader {
  int version = kTraceSchemaVersion;
  SyncProtocol protocol = SyncProtocol::RingAllReduce;
};

struct TraceRow {
  int node_count = 0;
  int local_batch = 0;
  int step_index = 0;
  std::optional<ProfilingSample> sample;  // empty for an OOM row
};

struct TraceFile {
  TraceHeader header;
  std::vector<TraceRow> rows;
};

/// Throws Error(InvalidInput) naming the offending line.
TraceFile read_trace(std::istream& in);
TraceFile read_trace_file(const std::string& path);
void write_trace(std::ostream& out, const TraceFile& trace);

/// Replays recorded steps. Step indices beyond the recorded burst wrap around.
class FileTraceSource final : public TraceSource {
 public:
  explicit FileTraceSource(const TraceFile& trace);

  std::optional<ProfilingSample> step(int node_count, int local_batch,
                                      int step_index) const override;

 private:
  std::map<std::pair<int, int>, std::vector<std::optional<ProfilingSample>>> bursts_;
};

/// Columns: B,T_pred,C_pred,N,b,mem_gb
void write_curve(std::ostream& out, const TimeCostCurve& curve);
TimeCostCurve read_curve(std::istream& in);

/// Shortest text that parses back to the same double.
std::string format_number(double value);

}  // namespace batchplan::cli
