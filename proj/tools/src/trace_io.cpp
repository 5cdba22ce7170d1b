#include "batchplan/cli/trace_io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string_view>

#include <fmt/format.h>

#include "batchplan/error.hpp"

namespace batchplan::cli {

namespace {

constexpr std::string_view kTraceColumns =
    "node_count,local_batch,step_index,step_time_s,peak_mem_gb,act_mem_gb,batch_mem_gb";
constexpr std::string_view kCurveColumns = "B,T_pred,C_pred,N,b,mem_gb";

[[noreturn]] void fail(std::size_t line, const std::string& what) {
  throw Error(ErrorKind::InvalidInput, fmt::format("line {}: {}", line, what));
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

template <typename T>
T parse_field(std::string_view text, std::size_t line, std::string_view column) {
  text = trim(text);
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (text.empty() || ec != std::errc{} || ptr != text.data() + text.size()) {
    fail(line, fmt::format("cannot parse {} from '{}'", column, text));
  }
  return value;
}

std::optional<double> parse_optional(std::string_view text, std::size_t line,
                                     std::string_view column) {
  if (trim(text).empty()) return std::nullopt;
  return parse_field<double>(text, line, column);
}

TraceHeader parse_metadata(std::string_view text, std::size_t line) {
  const auto tokens = split(trim(text), ' ');
  if (tokens.size() < 2 || tokens[0] != "#" || tokens[1] != "batchplan-trace") {
    fail(line, "missing '# batchplan-trace' metadata line");
  }
  TraceHeader header;
  bool versioned = false;
  for (std::size_t i = 2; i < tokens.size(); ++i) {
    const auto tok = tokens[i];
    if (tok.empty()) continue;
    if (tok.front() == 'v') {
      header.version = parse_field<int>(tok.substr(1), line, "schema version");
      versioned = true;
      continue;
    }
    const auto eq = tok.find('=');
    if (eq == std::string_view::npos) fail(line, fmt::format("unexpected token '{}'", tok));
    const auto key = tok.substr(0, eq);
    const auto value = tok.substr(eq + 1);
    if (key == "protocol") {
      const auto p = parse_protocol(value);
      if (!p) fail(line, fmt::format("unknown protocol '{}'", value));
      header.protocol = *p;
    } else if (key == "time") {
      if (value != "s") fail(line, "time unit must be s");
    } else if (key == "mem") {
      if (value != "GB") fail(line, "memory unit must be GB");
    } else {
      fail(line, fmt::format("unknown metadata key '{}'", key));
    }
  }
  if (!versioned) fail(line, "missing schema version");
  if (header.version != kTraceSchemaVersion) {
    fail(line, fmt::format("unsupported schema version {}", header.version));
  }
  return header;
}

}  // namespace

std::string format_number(double value) { return fmt::format("{}", value); }

TraceFile read_trace(std::istream& in) {
  TraceFile trace;
  std::string raw;
  std::size_t line = 0;
  int stage = 0;  // 0: metadata, 1: column header, 2: rows
  while (std::getline(in, raw)) {
    ++line;
    const auto text = trim(raw);
    if (text.empty()) continue;
    if (stage == 0) {
      trace.header = parse_metadata(text, line);
      stage = 1;
      continue;
    }
    if (stage == 1) {
      if (text != kTraceColumns) fail(line, fmt::format("expected header '{}'", kTraceColumns));
      stage = 2;
      continue;
    }
    const auto f = split(text, ',');
    if (f.size() != 7) fail(line, fmt::format("expected 7 fields, found {}", f.size()));
    TraceRow row;
    row.node_count = parse_field<int>(f[0], line, "node_count");
    row.local_batch = parse_field<int>(f[1], line, "local_batch");
    row.step_index = parse_field<int>(f[2], line, "step_index");
    if (row.step_index < 0) fail(line, "step_index must be non-negative");
    if (trim(f[3]) == "oom") {
      if (row.node_count < 1 || row.local_batch < 1) fail(line, "invalid configuration");
      trace.rows.push_back(row);
      continue;
    }
    ProfilingSample s;
    s.node_count = row.node_count;
    s.local_batch = row.local_batch;
    s.step_time = parse_field<double>(f[3], line, "step_time_s");
    s.peak_memory = parse_field<double>(f[4], line, "peak_mem_gb");
    const auto act = parse_optional(f[5], line, "act_mem_gb");
    const auto batch = parse_optional(f[6], line, "batch_mem_gb");
    if (act.has_value() != batch.has_value()) {
      fail(line, "act_mem_gb and batch_mem_gb must be given together");
    }
    if (act) s.memory_breakdown = MemoryBreakdown{*act, *batch, *s.peak_memory - *act - *batch};
    try {
      s.validate();
    } catch (const Error& e) {
      fail(line, e.what());
    }
    row.sample = s;
    trace.rows.push_back(row);
  }
  if (stage == 0) throw Error(ErrorKind::InvalidInput, "empty trace");
  if (stage == 1) fail(line, "missing column header");
  if (trace.rows.empty()) fail(line, "trace has no rows");
  return trace;
}

TraceFile read_trace_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::InvalidInput, fmt::format("cannot open trace '{}'", path));
  return read_trace(in);
}

void write_trace(std::ostream& out, const TraceFile& trace) {
  out << "# batchplan-trace v" << trace.header.version
      << " protocol=" << to_string(trace.header.protocol) << " time=s mem=GB\n"
      << kTraceColumns << '\n';
  for (const auto& r : trace.rows) {
    out << r.node_count << ',' << r.local_batch << ',' << r.step_index << ',';
    if (!r.sample) {
      out << "oom,,,\n";
      continue;
    }
    const auto& s = *r.sample;
    out << format_number(s.step_time) << ',' << format_number(s.peak_memory.value_or(0.0)) << ',';
    if (s.memory_breakdown) {
      out << format_number(s.memory_breakdown->act) << ','
          << format_number(s.memory_breakdown->batch);
    } else {
      out << ',';
    }
    out << '\n';
  }
}

FileTraceSource::FileTraceSource(const TraceFile& trace) {
  std::map<std::tuple<int, int, int>, std::optional<ProfilingSample>> ordered;
  for (const auto& r : trace.rows) ordered[{r.node_count, r.local_batch, r.step_index}] = r.sample;
  for (const auto& [key, sample] : ordered) {
    bursts_[{std::get<0>(key), std::get<1>(key)}].push_back(sample);
  }
}

std::optional<ProfilingSample> FileTraceSource::step(int node_count, int local_batch,
                                                     int step_index) const {
  const auto it = bursts_.find({node_count, local_batch});
  if (it == bursts_.end()) {
    throw Error(ErrorKind::InvalidInput,
                fmt::format("trace has no rows for N={} b={}", node_count, local_batch));
  }
  const auto& burst = it->second;
  return burst[static_cast<std::size_t>(step_index) % burst.size()];
}

void write_curve(std::ostream& out, const TimeCostCurve& curve) {
  out << kCurveColumns << '\n';
  for (const auto& p : curve.points) {
    out << p.global_batch << ',' << format_number(p.time) << ',' << format_number(p.cost) << ','
        << p.node_count << ',' << p.local_batch << ',' << format_number(p.memory_per_node) << '\n';
  }
}

TimeCostCurve read_curve(std::istream& in) {
  TimeCostCurve curve;
  std::string raw;
  std::size_t line = 0;
  bool header = false;
  while (std::getline(in, raw)) {
    ++line;
    const auto text = trim(raw);
    if (text.empty()) continue;
    if (!header) {
      if (text != kCurveColumns) fail(line, fmt::format("expected header '{}'", kCurveColumns));
      header = true;
      continue;
    }
    const auto f = split(text, ',');
    if (f.size() != 6) fail(line, fmt::format("expected 6 fields, found {}", f.size()));
    CurvePoint p;
    p.global_batch = parse_field<std::int64_t>(f[0], line, "B");
    p.time = parse_field<double>(f[1], line, "T_pred");
    p.cost = parse_field<double>(f[2], line, "C_pred");
    p.node_count = parse_field<int>(f[3], line, "N");
    p.local_batch = parse_field<int>(f[4], line, "b");
    p.memory_per_node = parse_field<double>(f[5], line, "mem_gb");
    if (p.global_batch != static_cast<std::int64_t>(p.node_count) * p.local_batch) {
      fail(line, "B must equal N * b");
    }
    if (!curve.points.empty() && p.node_count != curve.node_count) {
      fail(line, "mixed cluster sizes in one curve");
    }
    curve.node_count = p.node_count;
    curve.points.push_back(p);
  }
  if (!header) throw Error(ErrorKind::InvalidInput, "empty curve table");
  return curve;
}

}  // namespace batchplan::cli
