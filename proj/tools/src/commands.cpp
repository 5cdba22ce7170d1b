#include "batchplan/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>

#include "batchplan/ags.hpp"
#include "batchplan/cli/error_trials.hpp"
#include "batchplan/cli/report.hpp"
#include "batchplan/cli/trace_io.hpp"
#include "batchplan/cluster_sim.hpp"
#include "batchplan/error.hpp"
#include "batchplan/micro_model.hpp"
#include "batchplan/planner.hpp"

namespace batchplan::cli {

namespace {

struct Range {
  int lo = 0;
  int hi = 0;
};

Range parse_range(const std::string& text, const char* what) {
  const auto colon = text.find(':');
  Range r;
  const auto parse = [&](std::string_view s, int& v) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    return !s.empty() && ec == std::errc{} && ptr == s.data() + s.size();
  };
  const std::string_view all(text);
  if (colon == std::string::npos || !parse(all.substr(0, colon), r.lo) ||
      !parse(all.substr(colon + 1), r.hi)) {
    throw Error(ErrorKind::InvalidInput, fmt::format("{} must look like MIN:MAX", what));
  }
  return r;
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(ErrorKind::InvalidInput, fmt::format("cannot write '{}'", path.string()));
  return f;
}

ScenarioPreset require_preset(const std::string& name) {
  const auto p = find_preset(name);
  if (!p) {
    std::string known;
    for (const auto& n : preset_names()) known += (known.empty() ? "" : ", ") + n;
    throw Error(ErrorKind::InvalidInput, fmt::format("unknown preset '{}' (known: {})", name, known));
  }
  return *p;
}

// Workload fields left unset keep the preset's values.
struct WorkloadFlags {
  std::optional<std::int64_t> dataset_size;
  std::optional<int> epochs;
  std::optional<std::int64_t> params;
  std::optional<int> bytes_per_param;
  std::optional<double> optimizer_mult;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--dataset-size", dataset_size, "Samples per epoch (D)");
    cmd->add_option("--epochs", epochs, "Training epochs (E)");
    cmd->add_option("--params", params, "Model parameter count");
    cmd->add_option("--bytes-per-param", bytes_per_param, "Bytes per parameter");
    cmd->add_option("--optimizer-mult", optimizer_mult, "Optimizer state multiplier k");
  }

  WorkloadSpec apply(std::optional<WorkloadSpec> base) const {
    if (!base && !(dataset_size && epochs && params)) {
      throw Error(ErrorKind::InvalidInput,
                  "trace planning needs --dataset-size, --epochs and --params");
    }
    WorkloadSpec w = base.value_or(WorkloadSpec{});
    if (dataset_size) w.dataset_size = *dataset_size;
    if (epochs) w.epochs = *epochs;
    if (params) w.param_count = *params;
    if (bytes_per_param) w.bytes_per_param = *bytes_per_param;
    if (optimizer_mult) w.optimizer_state_multiplier = *optimizer_mult;
    w.validate();
    return w;
  }
};

struct SimFlags {
  double noise = 0.0;
  double mem_noise = 0.0;
  std::uint64_t seed = 1;
  std::optional<double> capacity;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--noise", noise, "Step-time noise fraction")->capture_default_str();
    cmd->add_option("--mem-noise", mem_noise, "Memory noise fraction")->capture_default_str();
    cmd->add_option("--seed", seed, "Simulator seed")->capture_default_str();
    cmd->add_option("--capacity", capacity, "Device memory in GB");
  }

  SimCluster apply(SimCluster sim) const {
    sim.noise_pct = noise;
    sim.mem_noise_pct = mem_noise;
    sim.seed = seed;
    if (capacity) {
      sim.device_capacity = *capacity;
      sim.true_mem.device_capacity = *capacity;
    }
    sim.validate();
    return sim;
  }
};

struct PlanFlags {
  std::string trace;
  std::string simulate;
  std::string objective = "knee";
  std::string strategy = "partial";
  std::string pricing = "per-node:2.48";
  std::string batches = "32:16384";
  std::string nodes = "2:16";
  std::optional<int> select_nodes;
  double safety = 0.9;
  int steps = 10;
  int warmup = 2;
  double sensitivity = 1.0;
  std::string out;
  SimFlags sim;
  WorkloadFlags workload;
};

int cmd_plan(const PlanFlags& f, std::ostream& out) {
  PlanRequest request;
  const auto objective = parse_objective(f.objective);
  if (!objective) throw Error(ErrorKind::InvalidInput, "objective must be mintime, mincost or knee");
  const auto strategy = parse_strategy(f.strategy);
  if (!strategy) throw Error(ErrorKind::InvalidInput, "strategy must be full or partial");
  request.objective = *objective;
  request.strategy = *strategy;
  request.pricing = parse_pricing(f.pricing);
  const auto b = parse_range(f.batches, "--batches");
  const auto n = parse_range(f.nodes, "--nodes");
  request.b_min = b.lo;
  request.b_max = b.hi;
  request.n_min = n.lo;
  request.n_max = n.hi;
  request.select_nodes = f.select_nodes;
  request.safety_factor = f.safety;
  request.profile = {f.steps, f.warmup};
  request.kneedle_sensitivity = f.sensitivity;

  std::unique_ptr<TraceSource> source;
  std::string label;
  if (!f.simulate.empty()) {
    const auto preset = require_preset(f.simulate);
    const SimCluster sim = f.sim.apply(preset.sim);
    request.workload = f.workload.apply(preset.workload);
    request.protocol = sim.protocol;
    request.device_capacity = sim.device_capacity;
    source = std::make_unique<SimTraceSource>(sim);
    label = fmt::format("simulate:{} seed={} noise={} mem_noise={}", preset.name, sim.seed,
                        sim.noise_pct, sim.mem_noise_pct);
  } else {
    const auto trace = read_trace_file(f.trace);
    request.workload = f.workload.apply(std::nullopt);
    request.protocol = trace.header.protocol;
    request.device_capacity = f.sim.capacity.value_or(request.device_capacity);
    source = std::make_unique<FileTraceSource>(trace);
    label = fmt::format("trace:{}", std::filesystem::path(f.trace).filename().string());
  }

  const Plan result = plan(request, *source);
  const std::string report = plan_report(result, request.pricing, label).dump(2) + "\n";
  out << report;

  if (!f.out.empty()) {
    const std::filesystem::path dir(f.out);
    std::filesystem::create_directories(dir);
    open_output(dir / "plan.json") << report;
    for (const auto& [nodes, curve] : result.curves) {
      auto file = open_output(dir / fmt::format("curve_N{}.csv", nodes));
      write_curve(file, curve);
    }
  }
  return kExitOk;
}

struct ErrorsFlags {
  ErrorTrialConfig config;
  std::string batches = "32:16384";
  std::string nodes = "2:16";
  std::string out;
};

int cmd_errors(ErrorsFlags f, std::ostream& out) {
  const auto b = parse_range(f.batches, "--batches");
  const auto n = parse_range(f.nodes, "--nodes");
  f.config.b_min = b.lo;
  f.config.b_max = b.hi;
  f.config.n_min = n.lo;
  f.config.n_max = n.hi;
  const auto stats = run_error_trials(f.config);

  std::ostringstream table;
  table << "strategy,metric,median,q1,q3,count\n";
  for (const auto& s : stats) {
    for (const auto& [metric, q] : {std::pair{"time", s.time}, std::pair{"memory", s.memory}}) {
      table << to_string(s.strategy) << ',' << metric << ',' << format_number(q.median) << ','
            << format_number(q.q1) << ',' << format_number(q.q3) << ',' << q.count << '\n';
    }
  }
  out << table.str();
  if (!f.out.empty()) open_output(f.out) << table.str();
  return kExitOk;
}

struct TrainFlags {
  std::string objective_fn = "quadratic";
  std::string mode = "ags";
  std::int64_t steps = 500;
  std::uint64_t seed = 1;
  TrainerConfig config;
  std::size_t dim = 10;
  double curvature = 1.0;
  std::vector<int> layers{4, 8, 1};
  int samples = 256;
  double divergence = 1e6;
  std::string out;
};

RunOptions parse_mode(const std::string& text, TrainerConfig& config) {
  RunOptions options;
  const auto colon = text.find(':');
  const std::string name = text.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : text.substr(colon + 1);
  const auto number = [&](auto& v) {
    const auto [ptr, ec] = std::from_chars(arg.data(), arg.data() + arg.size(), v);
    if (arg.empty() || ec != std::errc{} || ptr != arg.data() + arg.size()) {
      throw Error(ErrorKind::InvalidInput, fmt::format("invalid mode argument '{}'", arg));
    }
  };
  if (name == "vanilla" && arg.empty()) {
    options.mode = TrainMode::Vanilla;
  } else if (name == "ags" && arg.empty()) {
    options.mode = TrainMode::Ags;
  } else if (name == "static") {
    double s = 0.0;
    number(s);
    options.mode = TrainMode::Static;
    config.static_scale = s;
  } else if (name == "lrs") {
    options.mode = TrainMode::Lrs;
    if (!arg.empty()) number(options.lrs_base_batch);
  } else {
    throw Error(ErrorKind::InvalidInput, "mode must be vanilla, static:S, ags or lrs[:BASE]");
  }
  return options;
}

int cmd_train(TrainFlags f, std::ostream& out) {
  RunOptions options = parse_mode(f.mode, f.config);
  options.divergence_factor = f.divergence;

  MicroModel model = [&] {
    if (f.objective_fn == "quadratic") return MicroModel::quadratic(f.curvature, f.dim);
    if (f.objective_fn == "mlp") return MicroModel::logistic_mlp(f.layers, f.samples, f.seed);
    throw Error(ErrorKind::InvalidInput, "objective-fn must be quadratic or mlp");
  }();

  const auto report = run_training(std::move(model), f.config, f.steps, f.seed, options);
  if (!f.out.empty()) {
    auto file = open_output(f.out);
    file << "step,f,grad_sq_norm,delta,scaled,scale_min,scale_max\n";
    for (const auto& r : report.rows) {
      file << r.step << ',' << format_number(r.f) << ',' << format_number(r.grad_sq_norm) << ','
           << format_number(r.delta) << ',' << (r.scaled ? 1 : 0) << ','
           << format_number(r.scale_min) << ',' << format_number(r.scale_max) << '\n';
    }
  }
  out << trajectory_summary(report.summary).dump(2) << '\n';
  return kExitOk;
}

struct SimulateFlags {
  std::string preset = "resnet50-like";
  std::string batches = "32:16384";
  std::string nodes = "2:16";
  int steps = 10;
  SimFlags sim;
  std::string out;
};

int cmd_simulate(const SimulateFlags& f, std::ostream& out) {
  const auto preset = require_preset(f.preset);
  const SimCluster sim = f.sim.apply(preset.sim);
  const auto b = parse_range(f.batches, "--batches");
  const auto n = parse_range(f.nodes, "--nodes");
  const auto grid = candidate_grid(b.lo, b.hi, n.lo, n.hi);
  if (f.steps < 1) throw Error(ErrorKind::InvalidInput, "steps must be at least 1");

  TraceFile trace;
  trace.header.protocol = sim.protocol;
  for (const int nodes : grid.clusters) {
    for (const int batch : grid.batches) {
      for (int s = 0; s < f.steps; ++s) {
        trace.rows.push_back({nodes, batch, s, sample_step(sim, nodes, batch, s)});
      }
    }
  }
  if (f.out.empty()) {
    write_trace(out, trace);
  } else {
    auto file = open_output(f.out);
    write_trace(file, trace);
  }
  return kExitOk;
}

int exit_code(const Error& e) {
  return e.kind() == ErrorKind::Infeasible ? kExitInfeasible : kExitInput;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Batch-size and cluster-size planner for data-parallel training"};
  app.name("batchplan");
  app.set_config("--config", "", "TOML/INI file with option defaults; flags win");
  app.require_subcommand(1);

  PlanFlags plan_flags;
  auto* plan_cmd = app.add_subcommand("plan", "Profile, fit and emit a plan with curve tables");
  auto* trace_opt = plan_cmd->add_option("--trace", plan_flags.trace, "Recorded trace CSV");
  auto* sim_opt = plan_cmd->add_option("--simulate", plan_flags.simulate, "Simulator preset");
  trace_opt->excludes(sim_opt);
  plan_cmd->add_option("--objective", plan_flags.objective, "mintime | mincost | knee")
      ->capture_default_str();
  plan_cmd->add_option("--strategy", plan_flags.strategy, "full | partial")->capture_default_str();
  plan_cmd->add_option("--pricing", plan_flags.pricing, "per-node:RATE | per-gb:RATE")
      ->capture_default_str();
  plan_cmd->add_option("--batches", plan_flags.batches, "Local batch bounds MIN:MAX")
      ->capture_default_str();
  plan_cmd->add_option("--nodes", plan_flags.nodes, "Cluster size bounds MIN:MAX")
      ->capture_default_str();
  plan_cmd->add_option("--select-nodes", plan_flags.select_nodes,
                       "Restrict the final choice to one cluster size");
  plan_cmd->add_option("--safety", plan_flags.safety, "Memory safety factor")->capture_default_str();
  plan_cmd->add_option("--steps", plan_flags.steps, "Steps per profiling burst")->capture_default_str();
  plan_cmd->add_option("--warmup", plan_flags.warmup, "Warmup steps discarded")->capture_default_str();
  plan_cmd->add_option("--sensitivity", plan_flags.sensitivity, "Kneedle sensitivity S")
      ->capture_default_str();
  plan_cmd->add_option("--out", plan_flags.out, "Directory for plan.json and curve tables");
  plan_flags.sim.add_to(plan_cmd);
  plan_flags.workload.add_to(plan_cmd);

  ErrorsFlags errors_flags;
  auto* errors_cmd = app.add_subcommand("errors", "Prediction-error distribution against the simulator");
  errors_cmd->add_option("--simulate", errors_flags.config.preset, "Simulator preset")
      ->capture_default_str();
  errors_cmd->add_option("--trials", errors_flags.config.trials, "Seeded trials")->capture_default_str();
  errors_cmd->add_option("--noise", errors_flags.config.noise_pct, "Step-time noise fraction")
      ->capture_default_str();
  errors_cmd->add_option("--mem-noise", errors_flags.config.mem_noise_pct, "Memory noise fraction")
      ->capture_default_str();
  errors_cmd->add_option("--seed", errors_flags.config.seed, "First trial seed")->capture_default_str();
  errors_cmd->add_option("--threads", errors_flags.config.threads, "Worker threads (0: all cores)")
      ->capture_default_str();
  errors_cmd->add_option("--batches", errors_flags.batches, "Local batch bounds MIN:MAX")
      ->capture_default_str();
  errors_cmd->add_option("--nodes", errors_flags.nodes, "Cluster size bounds MIN:MAX")
      ->capture_default_str();
  errors_cmd->add_option("--out", errors_flags.out, "Also write the table to this file");

  TrainFlags train_flags;
  auto* train_cmd = app.add_subcommand("train", "Run the micro-trainer and emit a trajectory");
  train_cmd->add_option("--objective-fn", train_flags.objective_fn, "quadratic | mlp")
      ->capture_default_str();
  train_cmd->add_option("--mode", train_flags.mode, "vanilla | static:S | ags | lrs[:BASE]")
      ->capture_default_str();
  train_cmd->add_option("--steps", train_flags.steps, "Training steps")->capture_default_str();
  train_cmd->add_option("--seed", train_flags.seed, "Seed")->capture_default_str();
  train_cmd->add_option("--b-small", train_flags.config.b_small, "Small batch")->capture_default_str();
  train_cmd->add_option("--b-large", train_flags.config.b_large, "Large batch")->capture_default_str();
  train_cmd->add_option("--eta", train_flags.config.eta, "Learning rate")->capture_default_str();
  train_cmd->add_option("--delta", train_flags.config.delta, "Sensitivity threshold")
      ->capture_default_str();
  train_cmd->add_option("--epsilon", train_flags.config.epsilon, "Scale stabilizer")
      ->capture_default_str();
  train_cmd->add_option("--period", train_flags.config.scale_update_period, "Steps per scale refresh")
      ->capture_default_str();
  train_cmd->add_option("--sigma", train_flags.config.noise_sigma, "Gradient noise sigma")
      ->capture_default_str();
  train_cmd->add_option("--dim", train_flags.dim, "Quadratic dimension")->capture_default_str();
  train_cmd->add_option("--curvature", train_flags.curvature, "Quadratic curvature L")
      ->capture_default_str();
  train_cmd->add_option("--layers", train_flags.layers, "MLP layer widths")->delimiter(',');
  train_cmd->add_option("--samples", train_flags.samples, "MLP dataset size")->capture_default_str();
  train_cmd->add_option("--divergence", train_flags.divergence, "Divergence factor")
      ->capture_default_str();
  train_cmd->add_option("--out", train_flags.out, "Trajectory CSV");

  SimulateFlags simulate_flags;
  auto* simulate_cmd = app.add_subcommand("simulate", "Emit a simulator trace");
  simulate_cmd->add_option("--preset", simulate_flags.preset, "Simulator preset")
      ->capture_default_str();
  simulate_cmd->add_option("--batches", simulate_flags.batches, "Local batch bounds MIN:MAX")
      ->capture_default_str();
  simulate_cmd->add_option("--nodes", simulate_flags.nodes, "Cluster size bounds MIN:MAX")
      ->capture_default_str();
  simulate_cmd->add_option("--steps", simulate_flags.steps, "Steps per configuration")
      ->capture_default_str();
  simulate_cmd->add_option("--out", simulate_flags.out, "Trace file (default stdout)");
  simulate_flags.sim.add_to(simulate_cmd);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (plan_cmd->parsed()) {
      if (plan_flags.trace.empty() == plan_flags.simulate.empty()) {
        throw Error(ErrorKind::InvalidInput, "plan needs exactly one of --trace or --simulate");
      }
      return cmd_plan(plan_flags, out);
    }
    if (errors_cmd->parsed()) return cmd_errors(errors_flags, out);
    if (train_cmd->parsed()) return cmd_train(train_flags, out);
    return cmd_simulate(simulate_flags, out);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitInput;
  }
}

}  // namespace batchplan::cli
