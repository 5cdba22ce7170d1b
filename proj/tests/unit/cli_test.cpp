#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "batchplan/cli/commands.hpp"
#include "batchplan/cli/report.hpp"
#include "batchplan/cli/trace_io.hpp"
#include "batchplan/error.hpp"
#include "oracles.hpp"

namespace batchplan::cli {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  std::ostringstream out;
  std::ostringstream err;
  const int code = run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const fs::path& p, const std::string& text) { std::ofstream(p, std::ios::binary) << text; }

std::vector<std::vector<std::string>> read_csv(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(slurp(p));
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

const std::vector<std::string> kWorkload{"--dataset-size", "30000", "--epochs", "80", "--params", "5500000"};

TEST(CliPlan, ResnetLikeKneeReport) {
  const auto r = invoke({"plan", "--simulate", "resnet50-like", "--objective", "knee", "--strategy", "partial"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(r.out);
  EXPECT_EQ(report["schema"], kPlanSchema);
  bool found = false;
  for (const auto& c : report["curves"]) {
    if (c["N"] == 16) {
      EXPECT_EQ(c["knee"]["B"], 8192);
      found = true;
    }
  }
  EXPECT_TRUE(found);
  EXPECT_EQ(report["profiled_configs"].size(), 4u);
}

TEST(CliPlan, MemoryPricedAlexnetChoosesTwoThousandFortyEight) {
  const auto r = invoke({"plan", "--simulate", "alexnet-like", "--objective", "mincost", "--pricing",
                         "per-gb:0.15", "--select-nodes", "16"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(json::parse(r.out)["chosen"]["B"], 2048);
}

TEST(CliPlan, EmptyTraceIsAnInputError) {
  const auto dir = testing::scratch_dir("empty");
  write_file(dir / "t.csv", "");
  auto args = std::vector<std::string>{"plan", "--trace", (dir / "t.csv").string()};
  args.insert(args.end(), kWorkload.begin(), kWorkload.end());
  const auto r = invoke(args);
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("empty trace"), std::string::npos);
}

TEST(CliPlan, MalformedRowNamesTheLine) {
  const auto dir = testing::scratch_dir("bad");
  write_file(dir / "t.csv",
             "# batchplan-trace v1 protocol=ring time=s mem=GB\n"
             "node_count,local_batch,step_index,step_time_s,peak_mem_gb,act_mem_gb,batch_mem_gb\n"
             "2,32,0,0.05,1.0,,\n"
             "2,64,0,fast,1.0,,\n");
  auto args = std::vector<std::string>{"plan", "--trace", (dir / "t.csv").string()};
  args.insert(args.end(), kWorkload.begin(), kWorkload.end());
  const auto r = invoke(args);
  EXPECT_EQ(r.code, kExitInput);
  EXPECT_NE(r.err.find("line 4"), std::string::npos) << r.err;
}

TEST(CliPlan, InfeasibleExitsWithThree) {
  const auto r = invoke({"plan", "--simulate", "alexnet-like", "--capacity", "0.5"});
  EXPECT_EQ(r.code, kExitInfeasible);
  EXPECT_NE(r.err.find("minimum batch exceeds memory"), std::string::npos);
}

TEST(CliPlan, UsageErrorsExitWithTwo) {
  EXPECT_EQ(invoke({"plan"}).code, kExitInput);
  EXPECT_EQ(invoke({"plan", "--simulate", "vgg-like"}).code, kExitInput);
  EXPECT_EQ(invoke({"plan", "--simulate", "alexnet-like", "--pricing", "free"}).code, kExitInput);
  EXPECT_EQ(invoke({"plan", "--simulate", "alexnet-like", "--batches", "64"}).code, kExitInput);
  EXPECT_EQ(invoke({"frobnicate"}).code, kExitInput);
  EXPECT_EQ(invoke({"--help"}).code, kExitOk);
}

TEST(CliPlan, CurveTablesRoundTripThroughTheReader) {
  const auto dir = testing::scratch_dir("curves");
  const auto r = invoke({"plan", "--simulate", "mobilenet-like", "--out", dir.string()});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto report = json::parse(slurp(dir / "plan.json"));
  EXPECT_EQ(slurp(dir / "plan.json"), r.out);
  for (const auto& c : report["curves"]) {
    const int n = c["N"];
    const auto path = dir / ("curve_N" + std::to_string(n) + ".csv");
    std::ifstream in(path);
    const auto curve = read_curve(in);
    ASSERT_EQ(curve.points.size(), c["points"].size());
    for (std::size_t i = 0; i < curve.points.size(); ++i) {
      EXPECT_EQ(curve.points[i].global_batch, c["points"][i]["B"].get<std::int64_t>());
      EXPECT_EQ(curve.points[i].time, c["points"][i]["T_pred"].get<double>());
      EXPECT_EQ(curve.points[i].cost, c["points"][i]["C_pred"].get<double>());
    }
    std::ostringstream again;
    write_curve(again, curve);
    EXPECT_EQ(again.str(), slurp(path));
  }
}

TEST(CliSimulate, TraceRoundTripsAndReplaysTheSimulatorPlan) {
  const auto dir = testing::scratch_dir("trace");
  const auto trace_path = (dir / "t.csv").string();
  ASSERT_EQ(invoke({"simulate", "--preset", "mobilenet-like", "--noise", "0.05", "--mem-noise", "0.1",
                    "--seed", "3", "--out", trace_path})
                .code,
            0);
  const auto trace = read_trace_file(trace_path);
  std::ostringstream rewritten;
  write_trace(rewritten, trace);
  EXPECT_EQ(rewritten.str(), slurp(trace_path));

  auto args = std::vector<std::string>{"plan", "--trace", trace_path};
  args.insert(args.end(), kWorkload.begin(), kWorkload.end());
  const auto from_trace = json::parse(invoke(args).out);
  const auto from_sim = json::parse(
      invoke({"plan", "--simulate", "mobilenet-like", "--noise", "0.05", "--mem-noise", "0.1", "--seed", "3"}).out);
  EXPECT_EQ(from_trace["chosen"], from_sim["chosen"]);
  EXPECT_EQ(from_trace["perf_model"], from_sim["perf_model"]);
  EXPECT_EQ(from_trace["curves"], from_sim["curves"]);
}

TEST(CliConfig, FlagsWinOverConfigFile) {
  const auto dir = testing::scratch_dir("config");
  write_file(dir / "plan.toml", "[plan]\nsimulate = \"alexnet-like\"\nobjective = \"mincost\"\n"
                                "pricing = \"per-gb:0.15\"\nselect-nodes = 16\n");
  const auto from_file = invoke({"--config", (dir / "plan.toml").string(), "plan"});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_EQ(json::parse(from_file.out)["chosen"]["B"], 2048);
  const auto overridden = invoke({"--config", (dir / "plan.toml").string(), "plan", "--objective", "mintime"});
  ASSERT_EQ(overridden.code, 0) << overridden.err;
  EXPECT_EQ(json::parse(overridden.out)["objective"], "mintime");
}

TEST(CliErrors, NoiseFreeMediansVanish) {
  const auto r = invoke({"errors", "--trials", "5", "--noise", "0", "--mem-noise", "0"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream in(r.out);
  std::string line;
  std::getline(in, line);
  int rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    ASSERT_EQ(cells.size(), 6u);
    EXPECT_LE(std::stod(cells[2]), 1e-9) << line;
    ++rows;
  }
  EXPECT_EQ(rows, 4);
}

TEST(CliErrors, RejectsZeroTrials) { EXPECT_EQ(invoke({"errors", "--trials", "0"}).code, kExitInput); }

TEST(CliTrain, StaticUnitScaleMatchesVanilla) {
  const auto dir = testing::scratch_dir("train");
  ASSERT_EQ(invoke({"train", "--mode", "vanilla", "--out", (dir / "v.csv").string()}).code, 0);
  ASSERT_EQ(invoke({"train", "--mode", "static:1", "--out", (dir / "s.csv").string()}).code, 0);
  const auto v = read_csv(dir / "v.csv");
  const auto s = read_csv(dir / "s.csv");
  ASSERT_EQ(v.size(), s.size());
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (std::size_t col : {0, 1, 2, 3}) EXPECT_EQ(v[i][col], s[i][col]);
  }
}

TEST(CliTrain, AgsWithEqualBatchesMatchesVanilla) {
  const auto dir = testing::scratch_dir("train-eq");
  for (const auto& mode : {"vanilla", "ags"}) {
    ASSERT_EQ(invoke({"train", "--mode", mode, "--b-small", "1024", "--sigma", "0", "--epsilon", "1e-30",
                      "--out",
                      (dir / (std::string(mode) + ".csv")).string()})
                  .code,
              0);
  }
  const auto v = read_csv(dir / "vanilla.csv");
  const auto a = read_csv(dir / "ags.csv");
  ASSERT_EQ(v.size(), a.size());
  for (std::size_t i = 1; i < v.size(); ++i) {
    EXPECT_LE(testing::relative_error(std::stod(a[i][1]), std::stod(v[i][1])), 1e-6);
  }
}

TEST(CliTrain, AgsExercisesBothBranches) {
  const auto dir = testing::scratch_dir("train-ags");
  const auto r = invoke({"train", "--mode", "ags", "--out", (dir / "a.csv").string()});
  ASSERT_EQ(r.code, 0);
  const auto summary = json::parse(r.out);
  const auto rows = read_csv(dir / "a.csv");
  double scaled = 0;
  for (std::size_t i = 1; i < rows.size(); ++i) scaled += std::stod(rows[i][4]);
  const double fraction = scaled / static_cast<double>(rows.size() - 1);
  EXPECT_EQ(summary["scaled_fraction"].get<double>(), fraction);
  EXPECT_GT(fraction, 0.0);
  EXPECT_LT(fraction, 1.0);
}

TEST(CliTrain, DivergenceIsAResultNotAFailure) {
  const auto r = invoke({"train", "--mode", "lrs:8", "--curvature", "3"});
  EXPECT_EQ(r.code, 0);
  EXPECT_TRUE(json::parse(r.out)["diverged"].get<bool>());
  EXPECT_EQ(invoke({"train", "--mode", "turbo"}).code, kExitInput);
}

TEST(CliDeterminism, RepeatedRunsAreByteIdentical) {
  const std::vector<std::vector<std::string>> commands{
      {"plan", "--simulate", "resnet50-like", "--noise", "0.05", "--seed", "9", "--strategy", "full"},
      {"errors", "--trials", "40", "--threads", "4"},
      {"train", "--objective-fn", "mlp", "--steps", "100"},
      {"simulate", "--preset", "alexnet-like", "--noise", "0.1"},
  };
  for (const auto& cmd : commands) {
    const auto a = invoke(cmd);
    const auto b = invoke(cmd);
    ASSERT_EQ(a.code, 0) << a.err;
    EXPECT_EQ(a.out, b.out) << cmd.front();
  }
}

TEST(TraceReader, RejectsUnsupportedVersionAndUnits) {
  const std::string cols =
      "node_count,local_batch,step_index,step_time_s,peak_mem_gb,act_mem_gb,batch_mem_gb\n2,32,0,0.1,1,,\n";
  for (const std::string meta : {"# batchplan-trace v2 protocol=ring time=s mem=GB\n",
                                 "# batchplan-trace v1 protocol=ring time=ms mem=GB\n",
                                 "# batchplan-trace protocol=ring\n", "node_count\n"}) {
    std::istringstream in(meta + cols);
    EXPECT_THROW(read_trace(in), Error) << meta;
  }
  std::istringstream ok("# batchplan-trace v1 protocol=ps time=s mem=GB\n" + cols);
  EXPECT_EQ(read_trace(ok).header.protocol, SyncProtocol::ParameterServer);
}

TEST(TraceReader, OomRowsReplayAsOom) {
  std::istringstream in(
      "# batchplan-trace v1 protocol=ring time=s mem=GB\n"
      "node_count,local_batch,step_index,step_time_s,peak_mem_gb,act_mem_gb,batch_mem_gb\n"
      "2,32,0,0.1,1,,\n2,64,0,oom,,,\n");
  const FileTraceSource source(read_trace(in));
  EXPECT_TRUE(source.step(2, 32, 5));
  EXPECT_FALSE(source.step(2, 64, 0));
  EXPECT_THROW(source.step(4, 32, 0), Error);
}

TEST(Pricing, ParsesBothModels) {
  EXPECT_EQ(std::get<PerNodeHourly>(parse_pricing("per-node:2.48")).rate, 2.48);
  EXPECT_EQ(std::get<PerGbHourly>(parse_pricing("per-gb:0.15")).rate, 0.15);
  EXPECT_THROW(parse_pricing("per-gb:"), Error);
  EXPECT_THROW(parse_pricing("per-gb:-1"), Error);
  EXPECT_EQ(pricing_to_string(parse_pricing("per-gb:0.15")), "per-gb:0.15");
}

}  // namespace
}  // namespace batchplan::cli
