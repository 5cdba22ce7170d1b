#include "batchplan/cli/report.hpp"

#include <charconv>

#include <fmt/format.h>

#include "batchplan/error.hpp"

namespace batchplan::cli {

namespace {

using nlohmann::ordered_json;

ordered_json configs_json(const ConfigList& configs) {
  ordered_json out = ordered_json::array();
  for (const auto& [n, b] : configs) out.push_back({{"N", n}, {"b", b}});
  return out;
}

}  // namespace

std::string pricing_to_string(const PricingModel& pricing) {
  if (const auto* p = std::get_if<PerNodeHourly>(&pricing)) return fmt::format("per-node:{}", p->rate);
  return fmt::format("per-gb:{}", std::get<PerGbHourly>(pricing).rate);
}

PricingModel parse_pricing(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) {
    throw Error(ErrorKind::InvalidInput, "pricing must look like per-node:RATE or per-gb:RATE");
  }
  const std::string kind = text.substr(0, colon);
  const std::string rate_text = text.substr(colon + 1);
  double rate = 0.0;
  const auto [ptr, ec] = std::from_chars(rate_text.data(), rate_text.data() + rate_text.size(), rate);
  if (rate_text.empty() || ec != std::errc{} || ptr != rate_text.data() + rate_text.size()) {
    throw Error(ErrorKind::InvalidInput, fmt::format("invalid pricing rate '{}'", rate_text));
  }
  PricingModel pricing;
  if (kind == "per-node") {
    pricing = PerNodeHourly{rate};
  } else if (kind == "per-gb") {
    pricing = PerGbHourly{rate};
  } else {
    throw Error(ErrorKind::InvalidInput, fmt::format("unknown pricing model '{}'", kind));
  }
  validate_pricing(pricing);
  return pricing;
}

nlohmann::ordered_json plan_report(const Plan& plan, const PricingModel& pricing,
                                   const std::string& source) {
  ordered_json r;
  r["schema"] = kPlanSchema;
  r["source"] = source;
  r["objective"] = std::string(to_string(plan.objective));
  r["strategy"] = std::string(to_string(plan.strategy));
  r["pricing"] = pricing_to_string(pricing);
  r["chosen"] = {
      {"N", plan.chosen.cluster.node_count},
      {"b", plan.chosen.local_batch},
      {"B", plan.chosen.global_batch},
      {"protocol", std::string(to_string(plan.chosen.cluster.sync_protocol))},
  };
  r["predicted_time_s"] = plan.predicted_time;
  r["predicted_cost"] = plan.predicted_cost;

  const auto& pm = plan.perf_model;
  r["perf_model"] = {{"alpha", pm.alpha},
                     {"beta", pm.beta},
                     {"gamma", pm.gamma},
                     {"protocol", std::string(to_string(pm.protocol))},
                     {"fit_residual", pm.fit_residual}};
  const auto& mm = plan.mem_model;
  r["mem_model"] = {{"m_param", mm.m_param},
                    {"m_grad", mm.m_grad},
                    {"m_opt", mm.m_opt},
                    {"act_slope", mm.act_slope},
                    {"act_intercept", mm.act_intercept},
                    {"batch_slope", mm.batch_slope},
                    {"batch_intercept", mm.batch_intercept},
                    {"device_capacity", mm.device_capacity},
                    {"safety_factor", mm.safety_factor}};
  r["memory_batch_bound"] = plan.memory_batch_bound;
  r["batch_bound"] = plan.batch_bound;
  r["oom_probes"] = plan.oom_probes;
  r["memory_configs"] = configs_json(plan.memory_configs);
  r["profiled_configs"] = configs_json(plan.profiled_configs);

  ordered_json curves = ordered_json::array();
  for (const auto& [n, curve] : plan.curves) {
    ordered_json c;
    c["N"] = n;
    if (const auto it = plan.knees.find(n); it != plan.knees.end()) {
      c["knee"] = {{"b", it->second.local_batch}, {"B", it->second.global_batch}, {"weak", it->second.weak}};
    }
    c["excluded_batches"] = curve.excluded_batches;
    ordered_json pts = ordered_json::array();
    for (const auto& p : curve.points) {
      pts.push_back({{"B", p.global_batch},
                     {"b", p.local_batch},
                     {"T_pred", p.time},
                     {"C_pred", p.cost},
                     {"mem_gb", p.memory_per_node}});
    }
    c["points"] = std::move(pts);
    curves.push_back(std::move(c));
  }
  r["curves"] = std::move(curves);
  return r;
}

nlohmann::ordered_json trajectory_summary(const TrajectorySummary& summary) {
  return {{"final_f", summary.final_f},
          {"scaled_fraction", summary.scaled_fraction},
          {"diverged", summary.diverged},
          {"steps_completed", summary.steps_completed}};
}

}  // namespace batchplan::cli
