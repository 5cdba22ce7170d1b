#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "batchplan/ags.hpp"
#include "batchplan/planner.hpp"

namespace batchplan::cli {

inline constexpr const char* kPlanSchema = "batchplan.plan/1";

/// Key order is fixed so reports diff cleanly.
nlohmann::ordered_json plan_report(const Plan& plan, const PricingModel& pricing,
                                   const std::string& source);

nlohmann::ordered_json trajectory_summary(const TrajectorySummary& summary);

std::string pricing_to_string(const PricingModel& pricing);
/// "per-node:2.48" or "per-gb:0.15"
PricingModel parse_pricing(const std::string& text);

}  // namespace batchplan::cli
