#pragma once

#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "flowpilot/metrics.hpp"

namespace flowpilot {

enum class GoalPriority { area, delay, power, balanced };

std::string_view to_string(GoalPriority priority);
GoalPriority goal_priority_from_string(std::string_view text);

struct GoalWeights {
  double area = 1.0 / 3.0;
  double delay = 1.0 / 3.0;
  double power = 1.0 / 3.0;

  bool operator==(const GoalWeights&) const = default;
};

/// Fixed weight presets: the favoured metric gets 0.6, the others 0.2 each.
GoalWeights preset_weights(GoalPriority priority);

/// User PPA objective and stopping rules.
struct OptimizationGoal {
  GoalPriority priority = GoalPriority::balanced;
  GoalWeights weights = preset_weights(GoalPriority::balanced);
  int stop_after_runs = 100;
  int stop_after_stale_rounds = 3;

  static OptimizationGoal preset(GoalPriority priority);

  bool operator==(const OptimizationGoal&) const = default;
};

/// Weights non-negative and summing to 1 within 1e-9; stop counts positive.
void validate(const OptimizationGoal& goal);

/// w_area*area/area_base + w_delay*delay/delay_base + w_power*power/power_base.
/// The baseline itself scores exactly 1. Throws DivisionByZeroBaseline.
double scalar_cost(const RunMetrics& metrics, const OptimizationGoal& goal, const RunMetrics& baseline);

nlohmann::json to_json(const OptimizationGoal& goal);
OptimizationGoal goal_from_json(const nlohmann::json& doc);

}  // namespace flowpilot
