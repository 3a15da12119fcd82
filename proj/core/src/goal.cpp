#include "flowpilot/goal.hpp"

#include <cmath>

#include "flowpilot/error.hpp"

namespace flowpilot {

std::string_view to_string(GoalPriority priority) {
  switch (priority) {
    case GoalPriority::area: return "area";
    case GoalPriority::delay: return "delay";
    case GoalPriority::power: return "power";
    case GoalPriority::balanced: return "balanced";
  }
  return "balanced";
}

GoalPriority goal_priority_from_string(std::string_view text) {
  for (auto p : {GoalPriority::area, GoalPriority::delay, GoalPriority::power, GoalPriority::balanced}) {
    if (to_string(p) == text) return p;
  }
  fail(ErrorCode::PreconditionViolation,
       "unknown goal priority '" + std::string(text) + "' (expected area|delay|power|balanced)");
}

GoalWeights preset_weights(GoalPriority priority) {
  switch (priority) {
    case GoalPriority::area: return {0.6, 0.2, 0.2};
    case GoalPriority::delay: return {0.2, 0.6, 0.2};
    case GoalPriority::power: return {0.2, 0.2, 0.6};
    case GoalPriority::balanced: break;
  }
  return {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
}

OptimizationGoal OptimizationGoal::preset(GoalPriority priority) {
  OptimizationGoal g;
  g.priority = priority;
  g.weights = preset_weights(priority);
  return g;
}

void validate(const OptimizationGoal& goal) {
  const auto& w = goal.weights;
  require(w.area >= 0 && w.delay >= 0 && w.power >= 0, "goal weights must be non-negative");
  require(std::abs(w.area + w.delay + w.power - 1.0) <= 1e-9, "goal weights must sum to 1");
  require(goal.stop_after_runs > 0, "stop_after_runs must be positive");
  require(goal.stop_after_stale_rounds > 0, "stop_after_stale_rounds must be positive");
}

namespace {

double normalized(const std::optional<double>& value, const std::optional<double>& base, const char* name) {
  if (!base || *base == 0) fail(ErrorCode::DivisionByZeroBaseline, std::string("baseline ") + name + " missing or 0");
  if (!value) fail(ErrorCode::PreconditionViolation, std::string(name) + " missing");
  return *value / *base;
}

}  // namespace

double scalar_cost(const RunMetrics& m, const OptimizationGoal& goal, const RunMetrics& baseline) {
  const auto& w = goal.weights;
  return w.area * normalized(m.area_um2, baseline.area_um2, "area") +
         w.delay * normalized(m.critical_path_delay_ps, baseline.critical_path_delay_ps, "delay") +
         w.power * normalized(m.power_uw, baseline.power_uw, "power");
}

nlohmann::json to_json(const OptimizationGoal& g) {
  return {{"priority", std::string(to_string(g.priority))},
          {"weights", {{"area", g.weights.area}, {"delay", g.weights.delay}, {"power", g.weights.power}}},
          {"stop_after_runs", g.stop_after_runs},
          {"stop_after_stale_rounds", g.stop_after_stale_rounds}};
}

OptimizationGoal goal_from_json(const nlohmann::json& doc) {
  OptimizationGoal g = OptimizationGoal::preset(
      goal_priority_from_string(doc.value("priority", std::string("balanced"))));
  if (doc.contains("weights")) {
    const auto& w = doc.at("weights");
    g.weights = {w.at("area").get<double>(), w.at("delay").get<double>(), w.at("power").get<double>()};
  }
  g.stop_after_runs = doc.value("stop_after_runs", g.stop_after_runs);
  g.stop_after_stale_rounds = doc.value("stop_after_stale_rounds", g.stop_after_stale_rounds);
  validate(g);
  return g;
}

}  // namespace flowpilot
