#pragma once

#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowpilot/history.hpp"
#include "flowpilot/metrics.hpp"

namespace flowpilot {

struct DeltaRow {
  std::string label;
  PpaDelta delta;
};

struct RatioRow {
  std::string label;
  PpaRatio ratio;
};

/// Baseline vs best entry of a history. Throws PreconditionViolation when
/// the history has no successful run.
DeltaRow history_delta(const std::string& label, const OptimizationHistory& history);

/// Column-aligned text, two decimals, "-" for absent values. Identical input
/// gives byte-identical output.
std::string render_delta_table(const std::vector<DeltaRow>& rows);
std::string render_delta_csv(const std::vector<DeltaRow>& rows);
std::string render_ratio_table(const std::vector<RatioRow>& rows);
std::string render_ratio_csv(const std::vector<RatioRow>& rows);

nlohmann::json to_json(const PpaDelta& delta);
nlohmann::json to_json(const PpaRatio& ratio);

}  // namespace flowpilot
