#pragma once

#include <filesystem>
#include <map>
#include <string>

#include <nlohmann/json.hpp>

#include "flowpilot/flow_config.hpp"
#include "flowpilot/metrics.hpp"
#include "flowpilot/registry.hpp"

namespace flowpilot {

/// Closed-form stand-in for a physical-design flow, used by the simulated
/// backend. With u = FP_CORE_UTIL, d = PL_TARGET_DENSITY, T = CLOCK_PERIOD (ns)
/// and strategy factors (sa, sd):
///
///   nominal = intrinsic_delay * sd
///   p       = clamp((nominal - 1000 T) / nominal, sizing.min, sizing.max)
///   cells   = base_cell_area * sa * (1 + area_gain * p)
///   area    = cells * 100 / u                      (die area)
///   delay   = nominal * (1 - delay_gain * p)
///             + density_penalty * max(0, d - density_knee)
///             + util_penalty * max(0, u - util_knee)
///   power   = area_coeff * area + delay_coeff / delay
///   slack   = 1000 T - delay
///   drc     = ceil((d - drc_threshold) * per_unit) when d > drc_threshold
///
/// p is positive when the clock is tighter than the nominal path, modelling
/// cell upsizing that trades area and power for speed.
struct PpaModel {
  struct Design {
    double base_cell_area_um2 = 20000;
    double intrinsic_delay_ps = 9000;
  };
  struct Strategy {
    double area = 1;
    double delay = 1;
  };

  int version = 1;
  double sizing_min = -0.6;
  double sizing_max = 0.4;
  double area_gain = 0.6;
  double delay_gain = 0.5;
  double density_knee = 0.75;
  double density_penalty_ps = 4000;
  double util_knee_pct = 60;
  double util_penalty_ps_per_pct = 60;
  double power_area_coeff = 0.01;
  double power_delay_coeff = 2e6;
  double hold_slack_ps = 50;
  double drc_density_threshold = 0.85;
  double drc_per_unit = 100;
  std::map<std::string, Strategy> strategies;
  std::map<std::string, Design> designs;

  static PpaModel from_json(const nlohmann::json& doc);
  static PpaModel load(const std::filesystem::path& file);
  /// ppa_model.json from the data directory.
  static const PpaModel& shipped();

  /// Design coefficients by name, falling back to "default".
  const Design& design(const std::string& name) const;

  /// Throws ParameterOutOfRange for out-of-range inputs or an unknown strategy.
  RunMetrics evaluate(const FlowConfig& config, const ParameterRegistry& registry) const;
};

}  // namespace flowpilot
