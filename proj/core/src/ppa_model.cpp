#include "flowpilot/ppa_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "flowpilot/data_dir.hpp"
#include "flowpilot/error.hpp"

namespace flowpilot {

PpaModel PpaModel::from_json(const nlohmann::json& doc) {
  PpaModel m;
  try {
    m.version = doc.at("version").get<int>();
    const auto& s = doc.at("sizing");
    m.sizing_min = s.at("min").get<double>();
    m.sizing_max = s.at("max").get<double>();
    m.area_gain = s.at("area_gain").get<double>();
    m.delay_gain = s.at("delay_gain").get<double>();
    m.density_knee = doc.at("density").at("knee").get<double>();
    m.density_penalty_ps = doc.at("density").at("penalty_ps_per_unit").get<double>();
    m.util_knee_pct = doc.at("utilization").at("knee_pct").get<double>();
    m.util_penalty_ps_per_pct = doc.at("utilization").at("penalty_ps_per_pct").get<double>();
    m.power_area_coeff = doc.at("power").at("area_coeff_uw_per_um2").get<double>();
    m.power_delay_coeff = doc.at("power").at("delay_coeff_uw_ps").get<double>();
    m.hold_slack_ps = doc.at("hold_slack_ps").get<double>();
    m.drc_density_threshold = doc.at("drc").at("density_threshold").get<double>();
    m.drc_per_unit = doc.at("drc").at("per_unit").get<double>();
    for (const auto& [name, v] : doc.at("strategies").items())
      m.strategies[name] = {v.at("area").get<double>(), v.at("delay").get<double>()};
    for (const auto& [name, v] : doc.at("designs").items())
      m.designs[name] = {v.at("base_cell_area_um2").get<double>(), v.at("intrinsic_delay_ps").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, std::string("bad PPA model: ") + e.what());
  }
  if (!m.designs.count("default")) fail(ErrorCode::InvalidConfig, "PPA model needs a \"default\" design");
  return m;
}

PpaModel PpaModel::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::NotFound, "cannot open PPA model " + file.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorCode::InvalidConfig, file.string() + ": " + e.what());
  }
}

const PpaModel& PpaModel::shipped() {
  static const PpaModel model = load(data_dir() / "ppa_model.json");
  return model;
}

const PpaModel::Design& PpaModel::design(const std::string& name) const {
  auto it = designs.find(name);
  return it != designs.end() ? it->second : designs.at("default");
}

namespace {

double number(const FlowConfig& config, const ParameterRegistry& registry, const char* name) {
  auto it = config.parameters.find(name);
  const ParamValue raw = it != config.parameters.end() ? it->second : registry.find(name)->default_value;
  return std::get<double>(registry.coerce(name, raw));
}

}  // namespace

RunMetrics PpaModel::evaluate(const FlowConfig& config, const ParameterRegistry& registry) const {
  const double u = number(config, registry, "FP_CORE_UTIL");
  const double d = number(config, registry, "PL_TARGET_DENSITY");
  const double period_ps = number(config, registry, "CLOCK_PERIOD") * 1000.0;
  const double aspect = number(config, registry, "FP_ASPECT_RATIO");
  std::string strategy_name = "AREA 0";
  if (auto it = config.parameters.find("SYNTH_STRATEGY"); it != config.parameters.end())
    strategy_name = render(it->second);
  auto st = strategies.find(strategy_name);
  if (st == strategies.end()) fail(ErrorCode::ParameterOutOfRange, "SYNTH_STRATEGY '" + strategy_name + "' has no model entry");

  const auto& des = design(config.design_name);
  const double nominal = des.intrinsic_delay_ps * st->second.delay;
  const double p = std::clamp((nominal - period_ps) / nominal, sizing_min, sizing_max);
  const double cells = des.base_cell_area_um2 * st->second.area * (1.0 + area_gain * p);
  const double area = cells * 100.0 / u;
  const double delay = nominal * (1.0 - delay_gain * p) + density_penalty_ps * std::max(0.0, d - density_knee) +
                       util_penalty_ps_per_pct * std::max(0.0, u - util_knee_pct);

  RunMetrics m;
  m.design_name = config.design_name;
  m.area_um2 = area;
  m.area_source = AreaSource::die;
  // height / width = aspect ratio
  m.die_width_um = std::sqrt(area / aspect);
  m.die_height_um = area / *m.die_width_um;
  m.critical_path_delay_ps = delay;
  m.clock_period_ps = period_ps;
  m.worst_setup_slack_ps = period_ps - delay;
  m.worst_hold_slack_ps = hold_slack_ps;
  m.power_uw = power_area_coeff * area + power_delay_coeff / delay;
  m.placement_utilization_pct = u;
  m.drc_violation_count =
      d > drc_density_threshold ? static_cast<std::int64_t>(std::ceil((d - drc_density_threshold) * drc_per_unit - 1e-9)) : 0;
  m.lvs_error_count = 0;
  return m;
}

}  // namespace flowpilot
