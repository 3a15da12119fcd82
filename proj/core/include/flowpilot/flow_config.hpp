#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowpilot/registry.hpp"

namespace flowpilot {

/// The parameter map controlling one flow run.
struct FlowConfig {
  std::string design_name;
  std::map<std::string, ParamValue> parameters;
  std::vector<std::string> source_files;
  std::string pdk_id = "sky130A";

  bool operator==(const FlowConfig&) const = default;
};

bool is_identifier(std::string_view name);

/// Throws PreconditionViolation for a bad design name, UnknownParameter or
/// ParameterOutOfRange for bad parameters.
void validate(const FlowConfig& config, const ParameterRegistry& registry);

nlohmann::json to_json(const FlowConfig& config);
FlowConfig flow_config_from_json(const nlohmann::json& doc);

/// Lower-case hex SHA-256 of the canonical JSON form.
std::string content_hash(const FlowConfig& config);

/// The flow's native configuration document: DESIGN_NAME, VERILOG_FILES and
/// every parameter, integers rendered as JSON integers.
nlohmann::json to_flow_json(const FlowConfig& config, const ParameterRegistry& registry);

/// Names whose values differ between the two configurations (either side missing counts).
std::set<std::string> changed_parameters(const FlowConfig& a, const FlowConfig& b);

std::optional<double> numeric_parameter(const FlowConfig& config, std::string_view name);

}  // namespace flowpilot
