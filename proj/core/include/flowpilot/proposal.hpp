#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowpilot/registry.hpp"

namespace flowpilot {

enum class FixTarget { flow_config, hdl_source };

std::string_view to_string(FixTarget target);

struct ProposedChange {
  std::string key;  // parameter name, or file path for hdl_source
  ParamValue old_value;
  ParamValue new_value;

  bool operator==(const ProposedChange&) const = default;
};

/// A validated change list produced by the flow-fixer agent.
struct FixProposal {
  FixTarget target = FixTarget::flow_config;
  std::vector<ProposedChange> changes;
  std::string justification;
  std::vector<std::string> provenance_chunks;

  bool operator==(const FixProposal&) const = default;
};

nlohmann::json to_json(const FixProposal& proposal);
FixProposal fix_proposal_from_json(const nlohmann::json& doc);

}  // namespace flowpilot
