#include "flowpilot/flow_config.hpp"

#include <cctype>
#include <cmath>

#include <openssl/evp.h>

#include "flowpilot/error.hpp"

namespace flowpilot {

bool is_identifier(std::string_view name) {
  if (name.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(name[0])) || name[0] == '_')) return false;
  for (unsigned char c : name) {
    if (!(std::isalnum(c) || c == '_')) return false;
  }
  return true;
}

void validate(const FlowConfig& config, const ParameterRegistry& registry) {
  require(is_identifier(config.design_name),
          "design name '" + config.design_name + "' is not a valid identifier");
  for (const auto& [name, value] : config.parameters) registry.coerce(name, value);
}

nlohmann::json to_json(const FlowConfig& config) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, value] : config.parameters) params[name] = to_json(value);
  return {{"design_name", config.design_name},
          {"parameters", params},
          {"source_files", config.source_files},
          {"pdk_id", config.pdk_id}};
}

FlowConfig flow_config_from_json(const nlohmann::json& doc) {
  FlowConfig c;
  c.design_name = doc.at("design_name").get<std::string>();
  for (const auto& [name, value] : doc.at("parameters").items())
    c.parameters.emplace(name, param_value_from_json(value));
  c.source_files = doc.value("source_files", std::vector<std::string>{});
  c.pdk_id = doc.value("pdk_id", std::string("sky130A"));
  return c;
}

std::string content_hash(const FlowConfig& config) {
  // nlohmann::json objects are key-sorted, so dump() is canonical.
  const auto canonical = to_json(config).dump();
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_Digest(canonical.data(), canonical.size(), digest, &length, EVP_sha256(), nullptr);
  static const char* hex = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

nlohmann::json to_flow_json(const FlowConfig& config, const ParameterRegistry& registry) {
  nlohmann::json doc = nlohmann::json::object();
  doc["DESIGN_NAME"] = config.design_name;
  doc["VERILOG_FILES"] = config.source_files;
  doc["PDK"] = config.pdk_id;
  for (const auto& [name, value] : config.parameters) {
    const auto* spec = registry.find(name);
    if (spec && spec->type == ParamType::integer && std::holds_alternative<double>(value)) {
      doc[name] = static_cast<long long>(std::llround(std::get<double>(value)));
    } else {
      doc[name] = to_json(value);
    }
  }
  return doc;
}

std::set<std::string> changed_parameters(const FlowConfig& a, const FlowConfig& b) {
  std::set<std::string> out;
  for (const auto& [name, value] : a.parameters) {
    auto it = b.parameters.find(name);
    if (it == b.parameters.end() || it->second != value) out.insert(name);
  }
  for (const auto& [name, value] : b.parameters) {
    if (!a.parameters.count(name)) out.insert(name);
  }
  return out;
}

std::optional<double> numeric_parameter(const FlowConfig& config, std::string_view name) {
  auto it = config.parameters.find(std::string(name));
  if (it == config.parameters.end()) return std::nullopt;
  if (auto d = std::get_if<double>(&it->second)) return *d;
  return std::nullopt;
}

}  // namespace flowpilot
