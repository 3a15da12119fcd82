#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "flowpilot/metrics.hpp"

namespace flowpilot {

/// A flow parameter value. Integer-typed parameters are stored as doubles
/// holding integral values.
using ParamValue = std::variant<bool, double, std::string>;

std::string render(const ParamValue& value);
nlohmann::json to_json(const ParamValue& value);
ParamValue param_value_from_json(const nlohmann::json& doc);

enum class ParamType { real, integer, boolean, string, choice };

struct ParameterSpec {
  std::string name;
  ParamType type = ParamType::real;
  std::optional<double> min;
  std::optional<double> max;
  std::vector<std::string> choices;
  ParamValue default_value;
  Stage stage = Stage::synthesis;
  // PPA affinity: any of area, delay, power, timing, hold, routing, drc, lvs.
  std::vector<std::string> tags;
  std::string description;

  bool has_tag(std::string_view tag) const;
};

/// The known-parameter registry: names, types, ranges, stages and affinities
/// of the flow parameters the agents may touch.
class ParameterRegistry {
 public:
  ParameterRegistry() = default;
  explicit ParameterRegistry(std::vector<ParameterSpec> specs);

  static ParameterRegistry from_json(const nlohmann::json& doc);
  static ParameterRegistry load(const std::filesystem::path& file);
  /// The registry shipped in the data directory (parameters.json).
  static const ParameterRegistry& shipped();

  const ParameterSpec* find(std::string_view name) const;
  bool contains(std::string_view name) const { return find(name) != nullptr; }
  const std::vector<ParameterSpec>& specs() const { return specs_; }
  std::vector<std::string> names_with_tag(std::string_view tag) const;

  /// Checks membership and range and normalizes the representation
  /// (e.g. "12" for a real parameter becomes 12.0).
  /// Throws Error{UnknownParameter} or Error{ParameterOutOfRange}.
  ParamValue coerce(std::string_view name, const ParamValue& value) const;

  std::map<std::string, ParamValue> defaults() const;

 private:
  std::vector<ParameterSpec> specs_;
  std::map<std::string, std::size_t, std::less<>> by_name_;
};

}  // namespace flowpilot
