#include "flowpilot/registry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "flowpilot/data_dir.hpp"
#include "flowpilot/error.hpp"
#include "text_util.hpp"

namespace flowpilot {

std::string render(const ParamValue& value) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, bool>) return v ? "true" : "false";
        else if constexpr (std::is_same_v<T, double>) return text::format_number(v);
        else return v;
      },
      value);
}

nlohmann::json to_json(const ParamValue& value) {
  return std::visit([](const auto& v) { return nlohmann::json(v); }, value);
}

ParamValue param_value_from_json(const nlohmann::json& doc) {
  if (doc.is_boolean()) return doc.get<bool>();
  if (doc.is_number()) return doc.get<double>();
  if (doc.is_string()) return doc.get<std::string>();
  fail(ErrorCode::PreconditionViolation, "parameter value must be bool, number or string: " + doc.dump());
}

bool ParameterSpec::has_tag(std::string_view tag) const {
  return std::find(tags.begin(), tags.end(), tag) != tags.end();
}

ParameterRegistry::ParameterRegistry(std::vector<ParameterSpec> specs) : specs_(std::move(specs)) {
  for (std::size_t i = 0; i < specs_.size(); ++i) {
    if (!by_name_.emplace(specs_[i].name, i).second)
      fail(ErrorCode::InvalidConfig, "duplicate registry parameter " + specs_[i].name);
  }
}

namespace {

ParamType type_from_string(const std::string& s) {
  if (s == "real") return ParamType::real;
  if (s == "integer") return ParamType::integer;
  if (s == "boolean") return ParamType::boolean;
  if (s == "string") return ParamType::string;
  if (s == "choice") return ParamType::choice;
  fail(ErrorCode::InvalidConfig, "unknown parameter type " + s);
}

}  // namespace

ParameterRegistry ParameterRegistry::from_json(const nlohmann::json& doc) {
  std::vector<ParameterSpec> specs;
  for (const auto& p : doc.at("parameters")) {
    ParameterSpec s;
    s.name = p.at("name").get<std::string>();
    s.type = type_from_string(p.at("type").get<std::string>());
    if (p.contains("min")) s.min = p.at("min").get<double>();
    if (p.contains("max")) s.max = p.at("max").get<double>();
    if (p.contains("choices")) s.choices = p.at("choices").get<std::vector<std::string>>();
    s.default_value = param_value_from_json(p.at("default"));
    auto stage = stage_from_string(p.at("stage").get<std::string>());
    if (!stage) fail(ErrorCode::InvalidConfig, "bad stage for " + s.name);
    s.stage = *stage;
    s.tags = p.value("tags", std::vector<std::string>{});
    s.description = p.value("description", "");
    specs.push_back(std::move(s));
  }
  ParameterRegistry registry(std::move(specs));
  for (const auto& s : registry.specs()) registry.coerce(s.name, s.default_value);
  return registry;
}

ParameterRegistry ParameterRegistry::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::NotFound, "cannot open parameter registry " + file.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, file.string() + ": " + e.what());
  }
}

const ParameterRegistry& ParameterRegistry::shipped() {
  static const ParameterRegistry registry = load(data_dir() / "parameters.json");
  return registry;
}

const ParameterSpec* ParameterRegistry::find(std::string_view name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : &specs_[it->second];
}

std::vector<std::string> ParameterRegistry::names_with_tag(std::string_view tag) const {
  std::vector<std::string> out;
  for (const auto& s : specs_) {
    if (s.has_tag(tag)) out.push_back(s.name);
  }
  return out;
}

ParamValue ParameterRegistry::coerce(std::string_view name, const ParamValue& value) const {
  const auto* spec = find(name);
  if (!spec) fail(ErrorCode::UnknownParameter, std::string(name) + " is not a registered parameter");
  const std::string label(name);
  auto out_of_range = [&](const std::string& why) -> ParamValue {
    fail(ErrorCode::ParameterOutOfRange, label + " = " + render(value) + ": " + why);
  };

  switch (spec->type) {
    case ParamType::real:
    case ParamType::integer: {
      std::optional<double> number;
      if (auto d = std::get_if<double>(&value)) number = *d;
      else if (auto s = std::get_if<std::string>(&value)) number = text::parse_double(*s);
      if (!number || !std::isfinite(*number)) return out_of_range("expected a number");
      if (spec->type == ParamType::integer && std::floor(*number) != *number)
        return out_of_range("expected an integer");
      if (spec->min && *number < *spec->min) return out_of_range("below minimum " + text::format_number(*spec->min));
      if (spec->max && *number > *spec->max) return out_of_range("above maximum " + text::format_number(*spec->max));
      return *number;
    }
    case ParamType::boolean: {
      if (auto b = std::get_if<bool>(&value)) return *b;
      if (auto d = std::get_if<double>(&value); d && (*d == 0 || *d == 1)) return *d == 1;
      if (auto s = std::get_if<std::string>(&value)) {
        const auto l = text::to_lower(*s);
        if (l == "true" || l == "1") return true;
        if (l == "false" || l == "0") return false;
      }
      return out_of_range("expected a boolean");
    }
    case ParamType::string: {
      if (auto s = std::get_if<std::string>(&value)) return *s;
      return render(value);
    }
    case ParamType::choice: {
      const auto s = render(value);
      if (std::find(spec->choices.begin(), spec->choices.end(), s) == spec->choices.end())
        return out_of_range("not one of the allowed choices");
      return s;
    }
  }
  return value;
}

std::map<std::string, ParamValue> ParameterRegistry::defaults() const {
  std::map<std::string, ParamValue> out;
  for (const auto& s : specs_) out.emplace(s.name, s.default_value);
  return out;
}

}  // namespace flowpilot
