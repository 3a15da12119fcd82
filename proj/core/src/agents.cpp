#include "flowpilot/agents.hpp"

#include <algorithm>
#include <fstream>
#include <regex>
#include <sstream>

#include "flowpilot/error.hpp"
#include "text_util.hpp"

namespace flowpilot {

// --- fenced blocks -------------------------------------------------------------

std::vector<FencedBlock> fenced_blocks(std::string_view text) {
  std::vector<FencedBlock> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::optional<FencedBlock> open;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto trimmed = text::trim_copy(line);
    if (trimmed.rfind("```", 0) == 0) {
      if (open) {
        if (!open->body.empty()) open->body.pop_back();
        out.push_back(std::move(*open));
        open.reset();
      } else {
        FencedBlock b;
        auto info = text::trim_copy(std::string_view(trimmed).substr(3));
        b.info = text::to_lower(info.substr(0, info.find_first_of(" \t")));
        open = std::move(b);
      }
      continue;
    }
    if (open) open->body += line + "\n";
  }
  if (open) {
    if (!open->body.empty()) open->body.pop_back();
    out.push_back(std::move(*open));
  }
  return out;
}

std::optional<std::string> find_block(std::string_view text, std::initializer_list<std::string_view> infos) {
  for (const auto& b : fenced_blocks(text)) {
    for (auto i : infos) {
      if (b.info == i) return b.body;
    }
  }
  return std::nullopt;
}

namespace {

std::optional<nlohmann::json> try_parse_json(const std::string& text) {
  try {
    return nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception&) {
    return std::nullopt;
  }
}

/// Non-empty lines with list markers ("- ", "1. ", "* ") removed.
std::vector<std::string> list_lines(const std::string& body) {
  static const std::regex marker(R"(^\s*(?:[-*]|\d+[.)])\s+)");
  std::vector<std::string> out;
  std::istringstream in(body);
  std::string line;
  while (std::getline(in, line)) {
    line = text::trim_copy(std::regex_replace(line, marker, ""));
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

}  // namespace

// --- DesignSpec -------------------------------------------------------------------

void validate(const DesignSpec& spec) {
  if (!is_identifier(spec.name)) fail(ErrorCode::PlanningIncomplete, "design name '" + spec.name + "' is not an identifier");
  if (spec.outputs.empty()) fail(ErrorCode::PlanningIncomplete, "design spec has no outputs");
  for (const auto* ports : {&spec.inputs, &spec.outputs}) {
    for (const auto& p : *ports) {
      if (!is_identifier(p.name)) fail(ErrorCode::PlanningIncomplete, "port name '" + p.name + "' is not an identifier");
      if (p.width_bits < 1) fail(ErrorCode::PlanningIncomplete, "port " + p.name + " has width < 1");
    }
  }
}

namespace {

Port port_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    static const std::regex ranged(R"(^\s*([A-Za-z_][A-Za-z0-9_]*)\s*\[\s*(\d+)\s*:\s*(\d+)\s*\]\s*$)");
    const auto s = j.get<std::string>();
    std::smatch m;
    if (std::regex_match(s, m, ranged)) {
      const int hi = std::stoi(m[2]);
      const int lo = std::stoi(m[3]);
      return {m[1], std::abs(hi - lo) + 1};
    }
    return {text::trim_copy(s), 1};
  }
  return {j.at("name").get<std::string>(), j.value("width", j.value("width_bits", 1))};
}

nlohmann::json ports_json(const std::vector<Port>& ports) {
  auto out = nlohmann::json::array();
  for (const auto& p : ports) out.push_back({{"name", p.name}, {"width", p.width_bits}});
  return out;
}

}  // namespace

nlohmann::json to_json(const DesignSpec& s) {
  auto clar = nlohmann::json::array();
  for (const auto& c : s.clarifications) clar.push_back({{"question", c.question}, {"answer", c.answer}});
  return {{"name", s.name},
          {"description", s.functional_description},
          {"inputs", ports_json(s.inputs)},
          {"outputs", ports_json(s.outputs)},
          {"architecture_notes", s.architecture_notes},
          {"ppa_priority", std::string(to_string(s.ppa_priority))},
          {"clarifications", clar}};
}

DesignSpec design_spec_from_json(const nlohmann::json& doc) {
  DesignSpec s;
  s.name = doc.at("name").get<std::string>();
  s.functional_description = doc.value("description", doc.value("functional_description", std::string()));
  for (const auto& p : doc.value("inputs", nlohmann::json::array())) s.inputs.push_back(port_from_json(p));
  for (const auto& p : doc.value("outputs", nlohmann::json::array())) s.outputs.push_back(port_from_json(p));
  s.architecture_notes = doc.value("architecture_notes", "");
  s.ppa_priority = goal_priority_from_string(doc.value("ppa_priority", "balanced"));
  for (const auto& c : doc.value("clarifications", nlohmann::json::array()))
    s.clarifications.push_back({c.at("question").get<std::string>(), c.at("answer").get<std::string>()});
  return s;
}

ScriptedAnswers::ScriptedAnswers(std::vector<std::string> answers) : answers_(std::move(answers)) {}

ScriptedAnswers ScriptedAnswers::from_file(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::NotFound, "answers file " + file.string() + " not found");
  try {
    return ScriptedAnswers(nlohmann::json::parse(in).get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, "answers file must be a JSON array of strings: " + std::string(e.what()));
  }
}

std::string ScriptedAnswers::answer(const std::string& question) {
  std::lock_guard lock(mutex_);
  asked_.push_back(question);
  if (next_ >= answers_.size()) fail(ErrorCode::AnswerSourceClosed, "no scripted answer left for: " + question);
  return answers_[next_++];
}

std::vector<std::string> ScriptedAnswers::asked() const {
  std::lock_guard lock(mutex_);
  return asked_;
}

namespace {

const char* kPlannerSystem =
    "You are the planning agent of an RTL-to-GDSII flow. Turn the user's hardware request into a precise "
    "design specification. Ask targeted questions when ports, widths, timing or PPA priorities are unclear.";

std::string render_clarifications(const std::vector<Clarification>& c) {
  std::string out;
  for (const auto& qa : c) out += "Q: " + qa.question + "\nA: " + qa.answer + "\n";
  return out.empty() ? "(none)\n" : out;
}

}  // namespace

DesignSpec plan(const std::string& initial_prompt, AnswerSource& answers, Gateway& gateway, const AgentLimits& limits) {
  require(!text::trim_copy(initial_prompt).empty(), "planning needs a non-empty prompt");
  require(limits.planner_rounds >= 1, "planner round cap must be positive");
  std::vector<Clarification> clarifications;
  for (int round = 1; round <= limits.planner_rounds; ++round) {
    GenerationRequest req;
    req.system_text = kPlannerSystem;
    req.tag = "plan";
    req.user_text = "Design request:\n" + initial_prompt + "\n\nClarifications so far:\n" +
                    render_clarifications(clarifications) +
                    "\nEither ask questions in a ```questions block (JSON array of strings), or finish with a "
                    "```spec block: JSON with name, description, inputs and outputs ([{\"name\", \"width\"}]), "
                    "architecture_notes and ppa_priority (area, delay, power or balanced).";
    const auto res = gateway.generate(req);
    if (auto spec_text = find_block(res.text, {"spec"})) {
      DesignSpec spec;
      try {
        spec = design_spec_from_json(nlohmann::json::parse(*spec_text));
      } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::PlanningIncomplete, std::string("unreadable spec block: ") + e.what());
      } catch (const Error& e) {
        fail(ErrorCode::PlanningIncomplete, std::string("invalid spec block: ") + e.what());
      }
      spec.clarifications = clarifications;
      validate(spec);
      return spec;
    }
    if (auto q = find_block(res.text, {"questions"})) {
      std::vector<std::string> questions;
      if (auto j = try_parse_json(*q); j && j->is_array()) {
        for (const auto& item : *j) {
          if (item.is_string()) questions.push_back(item.get<std::string>());
        }
      } else {
        questions = list_lines(*q);
      }
      for (const auto& question : questions) clarifications.push_back({question, answers.answer(question)});
    }
  }
  fail(ErrorCode::PlanningIncomplete,
       "no specification after " + std::to_string(limits.planner_rounds) + " planning rounds");
}

// --- HDL ------------------------------------------------------------------------

nlohmann::json to_json(const HdlArtifact& a) {
  auto files = nlohmann::json::array();
  for (const auto& f : a.source_files) files.push_back({{"path", f.path}, {"text", f.text}});
  return {{"top_module", a.top_module},
          {"source_files", files},
          {"lint_clean", a.lint_clean},
          {"logic_check_notes", a.logic_check_notes},
          {"revision", a.revision}};
}

HdlArtifact hdl_artifact_from_json(const nlohmann::json& doc) {
  HdlArtifact a;
  a.top_module = doc.at("top_module").get<std::string>();
  for (const auto& f : doc.at("source_files"))
    a.source_files.push_back({f.at("path").get<std::string>(), f.at("text").get<std::string>()});
  a.lint_clean = doc.value("lint_clean", false);
  a.logic_check_notes = doc.value("logic_check_notes", "");
  a.revision = doc.value("revision", 0);
  return a;
}

std::vector<std::string> declared_modules(std::string_view verilog) {
  static const std::regex module_re(R"((?:^|[^A-Za-z0-9_$])module\s+([A-Za-z_][A-Za-z0-9_$]*))");
  std::vector<std::string> out;
  const std::string s(verilog);
  for (std::sregex_iterator it(s.begin(), s.end(), module_re), end; it != end; ++it) out.push_back((*it)[1]);
  return out;
}

namespace {

const char* kHdlSystem =
    "You are the Verilog generation agent. Write synthesizable Verilog-2005 only. Put code in ```verilog blocks.";

std::string verilog_block(const std::string& response, const std::string& what) {
  auto code = find_block(response, {"verilog", "systemverilog", "v", "sv"});
  if (!code || text::trim_copy(*code).empty()) fail(ErrorCode::GenerationEmpty, "no Verilog code block for " + what);
  return *code;
}

std::string render_sources(const std::vector<SourceFile>& files) {
  std::string out;
  for (const auto& f : files) out += "// file: " + f.path + "\n```verilog\n" + f.text + "```\n";
  return out;
}

}  // namespace

HdlArtifact generate_hdl(const DesignSpec& spec, Gateway& gateway) {
  validate(spec);
  const std::string spec_text = to_json(spec).dump(2);

  GenerationRequest decompose;
  decompose.system_text = kHdlSystem;
  decompose.tag = "decompose";
  decompose.user_text = "Specification:\n" + spec_text +
                        "\n\nDecompose the design into submodules. Answer with a ```modules block: a JSON array "
                        "of {\"name\", \"purpose\"} objects (empty if the top module needs no submodules).";
  const auto plan_res = gateway.generate(decompose);
  auto block = find_block(plan_res.text, {"modules", "json"});
  if (!block) fail(ErrorCode::GenerationEmpty, "decomposition returned no modules block");

  std::vector<std::pair<std::string, std::string>> submodules;
  auto add_sub = [&](std::string name, std::string purpose) {
    name = text::trim_copy(name);
    if (!is_identifier(name) || name == spec.name) return;
    for (const auto& [n, p] : submodules) {
      if (n == name) return;
    }
    submodules.emplace_back(std::move(name), std::move(purpose));
  };
  if (auto j = try_parse_json(*block); j && j->is_array()) {
    for (const auto& item : *j) {
      if (item.is_string()) add_sub(item.get<std::string>(), "");
      else if (item.is_object() && item.contains("name")) add_sub(item.at("name").get<std::string>(), item.value("purpose", ""));
    }
  } else {
    for (const auto& line : list_lines(*block)) {
      const auto colon = line.find(':');
      add_sub(line.substr(0, colon), colon == std::string::npos ? "" : text::trim_copy(line.substr(colon + 1)));
    }
  }

  HdlArtifact artifact;
  artifact.top_module = spec.name;
  for (const auto& [name, purpose] : submodules) {
    GenerationRequest req;
    req.system_text = kHdlSystem;
    req.tag = "hdl";
    req.user_text = "Specification:\n" + spec_text + "\n\nWrite submodule `" + name + "`" +
                    (purpose.empty() ? std::string() : ": " + purpose) + ". One ```verilog block.";
    artifact.source_files.push_back({name + ".v", verilog_block(gateway.generate(req).text, "submodule " + name)});
  }
  GenerationRequest top;
  top.system_text = kHdlSystem;
  top.tag = "hdl";
  std::string subs;
  for (const auto& [name, purpose] : submodules) subs += " " + name;
  top.user_text = "Specification:\n" + spec_text + "\n\nWrite the top-level module `" + spec.name + "`" +
                  (subs.empty() ? std::string() : " instantiating:" + subs) + ". One ```verilog block.";
  const auto top_code = verilog_block(gateway.generate(top).text, "top module " + spec.name);
  const auto declared = declared_modules(top_code);
  if (std::find(declared.begin(), declared.end(), spec.name) == declared.end())
    fail(ErrorCode::GenerationEmpty, "top-level code does not declare module " + spec.name);
  artifact.source_files.push_back({spec.name + ".v", top_code});
  return artifact;
}

HdlArtifact verify_hdl(HdlArtifact artifact, LintBackend& lint, Gateway& gateway, int max_repairs) {
  require(!artifact.source_files.empty(), "verification needs source files");
  require(max_repairs >= 1, "max_repairs must be positive");
  artifact.lint_clean = false;
  while (true) {
    GenerationRequest check;
    check.system_text = "You are a separate logic-checking agent. Review the Verilog for functional mistakes "
                        "against its intent and list concrete problems, or say it looks correct.";
    check.tag = "logic_check";
    check.user_text = render_sources(artifact.source_files);
    artifact.logic_check_notes = text::trim_copy(gateway.generate(check).text);

    const auto findings = lint.lint(artifact.source_files);
    if (findings.empty()) {
      artifact.lint_clean = true;
      return artifact;
    }
    const auto lint_output = render_findings(findings);
    if (artifact.revision >= max_repairs) throw VerificationExhausted(artifact.revision, lint_output);

    GenerationRequest repair;
    repair.system_text = kHdlSystem;
    repair.tag = "repair";
    repair.user_text = render_sources(artifact.source_files) + "\nLint findings:\n" + lint_output +
                       "\nLogic review:\n" + artifact.logic_check_notes +
                       "\n\nReturn each corrected module in its own ```verilog block.";
    const auto res = gateway.generate(repair);
    for (const auto& b : fenced_blocks(res.text)) {
      if (b.info != "verilog" && b.info != "systemverilog" && b.info != "v" && b.info != "sv") continue;
      const auto mods = declared_modules(b.body);
      if (mods.empty()) continue;
      const std::string path = mods.front() + ".v";
      auto it = std::find_if(artifact.source_files.begin(), artifact.source_files.end(),
                             [&](const SourceFile& f) { return f.path == path; });
      if (it != artifact.source_files.end()) it->text = b.body;
      else artifact.source_files.push_back({path, b.body});
    }
    ++artifact.revision;
  }
}

// --- flow fixes -----------------------------------------------------------------

namespace {

std::string render_issues(const IssueSet& issues) {
  std::string out;
  for (const auto& i : issues.issues) {
    out += "- " + std::string(to_string(i.severity)) + " " + std::string(to_string(i.category)) + " at " +
           i.location + ": " + i.evidence + "\n";
  }
  return out.empty() ? "(none)\n" : out;
}

std::vector<std::string> cited_chunks(const nlohmann::json& j, const std::vector<std::string>& retrieved) {
  std::vector<std::string> out;
  if (!j.is_array()) return out;
  for (const auto& c : j) {
    if (!c.is_string()) continue;
    const auto id = c.get<std::string>();
    if (std::find(retrieved.begin(), retrieved.end(), id) == retrieved.end()) continue;
    if (std::find(out.begin(), out.end(), id) == out.end()) out.push_back(id);
  }
  return out;
}

ParamValue scalar_from_text(const std::string& s) {
  const auto t = text::trim_copy(s);
  if (auto d = text::parse_double(t)) return *d;
  if (t == "true") return true;
  if (t == "false") return false;
  if (t.size() >= 2 && (t.front() == '"' || t.front() == '\'') && t.back() == t.front()) return t.substr(1, t.size() - 2);
  return t;
}

/// (name, value) pairs from {"changes": [...]} / {"changes": {...}} / {NAME: value} / KEY = VALUE lines.
std::vector<std::pair<std::string, ParamValue>> parse_changes(const std::string& body, nlohmann::json& doc_out) {
  std::vector<std::pair<std::string, ParamValue>> out;
  if (auto j = try_parse_json(body)) {
    doc_out = *j;
    const nlohmann::json changes = j->is_object() && j->contains("changes") ? j->at("changes") : *j;
    if (changes.is_array()) {
      for (const auto& c : changes) {
        if (!c.is_object()) fail(ErrorCode::UnparseableProposal, "change entries must be objects");
        std::string name;
        for (const char* k : {"parameter", "key", "name"}) {
          if (c.contains(k)) name = c.at(k).get<std::string>();
        }
        const nlohmann::json* value = nullptr;
        for (const char* k : {"value", "new", "new_value"}) {
          if (c.contains(k)) value = &c.at(k);
        }
        if (name.empty() || !value) fail(ErrorCode::UnparseableProposal, "change entry needs parameter and value");
        out.emplace_back(name, param_value_from_json(*value));
      }
    } else if (changes.is_object()) {
      for (const auto& [k, v] : changes.items()) {
        if (k == "justification" || k == "chunks") continue;
        out.emplace_back(k, param_value_from_json(v));
      }
    } else {
      fail(ErrorCode::UnparseableProposal, "changes must be a list or an object");
    }
    return out;
  }
  doc_out = nlohmann::json::object();
  for (const auto& line : list_lines(body)) {
    if (line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string::npos) eq = line.find(':');
    if (eq == std::string::npos) fail(ErrorCode::UnparseableProposal, "cannot read change line: " + line);
    out.emplace_back(text::trim_copy(line.substr(0, eq)), scalar_from_text(line.substr(eq + 1)));
  }
  return out;
}

FixProposal parse_fix(const std::string& response, const PromptPayload& payload, const FlowConfig& current,
                      const ParameterRegistry& registry) {
  auto block = find_block(response, {"changes", "json"});
  if (!block) fail(ErrorCode::UnparseableProposal, "response has no ```changes block");
  nlohmann::json doc;
  std::vector<std::pair<std::string, ParamValue>> changes;
  try {
    changes = parse_changes(*block, doc);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::UnparseableProposal, e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::PreconditionViolation) fail(ErrorCode::UnparseableProposal, e.what());
    throw;
  }
  FixProposal p;
  p.target = FixTarget::flow_config;
  for (const auto& [name, raw] : changes) {
    const auto value = registry.coerce(name, raw);
    auto it = current.parameters.find(name);
    const ParamValue old = it != current.parameters.end() ? it->second : registry.find(name)->default_value;
    if (old == value) continue;
    p.changes.push_back({name, old, value});
  }
  if (p.changes.empty()) fail(ErrorCode::UnparseableProposal, "proposal changes no parameter");
  if (doc.is_object()) {
    p.justification = doc.value("justification", "");
    if (doc.contains("chunks")) p.provenance_chunks = cited_chunks(doc.at("chunks"), payload.retrieved_ids);
  }
  return p;
}

bool is_proposal_error(ErrorCode c) {
  return c == ErrorCode::UnparseableProposal || c == ErrorCode::UnknownParameter || c == ErrorCode::ParameterOutOfRange;
}

}  // namespace

FixProposal propose_fix(const IssueSet& issues, const PromptPayload& payload, const FlowConfig& current,
                        const ParameterRegistry& registry, Gateway& gateway, const AgentLimits& limits) {
  require(!issues.empty() || !payload.errors_section.empty(), "propose_fix needs issues or flow errors");
  GenerationRequest req;
  req.system_text = "You are the flow-fixing agent for OpenLane. Change only registered configuration parameters.";
  req.tag = "fix";
  req.user_text = payload.text() + "\n## Detected issues\n" + render_issues(issues) +
                  "\nAnswer with a ```changes block holding JSON {\"changes\": [{\"parameter\": NAME, \"value\": V}], "
                  "\"justification\": TEXT, \"chunks\": [ids of the retrieved context you relied on]}.";
  std::optional<Error> last;
  for (int attempt = 0; attempt <= limits.reprompts; ++attempt) {
    const auto res = gateway.generate(req);
    try {
      return parse_fix(res.text, payload, current, registry);
    } catch (const Error& e) {
      if (!is_proposal_error(e.code())) throw;
      last = e;
      req.user_text += "\n\nYour previous answer was rejected: " + std::string(e.what()) +
                       "\nUse only registered parameters with in-range values.";
    }
  }
  throw *last;
}

FlowConfig apply_fix(const FlowConfig& config, const FixProposal& fix) {
  require(fix.target == FixTarget::flow_config, "only flow_config fixes can be applied to a configuration");
  FlowConfig out = config;
  for (const auto& c : fix.changes) out.parameters[c.key] = c.new_value;
  return out;
}

// --- optimization -----------------------------------------------------------------

std::vector<Candidate> propose_optimizations(const PromptPayload& payload, const OptimizationGoal& goal, int k,
                                             const FlowConfig& incumbent, const std::set<std::string>& tried_hashes,
                                             const ParameterRegistry& registry, Gateway& gateway,
                                             const AgentLimits& limits) {
  require(k >= 1, "k must be positive");
  std::vector<std::string> goal_params;
  if (goal.priority != GoalPriority::balanced) goal_params = registry.names_with_tag(to_string(goal.priority));

  GenerationRequest req;
  req.system_text = "You are the PPA optimization agent for OpenLane. Propose distinct configuration variants "
                    "that improve the weighted goal.";
  req.tag = "optimize";
  req.user_text = payload.text() + "\nPropose up to " + std::to_string(k) +
                  " candidates in a ```candidates block: a JSON array of {\"changes\": {NAME: value}, "
                  "\"rationale\": TEXT, \"chunks\": [ids]}. Do not repeat configurations already in the history.";
  for (int attempt = 0; attempt <= limits.reprompts; ++attempt) {
    const auto res = gateway.generate(req);
    std::vector<Candidate> out;
    std::set<std::string> seen = tried_hashes;
    std::size_t rejected = 0;
    std::optional<nlohmann::json> doc;
    if (auto block = find_block(res.text, {"candidates", "json"})) doc = try_parse_json(*block);
    if (doc && doc->is_array()) {
      for (const auto& item : *doc) {
        if (static_cast<int>(out.size()) >= k) break;
        try {
          if (!item.is_object() || !item.contains("changes") || !item.at("changes").is_object())
            fail(ErrorCode::UnparseableProposal, "candidate needs a changes object");
          Candidate c;
          c.config = incumbent;
          for (const auto& [name, v] : item.at("changes").items())
            c.config.parameters[name] = registry.coerce(name, param_value_from_json(v));
          const auto changed = changed_parameters(incumbent, c.config);
          if (changed.empty()) fail(ErrorCode::UnparseableProposal, "candidate equals the incumbent");
          if (!goal_params.empty() &&
              std::none_of(changed.begin(), changed.end(), [&](const std::string& n) {
                return std::find(goal_params.begin(), goal_params.end(), n) != goal_params.end();
              }))
            fail(ErrorCode::UnparseableProposal, "candidate touches no parameter affecting the goal");
          if (!seen.insert(content_hash(c.config)).second)
            fail(ErrorCode::UnparseableProposal, "candidate duplicates a tried configuration");
          c.rationale = item.value("rationale", "");
          if (item.contains("chunks")) c.provenance_chunks = cited_chunks(item.at("chunks"), payload.retrieved_ids);
          out.push_back(std::move(c));
        } catch (const Error& e) {
          if (!is_proposal_error(e.code())) throw;
          ++rejected;
        } catch (const nlohmann::json::exception&) {
          ++rejected;
        }
      }
    }
    if (!out.empty()) return out;
    req.user_text += "\n\nNone of your candidates was usable (" + std::to_string(rejected) +
                     " rejected as invalid, unchanged, off-goal or already tried). Propose new ones.";
  }
  fail(ErrorCode::NoViableCandidates, "optimizer produced no new valid configuration");
}

// --- initial configuration ----------------------------------------------------------

FlowConfig initial_config(const DesignSpec& spec, const ParameterRegistry& registry, const Index* corpus,
                          std::vector<std::string> source_files) {
  FlowConfig c;
  c.design_name = spec.name;
  c.parameters = registry.defaults();
  c.source_files = std::move(source_files);
  if (!corpus) return c;

  const std::string query = spec.name + " " + spec.functional_description + " " + spec.architecture_notes;
  const DocChunk* best = nullptr;
  double best_score = 0;
  for (std::size_t i = 0; i < corpus->size(); ++i) {
    const auto& chunk = corpus->chunks()[i];
    if (chunk.kind != ChunkKind::prior_config) continue;
    const double s = corpus->score(i, query);
    // Chunks are id-sorted, so strict comparison keeps the lowest id on ties.
    if (s > best_score || (best && s == best_score && chunk.reference_count > best->reference_count)) {
      best = &chunk;
      best_score = s;
    }
  }
  if (!best) return c;
  const auto block = find_block(best->body, {"json"});
  if (!block) return c;
  const auto doc = try_parse_json(*block);
  if (!doc || !doc->is_object()) return c;
  for (const auto& [name, v] : doc->items()) {
    try {
      c.parameters[name] = registry.coerce(name, param_value_from_json(v));
    } catch (const Error&) {
      // A stale prior configuration may mention parameters the registry no longer accepts.
    }
  }
  return c;
}

}  // namespace flowpilot
