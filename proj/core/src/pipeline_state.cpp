#include "flowpilot/pipeline_state.hpp"

#include "flowpilot/error.hpp"

namespace flowpilot {

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::planning: return "planning";
    case Phase::generating: return "generating";
    case Phase::verifying: return "verifying";
    case Phase::baselining: return "baselining";
    case Phase::optimizing: return "optimizing";
    case Phase::done: return "done";
    case Phase::aborted: return "aborted";
  }
  return "planning";
}

Phase phase_from_string(std::string_view text) {
  for (auto p : {Phase::planning, Phase::generating, Phase::verifying, Phase::baselining, Phase::optimizing,
                 Phase::done, Phase::aborted}) {
    if (to_string(p) == text) return p;
  }
  fail(ErrorCode::PreconditionViolation, "unknown phase " + std::string(text));
}

bool is_terminal(Phase phase) { return phase == Phase::done || phase == Phase::aborted; }

bool phase_transition_allowed(Phase from, Phase to) {
  if (is_terminal(from)) return false;
  if (to == Phase::aborted) return true;
  switch (from) {
    case Phase::planning: return to == Phase::generating;
    case Phase::generating: return to == Phase::verifying;
    case Phase::verifying: return to == Phase::baselining || to == Phase::generating;
    case Phase::baselining: return to == Phase::optimizing || to == Phase::done;
    case Phase::optimizing: return to == Phase::optimizing || to == Phase::done;
    default: return false;
  }
}

void PipelineState::transition(Phase next) {
  require(phase_transition_allowed(phase, next),
          "illegal phase transition " + std::string(to_string(phase)) + " -> " + std::string(to_string(next)));
  phase = next;
}

nlohmann::json to_json(const PipelineState& s) {
  nlohmann::json cursor = nlohmann::json::object();
  for (const auto& [tag, n] : s.llm_cursor) cursor[tag] = n;
  return {{"schema_version", kStateSchemaVersion},
          {"design_id", s.design_id},
          {"prompt", s.prompt},
          {"goal", to_json(s.goal)},
          {"phase", std::string(to_string(s.phase))},
          {"design", s.design ? to_json(*s.design) : nlohmann::json(nullptr)},
          {"hdl", s.hdl ? to_json(*s.hdl) : nlohmann::json(nullptr)},
          {"incumbent_config", s.incumbent_config ? to_json(*s.incumbent_config) : nlohmann::json(nullptr)},
          {"history", to_json(s.history)},
          {"cost_ledger", to_json(s.cost_ledger)},
          {"round", s.round},
          {"stale_rounds", s.stale_rounds},
          {"baseline_attempts", s.baseline_attempts},
          {"pending_fix", s.pending_fix ? to_json(*s.pending_fix) : nlohmann::json(nullptr)},
          {"abort_code", s.abort_code},
          {"abort_cause", s.abort_cause},
          {"promoted", s.promoted},
          {"llm_cursor", cursor},
          {"snapshot_seq", s.snapshot_seq}};
}

PipelineState pipeline_state_from_json(const nlohmann::json& doc) {
  const int version = doc.value("schema_version", 0);
  if (version != kStateSchemaVersion)
    fail(ErrorCode::InvalidConfig, "unsupported state schema version " + std::to_string(version));
  auto present = [&](const char* key) { return doc.contains(key) && !doc.at(key).is_null(); };
  PipelineState s;
  s.design_id = doc.at("design_id").get<std::string>();
  s.prompt = doc.value("prompt", "");
  s.goal = goal_from_json(doc.at("goal"));
  s.phase = phase_from_string(doc.at("phase").get<std::string>());
  if (present("design")) s.design = design_spec_from_json(doc.at("design"));
  if (present("hdl")) s.hdl = hdl_artifact_from_json(doc.at("hdl"));
  if (present("incumbent_config")) s.incumbent_config = flow_config_from_json(doc.at("incumbent_config"));
  s.history = history_from_json(doc.at("history"));
  s.cost_ledger = cost_summary_from_json(doc.at("cost_ledger"));
  s.round = doc.value("round", 0);
  s.stale_rounds = doc.value("stale_rounds", 0);
  s.baseline_attempts = doc.value("baseline_attempts", 0);
  if (present("pending_fix")) s.pending_fix = fix_proposal_from_json(doc.at("pending_fix"));
  s.abort_code = doc.value("abort_code", "");
  s.abort_cause = doc.value("abort_cause", "");
  s.promoted = doc.value("promoted", false);
  const auto cursor = doc.value("llm_cursor", nlohmann::json::object());
  for (const auto& [tag, n] : cursor.items()) s.llm_cursor[tag] = n.get<int>();
  s.snapshot_seq = doc.value("snapshot_seq", 0);
  return s;
}

nlohmann::json to_json(const PipelineEvent& e) {
  return {{"schema_version", kEventSchemaVersion},
          {"seq", e.seq},
          {"design_id", e.design_id},
          {"type", e.type},
          {"time_ms", e.time_ms},
          {"data", e.data}};
}

PipelineEvent pipeline_event_from_json(const nlohmann::json& doc) {
  PipelineEvent e;
  e.seq = doc.at("seq").get<std::uint64_t>();
  e.design_id = doc.at("design_id").get<std::string>();
  e.type = doc.at("type").get<std::string>();
  e.time_ms = doc.value("time_ms", std::int64_t{0});
  e.data = doc.value("data", nlohmann::json::object());
  return e;
}

nlohmann::json job_summary(const RunJob& job, const std::optional<double>& scalar_cost) {
  nlohmann::json j = {{"job_id", job.job_id},
                      {"ordinal", job.ordinal},
                      {"status", std::string(to_string(job.status))},
                      {"run_directory", job.run_directory}};
  if (job.metrics) {
    const auto& m = *job.metrics;
    auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
    j["area_um2"] = opt(m.area_um2);
    j["delay_ps"] = opt(m.critical_path_delay_ps);
    j["power_uw"] = opt(m.power_uw);
    j["setup_slack_ps"] = opt(m.worst_setup_slack_ps);
  }
  if (!job.errors.empty()) {
    j["failed_stage"] = std::string(to_string(job.errors.front().stage));
    j["error_code"] = job.errors.front().code;
  }
  j["scalar_cost"] = scalar_cost ? nlohmann::json(*scalar_cost) : nlohmann::json(nullptr);
  return j;
}

}  // namespace flowpilot
