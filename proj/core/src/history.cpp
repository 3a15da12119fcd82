#include "flowpilot/history.hpp"

#include <cstdio>

#include "flowpilot/error.hpp"

namespace flowpilot {

// --- RunJob ----------------------------------------------------------------

std::string_view to_string(JobStatus status) {
  switch (status) {
    case JobStatus::queued: return "queued";
    case JobStatus::running: return "running";
    case JobStatus::succeeded: return "succeeded";
    case JobStatus::failed: return "failed";
  }
  return "queued";
}

JobStatus job_status_from_string(std::string_view text) {
  for (auto s : {JobStatus::queued, JobStatus::running, JobStatus::succeeded, JobStatus::failed}) {
    if (to_string(s) == text) return s;
  }
  fail(ErrorCode::PreconditionViolation, "unknown job status " + std::string(text));
}

bool is_terminal(JobStatus status) {
  return status == JobStatus::succeeded || status == JobStatus::failed;
}

void RunJob::transition(JobStatus next) {
  const bool ok = (status == JobStatus::queued && next == JobStatus::running) ||
                  (status == JobStatus::running && is_terminal(next));
  require(ok, "job " + job_id + ": illegal transition " + std::string(to_string(status)) + " -> " +
                  std::string(to_string(next)));
  status = next;
}

std::string make_job_id(int ordinal, const FlowConfig& config) {
  char prefix[16];
  std::snprintf(prefix, sizeof prefix, "%04d-", ordinal);
  return prefix + content_hash(config).substr(0, 8);
}

namespace {

nlohmann::json time_json(const std::optional<std::chrono::system_clock::time_point>& t) {
  if (!t) return nullptr;
  return std::chrono::duration_cast<std::chrono::milliseconds>(t->time_since_epoch()).count();
}

std::optional<std::chrono::system_clock::time_point> time_from_json(const nlohmann::json& j) {
  if (j.is_null()) return std::nullopt;
  return std::chrono::system_clock::time_point(std::chrono::milliseconds(j.get<long long>()));
}

}  // namespace

nlohmann::json to_json(const RunJob& job) {
  auto errors = nlohmann::json::array();
  for (const auto& e : job.errors) errors.push_back(to_json(e));
  return {{"job_id", job.job_id},
          {"ordinal", job.ordinal},
          {"config", to_json(job.config)},
          {"status", std::string(to_string(job.status))},
          {"run_directory", job.run_directory},
          {"started_at_ms", time_json(job.started_at)},
          {"finished_at_ms", time_json(job.finished_at)},
          {"metrics", job.metrics ? to_json(*job.metrics) : nlohmann::json(nullptr)},
          {"errors", errors}};
}

RunJob run_job_from_json(const nlohmann::json& doc) {
  RunJob job;
  job.job_id = doc.at("job_id").get<std::string>();
  job.ordinal = doc.at("ordinal").get<int>();
  job.config = flow_config_from_json(doc.at("config"));
  job.status = job_status_from_string(doc.at("status").get<std::string>());
  job.run_directory = doc.value("run_directory", "");
  job.started_at = time_from_json(doc.value("started_at_ms", nlohmann::json(nullptr)));
  job.finished_at = time_from_json(doc.value("finished_at_ms", nlohmann::json(nullptr)));
  if (doc.contains("metrics") && !doc.at("metrics").is_null())
    job.metrics = metrics_from_json(doc.at("metrics"));
  for (const auto& e : doc.value("errors", nlohmann::json::array())) job.errors.push_back(flow_error_from_json(e));
  return job;
}

// --- FixProposal -----------------------------------------------------------

std::string_view to_string(FixTarget target) {
  return target == FixTarget::flow_config ? "flow_config" : "hdl_source";
}

nlohmann::json to_json(const FixProposal& p) {
  auto changes = nlohmann::json::array();
  for (const auto& c : p.changes)
    changes.push_back({{"key", c.key}, {"old", to_json(c.old_value)}, {"new", to_json(c.new_value)}});
  return {{"target", std::string(to_string(p.target))},
          {"changes", changes},
          {"justification", p.justification},
          {"provenance_chunks", p.provenance_chunks}};
}

FixProposal fix_proposal_from_json(const nlohmann::json& doc) {
  FixProposal p;
  const auto target = doc.at("target").get<std::string>();
  if (target == "flow_config") p.target = FixTarget::flow_config;
  else if (target == "hdl_source") p.target = FixTarget::hdl_source;
  else fail(ErrorCode::PreconditionViolation, "unknown fix target " + target);
  for (const auto& c : doc.at("changes"))
    p.changes.push_back({c.at("key").get<std::string>(), param_value_from_json(c.at("old")),
                         param_value_from_json(c.at("new"))});
  p.justification = doc.value("justification", "");
  p.provenance_chunks = doc.value("provenance_chunks", std::vector<std::string>{});
  return p;
}

// --- OptimizationHistory ---------------------------------------------------

std::string_view to_string(OriginKind kind) {
  switch (kind) {
    case OriginKind::baseline: return "baseline";
    case OriginKind::fix: return "fix";
    case OriginKind::candidate: return "candidate";
  }
  return "baseline";
}

void OptimizationHistory::append(HistoryEntry entry) {
  require(is_terminal(entry.job.status), "history only records finished jobs");
  const std::size_t index = entries_.size();
  if (!baseline_index_ && entry.succeeded()) baseline_index_ = index;
  if (entry.succeeded() && entry.scalar_cost) {
    if (!best_index_ || *entry.scalar_cost < *entries_[*best_index_].scalar_cost) best_index_ = index;
  }
  entries_.push_back(std::move(entry));
}

std::optional<double> OptimizationHistory::best_cost() const {
  if (!best_index_) return std::nullopt;
  return entries_[*best_index_].scalar_cost;
}

std::vector<std::optional<double>> OptimizationHistory::best_so_far() const {
  std::vector<std::optional<double>> out;
  std::optional<double> best;
  for (const auto& e : entries_) {
    if (e.succeeded() && e.scalar_cost && (!best || *e.scalar_cost < *best)) best = e.scalar_cost;
    out.push_back(best);
  }
  return out;
}

nlohmann::json to_json(const HistoryEntry& e) {
  nlohmann::json origin = {{"kind", std::string(to_string(e.origin.kind))},
                           {"round", e.origin.round},
                           {"fix", e.origin.fix ? to_json(*e.origin.fix) : nlohmann::json(nullptr)},
                           {"rationale", e.origin.rationale},
                           {"provenance_chunks", e.origin.provenance_chunks}};
  return {{"job", to_json(e.job)},
          {"issues", to_json(e.issues)},
          {"origin", origin},
          {"scalar_cost", e.scalar_cost ? nlohmann::json(*e.scalar_cost) : nlohmann::json(nullptr)}};
}

HistoryEntry history_entry_from_json(const nlohmann::json& doc) {
  HistoryEntry e;
  e.job = run_job_from_json(doc.at("job"));
  e.issues = issue_set_from_json(doc.at("issues"));
  const auto& o = doc.at("origin");
  const auto kind = o.at("kind").get<std::string>();
  if (kind == "baseline") e.origin.kind = OriginKind::baseline;
  else if (kind == "fix") e.origin.kind = OriginKind::fix;
  else if (kind == "candidate") e.origin.kind = OriginKind::candidate;
  else fail(ErrorCode::PreconditionViolation, "unknown origin kind " + kind);
  e.origin.round = o.value("round", 0);
  if (o.contains("fix") && !o.at("fix").is_null()) e.origin.fix = fix_proposal_from_json(o.at("fix"));
  e.origin.rationale = o.value("rationale", "");
  e.origin.provenance_chunks = o.value("provenance_chunks", std::vector<std::string>{});
  if (doc.contains("scalar_cost") && !doc.at("scalar_cost").is_null())
    e.scalar_cost = doc.at("scalar_cost").get<double>();
  return e;
}

nlohmann::json to_json(const OptimizationHistory& h) {
  auto entries = nlohmann::json::array();
  for (const auto& e : h.entries()) entries.push_back(to_json(e));
  return {{"entries", entries},
          {"best_index", h.best_index() ? nlohmann::json(*h.best_index()) : nlohmann::json(nullptr)},
          {"baseline_index", h.baseline_index() ? nlohmann::json(*h.baseline_index()) : nlohmann::json(nullptr)}};
}

OptimizationHistory history_from_json(const nlohmann::json& doc) {
  OptimizationHistory h;
  for (const auto& e : doc.at("entries")) h.append(history_entry_from_json(e));
  return h;
}

}  // namespace flowpilot
