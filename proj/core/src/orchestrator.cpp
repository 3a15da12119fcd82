#include "flowpilot/orchestrator.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "flowpilot/error.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace flowpilot {

std::string default_design_id(const std::string& prompt) {
  // FNV-1a: stable across platforms and runs.
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : prompt) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "design-%08x", static_cast<unsigned>(h >> 32));
  return buf;
}

namespace {

class ClosedAnswers : public AnswerSource {
 public:
  std::string answer(const std::string& question) override {
    fail(ErrorCode::AnswerSourceClosed, "no answer source for question: " + question);
  }
};

/// Forwards to the real source and records question/answer events.
class EventingAnswers : public AnswerSource {
 public:
  EventingAnswers(AnswerSource& inner, std::function<void(const std::string&, nlohmann::json)> emit)
      : inner_(inner), emit_(std::move(emit)) {}

  std::string answer(const std::string& question) override {
    const int id = ++count_;
    emit_("question", {{"question_id", id}, {"question", question}});
    auto a = inner_.answer(question);
    emit_("answer", {{"question_id", id}, {"answer", a}});
    return a;
  }

 private:
  AnswerSource& inner_;
  std::function<void(const std::string&, nlohmann::json)> emit_;
  int count_ = 0;
};

}  // namespace

Orchestrator::Orchestrator(BackendSet backends, StateStore& store, PipelineOptions options)
    : backends_(std::move(backends)), store_(store), options_(std::move(options)),
      gateway_(backends_.provider, options_.retry) {
  require(backends_.flow != nullptr, "orchestrator needs a flow backend");
  require(backends_.lint != nullptr, "orchestrator needs a lint backend");
  require(backends_.registry != nullptr, "orchestrator needs a parameter registry");
  require(options_.parallelism >= 1, "parallelism must be positive");
  require(options_.max_fix_attempts >= 0, "max_fix_attempts must be non-negative");
}

// --- plumbing ------------------------------------------------------------------------

void Orchestrator::emit(const PipelineState& state, const std::string& type, nlohmann::json data) {
  auto e = store_.append_event(state.design_id, type, std::move(data));
  if (options_.on_event) options_.on_event(e);
}

void Orchestrator::set_phase(PipelineState& state, Phase next) {
  state.transition(next);
  emit(state, "phase", {{"phase", std::string(to_string(next))}});
}

void Orchestrator::checkpoint(PipelineState& state) {
  state.cost_ledger = gateway_.ledger();
  state.llm_cursor = gateway_.provider().cursor();
  ++state.snapshot_seq;
  store_.write_snapshot(state);
  if (options_.interrupt_after_snapshot && options_.interrupt_after_snapshot(state)) throw Interrupted{};
}

void Orchestrator::abort(PipelineState& state, const std::string& code, const std::string& cause) {
  if (is_terminal(state.phase)) return;
  state.abort_code = code;
  state.abort_cause = cause;
  state.transition(Phase::aborted);
  emit(state, "phase", {{"phase", "aborted"}, {"code", code}, {"cause", cause}});
}

std::vector<RunJob> Orchestrator::launch(PipelineState& state, const std::vector<FlowConfig>& configs, int parallelism) {
  auto jobs = plan_jobs(configs, store_.runs_root(state.design_id), static_cast<int>(state.history.size()));
  ParallelOptions po;
  po.timeout = options_.flow_timeout;
  po.stop = options_.stop;
  po.on_update = [&](const RunJob& job) { emit(state, "job", job_summary(job)); };
  return run_parallel(*backends_.flow, std::move(jobs), parallelism, *backends_.registry, po);
}

PromptPayload Orchestrator::payload_for(const PipelineState& state, const HistoryEntry& entry, const IssueSet& issues,
                                        const OptimizationGoal* goal) const {
  const auto& config = *state.incumbent_config;
  const auto queries = formulate_queries(issues, config, goal);
  RetrievedContext retrieved;
  retrieved.per_query_depth = options_.retrieval_depth;
  if (backends_.corpus && !queries.empty()) retrieved = retrieve(backends_.corpus, queries, options_.retrieval_depth);
  RunMetrics metrics = entry.job.metrics.value_or(RunMetrics{});
  if (metrics.design_name.empty()) metrics.design_name = config.design_name;
  return assemble_prompt(metrics, entry.job.errors, state.history, config, retrieved, goal, options_.prompt_budget);
}

std::optional<double> Orchestrator::cost_of(const PipelineState& state, const RunJob& job,
                                            const OptimizationGoal& goal) const {
  if (job.status != JobStatus::succeeded || !job.metrics) return std::nullopt;
  const auto b = state.history.baseline_index();
  const RunMetrics& baseline = b ? *state.history.entries()[*b].job.metrics : *job.metrics;
  try {
    return scalar_cost(*job.metrics, goal, baseline);
  } catch (const Error&) {
    return std::nullopt;
  }
}

void Orchestrator::clear_orphan_runs(const PipelineState& state) {
  std::set<std::string> known;
  for (const auto& e : state.history.entries()) known.insert(fs::weakly_canonical(e.job.run_directory).string());
  std::error_code ec;
  const auto root = store_.runs_root(state.design_id);
  for (const auto& design_dir : fs::directory_iterator(root, ec)) {
    if (!design_dir.is_directory()) continue;
    for (const auto& run : fs::directory_iterator(design_dir.path())) {
      if (!known.count(fs::weakly_canonical(run.path()).string())) fs::remove_all(run.path());
    }
  }
}

// --- driver ----------------------------------------------------------------------------

PipelineState Orchestrator::run(const std::string& prompt, const OptimizationGoal& goal) {
  require(!text::trim_copy(prompt).empty(), "pipeline needs a non-empty prompt");
  validate(goal);
  PipelineState state;
  state.design_id = options_.design_id.value_or(default_design_id(prompt));
  if (store_.exists(state.design_id))
    fail(ErrorCode::Conflict, "design '" + state.design_id + "' already exists; resume it instead");
  state.prompt = prompt;
  state.goal = goal;
  emit(state, "phase", {{"phase", "planning"}});
  emit(state, "goal", to_json(goal));
  try {
    checkpoint(state);
  } catch (Interrupted) {
    return state;
  }
  drive(state);
  return state;
}

PipelineState Orchestrator::resume(const std::string& design_id, std::optional<int> extra_runs) {
  PipelineState state = store_.load(design_id);
  gateway_.provider().restore_cursor(state.llm_cursor);
  gateway_.restore_ledger(state.cost_ledger);
  clear_orphan_runs(state);
  if (extra_runs) {
    require(*extra_runs >= 1, "extra runs must be positive");
    state.goal.stop_after_runs += *extra_runs;
    state.stale_rounds = 0;
    if (state.phase == Phase::done && state.history.best_index()) {
      state.phase = Phase::optimizing;
      emit(state, "phase", {{"phase", "optimizing"}, {"reopened", true}});
    }
  }
  drive(state);
  return state;
}

void Orchestrator::drive(PipelineState& state) {
  try {
    try {
      while (!is_terminal(state.phase)) {
        if (options_.stop.stop_requested()) {
          abort(state, std::string(to_string(ErrorCode::Aborted)), "aborted by request");
          break;
        }
        switch (state.phase) {
          case Phase::planning: step_planning(state); break;
          case Phase::generating: step_generating(state); break;
          case Phase::verifying: step_verifying(state); break;
          case Phase::baselining: step_baselining(state); break;
          case Phase::optimizing: step_optimizing(state); break;
          default: break;
        }
      }
    } catch (const Error& e) {
      emit(state, "error", {{"code", std::string(to_string(e.code()))}, {"message", e.what()}});
      abort(state, std::string(to_string(e.code())), e.what());
    } catch (const std::exception& e) {
      emit(state, "error", {{"code", "Internal"}, {"message", e.what()}});
      abort(state, "Internal", e.what());
    }
    emit(state, "cost", to_json(gateway_.ledger()));
    checkpoint(state);
  } catch (Interrupted) {
  }
}

void Orchestrator::step_planning(PipelineState& state) {
  ClosedAnswers closed;
  AnswerSource& inner = backends_.answers ? *backends_.answers : static_cast<AnswerSource&>(closed);
  EventingAnswers answers(inner, [&](const std::string& type, nlohmann::json data) { emit(state, type, std::move(data)); });
  state.design = plan(state.prompt, answers, gateway_, options_.limits);
  set_phase(state, Phase::generating);
  checkpoint(state);
}

void Orchestrator::step_generating(PipelineState& state) {
  state.hdl = generate_hdl(*state.design, gateway_);
  set_phase(state, Phase::verifying);
  checkpoint(state);
}

void Orchestrator::step_verifying(PipelineState& state) {
  state.hdl = verify_hdl(*state.hdl, *backends_.lint, gateway_, options_.limits.max_repairs);
  const auto hdl_dir = store_.design_dir(state.design_id) / "hdl";
  fs::create_directories(hdl_dir);
  std::vector<std::string> sources;
  for (const auto& f : state.hdl->source_files) {
    const auto path = hdl_dir / fs::path(f.path).filename();
    std::ofstream(path, std::ios::binary) << f.text << (f.text.empty() || f.text.back() != '\n' ? "\n" : "");
    sources.push_back(fs::absolute(path).string());
  }
  state.incumbent_config = initial_config(*state.design, *backends_.registry, backends_.corpus.get(), sources);
  set_phase(state, Phase::baselining);
  checkpoint(state);
}

void Orchestrator::step_baselining(PipelineState& state) {
  if (static_cast<int>(state.history.size()) >= state.goal.stop_after_runs) {
    abort(state, std::string(to_string(ErrorCode::Aborted)), "run budget exhausted before a successful baseline");
    return;
  }
  const FlowConfig config = *state.incumbent_config;
  auto jobs = launch(state, {config}, 1);
  HistoryEntry entry;
  entry.job = std::move(jobs.front());
  const RunMetrics metrics = entry.job.metrics.value_or(RunMetrics{});
  entry.issues = detect(metrics, entry.job.errors, options_.thresholds);
  entry.origin.kind = state.pending_fix ? OriginKind::fix : OriginKind::baseline;
  entry.origin.round = 0;
  if (state.pending_fix) {
    entry.origin.fix = state.pending_fix;
    entry.origin.rationale = state.pending_fix->justification;
    entry.origin.provenance_chunks = state.pending_fix->provenance_chunks;
  }
  entry.scalar_cost = cost_of(state, entry.job, state.goal);
  const bool baseline_ok = entry.scalar_cost.has_value();
  state.history.append(entry);
  state.pending_fix.reset();

  if (baseline_ok) {
    emit(state, "baseline", job_summary(entry.job, entry.scalar_cost));
    set_phase(state, Phase::optimizing);
    checkpoint(state);
    return;
  }
  ++state.baseline_attempts;
  if (state.baseline_attempts > options_.max_fix_attempts) {
    abort(state, std::string(to_string(ErrorCode::Aborted)),
          "no successful baseline after " + std::to_string(options_.max_fix_attempts) + " fix attempts");
    return;
  }
  const auto& last = state.history.entries().back();
  const auto payload = payload_for(state, last, last.issues, &state.goal);
  const auto fix = propose_fix(last.issues, payload, config, *backends_.registry, gateway_, options_.limits);
  state.incumbent_config = apply_fix(config, fix);
  state.pending_fix = fix;
  emit(state, "fix", to_json(fix));
  checkpoint(state);
}

void Orchestrator::step_optimizing(PipelineState& state) {
  if (options_.goal_update) {
    if (auto g = options_.goal_update()) {
      validate(*g);
      // Run limits belong to the session, not to the weight preset.
      g->stop_after_runs = state.goal.stop_after_runs;
      g->stop_after_stale_rounds = state.goal.stop_after_stale_rounds;
      state.goal = *g;
      emit(state, "goal", to_json(state.goal));
    }
  }
  const int remaining = state.goal.stop_after_runs - static_cast<int>(state.history.size());
  if (remaining <= 0 || state.stale_rounds >= state.goal.stop_after_stale_rounds) {
    set_phase(state, Phase::done);
    return;
  }
  optimize_round(state, state.goal, std::min(options_.parallelism, remaining));
  checkpoint(state);
}

void Orchestrator::optimize_round(PipelineState& state, const OptimizationGoal& goal, int k) {
  require(state.history.best_index().has_value(), "optimization needs a successful run in the history");
  require(k >= 1, "k must be positive");
  const HistoryEntry incumbent_entry = state.history.entries()[*state.history.best_index()];
  const auto issues = detect(incumbent_entry.job.metrics.value_or(RunMetrics{}), incumbent_entry.job.errors,
                             options_.thresholds);
  const auto payload = payload_for(state, incumbent_entry, issues, &goal);
  std::set<std::string> tried;
  for (const auto& e : state.history.entries()) tried.insert(content_hash(e.job.config));

  const int round = ++state.round;
  const auto previous_best = state.history.best_cost();
  std::vector<Candidate> candidates;
  try {
    candidates = propose_optimizations(payload, goal, k, *state.incumbent_config, tried, *backends_.registry,
                                       gateway_, options_.limits);
  } catch (const Error& e) {
    if (e.code() != ErrorCode::NoViableCandidates) throw;
    ++state.stale_rounds;
    emit(state, "round", {{"round", round}, {"candidates", 0}, {"improved", false},
                          {"stale_rounds", state.stale_rounds}, {"reason", e.what()},
                          {"best_cost", previous_best ? nlohmann::json(*previous_best) : nlohmann::json(nullptr)}});
    return;
  }

  std::vector<FlowConfig> configs;
  for (const auto& c : candidates) configs.push_back(c.config);
  auto jobs = launch(state, configs, options_.parallelism);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    HistoryEntry entry;
    entry.job = std::move(jobs[i]);
    entry.issues = detect(entry.job.metrics.value_or(RunMetrics{}), entry.job.errors, options_.thresholds);
    entry.origin.kind = OriginKind::candidate;
    entry.origin.round = round;
    entry.origin.rationale = candidates[i].rationale;
    entry.origin.provenance_chunks = candidates[i].provenance_chunks;
    entry.scalar_cost = cost_of(state, entry.job, goal);
    state.history.append(std::move(entry));
  }
  const auto best = state.history.best_cost();
  const bool improved = best && previous_best && *best <= *previous_best * (1.0 - options_.stale_threshold);
  state.stale_rounds = improved ? 0 : state.stale_rounds + 1;
  state.incumbent_config = state.history.entries()[*state.history.best_index()].job.config;
  emit(state, "round", {{"round", round}, {"candidates", static_cast<int>(candidates.size())}, {"improved", improved},
                        {"stale_rounds", state.stale_rounds},
                        {"best_cost", best ? nlohmann::json(*best) : nlohmann::json(nullptr)},
                        {"best_job", state.history.entries()[*state.history.best_index()].job.job_id}});
}

// --- promote -----------------------------------------------------------------------------

PromoteResult promote_successful_chunks(const PipelineState& state, const fs::path& corpus_dir,
                                        const ParameterRegistry& registry) {
  require(state.phase == Phase::done, "promote needs a finished design");
  PromoteResult result;
  std::optional<double> best;
  for (const auto& e : state.history.entries()) {
    std::vector<std::string> cited;
    if (e.origin.kind == OriginKind::fix && e.job.status == JobStatus::succeeded) {
      cited = e.origin.provenance_chunks;
    } else if (e.origin.kind == OriginKind::candidate && e.scalar_cost && best && *e.scalar_cost < *best) {
      cited = e.origin.provenance_chunks;
    }
    for (const auto& id : cited) ++result.credited[id];
    if (e.succeeded() && e.scalar_cost && (!best || *e.scalar_cost < *best)) best = e.scalar_cost;
  }
  const auto best_i = state.history.best_index();
  const bool winner_improved = best_i && state.history.baseline_index() && *best_i != *state.history.baseline_index();
  if (result.credited.empty() && !winner_improved) return result;

  std::map<std::string, fs::path> files;
  std::error_code ec;
  for (fs::recursive_directory_iterator it(corpus_dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (!it->is_regular_file() || it->path().extension() != ".md") continue;
    std::ifstream in(it->path(), std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    files[parse_chunk(buf.str(), it->path().string()).id] = it->path();
  }
  for (auto it = result.credited.begin(); it != result.credited.end();) {
    auto f = files.find(it->first);
    if (f == files.end()) {
      it = result.credited.erase(it);
      continue;
    }
    std::ifstream in(f->second, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    in.close();
    auto chunk = parse_chunk(buf.str(), f->second.string());
    chunk.reference_count += it->second;
    std::ofstream(f->second, std::ios::binary) << serialize_chunk(chunk);
    ++it;
  }

  if (winner_improved) {
    const auto& winner = state.history.entries()[*best_i].job.config;
    nlohmann::json params = nlohmann::json::object();
    for (const char* key : {"CLOCK_PERIOD", "FP_CORE_UTIL", "PL_TARGET_DENSITY", "SYNTH_STRATEGY"}) {
      if (auto v = winner.parameters.find(key); v != winner.parameters.end()) params[key] = to_json(v->second);
    }
    for (const auto& [name, value] : winner.parameters) {
      const auto* spec = registry.find(name);
      if (spec && spec->default_value != value) params[name] = to_json(value);
    }
    DocChunk chunk;
    chunk.id = "prior_" + text::to_lower(winner.design_name) + "_" + content_hash(winner).substr(0, 8);
    chunk.kind = ChunkKind::prior_config;
    chunk.title = "Prior configuration: " + winner.design_name;
    for (const auto& [name, v] : params.items()) chunk.parameter_names.push_back(name);
    const std::string description = state.design ? state.design->functional_description : state.prompt;
    std::ostringstream body;
    body << "Successful run of " << winner.design_name << ": " << description;
    if (const auto c = state.history.best_cost()) body << " Scalar cost " << text::format_number(*c) << " relative to baseline.";
    body << "\n\n```json\n" << params.dump(2) << "\n```";
    chunk.body = body.str();
    if (!files.count(chunk.id)) {
      const auto dir = corpus_dir / "prior_config";
      fs::create_directories(dir);
      std::ofstream(dir / (chunk.id + ".md"), std::ios::binary) << serialize_chunk(chunk);
      result.new_chunk_id = chunk.id;
    }
  }
  return result;
}

}  // namespace flowpilot
