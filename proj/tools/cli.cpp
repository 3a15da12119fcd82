#include "cli.hpp"

#include <csignal>
#include <cstdio>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "flowpilot/bench.hpp"
#include "flowpilot/config.hpp"
#include "flowpilot/orchestrator.hpp"
#include "flowpilot/report.hpp"
#include "flowpilot/service.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace flowpilot::cli {

int exit_code(ErrorFamily family) {
  switch (family) {
    case ErrorFamily::Usage: return 2;
    case ErrorFamily::NotFound: return 3;
    case ErrorFamily::Input: return 4;
    case ErrorFamily::Agent: return 5;
    case ErrorFamily::Flow: return 6;
    case ErrorFamily::Pipeline: return 7;
    case ErrorFamily::Internal: return 1;
  }
  return 1;
}

namespace {

class StreamAnswers : public AnswerSource {
 public:
  StreamAnswers(std::istream& in, std::ostream& prompt) : in_(in), prompt_(prompt) {}

  std::string answer(const std::string& question) override {
    prompt_ << "? " << question << "\n> " << std::flush;
    std::string line;
    if (!std::getline(in_, line)) fail(ErrorCode::AnswerSourceClosed, "standard input closed before an answer");
    return line;
  }

 private:
  std::istream& in_;
  std::ostream& prompt_;
};

std::string num(const std::optional<double>& v, const char* format = "%.2f") {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, format, *v);
  return buf;
}

int phase_exit(const PipelineState& s) {
  if (s.phase == Phase::done) return 0;
  if (s.phase != Phase::aborted) return exit_code(ErrorFamily::Pipeline);
  const auto code = error_code_from_string(s.abort_code);
  return exit_code(code ? family_of(*code) : ErrorFamily::Internal);
}

void print_summary(std::ostream& out, const PipelineState& s) {
  const auto& h = s.history;
  std::size_t ok = 0;
  for (const auto& e : h.entries()) ok += e.succeeded() ? 1 : 0;
  out << "design    " << s.design_id << "\n";
  out << "phase     " << to_string(s.phase) << "\n";
  if (s.phase == Phase::aborted) out << "cause     " << s.abort_code << ": " << s.abort_cause << "\n";
  out << "goal      " << to_string(s.goal.priority) << " (area " << num(s.goal.weights.area, "%.3f") << ", delay "
      << num(s.goal.weights.delay, "%.3f") << ", power " << num(s.goal.weights.power, "%.3f") << ")\n";
  out << "runs      " << h.size() << " (" << ok << " succeeded), rounds " << s.round << "\n";
  auto line = [&](const char* label, std::size_t i) {
    const auto& e = h.entries()[i];
    const auto& m = *e.job.metrics;
    out << label << e.job.job_id << "  area " << num(m.area_um2) << " um2  delay " << num(m.critical_path_delay_ps)
        << " ps  power " << num(m.power_uw) << " uW  cost " << num(e.scalar_cost, "%.6f") << "\n";
  };
  if (h.baseline_index()) line("baseline  ", *h.baseline_index());
  if (h.best_index()) line("best      ", *h.best_index());
  out << "llm cost  " << s.cost_ledger.total.str() << " USD\n";
}

json state_document(const PipelineState& s) { return to_json(s); }

RunMetrics load_metrics(const fs::path& p) {
  if (fs::is_directory(p)) return parse_run_artifacts(p).metrics;
  if (!fs::exists(p)) fail(ErrorCode::NotFound, "no metrics file " + p.string());
  return read_metrics_json(p);
}

struct Common {
  std::string config_file;
  std::string state_dir;
  std::string corpus_dir;
  std::string mock_script;
  int parallelism = 0;

  CliConfig load() const {
    CliConfig c = config_file.empty() ? CliConfig{} : CliConfig::load(config_file);
    if (!state_dir.empty()) c.state_dir = state_dir;
    if (!corpus_dir.empty()) c.corpus_dir = corpus_dir;
    if (!mock_script.empty()) c.mock_script = mock_script;
    if (parallelism != 0) c.parallelism = parallelism;
    c.validate();
    return c;
  }
};

Service* g_service = nullptr;
extern "C" void on_signal(int) {
  if (g_service) g_service->stop();
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"flowpilot: natural-language to layout flow orchestration"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config_file, "INI config file")->check(CLI::ExistingFile);
  app.add_option("--state-dir", common.state_dir, "State store directory (overrides run.state_dir)");
  app.add_option("--corpus-dir", common.corpus_dir, "Corpus directory (overrides run.corpus_dir)");
  app.add_option("--mock-script", common.mock_script, "Mock LLM script directory (overrides backends.mock_script)");
  app.add_option("--parallelism", common.parallelism, "Parallel flow jobs P (overrides run.parallelism)");

  // new
  auto* cmd_new = app.add_subcommand("new", "Run the pipeline from a prompt");
  std::string prompt, prompt_file, answers_file, design_id, goal_name;
  int stop_runs = 0, stale_rounds = 0;
  bool new_json = false;
  auto* prompt_opt = cmd_new->add_option("--prompt", prompt, "Design description");
  cmd_new->add_option("--prompt-file", prompt_file, "File holding the design description")
      ->check(CLI::ExistingFile)
      ->excludes(prompt_opt);
  cmd_new->add_option("--answers", answers_file, "JSON array of planner answers (non-interactive)")
      ->check(CLI::ExistingFile);
  cmd_new->add_option("--id", design_id, "Design id (default derived from the prompt)");
  cmd_new->add_option("--goal", goal_name, "Goal preset")->check(CLI::IsMember({"area", "delay", "power", "balanced"}));
  cmd_new->add_option("--stop-after-runs", stop_runs, "Flow run budget")->check(CLI::Range(1, 100000));
  cmd_new->add_option("--stale-rounds", stale_rounds, "Stop after this many rounds without improvement")
      ->check(CLI::Range(1, 1000));
  cmd_new->add_flag("--json", new_json, "Print the state document");

  // status
  auto* cmd_status = app.add_subcommand("status", "Show one design, or list all");
  std::string status_id;
  bool status_json = false;
  cmd_status->add_option("design", status_id, "Design id");
  cmd_status->add_flag("--json", status_json, "Print the state document(s)");

  // optimize
  auto* cmd_opt = app.add_subcommand("optimize", "Resume a design, optionally adding runs");
  std::string opt_id;
  int extra_runs = 0;
  bool opt_json = false;
  cmd_opt->add_option("design", opt_id, "Design id")->required();
  cmd_opt->add_option("--runs", extra_runs, "Extra flow runs to allow")->check(CLI::Range(1, 100000));
  cmd_opt->add_flag("--json", opt_json, "Print the state document");

  // report
  auto* cmd_report = app.add_subcommand("report", "PPA delta / ratio tables");
  std::vector<std::string> report_ids, baselines, optimized, labels;
  bool report_csv = false, report_json = false, report_ratio = false;
  cmd_report->add_option("designs", report_ids, "Design ids (baseline vs best run)");
  cmd_report->add_option("--baseline", baselines, "Baseline metrics.json or run directory (repeatable)");
  cmd_report->add_option("--optimized", optimized, "Optimized metrics.json or run directory (repeatable)");
  cmd_report->add_option("--label", labels, "Row label per --baseline/--optimized pair");
  cmd_report->add_flag("--csv", report_csv, "CSV instead of aligned text");
  cmd_report->add_flag("--json", report_json, "JSON documents");
  cmd_report->add_flag("--ratio", report_ratio, "Ratio table (optimized / baseline) instead of deltas");

  // corpus
  auto* cmd_corpus = app.add_subcommand("corpus", "Retrieval corpus maintenance");
  cmd_corpus->require_subcommand(1);
  auto* cmd_build = cmd_corpus->add_subcommand("build", "Index the corpus and report its contents");
  bool build_json = false;
  cmd_build->add_flag("--json", build_json, "JSON output");
  auto* cmd_promote = cmd_corpus->add_subcommand("promote", "Fold a finished design back into the corpus");
  std::string promote_id;
  cmd_promote->add_option("design", promote_id, "Design id")->required();
  auto* cmd_query = cmd_corpus->add_subcommand("query", "Retrieve chunks for a query");
  std::string query_text;
  int depth = 0;
  bool query_json = false;
  cmd_query->add_option("text", query_text, "Query text")->required();
  cmd_query->add_option("--depth", depth, "Top-n")->check(CLI::Range(1, 100));
  cmd_query->add_flag("--json", query_json, "JSON output");

  // serve
  auto* cmd_serve = app.add_subcommand("serve", "HTTP API with server-sent events");
  std::string bind = "127.0.0.1:8080";
  std::string static_dir;
  cmd_serve->add_option("--bind", bind, "host:port");
  cmd_serve->add_option("--static", static_dir, "Directory served at /");

  // bench-parallel
  auto* cmd_bench = app.add_subcommand("bench-parallel", "Serial vs parallel simulated flow runs");
  int bench_jobs = 20, bench_p = 4;
  double bench_duration = 0.5;
  bool bench_json = false;
  cmd_bench->add_option("--jobs", bench_jobs, "Number of jobs")->check(CLI::Range(1, 10000));
  cmd_bench->add_option("--duration", bench_duration, "Seconds per simulated job")->check(CLI::Range(0.0, 3600.0));
  cmd_bench->add_option("--p", bench_p, "Parallelism")->check(CLI::Range(1, 256));
  cmd_bench->add_flag("--json", bench_json, "JSON output");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    app.exit(e, out, err);
    return 0;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return e.get_exit_code() == 0 ? 0 : exit_code(ErrorFamily::Usage);
  }

  try {
    const CliConfig cfg = common.load();

    if (*cmd_new) {
      if (!prompt_file.empty()) {
        std::ifstream f(prompt_file);
        std::ostringstream buf;
        buf << f.rdbuf();
        prompt = buf.str();
      }
      if (prompt.empty()) fail(ErrorCode::PreconditionViolation, "new needs --prompt or --prompt-file");
      std::shared_ptr<AnswerSource> answers;
      if (!answers_file.empty()) answers = std::make_shared<ScriptedAnswers>(ScriptedAnswers::from_file(answers_file));
      else answers = std::make_shared<StreamAnswers>(in, err);
      OptimizationGoal goal = cfg.goal;
      if (!goal_name.empty()) {
        const auto preset = OptimizationGoal::preset(goal_priority_from_string(goal_name));
        goal.priority = preset.priority;
        goal.weights = preset.weights;
      }
      if (stop_runs) goal.stop_after_runs = stop_runs;
      if (stale_rounds) goal.stop_after_stale_rounds = stale_rounds;
      auto options = make_pipeline_options(cfg);
      if (!design_id.empty()) options.design_id = design_id;
      StateStore store(cfg.state_dir);
      Orchestrator orchestrator(make_backends(cfg, answers), store, options);
      const auto state = orchestrator.run(prompt, goal);
      if (new_json) out << state_document(state).dump(2) << "\n";
      else print_summary(out, state);
      return phase_exit(state);
    }

    if (*cmd_status) {
      StateStore store(cfg.state_dir);
      if (status_id.empty()) {
        const auto ids = store.list();
        if (status_json) {
          json docs = json::array();
          for (const auto& id : ids) docs.push_back(state_document(store.load(id)));
          out << docs.dump(2) << "\n";
        } else {
          for (const auto& id : ids) {
            const auto s = store.load(id);
            out << id << "  " << to_string(s.phase) << "  runs " << s.history.size() << "  best "
                << num(s.history.best_cost(), "%.6f") << "\n";
          }
        }
        return 0;
      }
      const auto state = store.load(status_id);
      if (status_json) out << state_document(state).dump(2) << "\n";
      else print_summary(out, state);
      return 0;
    }

    if (*cmd_opt) {
      StateStore store(cfg.state_dir);
      if (!store.exists(opt_id)) fail(ErrorCode::NotFound, "no design '" + opt_id + "' in " + cfg.state_dir.string());
      auto options = make_pipeline_options(cfg);
      options.design_id = opt_id;
      Orchestrator orchestrator(make_backends(cfg, std::make_shared<StreamAnswers>(in, err)), store, options);
      const auto state = orchestrator.resume(opt_id, extra_runs ? std::optional<int>(extra_runs) : std::nullopt);
      if (opt_json) out << state_document(state).dump(2) << "\n";
      else print_summary(out, state);
      return phase_exit(state);
    }

    if (*cmd_report) {
      if (baselines.size() != optimized.size())
        fail(ErrorCode::PreconditionViolation, "--baseline and --optimized must be given the same number of times");
      if (!labels.empty() && labels.size() != baselines.size())
        fail(ErrorCode::PreconditionViolation, "--label must be given once per --baseline/--optimized pair");
      if (report_ids.empty() && baselines.empty())
        fail(ErrorCode::PreconditionViolation, "report needs design ids or --baseline/--optimized pairs");
      std::vector<DeltaRow> rows;
      if (!report_ids.empty()) {
        StateStore store(cfg.state_dir);
        for (const auto& id : report_ids) rows.push_back(history_delta(id, store.load(id).history));
      }
      for (std::size_t i = 0; i < baselines.size(); ++i) {
        const std::string label = labels.empty() ? fs::path(optimized[i]).parent_path().filename().string() : labels[i];
        rows.push_back({label, compute_delta(load_metrics(baselines[i]), load_metrics(optimized[i]))});
      }
      if (report_ratio) {
        std::vector<RatioRow> ratios;
        for (const auto& r : rows)
          ratios.push_back({r.label, compute_ratio(r.delta.optimized, r.delta.baseline, "optimized", "baseline")});
        if (report_json) {
          json docs = json::array();
          for (const auto& r : ratios) docs.push_back({{"label", r.label}, {"ratio", to_json(r.ratio)}});
          out << docs.dump(2) << "\n";
        } else {
          out << (report_csv ? render_ratio_csv(ratios) : render_ratio_table(ratios));
        }
        return 0;
      }
      if (report_json) {
        json docs = json::array();
        for (const auto& r : rows) docs.push_back({{"label", r.label}, {"delta", to_json(r.delta)}});
        out << docs.dump(2) << "\n";
      } else {
        out << (report_csv ? render_delta_csv(rows) : render_delta_table(rows));
      }
      return 0;
    }

    if (*cmd_corpus) {
      const auto dir = cfg.effective_corpus_dir();
      if (*cmd_build) {
        const auto index = build_index(dir);
        std::map<std::string, int> kinds;
        for (const auto& c : index->chunks()) ++kinds[std::string(to_string(c.kind))];
        if (build_json) {
          out << json{{"corpus_dir", dir.string()}, {"chunks", index->size()}, {"kinds", kinds}}.dump(2) << "\n";
        } else {
          out << index->size() << " chunks in " << dir.string() << "\n";
          for (const auto& [k, n] : kinds) out << "  " << k << "  " << n << "\n";
        }
        return 0;
      }
      if (*cmd_promote) {
        StateStore store(cfg.state_dir);
        auto state = store.load(promote_id);
        if (state.promoted) fail(ErrorCode::Conflict, "design '" + promote_id + "' was already promoted");
        const auto result = promote_successful_chunks(state, dir);
        state.promoted = true;
        ++state.snapshot_seq;
        store.write_snapshot(state);
        for (const auto& [id, n] : result.credited) out << "credited  " << id << "  +" << n << "\n";
        if (result.new_chunk_id) out << "added     " << *result.new_chunk_id << "\n";
        if (result.credited.empty() && !result.new_chunk_id) out << "corpus unchanged\n";
        return 0;
      }
      if (*cmd_query) {
        const auto index = build_index(dir);
        const Query q{query_text, std::nullopt, std::nullopt};
        const auto ctx = retrieve(index, std::span<const Query>(&q, 1), depth ? depth : cfg.retrieval_depth);
        if (query_json) {
          json docs = json::array();
          for (const auto& e : ctx.entries)
            docs.push_back({{"id", e.chunk.id}, {"score", e.score}, {"reference_count", e.chunk.reference_count},
                            {"kind", std::string(to_string(e.chunk.kind))}, {"title", e.chunk.title}});
          out << docs.dump(2) << "\n";
        } else {
          int rank = 0;
          for (const auto& e : ctx.entries) {
            out << ++rank << "  " << num(e.score, "%.4f") << "  rc " << e.chunk.reference_count << "  " << e.chunk.id
                << "  " << e.chunk.title << "\n";
          }
        }
        return 0;
      }
    }

    if (*cmd_serve) {
      const auto colon = bind.rfind(':');
      if (colon == std::string::npos) fail(ErrorCode::PreconditionViolation, "--bind expects host:port");
      const std::string host = bind.substr(0, colon);
      int port = 0;
      try {
        port = std::stoi(bind.substr(colon + 1));
      } catch (const std::exception&) {
        fail(ErrorCode::PreconditionViolation, "--bind port must be an integer in [0, 65535]");
      }
      if (port < 0 || port > 65535) fail(ErrorCode::PreconditionViolation, "--bind port must be in [0, 65535]");
      StateStore store(cfg.state_dir);
      ServiceOptions so;
      so.static_dir = static_dir;
      Service service(store, [cfg](std::shared_ptr<AnswerSource> a) { return make_backends(cfg, a); },
                      make_pipeline_options(cfg), so);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      out << "listening on http://" << host << ":" << port << std::endl;
      const bool ok = service.listen(host, port);
      g_service = nullptr;
      service.shutdown_pipelines();
      if (!ok) fail(ErrorCode::PreconditionViolation, "cannot bind " + bind);
      return 0;
    }

    if (*cmd_bench) {
      const auto r = bench_parallel(bench_jobs, std::chrono::milliseconds(static_cast<long long>(bench_duration * 1000)),
                                    bench_p);
      if (bench_json) {
        out << to_json(r).dump(2) << "\n";
      } else {
        out << "jobs      " << r.jobs << " x " << num(r.job_duration.count() / 1000.0, "%.3f") << " s\n";
        out << "serial    " << num(r.serial_seconds, "%.3f") << " s  (P=1, high-water " << r.serial_high_water << ")\n";
        out << "parallel  " << num(r.parallel_seconds, "%.3f") << " s  (P=" << r.parallelism << ", high-water "
            << r.parallel_high_water << ")\n";
        out << "speedup   " << num(r.speedup, "%.2f") << "\n";
      }
      return 0;
    }
  } catch (const MalformedReport& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(ErrorFamily::Input);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(family_of(e.code()));
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return exit_code(ErrorFamily::Internal);
  }
  return exit_code(ErrorFamily::Usage);
}

}  // namespace flowpilot::cli
