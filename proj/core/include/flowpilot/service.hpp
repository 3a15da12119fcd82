#pragma once

#include <chrono>
#include <condition_variable>
#include <optional>
#include <stop_token>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "flowpilot/orchestrator.hpp"
#include "flowpilot/state_store.hpp"

namespace flowpilot {

/// Answer source fed by HTTP clients. One question is pending at a time;
/// answer() blocks until post() supplies the answer, the timeout passes
/// (AnswerSourceClosed) or the stop token fires.
class ServiceAnswers : public AnswerSource {
 public:
  ServiceAnswers(std::chrono::milliseconds timeout, std::stop_token stop);

  std::string answer(const std::string& question) override;

  struct Pending {
    int question_id = 0;
    std::string question;
  };
  std::optional<Pending> pending() const;

  /// False when no question is pending or `question_id` names another one.
  bool post(std::optional<int> question_id, const std::string& answer);

 private:
  std::chrono::milliseconds timeout_;
  std::stop_token stop_;
  mutable std::mutex mutex_;
  std::condition_variable_any cv_;
  int asked_ = 0;
  std::optional<Pending> pending_;
  std::optional<std::string> reply_;
};

struct ServiceOptions {
  std::chrono::milliseconds question_timeout = std::chrono::minutes(30);
  std::filesystem::path static_dir;  // mounted at / when it exists
  std::chrono::milliseconds event_poll = std::chrono::milliseconds(50);
};

/// HTTP front end over the orchestrator:
///
///   POST /designs                          {"prompt", "design_id"?, "goal"?}  -> 201 {"design_id"}
///   GET  /designs                          summaries
///   GET  /designs/{id}                     latest state document + pending question
///   POST /designs/{id}/answers             {"question_id"?, "answer"}; 409 when not pending
///   GET  /designs/{id}/events              server-sent events; resumes after Last-Event-ID or ?after=
///   POST /designs/{id}/goal                goal document; applies from the next round
///   POST /designs/{id}/abort               stops the pipeline and its running jobs
///   GET  /designs/{id}/runs                job summaries
///   GET  /designs/{id}/runs/{job}/metrics  RunMetrics document
///   GET  /designs/{id}/runs/{job}/logs     concatenated log files, text/plain
///
/// Each design runs on its own thread.
class Service {
 public:
  /// Builds a fresh backend set for each pipeline around its answer source.
  using BackendFactory = std::function<BackendSet(std::shared_ptr<AnswerSource>)>;

  Service(StateStore& store, BackendFactory backends, PipelineOptions pipeline_options = {},
          ServiceOptions options = {});
  ~Service();

  Service(const Service&) = delete;
  Service& operator=(const Service&) = delete;

  /// Binds and serves until stop(). Returns false when binding fails.
  bool listen(const std::string& host, int port);
  /// Binds to an ephemeral port and returns it; serve with listen_after_bind().
  int bind_any_port(const std::string& host);
  bool listen_after_bind();
  void wait_until_ready() const;
  void stop();

  /// Requests an abort on every running pipeline and joins their threads.
  void shutdown_pipelines();

 private:
  struct Pipeline;
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace flowpilot
