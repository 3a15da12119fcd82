#include "flowpilot/service.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <future>
#include <sstream>
#include <thread>

#include <httplib.h>

#include "flowpilot/error.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace flowpilot {

// --- answers -----------------------------------------------------------------------------

ServiceAnswers::ServiceAnswers(std::chrono::milliseconds timeout, std::stop_token stop)
    : timeout_(timeout), stop_(std::move(stop)) {}

std::string ServiceAnswers::answer(const std::string& question) {
  std::unique_lock lock(mutex_);
  pending_ = Pending{++asked_, question};
  reply_.reset();
  const bool answered = cv_.wait_for(lock, stop_, timeout_, [&] { return reply_.has_value(); });
  pending_.reset();
  if (!answered) {
    if (stop_.stop_requested()) fail(ErrorCode::Aborted, "aborted while waiting for an answer");
    fail(ErrorCode::AnswerSourceClosed, "no answer to planner question within the timeout");
  }
  auto a = std::move(*reply_);
  reply_.reset();
  return a;
}

std::optional<ServiceAnswers::Pending> ServiceAnswers::pending() const {
  std::lock_guard lock(mutex_);
  if (reply_) return std::nullopt;
  return pending_;
}

bool ServiceAnswers::post(std::optional<int> question_id, const std::string& answer) {
  {
    std::lock_guard lock(mutex_);
    if (!pending_ || reply_) return false;
    if (question_id && *question_id != pending_->question_id) return false;
    reply_ = answer;
  }
  cv_.notify_all();
  return true;
}

// --- service -----------------------------------------------------------------------------

struct Service::Pipeline {
  std::stop_source stop;
  std::shared_ptr<ServiceAnswers> answers;
  std::mutex goal_mutex;
  std::optional<OptimizationGoal> goal;
  std::atomic<bool> running{true};
  std::once_flag ready_once;
  std::promise<void> ready;
  std::string start_error;
  std::thread thread;
};

struct Service::Impl {
  StateStore& store;
  BackendFactory factory;
  PipelineOptions pipeline_options;
  ServiceOptions options;
  httplib::Server server;
  std::mutex mutex;
  std::map<std::string, std::shared_ptr<Pipeline>> pipelines;
  std::atomic<bool> stopping{false};

  Impl(StateStore& s, BackendFactory f, PipelineOptions po, ServiceOptions o)
      : store(s), factory(std::move(f)), pipeline_options(std::move(po)), options(std::move(o)) {}

  std::shared_ptr<Pipeline> find(const std::string& id) {
    std::lock_guard lock(mutex);
    auto it = pipelines.find(id);
    return it == pipelines.end() ? nullptr : it->second;
  }

  bool active(const std::string& id) {
    auto p = find(id);
    return p && p->running.load();
  }

  void routes();
  void create(const httplib::Request& req, httplib::Response& res);
  void events(const httplib::Request& req, httplib::Response& res, const std::string& id);
  std::optional<RunJob> job_of(const std::string& id, const std::string& job_id);
};

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message) {
  send_json(res, status, {{"error", code}, {"message", message}});
}

int http_status(ErrorCode code) {
  switch (family_of(code)) {
    case ErrorFamily::NotFound: return 404;
    case ErrorFamily::Internal: return 500;
    default: break;
  }
  if (code == ErrorCode::Conflict) return 409;
  return 400;
}

using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;

Handler guarded(Handler fn) {
  return [fn = std::move(fn)](const httplib::Request& req, httplib::Response& res) {
    try {
      fn(req, res);
    } catch (const Error& e) {
      send_error(res, http_status(e.code()), std::string(to_string(e.code())), e.what());
    } catch (const json::exception& e) {
      send_error(res, 400, "InvalidRequest", e.what());
    } catch (const std::exception& e) {
      send_error(res, 500, "Internal", e.what());
    }
  };
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  auto body = json::parse(req.body);
  if (!body.is_object()) fail(ErrorCode::PreconditionViolation, "request body must be a JSON object");
  return body;
}

std::string tail_of(const fs::path& file, std::size_t limit) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  auto s = buf.str();
  return s.size() > limit ? s.substr(s.size() - limit) : s;
}

}  // namespace

void Service::Impl::create(const httplib::Request& req, httplib::Response& res) {
  const auto body = parse_body(req);
  if (!body.contains("prompt") || !body.at("prompt").is_string())
    fail(ErrorCode::PreconditionViolation, "field 'prompt' (string) is required");
  const std::string prompt = body.at("prompt").get<std::string>();
  const OptimizationGoal goal = body.contains("goal") ? goal_from_json(body.at("goal")) : OptimizationGoal{};
  const std::string id = body.value("design_id", default_design_id(prompt));
  store.design_dir(id);  // validates the id

  auto p = std::make_shared<Pipeline>();
  {
    std::lock_guard lock(mutex);
    if (store.exists(id) || pipelines.count(id)) {
      send_error(res, 409, "Conflict", "design '" + id + "' already exists");
      return;
    }
    pipelines[id] = p;
  }
  p->answers = std::make_shared<ServiceAnswers>(options.question_timeout, p->stop.get_token());

  PipelineOptions po = pipeline_options;
  po.design_id = id;
  po.stop = p->stop.get_token();
  po.goal_update = [p]() {
    std::lock_guard lock(p->goal_mutex);
    auto g = p->goal;
    p->goal.reset();
    return g;
  };
  auto outer = pipeline_options.on_event;
  po.on_event = [p, outer](const PipelineEvent& e) {
    std::call_once(p->ready_once, [&] { p->ready.set_value(); });
    if (outer) outer(e);
  };
  BackendSet backends = factory(p->answers);
  auto ready = p->ready.get_future();
  p->thread = std::thread([this, p, backends, po, prompt, goal]() {
    try {
      Orchestrator orchestrator(backends, store, po);
      orchestrator.run(prompt, goal);
    } catch (const std::exception& e) {
      p->start_error = e.what();
    }
    p->running = false;
    std::call_once(p->ready_once, [&] { p->ready.set_value(); });
  });
  ready.wait();
  if (!p->start_error.empty() && !store.exists(id)) {
    p->thread.join();
    {
      std::lock_guard lock(mutex);
      pipelines.erase(id);
    }
    send_error(res, 400, "InvalidRequest", p->start_error);
    return;
  }
  res.set_header("Location", "/designs/" + id);
  send_json(res, 201, {{"design_id", id}});
}

void Service::Impl::events(const httplib::Request& req, httplib::Response& res, const std::string& id) {
  if (!store.exists(id) && !find(id)) {
    send_error(res, 404, "NotFound", "no design '" + id + "'");
    return;
  }
  std::uint64_t after = 0;
  if (req.has_header("Last-Event-ID")) after = std::stoull(req.get_header_value("Last-Event-ID"));
  if (req.has_param("after")) after = std::stoull(req.get_param_value("after"));
  const bool follow = !req.has_param("follow") || req.get_param_value("follow") != "0";
  auto cursor = std::make_shared<std::uint64_t>(after);
  res.set_header("Cache-Control", "no-cache");
  res.set_chunked_content_provider("text/event-stream", [this, id, cursor, follow](std::size_t, httplib::DataSink& sink) {
    int idle_polls = 0;
    while (true) {
      if (!sink.is_writable()) return false;
      const bool was_active = active(id);
      auto evs = store.events(id, *cursor);
      if (!evs.empty()) {
        std::string chunk;
        for (const auto& e : evs) {
          chunk += "id: " + std::to_string(e.seq) + "\nevent: " + e.type + "\ndata: " + to_json(e).dump() + "\n\n";
          *cursor = e.seq;
        }
        return sink.write(chunk.data(), chunk.size());
      }
      if (!follow || !was_active || stopping.load()) {
        sink.done();
        return true;
      }
      std::this_thread::sleep_for(options.event_poll);
      // Comment line as a keep-alive roughly every 15 s.
      if (++idle_polls * options.event_poll >= std::chrono::seconds(15)) {
        static const std::string ping = ": keep-alive\n\n";
        return sink.write(ping.data(), ping.size());
      }
    }
  });
}

std::optional<RunJob> Service::Impl::job_of(const std::string& id, const std::string& job_id) {
  if (store.exists(id)) {
    const auto state = store.load(id);
    for (const auto& e : state.history.entries())
      if (e.job.job_id == job_id) return e.job;
  }
  // In-flight jobs are not in a snapshot yet; look for their directory.
  std::error_code ec;
  for (const auto& d : fs::directory_iterator(store.runs_root(id), ec)) {
    const auto dir = d.path() / job_id;
    if (fs::is_directory(dir)) {
      RunJob j;
      j.job_id = job_id;
      j.run_directory = dir.string();
      j.status = JobStatus::running;
      return j;
    }
  }
  return std::nullopt;
}

void Service::Impl::routes() {
  server.Post("/designs", guarded([this](const httplib::Request& req, httplib::Response& res) { create(req, res); }));

  server.Get("/designs", guarded([this](const httplib::Request&, httplib::Response& res) {
    json list = json::array();
    for (const auto& id : store.list()) {
      const auto s = store.load(id);
      const auto best = s.history.best_cost();
      list.push_back({{"design_id", id},
                      {"phase", std::string(to_string(s.phase))},
                      {"runs", s.history.size()},
                      {"best_cost", best ? json(*best) : json(nullptr)},
                      {"running", active(id)}});
    }
    send_json(res, 200, {{"designs", list}});
  }));

  server.Get(R"(/designs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto doc = to_json(store.load(id));
    auto p = find(id);
    std::optional<ServiceAnswers::Pending> q;
    if (p && p->running) q = p->answers->pending();
    doc["running"] = p && p->running.load();
    doc["pending_question"] = q ? json{{"question_id", q->question_id}, {"question", q->question}} : json(nullptr);
    send_json(res, 200, doc);
  }));

  server.Post(R"(/designs/([^/]+)/answers)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto body = parse_body(req);
    if (!body.contains("answer") || !body.at("answer").is_string())
      fail(ErrorCode::PreconditionViolation, "field 'answer' (string) is required");
    auto p = find(id);
    if (!p && !store.exists(id)) fail(ErrorCode::NotFound, "no design '" + id + "'");
    std::optional<int> qid;
    if (body.contains("question_id") && !body.at("question_id").is_null()) qid = body.at("question_id").get<int>();
    if (!p || !p->running || !p->answers->post(qid, body.at("answer").get<std::string>())) {
      send_error(res, 409, "Conflict", "no such pending question");
      return;
    }
    send_json(res, 200, {{"accepted", true}});
  }));

  server.Get(R"(/designs/([^/]+)/events)", [this](const httplib::Request& req, httplib::Response& res) {
    try {
      events(req, res, req.matches[1]);
    } catch (const std::exception& e) {
      send_error(res, 400, "InvalidRequest", e.what());
    }
  });

  server.Post(R"(/designs/([^/]+)/goal)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const auto body = parse_body(req);
    auto p = find(id);
    if (!p && !store.exists(id)) fail(ErrorCode::NotFound, "no design '" + id + "'");
    auto goal = goal_from_json(body);
    if (!p || !p->running) {
      send_error(res, 409, "Conflict", "design '" + id + "' is not running");
      return;
    }
    {
      std::lock_guard lock(p->goal_mutex);
      p->goal = goal;
    }
    send_json(res, 202, {{"accepted", true}, {"goal", to_json(goal)}});
  }));

  server.Post(R"(/designs/([^/]+)/abort)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    auto p = find(id);
    if (!p && !store.exists(id)) fail(ErrorCode::NotFound, "no design '" + id + "'");
    if (!p || !p->running) {
      send_error(res, 409, "Conflict", "design '" + id + "' is not running");
      return;
    }
    p->stop.request_stop();
    send_json(res, 202, {{"accepted", true}});
  }));

  server.Get(R"(/designs/([^/]+)/runs)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const auto state = store.load(req.matches[1]);
    json runs = json::array();
    for (const auto& e : state.history.entries()) runs.push_back(job_summary(e.job, e.scalar_cost));
    send_json(res, 200, {{"design_id", state.design_id}, {"runs", runs}});
  }));

  server.Get(R"(/designs/([^/]+)/runs/([^/]+)/metrics)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const std::string job_id = req.matches[2];
    auto job = job_of(id, job_id);
    if (!job) fail(ErrorCode::NotFound, "no job '" + job_id + "' in design '" + id + "'");
    if (!job->metrics) {
      try {
        job->metrics = parse_run_artifacts(job->run_directory).metrics;
      } catch (const Error&) {
        fail(ErrorCode::NotFound, "job '" + job_id + "' has no metrics");
      }
    }
    send_json(res, 200, to_json(*job->metrics));
  }));

  server.Get(R"(/designs/([^/]+)/runs/([^/]+)/logs)", guarded([this](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    const std::string job_id = req.matches[2];
    auto job = job_of(id, job_id);
    if (!job) fail(ErrorCode::NotFound, "no job '" + job_id + "' in design '" + id + "'");
    std::vector<fs::path> logs;
    std::error_code ec;
    for (fs::recursive_directory_iterator it(job->run_directory, ec), end; !ec && it != end; it.increment(ec)) {
      if (it->is_regular_file() && it->path().extension() == ".log") logs.push_back(it->path());
    }
    std::sort(logs.begin(), logs.end());
    std::string text;
    for (const auto& f : logs) {
      text += "==> " + fs::relative(f, job->run_directory).string() + " <==\n" + tail_of(f, 64 * 1024);
      if (!text.empty() && text.back() != '\n') text += "\n";
    }
    res.status = 200;
    res.set_content(text, "text/plain");
  }));

  if (!options.static_dir.empty() && fs::is_directory(options.static_dir)) server.set_mount_point("/", options.static_dir.string());
}

Service::Service(StateStore& store, BackendFactory backends, PipelineOptions pipeline_options, ServiceOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(backends), std::move(pipeline_options), std::move(options))) {
  impl_->routes();
}

Service::~Service() {
  stop();
  shutdown_pipelines();
}

bool Service::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }
int Service::bind_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool Service::listen_after_bind() { return impl_->server.listen_after_bind(); }
void Service::wait_until_ready() const { impl_->server.wait_until_ready(); }

void Service::stop() {
  impl_->stopping = true;
  if (impl_->server.is_running()) impl_->server.stop();
}

void Service::shutdown_pipelines() {
  std::map<std::string, std::shared_ptr<Pipeline>> all;
  {
    std::lock_guard lock(impl_->mutex);
    all = impl_->pipelines;
  }
  for (auto& [id, p] : all) p->stop.request_stop();
  for (auto& [id, p] : all)
    if (p->thread.joinable()) p->thread.join();
}

}  // namespace flowpilot
