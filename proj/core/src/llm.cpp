#include "flowpilot/llm.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "flowpilot/error.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace flowpilot {

Money Money::from_usd(double usd) {
  require(std::isfinite(usd), "money amount must be finite");
  return Money(static_cast<std::int64_t>(std::llround(usd * 1e6)));
}

std::string Money::str() const {
  const bool negative = micros_ < 0;
  const auto abs = negative ? -micros_ : micros_;
  char buf[48];
  std::snprintf(buf, sizeof buf, "%s%lld.%06lld", negative ? "-" : "", static_cast<long long>(abs / 1000000),
                static_cast<long long>(abs % 1000000));
  return buf;
}

Money RateCard::cost(std::int64_t input_tokens, std::int64_t output_tokens) const {
  return Money::from_usd((static_cast<double>(input_tokens) * input_usd_per_mtok +
                          static_cast<double>(output_tokens) * output_usd_per_mtok) /
                         1e6);
}

std::int64_t estimate_tokens(std::string_view text) {
  return static_cast<std::int64_t>((text.size() + 3) / 4);
}

GenerationResult generate(Provider& provider, const GenerationRequest& request, const RetryPolicy& retry) {
  require(!request.user_text.empty(), "generation request needs non-empty user text");
  require(request.temperature >= 0 && request.temperature <= 2, "temperature must be in [0, 2]");
  require(request.max_output_chars > 0, "max_output_chars must be positive");
  require(retry.max_attempts >= 1, "retry policy needs at least one attempt");

  auto backoff = retry.initial_backoff;
  std::string last_error;
  for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
    const auto start = std::chrono::steady_clock::now();
    try {
      Completion c = provider.complete(request);
      const auto elapsed = std::chrono::steady_clock::now() - start;
      if (c.text.size() > request.max_output_chars) {
        fail(ErrorCode::ResponseTooLarge, "response of " + std::to_string(c.text.size()) +
                                              " chars exceeds limit " + std::to_string(request.max_output_chars));
      }
      GenerationResult r;
      r.input_tokens = c.input_tokens.value_or(estimate_tokens(request.system_text) + estimate_tokens(request.user_text));
      r.output_tokens = c.output_tokens.value_or(estimate_tokens(c.text));
      r.text = std::move(c.text);
      r.cost = provider.rate_card().cost(r.input_tokens, r.output_tokens);
      r.provider_id = provider.id();
      r.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
      r.tag = request.tag;
      r.attempts = attempt;
      return r;
    } catch (const Error& e) {
      if (e.code() != ErrorCode::TransientProviderFailure) throw;
      last_error = e.what();
    }
    if (attempt < retry.max_attempts) {
      if (retry.sleep) retry.sleep(backoff);
      else std::this_thread::sleep_for(backoff);
      backoff = std::chrono::milliseconds(static_cast<long long>(static_cast<double>(backoff.count()) * retry.multiplier));
    }
  }
  fail(ErrorCode::ProviderUnavailable, provider.id() + " failed after " + std::to_string(retry.max_attempts) +
                                           " attempts: " + last_error);
}

void CostSummary::add(const GenerationResult& result) {
  total += result.cost;
  per_tag[result.tag] += result.cost;
}

CostSummary accumulate_cost(std::span<const GenerationResult> results) {
  CostSummary s;
  for (const auto& r : results) s.add(r);
  return s;
}

nlohmann::json to_json(const CostSummary& s) {
  nlohmann::json per_tag = nlohmann::json::object();
  for (const auto& [tag, m] : s.per_tag) per_tag[tag] = m.micros();
  return {{"total_micro_usd", s.total.micros()}, {"total_usd", s.total.str()}, {"per_tag_micro_usd", per_tag}};
}

CostSummary cost_summary_from_json(const nlohmann::json& doc) {
  CostSummary s;
  s.total = Money::from_micros(doc.at("total_micro_usd").get<std::int64_t>());
  const auto per_tag = doc.value("per_tag_micro_usd", nlohmann::json::object());
  for (const auto& [tag, v] : per_tag.items())
    s.per_tag[tag] = Money::from_micros(v.get<std::int64_t>());
  return s;
}

// --- MockProvider ------------------------------------------------------------

MockProvider::MockProvider(std::map<std::string, std::vector<std::string>> script,
                           std::map<std::string, std::string> defaults, RateCard rates)
    : script_(std::move(script)), defaults_(std::move(defaults)), rates_(rates) {}

namespace {

std::string slurp(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace

std::shared_ptr<MockProvider> MockProvider::from_directory(const fs::path& dir, RateCard rates) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(ErrorCode::ProviderUnavailable, "mock script directory " + dir.string() + " not found");
  std::map<std::string, std::vector<std::string>> script;
  std::map<std::string, std::string> defaults;
  for (const auto& tag_dir : fs::directory_iterator(dir)) {
    if (!tag_dir.is_directory()) continue;
    const auto tag = tag_dir.path().filename().string();
    std::map<std::int64_t, std::string> numbered;
    for (const auto& f : fs::directory_iterator(tag_dir.path())) {
      if (!f.is_regular_file() || f.path().extension() != ".txt") continue;
      const auto stem = f.path().stem().string();
      if (stem == "default") {
        defaults[tag] = slurp(f.path());
        continue;
      }
      auto n = text::parse_int(stem);
      if (!n || *n < 1) fail(ErrorCode::InvalidConfig, "mock script file name must be a 1-based ordinal: " + f.path().string());
      numbered[*n] = slurp(f.path());
    }
    auto& responses = script[tag];
    std::int64_t expected = 1;
    for (auto& [n, text] : numbered) {
      if (n != expected) fail(ErrorCode::InvalidConfig, "mock script " + tag + " is missing ordinal " + std::to_string(expected));
      responses.push_back(std::move(text));
      ++expected;
    }
  }
  return std::make_shared<MockProvider>(std::move(script), std::move(defaults), rates);
}

Completion MockProvider::complete(const GenerationRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  const int ordinal = ++cursor_[request.tag];
  const std::string* response = nullptr;
  if (auto it = script_.find(request.tag); it != script_.end() && ordinal <= static_cast<int>(it->second.size()))
    response = &it->second[static_cast<std::size_t>(ordinal - 1)];
  else if (auto d = defaults_.find(request.tag); d != defaults_.end())
    response = &d->second;
  if (!response) {
    calls_.push_back({request.tag, ordinal, "exhausted"});
    fail(ErrorCode::ProviderUnavailable,
         "mock script has no response for tag '" + request.tag + "' call " + std::to_string(ordinal));
  }
  if (response->rfind("!transient", 0) == 0) {
    calls_.push_back({request.tag, ordinal, "transient"});
    fail(ErrorCode::TransientProviderFailure, "scripted transient failure");
  }
  if (response->rfind("!auth", 0) == 0) {
    calls_.push_back({request.tag, ordinal, "auth"});
    fail(ErrorCode::AuthFailure, "scripted authentication failure");
  }
  calls_.push_back({request.tag, ordinal, "ok"});
  return Completion{*response, std::nullopt, std::nullopt};
}

std::map<std::string, int> MockProvider::cursor() const {
  std::lock_guard lock(mutex_);
  return cursor_;
}

void MockProvider::restore_cursor(const std::map<std::string, int>& cursor) {
  std::lock_guard lock(mutex_);
  cursor_ = cursor;
}

std::vector<MockProvider::Call> MockProvider::calls() const {
  std::lock_guard lock(mutex_);
  return calls_;
}

std::vector<GenerationRequest> MockProvider::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

// --- Gateway -------------------------------------------------------------------

Gateway::Gateway(ProviderHandle provider, RetryPolicy retry) : provider_(std::move(provider)), retry_(std::move(retry)) {
  require(provider_ != nullptr, "gateway needs a provider");
}

GenerationResult Gateway::generate(const GenerationRequest& request) {
  auto result = flowpilot::generate(*provider_, request, retry_);
  std::lock_guard lock(mutex_);
  ledger_.add(result);
  results_.push_back(result);
  return result;
}

CostSummary Gateway::ledger() const {
  std::lock_guard lock(mutex_);
  return ledger_;
}

std::vector<GenerationResult> Gateway::results() const {
  std::lock_guard lock(mutex_);
  return results_;
}

void Gateway::restore_ledger(CostSummary ledger) {
  std::lock_guard lock(mutex_);
  ledger_ = std::move(ledger);
}

}  // namespace flowpilot
