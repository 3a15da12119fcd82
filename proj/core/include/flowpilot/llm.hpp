#pragma once

#include <chrono>
#include <compare>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace flowpilot {

/// Fixed-point US dollars with micro-dollar resolution; sums are exact.
class Money {
 public:
  constexpr Money() = default;
  static constexpr Money from_micros(std::int64_t micros) { return Money(micros); }
  /// Rounds half away from zero to the nearest micro-dollar.
  static Money from_usd(double usd);

  constexpr std::int64_t micros() const { return micros_; }
  double usd() const { return static_cast<double>(micros_) / 1e6; }
  /// "0.480000"
  std::string str() const;

  constexpr Money& operator+=(Money other) {
    micros_ += other.micros_;
    return *this;
  }
  friend constexpr Money operator+(Money a, Money b) { return a += b; }
  friend constexpr Money operator*(Money a, std::int64_t n) { return Money(a.micros_ * n); }
  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  constexpr explicit Money(std::int64_t micros) : micros_(micros) {}
  std::int64_t micros_ = 0;
};

/// Provider pricing in USD per million tokens.
struct RateCard {
  double input_usd_per_mtok = 0;
  double output_usd_per_mtok = 0;

  Money cost(std::int64_t input_tokens, std::int64_t output_tokens) const;
};

struct GenerationRequest {
  std::string system_text;
  std::string user_text;
  double temperature = 0.2;
  std::size_t max_output_chars = 32000;
  // Pipeline stage, used for cost accounting and mock script lookup.
  std::string tag = "default";
};

struct GenerationResult {
  std::string text;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
  Money cost;
  std::string provider_id;
  double latency_ms = 0;
  std::string tag;
  int attempts = 1;
};

/// What a provider returns for one attempt. Token counts the provider does
/// not report are estimated as ceil(chars / 4).
struct Completion {
  std::string text;
  std::optional<std::int64_t> input_tokens;
  std::optional<std::int64_t> output_tokens;
};

/// A text-generation backend. `complete` performs a single attempt and throws
/// Error{TransientProviderFailure} for retryable transport problems and
/// Error{AuthFailure} for rejected credentials.
class Provider {
 public:
  virtual ~Provider() = default;
  virtual std::string id() const = 0;
  virtual RateCard rate_card() const = 0;
  virtual Completion complete(const GenerationRequest& request) = 0;

  /// Per-tag call counters, saved in snapshots so a resumed pipeline replays
  /// a scripted provider from the same point. Stateless providers return {}.
  virtual std::map<std::string, int> cursor() const { return {}; }
  virtual void restore_cursor(const std::map<std::string, int>&) {}
};

using ProviderHandle = std::shared_ptr<Provider>;

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{100};
  double multiplier = 2.0;
  // Replaced in tests to avoid real sleeping.
  std::function<void(std::chrono::milliseconds)> sleep;
};

std::int64_t estimate_tokens(std::string_view text);

/// One generation with retries on transient failures and exponential backoff.
/// Throws PreconditionViolation (empty user_text), ProviderUnavailable
/// (retries exhausted), ResponseTooLarge or AuthFailure.
GenerationResult generate(Provider& provider, const GenerationRequest& request,
                          const RetryPolicy& retry = {});

struct CostSummary {
  Money total;
  std::map<std::string, Money> per_tag;

  void add(const GenerationResult& result);
  bool operator==(const CostSummary&) const = default;
};

CostSummary accumulate_cost(std::span<const GenerationResult> results);

nlohmann::json to_json(const CostSummary& summary);
CostSummary cost_summary_from_json(const nlohmann::json& doc);

/// Deterministic scripted provider. Responses are keyed by (tag, 1-based
/// call ordinal); a per-tag `default` response answers calls past the end.
/// A response starting with "!transient" or "!auth" simulates that failure.
class MockProvider : public Provider {
 public:
  struct Call {
    std::string tag;
    int ordinal = 0;
    std::string outcome;  // "ok", "transient", "auth", "exhausted"
  };

  explicit MockProvider(std::map<std::string, std::vector<std::string>> script,
                        std::map<std::string, std::string> defaults = {},
                        RateCard rates = {3.0, 15.0});

  /// Reads `dir/<tag>/<n>.txt` and optional `dir/<tag>/default.txt`.
  static std::shared_ptr<MockProvider> from_directory(const std::filesystem::path& dir,
                                                      RateCard rates = {3.0, 15.0});

  std::string id() const override { return "mock"; }
  RateCard rate_card() const override { return rates_; }
  Completion complete(const GenerationRequest& request) override;

  std::map<std::string, int> cursor() const override;
  void restore_cursor(const std::map<std::string, int>& cursor) override;

  std::vector<Call> calls() const;
  /// Requests received, in call order.
  std::vector<GenerationRequest> requests() const;

 private:
  std::map<std::string, std::vector<std::string>> script_;
  std::map<std::string, std::string> defaults_;
  RateCard rates_;
  mutable std::mutex mutex_;
  std::map<std::string, int> cursor_;
  std::vector<Call> calls_;
  std::vector<GenerationRequest> requests_;
};

struct HttpProviderOptions {
  std::string base_url = "https://api.openai.com";
  std::string path = "/v1/chat/completions";
  std::string model = "gpt-4o";
  std::string api_key_env = "OPENAI_API_KEY";
  RateCard rates = {2.5, 10.0};
  std::chrono::seconds timeout{120};
};

/// Chat-completions style HTTP provider. 401/403 map to AuthFailure; 429,
/// 5xx and transport errors are transient.
class HttpProvider : public Provider {
 public:
  explicit HttpProvider(HttpProviderOptions options);

  std::string id() const override { return "http:" + options_.model; }
  RateCard rate_card() const override { return options_.rates; }
  Completion complete(const GenerationRequest& request) override;

 private:
  HttpProviderOptions options_;
};

/// A provider plus retry policy that records every result for the cost ledger.
class Gateway {
 public:
  explicit Gateway(ProviderHandle provider, RetryPolicy retry = {});

  GenerationResult generate(const GenerationRequest& request);

  Provider& provider() { return *provider_; }
  CostSummary ledger() const;
  std::vector<GenerationResult> results() const;
  /// Seeds the ledger when resuming from a snapshot.
  void restore_ledger(CostSummary ledger);

 private:
  ProviderHandle provider_;
  RetryPolicy retry_;
  mutable std::mutex mutex_;
  CostSummary ledger_;
  std::vector<GenerationResult> results_;
};

}  // namespace flowpilot
