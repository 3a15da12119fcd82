#include <cstdlib>

#include <httplib.h>

#include "flowpilot/error.hpp"
#include "flowpilot/llm.hpp"

namespace flowpilot {

HttpProvider::HttpProvider(HttpProviderOptions options) : options_(std::move(options)) {
  require(!options_.base_url.empty(), "HTTP provider needs a base URL");
  require(!options_.model.empty(), "HTTP provider needs a model name");
}

Completion HttpProvider::complete(const GenerationRequest& request) {
  const char* key = options_.api_key_env.empty() ? nullptr : std::getenv(options_.api_key_env.c_str());
  if (!options_.api_key_env.empty() && (!key || !*key))
    fail(ErrorCode::AuthFailure, "environment variable " + options_.api_key_env + " is not set");

  httplib::Client client(options_.base_url);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(options_.timeout);
  client.set_write_timeout(options_.timeout);
  httplib::Headers headers;
  if (key && *key) headers.emplace("Authorization", std::string("Bearer ") + key);

  nlohmann::json messages = nlohmann::json::array();
  if (!request.system_text.empty()) messages.push_back({{"role", "system"}, {"content", request.system_text}});
  messages.push_back({{"role", "user"}, {"content", request.user_text}});
  const nlohmann::json body = {{"model", options_.model},
                               {"messages", messages},
                               {"temperature", request.temperature},
                               {"max_tokens", request.max_output_chars / 4 + 1}};

  auto res = client.Post(options_.path, headers, body.dump(), "application/json");
  if (!res) fail(ErrorCode::TransientProviderFailure, "transport error: " + httplib::to_string(res.error()));
  if (res->status == 401 || res->status == 403)
    fail(ErrorCode::AuthFailure, "provider rejected credentials (HTTP " + std::to_string(res->status) + ")");
  if (res->status == 429 || res->status >= 500)
    fail(ErrorCode::TransientProviderFailure, "provider returned HTTP " + std::to_string(res->status));
  if (res->status != 200)
    fail(ErrorCode::ProviderUnavailable, "provider returned HTTP " + std::to_string(res->status) + ": " + res->body);

  try {
    const auto doc = nlohmann::json::parse(res->body);
    Completion c;
    const auto& content = doc.at("choices").at(0).at("message").at("content");
    c.text = content.is_null() ? std::string() : content.get<std::string>();
    if (doc.contains("usage")) {
      const auto& u = doc.at("usage");
      if (u.contains("prompt_tokens")) c.input_tokens = u.at("prompt_tokens").get<std::int64_t>();
      if (u.contains("completion_tokens")) c.output_tokens = u.at("completion_tokens").get<std::int64_t>();
    }
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::ProviderUnavailable, std::string("unreadable provider response: ") + e.what());
  }
}

}  // namespace flowpilot
