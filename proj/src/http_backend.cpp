#include "dstconf/http_backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <thread>

namespace dstconf::llm {

namespace {

bool retryable_status(int status) {
  return status == 429 || (status >= 500 && status < 600);
}

nlohmann::json build_body(const HttpOptions& options, const LlmRequest& request) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", m.role}, {"content", m.text}});
  }
  std::string model = request.model_id.empty() ? options.model_id : request.model_id;
  return nlohmann::json{{"model", model},
                        {"messages", std::move(messages)},
                        {"max_tokens", request.max_tokens},
                        {"temperature", request.temperature},
                        {"logprobs", request.want_logprobs}};
}

LlmExchange parse_response(const LlmRequest& request, const std::string& body) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(body);
  } catch (const nlohmann::json::parse_error& e) {
    throw TransportError(std::string("endpoint returned invalid JSON: ") + e.what());
  }
  const auto& choices = j.at("choices");
  if (!choices.is_array() || choices.empty()) {
    throw TransportError("endpoint response has no choices");
  }
  const auto& choice = choices.at(0);

  LlmExchange ex;
  ex.request = request;
  ex.response_text = choice.at("message").at("content").get<std::string>();

  if (choice.contains("logprobs") && choice.at("logprobs").is_object() &&
      choice.at("logprobs").contains("content")) {
    for (const auto& entry : choice.at("logprobs").at("content")) {
      TokenScore tok;
      tok.token_text = entry.at("token").get<std::string>();
      // Clamp float noise; a probability's log never exceeds 0.
      tok.logprob = std::min(entry.at("logprob").get<double>(), 0.0);
      ex.tokens.push_back(std::move(tok));
    }
    std::string joined;
    for (const auto& t : ex.tokens) joined += t.token_text;
    if (joined != ex.response_text) {
      // Endpoint tokenization disagrees with its own content field; drop the
      // scores rather than propagate a broken alignment.
      ex.tokens.clear();
    }
  }
  return ex;
}

}  // namespace

std::optional<std::string> api_key_from_env() {
  const char* key = std::getenv("DSTCONF_API_KEY");
  if (key == nullptr || *key == '\0') return std::nullopt;
  return std::string(key);
}

HttpBackend::HttpBackend(HttpOptions options) : options_(std::move(options)) {
  if (!options_.api_key) {
    options_.api_key = api_key_from_env();
  }
  if (options_.max_attempts < 1) {
    throw ConfigError("max_attempts must be >= 1");
  }
}

LlmExchange HttpBackend::complete(const LlmRequest& request) {
  validate_request(request);
  if (is_score_request(request)) {
    throw CapabilityError("HTTP endpoint cannot score a fixed continuation");
  }

  const std::string body = build_body(options_, request).dump();
  std::string last_error;
  int backoff = options_.backoff_ms;

  for (int attempt = 1; attempt <= options_.max_attempts; ++attempt) {
    if (attempt > 1) {
      std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
      backoff *= 2;
    }

    httplib::Client client(options_.endpoint);
    client.set_connection_timeout(std::chrono::milliseconds(options_.timeout_ms));
    client.set_read_timeout(std::chrono::milliseconds(options_.timeout_ms));
    httplib::Headers headers;
    if (options_.api_key) {
      headers.emplace("Authorization", "Bearer " + *options_.api_key);
    }

    auto res = client.Post(options_.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport failure: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 200) {
      LlmExchange ex = parse_response(request, res->body);
      validate_exchange(ex);
      return ex;
    }
    last_error = "HTTP " + std::to_string(res->status) + ": " + res->body;
    if (!retryable_status(res->status)) {
      throw TransportError(last_error);
    }
  }
  throw TransportError("request failed after " + std::to_string(options_.max_attempts) +
                       " attempts; last error: " + last_error);
}

std::vector<TokenScore> HttpBackend::score_string(const std::string&, const std::string&) {
  throw CapabilityError("HTTP endpoint cannot score a fixed continuation");
}

}  // namespace dstconf::llm
