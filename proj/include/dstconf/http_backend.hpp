#pragma once

/**
 * Chat-completions client for OpenAI-style HTTP endpoints.
 *
 * Request body:  {"model", "messages": [{"role","content"},...], "max_tokens",
 *                 "temperature", "logprobs": true}
 * Response body: {"choices": [{"message": {"content"}, "logprobs":
 *                 {"content": [{"token","logprob"},...]}}]}
 *
 * Transport failures and retryable statuses (429, 5xx) are retried with
 * exponential backoff; anything else raises TransportError. The endpoint
 * cannot score a fixed continuation, so score requests raise CapabilityError
 * and callers fall back to generation-derived scores.
 *
 * The API key is never taken from the command line or a config file; it is
 * read from the DSTCONF_API_KEY environment variable.
 */

#include "dstconf/llm.hpp"

#include <optional>
#include <string>

namespace dstconf::llm {

struct HttpOptions {
  std::string endpoint = "http://localhost:8080";  // scheme://host[:port]
  std::string path = "/v1/chat/completions";
  std::string model_id = "gpt-4o-mini";
  std::optional<std::string> api_key;  // defaults to DSTCONF_API_KEY
  int timeout_ms = 30000;
  int max_attempts = 3;
  int backoff_ms = 250;  // doubled after each failed attempt
};

class HttpBackend : public LlmBackend {
public:
  explicit HttpBackend(HttpOptions options);

  LlmExchange complete(const LlmRequest& request) override;

  /// The endpoint only generates; it cannot return log P(i|C_<i) for a fixed
  /// target, so this always throws CapabilityError.
  std::vector<TokenScore> score_string(const std::string& context,
                                       const std::string& target) override;

  std::string model_id() const override { return options_.model_id; }
  std::string name() const override { return "http"; }

private:
  HttpOptions options_;
};

/// DSTCONF_API_KEY, or nullopt when unset.
std::optional<std::string> api_key_from_env();

}  // namespace dstconf::llm
