#pragma once

/**
 * Backend-agnostic LLM completion interface with per-token log-probabilities.
 *
 * Three implementations ship with the toolkit:
 *   - MockBackend:   scripted responses for tests and fixtures
 *   - ReplayBackend: record/replay cache over a JSONL file (replay.hpp)
 *   - HttpBackend:   chat-completions endpoint client (http_backend.hpp)
 *
 * Scoring a fixed continuation (non-generative, per-token log P(i|C_<i)) is
 * routed through complete() as a request whose two messages carry the
 * "context"/"target" roles, so the replay cache covers it transparently.
 */

#include "dstconf/errors.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dstconf::llm {

// ---------------------------------------------------------------------------
// Request / response types
// ---------------------------------------------------------------------------

struct Message {
  std::string role;
  std::string text;

  bool operator==(const Message&) const = default;
};

struct LlmRequest {
  std::string model_id;
  std::vector<Message> messages;
  int max_tokens = 256;
  double temperature = 0.0;  // evaluation runs always use 0
  bool want_logprobs = true;

  bool operator==(const LlmRequest&) const = default;
};

struct TokenScore {
  std::string token_text;
  double logprob = 0.0;  // log of a probability, <= 0

  bool operator==(const TokenScore&) const = default;
};

struct LlmExchange {
  LlmRequest request;
  std::string response_text;
  std::vector<TokenScore> tokens;  // empty when the backend has no logprobs;
                                   // otherwise token texts concatenate to
                                   // response_text exactly

  bool operator==(const LlmExchange&) const = default;
};

void to_json(nlohmann::json& j, const Message& m);
void from_json(const nlohmann::json& j, Message& m);
void to_json(nlohmann::json& j, const LlmRequest& r);
void from_json(const nlohmann::json& j, LlmRequest& r);
void to_json(nlohmann::json& j, const TokenScore& t);
void from_json(const nlohmann::json& j, TokenScore& t);
void to_json(nlohmann::json& j, const LlmExchange& e);
void from_json(const nlohmann::json& j, LlmExchange& e);

/// Throws InvalidInputError on an empty message list or negative temperature.
void validate_request(const LlmRequest& request);

/// Throws InvalidInputError when tokens are present but do not concatenate
/// to response_text, or a logprob is positive.
void validate_exchange(const LlmExchange& exchange);

// ---------------------------------------------------------------------------
// Scoring primitives
// ---------------------------------------------------------------------------

/// Extends a candidate-sequence score by one token:
/// score(C + i) = score(C) + log P(i | C).
double sequence_score(double prefix_score, double token_logprob);

/// FNV-1a 64-bit digest. The stable hashing primitive behind replay keys
/// and seeded randomness.
std::uint64_t fnv1a64(std::string_view bytes);

/// Content digest over (model_id, messages, max_tokens, temperature,
/// want_logprobs). Stable across processes and platforms; lowercase hex,
/// fixed 16 characters.
std::string record_replay_key(const LlmRequest& request);

// ---------------------------------------------------------------------------
// Backend interface
// ---------------------------------------------------------------------------

/// True when the request encodes a fixed-continuation scoring call.
bool is_score_request(const LlmRequest& request);

/// Builds the request form score_string() routes through complete().
LlmRequest make_score_request(const std::string& model_id, const std::string& context,
                              const std::string& target);

class LlmBackend {
public:
  virtual ~LlmBackend() = default;

  virtual LlmExchange complete(const LlmRequest& request) = 0;

  /// Per-token log P(i | C_<i) for `target` under `context`. Default routes
  /// through complete(); backends without the capability throw
  /// CapabilityError.
  virtual std::vector<TokenScore> score_string(const std::string& context,
                                               const std::string& target);

  virtual std::string model_id() const = 0;
  virtual std::string name() const = 0;
};

// ---------------------------------------------------------------------------
// Scripted mock backend
// ---------------------------------------------------------------------------

/**
 * Deterministic scripted backend.
 *
 * Script JSON:
 *   {
 *     "rules": [
 *       {"match_all": ["substr", ...],       // all must occur in the prompt
 *        "text": "response",
 *        "logprob_per_token": -0.1           // or explicit "tokens"
 *        "tokens": [["chunk", -0.1], ...]}   // chunks concatenate to text;
 *                                            // a chunk may carry a raw logit
 *                                            // vector instead of a logprob:
 *                                            // ["chunk", [l_chosen, l2, ...]]
 *     ],
 *     "default": {"text": "{}", "logprob_per_token": -0.3},
 *     "score_rules": [
 *       {"match_all": ["substr in target"], "tokens": [...],
 *        "logprob_per_token": -0.2}
 *     ],
 *     "score_default_logprob": -0.25
 *   }
 *
 * Rules are tried in order; the first whose substrings all occur wins.
 * Raw logit vectors are converted to the chosen token's log-softmax score,
 * the first vector entry being the chosen token's logit.
 */
class MockBackend : public LlmBackend {
public:
  static std::shared_ptr<MockBackend> from_file(const std::string& path);
  static std::shared_ptr<MockBackend> from_script(const nlohmann::json& script);

  LlmExchange complete(const LlmRequest& request) override;
  std::string model_id() const override { return "mock"; }
  std::string name() const override { return "mock"; }

  std::size_t call_count() const;
  std::vector<LlmRequest> call_log() const;

private:
  struct Rule {
    std::vector<std::string> match_all;
    std::string text;
    std::vector<TokenScore> tokens;
  };

  explicit MockBackend(const nlohmann::json& script);

  static Rule parse_rule(const nlohmann::json& rule, bool is_score_rule);

  std::vector<Rule> rules_;
  std::optional<Rule> default_rule_;
  std::vector<Rule> score_rules_;
  std::optional<double> score_default_logprob_;

  mutable std::mutex mutex_;
  std::vector<LlmRequest> call_log_;
};

/// Splits text into chunks (leading whitespace + word) that concatenate
/// back to the input exactly. Used when a script gives only a uniform
/// per-token logprob.
std::vector<std::string> chunk_text(const std::string& text);

}  // namespace dstconf::llm
