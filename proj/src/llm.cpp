#include "dstconf/llm.hpp"

#include "dstconf/scores.hpp"

#include <cctype>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>

namespace dstconf::llm {

// ---------------------------------------------------------------------------
// JSON serialization
// ---------------------------------------------------------------------------

void to_json(nlohmann::json& j, const Message& m) {
  j = nlohmann::json::array({m.role, m.text});
}

void from_json(const nlohmann::json& j, Message& m) {
  if (!j.is_array() || j.size() != 2) {
    throw ParseError("message must be a [role, text] pair");
  }
  m.role = j.at(0).get<std::string>();
  m.text = j.at(1).get<std::string>();
}

void to_json(nlohmann::json& j, const LlmRequest& r) {
  j = nlohmann::json{{"model_id", r.model_id},
                     {"messages", r.messages},
                     {"max_tokens", r.max_tokens},
                     {"temperature", r.temperature},
                     {"want_logprobs", r.want_logprobs}};
}

void from_json(const nlohmann::json& j, LlmRequest& r) {
  r.model_id = j.at("model_id").get<std::string>();
  r.messages = j.at("messages").get<std::vector<Message>>();
  r.max_tokens = j.at("max_tokens").get<int>();
  r.temperature = j.at("temperature").get<double>();
  r.want_logprobs = j.at("want_logprobs").get<bool>();
}

void to_json(nlohmann::json& j, const TokenScore& t) {
  j = nlohmann::json::array({t.token_text, t.logprob});
}

void from_json(const nlohmann::json& j, TokenScore& t) {
  if (!j.is_array() || j.size() != 2) {
    throw ParseError("token score must be a [text, logprob] pair");
  }
  t.token_text = j.at(0).get<std::string>();
  t.logprob = j.at(1).get<double>();
}

void to_json(nlohmann::json& j, const LlmExchange& e) {
  j = nlohmann::json{{"request", e.request},
                     {"response_text", e.response_text},
                     {"tokens", e.tokens}};
}

void from_json(const nlohmann::json& j, LlmExchange& e) {
  e.request = j.at("request").get<LlmRequest>();
  e.response_text = j.at("response_text").get<std::string>();
  e.tokens = j.at("tokens").get<std::vector<TokenScore>>();
}

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

void validate_request(const LlmRequest& request) {
  if (request.messages.empty()) {
    throw InvalidInputError("request has no messages");
  }
  if (request.temperature < 0.0) {
    throw InvalidInputError("temperature must be >= 0");
  }
  if (request.max_tokens < 0) {
    throw InvalidInputError("max_tokens must be >= 0");
  }
}

void validate_exchange(const LlmExchange& exchange) {
  if (exchange.tokens.empty()) return;
  std::string joined;
  for (const auto& t : exchange.tokens) {
    if (t.logprob > 0.0) {
      throw InvalidInputError("token logprob must be <= 0, got " +
                              std::to_string(t.logprob) + " for token '" + t.token_text + "'");
    }
    joined += t.token_text;
  }
  if (joined != exchange.response_text) {
    throw InvalidInputError("token texts do not concatenate to the response text");
  }
}

// ---------------------------------------------------------------------------
// Scoring primitives
// ---------------------------------------------------------------------------

double sequence_score(double prefix_score, double token_logprob) {
  return prefix_score + token_logprob;
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t hash = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    hash ^= static_cast<std::uint64_t>(c);
    hash *= 1099511628211ULL;
  }
  return hash;
}

namespace {

std::string to_hex16(std::uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[value & 0xF];
    value >>= 4;
  }
  return out;
}

}  // namespace

std::string record_replay_key(const LlmRequest& request) {
  validate_request(request);
  // nlohmann dumps doubles with the shortest round-trip representation and
  // escapes strings deterministically, so the dump is a stable byte stream.
  nlohmann::json canonical = nlohmann::json::array(
      {request.model_id, request.messages, request.max_tokens, request.temperature,
       request.want_logprobs});
  return to_hex16(fnv1a64(canonical.dump()));
}

// ---------------------------------------------------------------------------
// Score-request encoding
// ---------------------------------------------------------------------------

bool is_score_request(const LlmRequest& request) {
  return request.messages.size() == 2 && request.messages[0].role == "context" &&
         request.messages[1].role == "target";
}

LlmRequest make_score_request(const std::string& model_id, const std::string& context,
                              const std::string& target) {
  LlmRequest req;
  req.model_id = model_id;
  req.messages = {{"context", context}, {"target", target}};
  req.max_tokens = 0;
  req.temperature = 0.0;
  req.want_logprobs = true;
  return req;
}

std::vector<TokenScore> LlmBackend::score_string(const std::string& context,
                                                 const std::string& target) {
  if (target.empty()) {
    throw InvalidInputError("score_string target must be non-empty");
  }
  LlmExchange ex = complete(make_score_request(model_id(), context, target));
  return ex.tokens;
}

// ---------------------------------------------------------------------------
// MockBackend
// ---------------------------------------------------------------------------

std::vector<std::string> chunk_text(const std::string& text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    out.push_back(text.substr(start, i - start));
  }
  return out;
}

std::shared_ptr<MockBackend> MockBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open mock script: " + path);
  }
  nlohmann::json script;
  try {
    script = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("mock script is not valid JSON: ") + e.what(), e.byte);
  }
  return from_script(script);
}

std::shared_ptr<MockBackend> MockBackend::from_script(const nlohmann::json& script) {
  return std::shared_ptr<MockBackend>(new MockBackend(script));
}

MockBackend::MockBackend(const nlohmann::json& script) {
  if (!script.is_object()) {
    throw ConfigError("mock script must be a JSON object");
  }
  for (const auto& rule : script.value("rules", nlohmann::json::array())) {
    rules_.push_back(parse_rule(rule, /*is_score_rule=*/false));
  }
  if (script.contains("default")) {
    default_rule_ = parse_rule(script.at("default"), /*is_score_rule=*/false);
  }
  for (const auto& rule : script.value("score_rules", nlohmann::json::array())) {
    score_rules_.push_back(parse_rule(rule, /*is_score_rule=*/true));
  }
  if (script.contains("score_default_logprob")) {
    double lp = script.at("score_default_logprob").get<double>();
    if (lp > 0.0) {
      throw ConfigError("score_default_logprob must be <= 0");
    }
    score_default_logprob_ = lp;
  }
}

MockBackend::Rule MockBackend::parse_rule(const nlohmann::json& rule, bool is_score_rule) {
  Rule out;
  for (const auto& needle : rule.value("match_all", nlohmann::json::array())) {
    out.match_all.push_back(needle.get<std::string>());
  }
  out.text = rule.value("text", std::string());

  if (rule.contains("tokens")) {
    for (const auto& entry : rule.at("tokens")) {
      if (!entry.is_array() || entry.size() != 2) {
        throw ConfigError("mock token entry must be [text, logprob] or [text, [logits...]]");
      }
      TokenScore tok;
      tok.token_text = entry.at(0).get<std::string>();
      if (entry.at(1).is_array()) {
        // Raw logit vector; the first entry is the chosen token's logit.
        auto logits = entry.at(1).get<std::vector<double>>();
        if (logits.empty()) {
          throw ConfigError("mock logit vector must be non-empty");
        }
        tok.logprob = std::log(dstconf::softmax(logits)[0]);
      } else {
        tok.logprob = entry.at(1).get<double>();
      }
      if (tok.logprob > 0.0) {
        throw ConfigError("mock token logprob must be <= 0");
      }
      out.tokens.push_back(std::move(tok));
    }
    std::string joined;
    for (const auto& t : out.tokens) joined += t.token_text;
    const std::string& expect = is_score_rule && !rule.contains("text") ? joined : out.text;
    if (joined != expect) {
      throw ConfigError("mock rule tokens do not concatenate to its text");
    }
    if (is_score_rule) out.text = joined;
  } else if (rule.contains("logprob_per_token")) {
    double lp = rule.at("logprob_per_token").get<double>();
    if (lp > 0.0) {
      throw ConfigError("mock logprob_per_token must be <= 0");
    }
    for (const auto& chunk : chunk_text(out.text)) {
      out.tokens.push_back({chunk, lp});
    }
  } else if (!is_score_rule) {
    // No logprob information; the rule answers without token scores.
  } else {
    throw ConfigError("mock score rule needs tokens or logprob_per_token");
  }
  return out;
}

namespace {

bool matches(const std::vector<std::string>& needles, const std::string& haystack) {
  for (const auto& n : needles) {
    if (haystack.find(n) == std::string::npos) return false;
  }
  return true;
}

std::string render_prompt(const LlmRequest& request) {
  std::string all;
  for (const auto& m : request.messages) {
    all += m.text;
    all += '\n';
  }
  return all;
}

}  // namespace

LlmExchange MockBackend::complete(const LlmRequest& request) {
  validate_request(request);
  {
    std::lock_guard<std::mutex> lock(mutex_);
    call_log_.push_back(request);
  }

  LlmExchange ex;
  ex.request = request;

  if (is_score_request(request)) {
    const std::string& target = request.messages[1].text;
    for (const auto& rule : score_rules_) {
      if (!matches(rule.match_all, target)) continue;
      if (rule.text != target) continue;  // tokens must cover the exact target
      ex.response_text = target;
      ex.tokens = rule.tokens;
      validate_exchange(ex);
      return ex;
    }
    if (!score_default_logprob_) {
      throw CapabilityError("mock has no score rule for target and no score_default_logprob");
    }
    ex.response_text = target;
    for (const auto& chunk : chunk_text(target)) {
      ex.tokens.push_back({chunk, *score_default_logprob_});
    }
    validate_exchange(ex);
    return ex;
  }

  const std::string prompt = render_prompt(request);
  const Rule* hit = nullptr;
  for (const auto& rule : rules_) {
    if (matches(rule.match_all, prompt)) {
      hit = &rule;
      break;
    }
  }
  if (hit == nullptr && default_rule_) {
    hit = &*default_rule_;
  }
  if (hit == nullptr) {
    throw ConfigError("mock script has no matching rule and no default");
  }
  ex.response_text = hit->text;
  if (request.want_logprobs) {
    ex.tokens = hit->tokens;
  }
  validate_exchange(ex);
  return ex;
}

std::size_t MockBackend::call_count() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return call_log_.size();
}

std::vector<LlmRequest> MockBackend::call_log() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return call_log_;
}

}  // namespace dstconf::llm
