#include "dstconf/scores.hpp"

#include "dstconf/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>

namespace dstconf {

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) {
    throw InvalidInputError("softmax input must be non-empty");
  }
  const double shift = *std::max_element(logits.begin(), logits.end());
  std::vector<double> out(logits.size());
  double denom = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - shift);
    denom += out[i];
  }
  for (double& v : out) v /= denom;
  return out;
}

std::string TokenGroup::surface() const {
  std::string out;
  for (const auto& t : tokens) out += t.token_text;
  return out;
}

double word_confidence(const TokenGroup& group, bool as_probability) {
  if (group.empty()) {
    throw InvalidInputError("word confidence needs at least one token");
  }
  double sum = 0.0;
  for (const auto& t : group.tokens) sum += t.logprob;
  return as_probability ? std::exp(sum) : sum;
}

double slot_value_softmax_conf(const TokenGroup& slot, const TokenGroup& value) {
  return word_confidence(slot) * word_confidence(value);
}

double minicons_conf(const std::vector<llm::TokenScore>& tokens) {
  if (tokens.empty()) {
    throw InvalidInputError("minicons confidence needs at least one token");
  }
  double sum = 0.0;
  for (const auto& t : tokens) sum += t.logprob;
  return sum / static_cast<double>(tokens.size());
}

double minicons_conf(const TokenGroup& group) {
  return minicons_conf(group.tokens);
}

namespace {

std::string lower(const std::string& s) {
  std::string out = s;
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

/// Tokens overlapping the byte range [begin, end) of the concatenated stream.
TokenGroup cover(const std::vector<llm::TokenScore>& tokens, std::size_t begin,
                 std::size_t end) {
  TokenGroup group;
  std::size_t pos = 0;
  for (const auto& t : tokens) {
    const std::size_t tok_begin = pos;
    const std::size_t tok_end = pos + t.token_text.size();
    if (tok_begin < end && tok_end > begin) {
      group.tokens.push_back(t);
    }
    pos = tok_end;
    if (pos >= end) break;
  }
  return group;
}

}  // namespace

PairAlignment align_pair(const std::vector<llm::TokenScore>& tokens,
                         const std::string& slot_text, const std::string& value_text) {
  PairAlignment out;
  if (tokens.empty() || slot_text.empty() || value_text.empty()) return out;

  std::string stream;
  for (const auto& t : tokens) stream += t.token_text;
  const std::string haystack = lower(stream);
  const std::string slot_needle = lower(slot_text);
  const std::string value_needle = lower(value_text);

  const std::size_t slot_pos = haystack.find(slot_needle);
  if (slot_pos != std::string::npos) {
    out.slot = cover(tokens, slot_pos, slot_pos + slot_needle.size());
  }

  std::size_t value_pos = std::string::npos;
  if (slot_pos != std::string::npos) {
    value_pos = haystack.find(value_needle, slot_pos + slot_needle.size());
  }
  if (value_pos == std::string::npos) {
    value_pos = haystack.find(value_needle);
  }
  if (value_pos != std::string::npos) {
    out.value = cover(tokens, value_pos, value_pos + value_needle.size());
  }
  return out;
}

}  // namespace dstconf
