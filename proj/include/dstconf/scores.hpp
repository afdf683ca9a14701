#pragma once

/**
 * Confidence primitives over token-level log-probabilities.
 *
 * A generated word rarely maps to a single token, so confidences are built
 * from token groups: the tokens whose concatenated text covers one surface
 * string (a slot name or a value) inside the model response.
 *
 *   word confidence   = product of the group's token probabilities
 *   pair confidence   = slot word confidence * value word confidence
 *   minicons score    = mean token log-probability (a log, <= 0)
 *
 * All functions throw InvalidInputError on empty input.
 */

#include "dstconf/llm.hpp"

#include <string>
#include <vector>

namespace dstconf {

/// Numerically stable softmax over raw logits. Invariant under a constant
/// shift of the input; output sums to 1 and every entry is in (0, 1].
std::vector<double> softmax(const std::vector<double>& logits);

/// Tokens covering one surface string inside a model response.
struct TokenGroup {
  std::vector<llm::TokenScore> tokens;

  bool empty() const { return tokens.empty(); }

  /// Concatenation of the covered token texts. May carry surrounding
  /// punctuation or whitespace from the raw token stream.
  std::string surface() const;
};

/// Product of the group's token probabilities: exp(sum of logprobs), in
/// (0, 1]. With as_probability = false the log of that product (the raw
/// logprob sum) is returned instead.
double word_confidence(const TokenGroup& group, bool as_probability = true);

/// Slot word confidence times value word confidence. In (0, 1].
double slot_value_softmax_conf(const TokenGroup& slot, const TokenGroup& value);

/// Mean token log-probability. Always <= 0; exp() of it is a confidence
/// on the same [0, 1] scale as the other estimators.
double minicons_conf(const std::vector<llm::TokenScore>& tokens);
double minicons_conf(const TokenGroup& group);

/// Token spans covering a slot name and its value in a response stream.
struct PairAlignment {
  TokenGroup slot;
  TokenGroup value;

  /// Both surfaces were found.
  bool complete() const { return !slot.empty() && !value.empty(); }
};

/**
 * Greedy left-to-right alignment of a slot name and a value onto the token
 * stream of a generated response. Matching is case-insensitive over the
 * concatenated token texts; the value is searched after the slot's match
 * first, then anywhere. A surface that never occurs leaves its group empty
 * and the caller falls back to scoring the serialized pair directly.
 */
PairAlignment align_pair(const std::vector<llm::TokenScore>& tokens,
                         const std::string& slot_text, const std::string& value_text);

}  // namespace dstconf
