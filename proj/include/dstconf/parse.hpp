#pragma once

/**
 * Lenient parsing of model-generated text: belief-state objects with
 * verbalized confidences, self-probe confidence replies, and difficulty
 * labels.
 *
 * Models are instructed to answer with
 *     {state: {_entity_: _value_}, conf: X}
 * but real outputs drift: single quotes, bare keys, missing "state" wrapper,
 * prose around the object, per-pair or trailing confidences, truncation.
 * parse_belief_output() accepts all of that; only the complete absence of a
 * brace-delimited object is an error.
 */

#include "dstconf/dialogue.hpp"

#include <optional>
#include <string>
#include <vector>

namespace dstconf {

struct ParsedPair {
  SlotRef slot;
  std::string value;  // normalized
  std::optional<double> verbalized_conf;  // in [0,1] when present

  bool operator==(const ParsedPair&) const = default;
};

struct ParsedPrediction {
  std::vector<ParsedPair> pairs;           // parse order, schema-valid only
  std::vector<std::string> warnings;       // dropped pairs, odd confidences
};

/**
 * Extracts the first balanced-brace object from raw and reads slot-value
 * pairs and confidences out of it.
 *
 * Accepted shapes (all quote styles, bare tokens included):
 *   {departure: cambridge}
 *   {state: {departure: cambridge}, conf: 0.8}          trailing conf fills
 *   {departure: cambridge, conf: 0.9, day: monday}      conf binds leftward
 *   {state: {...}, conf: {departure: 0.9}}              per-slot conf map
 *   {state: {departure: {value: cambridge, conf: 0.9}}} value objects
 *
 * Slot keys resolve under `domain`; pairs whose slot is not in the schema
 * are dropped with a warning. Values normalize per normalize_value();
 * empty or none-like values ("none", "null", "unknown") drop the pair.
 * Confidences clamp to [0,1].
 *
 * Throws ParseError when raw contains no '{' at all; every other
 * malformation degrades to warnings, an unterminated object is read as if
 * closed at end of text.
 */
ParsedPrediction parse_belief_output(const std::string& raw, const Schema& schema,
                                     const std::string& domain);

/**
 * Confidence extraction from a self-probe reply, one value per queried pair.
 * Numbers are scanned left to right ("85%" counts as 0.85); values in [0,1]
 * are preferred, the last ones win. When fewer than n_pairs usable numbers
 * appear, the last one is broadcast to all pairs; a reply with no number at
 * all yields an empty vector and callers fall back to the 0.5 default.
 */
std::vector<double> parse_self_probe(const std::string& raw, std::size_t n_pairs);

/// Single-pair convenience: last usable number, or absent.
std::optional<double> parse_self_probe_single(const std::string& raw);

/**
 * Domain classification answer: the earliest standalone occurrence of any
 * candidate domain name (case-insensitive) wins; absent when none occurs.
 */
std::optional<std::string> parse_domain(const std::string& raw,
                                        const std::vector<std::string>& domains);

enum class Difficulty { Easy, Medium, Hard, Other };

/// Case-insensitive first standalone occurrence of easy/medium/hard wins;
/// anything else is Other.
Difficulty parse_difficulty(const std::string& raw);

std::string to_string(Difficulty level);

/// Canonical JSON serialization of a prediction:
///   {"state": {"slot": "value", ...}, "conf": {"slot": 0.9, ...}}
/// Slots are rendered bare (no domain prefix) in sorted order; the conf
/// object holds only pairs that carry a confidence and is omitted when none
/// do. parse_belief_output() over this text under the same domain returns
/// the same pairs (round-trip identity).
std::string serialize_prediction(const std::vector<ParsedPair>& pairs);

/// Python-dict style state rendering used inside prompts:
///   {'departure': 'cambridge', 'day': 'monday'}
/// Pair order is preserved.
std::string render_pairs(const std::vector<std::pair<std::string, std::string>>& pairs);

}  // namespace dstconf
