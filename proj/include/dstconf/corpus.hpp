#pragma once

/**
 * Corpus and schema ingestion.
 *
 * Schema JSON:   {"<domain>": {"<slot>": {"description": str, "values": [str]|null}}}
 * Corpus JSON:   [{"dialogue_id": str,
 *                  "turns": [{"turn_id": int, "user": str, "system": str|null,
 *                             "gold_state": {"<domain>-<slot>": "<value>"},
 *                             "gold_turn_state": {...}}]}]
 *
 * Values are normalized on load. Loading validates turn-id ordering, that
 * every slot exists in the schema, and that the stored cumulative states
 * are reproducible by carryover over the per-turn deltas.
 */

#include "dstconf/dialogue.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace dstconf {

Schema load_schema(const std::string& path);
Schema parse_schema(const std::string& json_text);

std::vector<Dialogue> load_corpus(const std::string& path, const Schema& schema);
std::vector<Dialogue> parse_corpus(const std::string& json_text, const Schema& schema);

/// {"train-departure": "cambridge", ...} in sorted key order.
nlohmann::json state_to_json(const BeliefState& state);

/// Inverse of state_to_json; keys must be "domain-slot". No schema check.
BeliefState state_from_json(const nlohmann::json& obj);

}  // namespace dstconf
