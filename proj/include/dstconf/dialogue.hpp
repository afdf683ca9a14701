#pragma once

/**
 * Core dialogue-state types: slots, belief states, turns, dialogues, the
 * slot schema, and scored slot-value rows.
 *
 * Belief states map (domain, slot) -> value. All values are normalized
 * (lowercased, whitespace-trimmed) at the edges so equality checks inside
 * the toolkit are plain string comparison.
 */

#include "dstconf/errors.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dstconf {

// ---------------------------------------------------------------------------
// Normalization
// ---------------------------------------------------------------------------

/// Lowercase (ASCII) and trim surrounding whitespace.
std::string normalize_value(const std::string& raw);

// ---------------------------------------------------------------------------
// SlotRef
// ---------------------------------------------------------------------------

/// Identifies one slot: ("train", "departure"). Both parts are lowercase
/// identifiers with no surrounding whitespace.
struct SlotRef {
  std::string domain;
  std::string slot;

  SlotRef() = default;
  SlotRef(std::string domain_, std::string slot_);

  auto operator<=>(const SlotRef&) const = default;

  /// "train-departure"
  std::string key() const { return domain + "-" + slot; }

  /// Parse "train-departure" back into a SlotRef. Splits on the first '-'.
  static SlotRef from_key(const std::string& key);
};

// ---------------------------------------------------------------------------
// BeliefState
// ---------------------------------------------------------------------------

/// The tracked user goal: at most one normalized, non-empty value per slot.
class BeliefState {
public:
  BeliefState() = default;

  /// Insert or overwrite. Value is normalized; empty-after-normalization
  /// values are rejected.
  void set(const SlotRef& ref, const std::string& value);

  bool contains(const SlotRef& ref) const { return entries_.count(ref) > 0; }
  std::optional<std::string> get(const SlotRef& ref) const;

  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

  const std::map<SlotRef, std::string>& entries() const { return entries_; }

  bool operator==(const BeliefState&) const = default;

private:
  std::map<SlotRef, std::string> entries_;
};

/// MinTL-style slot carryover: every entry of prev survives, entries in
/// turn_delta overwrite matching slots. Nothing is ever deleted.
BeliefState carryover_merge(const BeliefState& prev, const BeliefState& turn_delta);

/// True when every entry of inner appears in outer with an equal value.
bool is_subset(const BeliefState& inner, const BeliefState& outer);

// ---------------------------------------------------------------------------
// Turn / Dialogue
// ---------------------------------------------------------------------------

struct Turn {
  int turn_id = 0;
  std::string user_utterance;
  std::optional<std::string> system_utterance;
  BeliefState gold_state;       // cumulative up to and including this turn
  BeliefState gold_turn_state;  // this turn's delta
};

struct Dialogue {
  std::string dialogue_id;
  std::vector<Turn> turns;
};

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

struct SlotSpec {
  std::string description;                        // non-empty; goes into prompts verbatim
  std::optional<std::vector<std::string>> values; // categorical value list, if any
};

/// Domain/slot catalogue. Immutable once loaded; iteration order is sorted
/// by name so prompt construction is deterministic.
class Schema {
public:
  void add(const std::string& domain, const std::string& slot, SlotSpec spec);

  bool has_domain(const std::string& domain) const;
  bool has_slot(const SlotRef& ref) const;
  const SlotSpec& slot_spec(const SlotRef& ref) const;  // throws SchemaError

  std::vector<std::string> domains() const;
  std::vector<std::string> slots(const std::string& domain) const;  // throws SchemaError

private:
  std::map<std::string, std::map<std::string, SlotSpec>> domains_;
};

// ---------------------------------------------------------------------------
// ScoredSlotValue
// ---------------------------------------------------------------------------

/// One predicted slot-value pair with its confidence scores and (once
/// labeled) its correctness. Scores a backend cannot produce stay absent;
/// every pair carries at least the verbalized or softmax score by the time
/// it reaches a dump.
struct ScoredSlotValue {
  SlotRef slot;
  std::string value;
  std::optional<double> conf_softmax;     // in [0,1]
  std::optional<double> conf_minicons;    // mean token log-probability, <= 0
  std::optional<double> conf_verbalized;  // in [0,1]
  std::optional<double> conf_self_probe;  // in [0,1]
  std::optional<double> conf_combined;    // in [0,1]
  std::optional<bool> correct;

  /// Throws InvalidInputError when a present score is out of range.
  void validate() const;
};

/// Sets each item's `correct` flag: true iff gold holds the same slot with
/// an equal value after normalization.
std::vector<ScoredSlotValue> label_correctness(std::vector<ScoredSlotValue> predicted,
                                               const BeliefState& gold);

}  // namespace dstconf
