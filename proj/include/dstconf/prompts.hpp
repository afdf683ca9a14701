#pragma once

/**
 * Prompt construction for every call family in the pipeline: domain
 * classification, slot filling (four All/One strategy combinations),
 * self-probing, and turn-difficulty assessment, plus lexical few-shot
 * example retrieval.
 *
 * All builders are pure: equal inputs produce byte-identical prompts.
 */

#include "dstconf/dialogue.hpp"
#include "dstconf/llm.hpp"
#include "dstconf/templates.hpp"

#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dstconf::prompts {

enum class Scope { All, One };

/// The four slot-filling strategies: slot descriptions for All/One slot(s)
/// crossed with examples covering All/One slot(s).
struct PromptStrategy {
  Scope description_scope = Scope::All;
  Scope example_scope = Scope::All;
};

enum class SelfProbeMode { None, Turn, Slot };

struct FewShotExample {
  int id = 0;                    // stored id; retrieval tie-break, ascending
  std::string context_snippet;   // last two utterances of a training turn
  BeliefState turn_delta;
  double verbalized_conf = 1.0;  // rendered into the example's conf field
};

/// "Assistant: ..." / "Customer: ..." lines, one utterance per line.
std::string render_history(const std::vector<Turn>& history);

/// The last two utterances of the history, joined with one space. Used both
/// as the retrieval query and as the self-probe context snippet.
std::string query_snippet(const std::vector<Turn>& history);

std::vector<llm::Message> build_domain_prompt(const std::vector<Turn>& history,
                                              const std::vector<std::string>& domains,
                                              const std::vector<FewShotExample>& examples,
                                              const TemplateSet& templates);

/**
 * Slot-filling prompts for one turn. Returns exactly one message list when
 * description_scope is All, else one per slot of the domain in sorted order
 * (or only target_slot's when given). Unknown domain throws SchemaError.
 */
std::vector<std::vector<llm::Message>> build_slot_prompt(
    const PromptStrategy& strategy, const std::string& domain, const Schema& schema,
    const std::vector<FewShotExample>& examples, const std::vector<Turn>& history,
    const std::optional<SlotRef>& target_slot, const TemplateSet& templates);

/**
 * Self-probe prompt over predicted pairs (bare slot name, value). Turn mode
 * takes the full predicted delta; Slot mode exactly one pair. None mode,
 * an empty state, or a pair-count mismatch throw InvalidInputError.
 */
std::vector<llm::Message> build_self_probe_prompt(
    SelfProbeMode mode, const std::string& history_snippet,
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const TemplateSet& templates);

/// Difficulty prompt; the history block is omitted when history is empty.
std::vector<llm::Message> build_difficulty_prompt(const std::string& utterance,
                                                  const std::string& history,
                                                  const TemplateSet& templates);

/// Lowercased alphanumeric-run tokens.
std::vector<std::string> tokenize_lc(const std::string& text);

/**
 * Immutable retrieval index over few-shot examples. Similarity is
 * term-frequency cosine between the query (last two utterances) and each
 * stored snippet; results sort by (similarity desc, id asc), so permuting
 * the build order never changes a selection.
 */
class FewShotIndex {
public:
  explicit FewShotIndex(std::vector<FewShotExample> examples);

  /// One example per turn with a non-empty delta, ids in corpus order,
  /// snippets from the turn's last two utterances.
  static FewShotIndex from_corpus(const std::vector<Dialogue>& corpus);

  /// Top-k by similarity against the history's last two utterances.
  /// k = 0 gives an empty list; k beyond the index size gives everything.
  std::vector<FewShotExample> select(const std::vector<Turn>& history, int k) const;

  std::size_t size() const { return entries_.size(); }

private:
  struct Entry {
    FewShotExample example;
    std::map<std::string, int> tf;
    double norm = 0.0;
  };
  std::vector<Entry> entries_;
};

}  // namespace dstconf::prompts
