#include "dstconf/prompts.hpp"

#include "dstconf/errors.hpp"
#include "dstconf/parse.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>

namespace dstconf::prompts {

std::string render_history(const std::vector<Turn>& history) {
  std::string out;
  for (const auto& turn : history) {
    if (turn.system_utterance) {
      out += "Assistant: " + *turn.system_utterance + "\n";
    }
    out += "Customer: " + turn.user_utterance + "\n";
  }
  if (!out.empty()) out.pop_back();
  return out;
}

std::string query_snippet(const std::vector<Turn>& history) {
  std::vector<std::string> utterances;
  for (const auto& turn : history) {
    if (turn.system_utterance) utterances.push_back(*turn.system_utterance);
    utterances.push_back(turn.user_utterance);
  }
  std::string out;
  const std::size_t start = utterances.size() > 2 ? utterances.size() - 2 : 0;
  for (std::size_t i = start; i < utterances.size(); ++i) {
    if (!out.empty()) out += " ";
    out += utterances[i];
  }
  return out;
}

namespace {

/// Number format shared with the JSON serializer (shortest round-trip).
std::string fmt_conf(double v) { return nlohmann::json(v).dump(); }

std::vector<std::pair<std::string, std::string>> bare_pairs(const BeliefState& state) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& [ref, value] : state.entries()) {
    out.emplace_back(ref.slot, value);
  }
  return out;
}

/// Example block in the house style; empty examples render as nothing so a
/// zero-shot prompt carries no example scaffolding at all.
std::string render_examples(const std::vector<FewShotExample>& examples, Scope example_scope,
                            const std::optional<std::string>& only_slot) {
  std::string out;
  for (const auto& ex : examples) {
    auto pairs = bare_pairs(ex.turn_delta);
    if (example_scope == Scope::One && !pairs.empty()) {
      if (only_slot) {
        std::erase_if(pairs, [&](const auto& p) { return p.first != *only_slot; });
      } else {
        pairs.resize(1);
      }
    }
    if (pairs.empty()) continue;
    out += "---------------------Example:\n";
    out += "context: " + ex.context_snippet + "\n";
    out += "belief state: {state: " + render_pairs(pairs) +
           ", conf: " + fmt_conf(ex.verbalized_conf) + "}\n";
  }
  return out;
}

std::vector<llm::Message> as_user_message(std::string text) {
  return {{"user", std::move(text)}};
}

}  // namespace

std::vector<llm::Message> build_domain_prompt(const std::vector<Turn>& history,
                                              const std::vector<std::string>& domains,
                                              const std::vector<FewShotExample>& examples,
                                              const TemplateSet& templates) {
  if (history.empty()) {
    throw InvalidInputError("domain prompt needs at least one turn of history");
  }
  if (domains.empty()) {
    throw InvalidInputError("domain prompt needs a non-empty domain list");
  }
  std::string domain_list;
  for (const auto& d : domains) {
    domain_list += "- " + d + "\n";
  }
  domain_list.pop_back();

  return as_user_message(templates.render(
      "domain_classification", {{"domains", domain_list},
                                {"examples", render_examples(examples, Scope::All, std::nullopt)},
                                {"history", render_history(history)}}));
}

std::vector<std::vector<llm::Message>> build_slot_prompt(
    const PromptStrategy& strategy, const std::string& domain, const Schema& schema,
    const std::vector<FewShotExample>& examples, const std::vector<Turn>& history,
    const std::optional<SlotRef>& target_slot, const TemplateSet& templates) {
  if (history.empty()) {
    throw InvalidInputError("slot prompt needs at least one turn of history");
  }
  const std::vector<std::string> slots = schema.slots(domain);  // SchemaError if unknown
  const std::string history_text = render_history(history);

  std::vector<std::vector<llm::Message>> out;
  if (strategy.description_scope == Scope::All) {
    std::string descriptions;
    for (const auto& slot : slots) {
      descriptions +=
          "- \"" + slot + "\" that specifies " + schema.slot_spec({domain, slot}).description +
          "\n";
    }
    if (!descriptions.empty()) descriptions.pop_back();
    out.push_back(as_user_message(templates.render(
        "slot_all",
        {{"domain", domain},
         {"slot_descriptions", descriptions},
         {"examples", render_examples(examples, strategy.example_scope, std::nullopt)},
         {"history", history_text}})));
    return out;
  }

  std::vector<std::string> targets;
  if (target_slot) {
    if (target_slot->domain != domain) {
      throw InvalidInputError("target slot '" + target_slot->key() +
                              "' is not in domain '" + domain + "'");
    }
    targets.push_back(target_slot->slot);
  } else {
    targets = slots;
  }
  for (const auto& slot : targets) {
    out.push_back(as_user_message(templates.render(
        "slot_one",
        {{"domain", domain},
         {"slot", slot},
         {"description", schema.slot_spec({domain, slot}).description},
         {"examples", render_examples(examples, strategy.example_scope, slot)},
         {"history", history_text}})));
  }
  return out;
}

std::vector<llm::Message> build_self_probe_prompt(
    SelfProbeMode mode, const std::string& history_snippet,
    const std::vector<std::pair<std::string, std::string>>& pairs,
    const TemplateSet& templates) {
  if (mode == SelfProbeMode::None) {
    throw InvalidInputError("self-probe prompt requested with probing disabled");
  }
  if (pairs.empty()) {
    throw InvalidInputError("self-probe needs at least one predicted pair");
  }
  if (mode == SelfProbeMode::Slot && pairs.size() != 1) {
    throw InvalidInputError("slot-level self-probe takes exactly one pair");
  }
  if (mode == SelfProbeMode::Turn) {
    return as_user_message(templates.render(
        "self_probe_turn", {{"history", history_snippet}, {"state", render_pairs(pairs)}}));
  }
  return as_user_message(templates.render(
      "self_probe_slot", {{"history", history_snippet}, {"pair", render_pairs(pairs)}}));
}

std::vector<llm::Message> build_difficulty_prompt(const std::string& utterance,
                                                  const std::string& history,
                                                  const TemplateSet& templates) {
  if (utterance.empty()) {
    throw InvalidInputError("difficulty prompt needs a non-empty utterance");
  }
  const std::string block = history.empty() ? "" : "given dialogue history\n" + history + "\n";
  return as_user_message(
      templates.render("difficulty", {{"utterance", utterance}, {"history_block", block}}));
}

// ---------------------------------------------------------------------------
// Few-shot retrieval
// ---------------------------------------------------------------------------

std::vector<std::string> tokenize_lc(const std::string& text) {
  std::vector<std::string> out;
  std::string current;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      current += static_cast<char>(std::tolower(c));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

namespace {

std::map<std::string, int> term_frequencies(const std::string& text) {
  std::map<std::string, int> tf;
  for (const auto& token : tokenize_lc(text)) ++tf[token];
  return tf;
}

double tf_norm(const std::map<std::string, int>& tf) {
  double sum = 0.0;
  for (const auto& [_, count] : tf) sum += static_cast<double>(count) * count;
  return std::sqrt(sum);
}

double cosine(const std::map<std::string, int>& a, double a_norm,
              const std::map<std::string, int>& b, double b_norm) {
  if (a_norm == 0.0 || b_norm == 0.0) return 0.0;
  double dot = 0.0;
  for (const auto& [token, count] : a) {
    auto it = b.find(token);
    if (it != b.end()) dot += static_cast<double>(count) * it->second;
  }
  return dot / (a_norm * b_norm);
}

}  // namespace

FewShotIndex::FewShotIndex(std::vector<FewShotExample> examples) {
  entries_.reserve(examples.size());
  for (auto& ex : examples) {
    if (ex.context_snippet.empty()) {
      throw InvalidInputError("few-shot example " + std::to_string(ex.id) +
                              " has an empty context snippet");
    }
    Entry entry;
    entry.tf = term_frequencies(ex.context_snippet);
    entry.norm = tf_norm(entry.tf);
    entry.example = std::move(ex);
    entries_.push_back(std::move(entry));
  }
}

FewShotIndex FewShotIndex::from_corpus(const std::vector<Dialogue>& corpus) {
  std::vector<FewShotExample> examples;
  int next_id = 0;
  for (const auto& dialogue : corpus) {
    std::vector<Turn> history;
    for (const auto& turn : dialogue.turns) {
      history.push_back(turn);
      if (turn.gold_turn_state.empty()) continue;
      FewShotExample ex;
      ex.id = next_id++;
      ex.context_snippet = query_snippet(history);
      ex.turn_delta = turn.gold_turn_state;
      ex.verbalized_conf = 1.0;
      examples.push_back(std::move(ex));
    }
  }
  return FewShotIndex(std::move(examples));
}

std::vector<FewShotExample> FewShotIndex::select(const std::vector<Turn>& history,
                                                 int k) const {
  if (k < 0) {
    throw InvalidInputError("few-shot k must be >= 0");
  }
  if (k == 0 || entries_.empty()) return {};

  const auto query_tf = term_frequencies(query_snippet(history));
  const double query_norm = tf_norm(query_tf);

  std::vector<std::pair<double, std::size_t>> ranked;  // (similarity, entry index)
  ranked.reserve(entries_.size());
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    ranked.emplace_back(cosine(query_tf, query_norm, entries_[i].tf, entries_[i].norm), i);
  }
  std::sort(ranked.begin(), ranked.end(), [this](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return entries_[a.second].example.id < entries_[b.second].example.id;
  });

  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(k), ranked.size());
  std::vector<FewShotExample> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) {
    out.push_back(entries_[ranked[i].second].example);
  }
  return out;
}

}  // namespace dstconf::prompts
