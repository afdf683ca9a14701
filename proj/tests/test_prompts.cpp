#include "dstconf/prompts.hpp"

#include "dstconf/corpus.hpp"
#include "dstconf/errors.hpp"
#include "util.hpp"

#include <doctest.h>

#include <cmath>
#include <set>
#include <string>
#include <vector>

using namespace dstconf;
using namespace dstconf::prompts;

namespace {

Turn make_turn(int id, const std::string& user, std::optional<std::string> system) {
  Turn t;
  t.turn_id = id;
  t.user_utterance = user;
  t.system_utterance = std::move(system);
  return t;
}

FewShotExample make_example(int id, const std::string& snippet,
                            const std::vector<std::pair<std::string, std::string>>& delta,
                            double conf = 1.0) {
  FewShotExample ex;
  ex.id = id;
  ex.context_snippet = snippet;
  for (const auto& [slot, value] : delta) {
    ex.turn_delta.set(SlotRef("train", slot), value);
  }
  ex.verbalized_conf = conf;
  return ex;
}

bool contains(const std::string& haystack, const std::string& needle) {
  return haystack.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("history renders one labeled line per utterance") {
  std::vector<Turn> history{
      make_turn(0, "i need a train to london", std::nullopt),
      make_turn(1, "leaving friday", "Where are you travelling from?"),
  };
  CHECK(render_history(history) ==
        "Customer: i need a train to london\n"
        "Assistant: Where are you travelling from?\n"
        "Customer: leaving friday");
  CHECK(render_history({}) == "");
}

TEST_CASE("query snippet is the last two utterances") {
  std::vector<Turn> history{
      make_turn(0, "first ask", std::nullopt),
      make_turn(1, "second ask", "assistant reply"),
  };
  CHECK(query_snippet(history) == "assistant reply second ask");
  CHECK(query_snippet({history[0]}) == "first ask");
  CHECK(query_snippet({}) == "");
}

TEST_CASE("domain prompt lists domains and ends with the answer cue") {
  TemplateSet templates = TemplateSet::load(testutil::template_dir());
  std::vector<Turn> history{make_turn(0, "i need a cheap hotel", std::nullopt)};

  auto messages = build_domain_prompt(history, {"train", "hotel"}, {}, templates);
  REQUIRE(messages.size() == 1);
  CHECK(messages[0].role == "user");
  CHECK(contains(messages[0].text, "- train\n- hotel"));
  CHECK(contains(messages[0].text, "Customer: i need a cheap hotel"));
  CHECK(contains(messages[0].text, "Answer:"));
  CHECK_FALSE(contains(messages[0].text, "Example:"));

  CHECK_THROWS_AS(build_domain_prompt({}, {"train"}, {}, templates), InvalidInputError);
  CHECK_THROWS_AS(build_domain_prompt(history, {}, {}, templates), InvalidInputError);
}

TEST_CASE("slot prompt cardinality follows the description scope") {
  TemplateSet templates = TemplateSet::load(testutil::template_dir());
  Schema schema = load_schema(testutil::fixture("schema.json"));
  std::vector<Turn> history{make_turn(0, "train to london on friday", std::nullopt)};

  SUBCASE("all descriptions in one prompt") {
    auto prompts = build_slot_prompt({Scope::All, Scope::All}, "train", schema, {}, history,
                                     std::nullopt, templates);
    REQUIRE(prompts.size() == 1);
    const std::string& text = prompts[0][0].text;
    CHECK(contains(text, "In the domain of \"train\""));
    for (const auto& slot : schema.slots("train")) {
      CHECK(contains(text, "- \"" + slot + "\" that specifies "));
    }
  }

  SUBCASE("one prompt per slot, sorted") {
    auto prompts = build_slot_prompt({Scope::One, Scope::All}, "train", schema, {}, history,
                                     std::nullopt, templates);
    const auto slots = schema.slots("train");
    REQUIRE(prompts.size() == slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i) {
      CHECK(contains(prompts[i][0].text, "extract \"" + slots[i] + "\" slot"));
    }
  }

  SUBCASE("a target slot narrows One scope to a single prompt") {
    auto prompts = build_slot_prompt({Scope::One, Scope::All}, "train", schema, {}, history,
                                     SlotRef("train", "day"), templates);
    REQUIRE(prompts.size() == 1);
    CHECK(contains(prompts[0][0].text, "extract \"day\" slot which specifies"));
  }

  SUBCASE("bad inputs") {
    CHECK_THROWS_AS(build_slot_prompt({Scope::One, Scope::All}, "train", schema, {}, history,
                                      SlotRef("hotel", "area"), templates),
                    InvalidInputError);
    CHECK_THROWS_AS(build_slot_prompt({Scope::All, Scope::All}, "taxi", schema, {}, history,
                                      std::nullopt, templates),
                    SchemaError);
    CHECK_THROWS_AS(build_slot_prompt({Scope::All, Scope::All}, "train", schema, {}, {},
                                      std::nullopt, templates),
                    InvalidInputError);
  }
}

TEST_CASE("example blocks render per the example scope") {
  TemplateSet templates = TemplateSet::load(testutil::template_dir());
  Schema schema = load_schema(testutil::fixture("schema.json"));
  std::vector<Turn> history{make_turn(0, "train to london", std::nullopt)};
  std::vector<FewShotExample> examples{
      make_example(0, "i want to go to cambridge", {{"destination", "cambridge"},
                                                    {"day", "friday"}}, 0.9),
  };

  SUBCASE("full example under All scope") {
    auto prompts = build_slot_prompt({Scope::All, Scope::All}, "train", schema, examples,
                                     history, std::nullopt, templates);
    const std::string& text = prompts[0][0].text;
    CHECK(contains(text, "---------------------Example:\n"
                         "context: i want to go to cambridge\n"
                         "belief state: {state: {'day': 'friday', "
                         "'destination': 'cambridge'}, conf: 0.9}"));
  }

  SUBCASE("One example scope trims to a single pair in an All prompt") {
    auto prompts = build_slot_prompt({Scope::All, Scope::One}, "train", schema, examples,
                                     history, std::nullopt, templates);
    const std::string& text = prompts[0][0].text;
    CHECK(contains(text, "{state: {'day': 'friday'}, conf: 0.9}"));
    CHECK_FALSE(contains(text, "'destination': 'cambridge'"));
  }

  SUBCASE("per-slot prompts keep only the matching pair") {
    auto prompts = build_slot_prompt({Scope::One, Scope::One}, "train", schema, examples,
                                     history, SlotRef("train", "destination"), templates);
    const std::string& text = prompts[0][0].text;
    CHECK(contains(text, "{state: {'destination': 'cambridge'}, conf: 0.9}"));
    CHECK_FALSE(contains(text, "'day'"));
  }

  SUBCASE("an example with no matching pair disappears") {
    auto prompts = build_slot_prompt({Scope::One, Scope::One}, "train", schema, examples,
                                     history, SlotRef("train", "leaveat"), templates);
    CHECK_FALSE(contains(prompts[0][0].text, "Example:"));
  }

  SUBCASE("zero-shot prompts carry no example scaffolding") {
    auto prompts = build_slot_prompt({Scope::All, Scope::All}, "train", schema, {}, history,
                                     std::nullopt, templates);
    CHECK_FALSE(contains(prompts[0][0].text, "Example:"));
    CHECK(contains(prompts[0][0].text, "that slot-value.\nDialogue:"));
  }
}

TEST_CASE("self-probe prompts") {
  TemplateSet templates = TemplateSet::load(testutil::template_dir());

  SUBCASE("turn mode takes the whole state") {
    auto messages = build_self_probe_prompt(
        SelfProbeMode::Turn, "'Customer: to london'",
        {{"destination", "london"}, {"day", "friday"}}, templates);
    REQUIRE(messages.size() == 1);
    CHECK(contains(messages[0].text, "How likely is the below state"));
    CHECK(contains(messages[0].text,
                   "State: {'destination': 'london', 'day': 'friday'}"));
    CHECK(contains(messages[0].text, "'Customer: to london'"));
  }

  SUBCASE("slot mode takes exactly one pair") {
    auto messages = build_self_probe_prompt(SelfProbeMode::Slot, "snippet",
                                            {{"day", "friday"}}, templates);
    CHECK(contains(messages[0].text, "How likely is the below slot-value pair"));
    CHECK(contains(messages[0].text, "Pair: {'day': 'friday'}"));
  }

  SUBCASE("invalid requests") {
    CHECK_THROWS_AS(build_self_probe_prompt(SelfProbeMode::None, "s", {{"a", "b"}}, templates),
                    InvalidInputError);
    CHECK_THROWS_AS(build_self_probe_prompt(SelfProbeMode::Turn, "s", {}, templates),
                    InvalidInputError);
    CHECK_THROWS_AS(build_self_probe_prompt(SelfProbeMode::Slot, "s",
                                            {{"a", "1"}, {"b", "2"}}, templates),
                    InvalidInputError);
  }
}

TEST_CASE("difficulty prompt includes history only when present") {
  TemplateSet templates = TemplateSet::load(testutil::template_dir());

  auto with = build_difficulty_prompt("Customer: i need a taxi", "Customer: hello", templates);
  CHECK(contains(with[0].text, "given dialogue history\nCustomer: hello"));
  CHECK(contains(with[0].text, "Choose the level of hardness from (Easy/Medium/Hard)."));

  auto without = build_difficulty_prompt("Customer: i need a taxi", "", templates);
  CHECK_FALSE(contains(without[0].text, "given dialogue history"));

  CHECK_THROWS_AS(build_difficulty_prompt("", "", templates), InvalidInputError);
}

TEST_CASE("lowercase tokenizer splits on non-alphanumerics") {
  CHECK(tokenize_lc("Hello, World-42!") == std::vector<std::string>({"hello", "world", "42"}));
  CHECK(tokenize_lc("") == std::vector<std::string>{});
  CHECK(tokenize_lc("  a  ") == std::vector<std::string>{"a"});
}

TEST_CASE("few-shot retrieval ranks by cosine similarity") {
  // Every snippet has four distinct tokens, so each norm is 2 and overlap
  // with the four-token query gives similarity overlap/4.
  std::vector<FewShotExample> examples{
      make_example(0, "red hotel in london", {{"day", "monday"}}),
      make_example(1, "blue train to london", {{"destination", "london"}}),
      make_example(2, "blue train to cambridge", {{"destination", "cambridge"}}),
  };
  FewShotIndex index(examples);
  CHECK(index.size() == 3);

  std::vector<Turn> history{make_turn(0, "blue train to london", std::nullopt)};
  auto top = index.select(history, 2);
  REQUIRE(top.size() == 2);
  CHECK(top[0].id == 1);  // similarity 1.0
  CHECK(top[1].id == 2);  // similarity 0.75 beats 0.25

  SUBCASE("k bounds") {
    CHECK(index.select(history, 0).empty());
    CHECK(index.select(history, 10).size() == 3);
    CHECK_THROWS_AS(index.select(history, -1), InvalidInputError);
  }

  SUBCASE("no token overlap still returns k examples") {
    std::vector<Turn> other{make_turn(0, "zzz qqq", std::nullopt)};
    CHECK(index.select(other, 2).size() == 2);
  }
}

TEST_CASE("equal similarity breaks ties by ascending id regardless of build order") {
  std::vector<FewShotExample> examples{
      make_example(7, "same words here", {{"day", "monday"}}),
      make_example(3, "same words here", {{"day", "tuesday"}}),
      make_example(5, "same words here", {{"day", "sunday"}}),
  };
  FewShotIndex index(examples);
  std::vector<Turn> history{make_turn(0, "same words here", std::nullopt)};
  auto top = index.select(history, 3);
  REQUIRE(top.size() == 3);
  CHECK(top[0].id == 3);
  CHECK(top[1].id == 5);
  CHECK(top[2].id == 7);
}

TEST_CASE("index rejects empty snippets") {
  CHECK_THROWS_AS(FewShotIndex({make_example(0, "", {{"day", "monday"}})}), InvalidInputError);
}

TEST_CASE("corpus indexing keeps only turns with a non-empty delta") {
  Schema schema = load_schema(testutil::fixture("schema.json"));
  auto corpus = load_corpus(testutil::fixture("corpus_eval.json"), schema);
  FewShotIndex index = FewShotIndex::from_corpus(corpus);

  std::size_t expected = 0;
  for (const auto& dialogue : corpus) {
    for (const auto& turn : dialogue.turns) {
      if (!turn.gold_turn_state.empty()) ++expected;
    }
  }
  CHECK(index.size() == expected);
  CHECK(expected < 12);  // the fixture has turns with empty deltas

  // Asking for everything returns each stored example exactly once.
  std::vector<Turn> history{make_turn(0, "anything", std::nullopt)};
  auto all = index.select(history, static_cast<int>(index.size()));
  std::set<int> ids;
  for (const auto& ex : all) ids.insert(ex.id);
  CHECK(ids.size() == expected);
}
