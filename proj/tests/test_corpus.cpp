#include <doctest.h>

#include "dstconf/corpus.hpp"

#include "util.hpp"

using namespace dstconf;

TEST_CASE("load_schema reads the bundled fixture") {
  Schema schema = load_schema(testutil::fixture("schema.json"));
  CHECK(schema.domains() == std::vector<std::string>{"hotel", "restaurant", "train"});
  CHECK(schema.slots("train") ==
        std::vector<std::string>{"bookpeople", "day", "departure", "destination", "leaveat"});
  CHECK(schema.slot_spec({"train", "departure"}).description ==
        "the departure station of the train");
  const auto& day = schema.slot_spec({"train", "day"});
  REQUIRE(day.values.has_value());
  CHECK(day.values->size() == 7);
  CHECK_FALSE(schema.slot_spec({"hotel", "name"}).values.has_value());
}

TEST_CASE("load_schema rejects malformed input") {
  testutil::TempDir tmp;
  CHECK_THROWS_AS(load_schema(tmp.file("missing.json")), InvalidInputError);
  CHECK_THROWS_AS(load_schema(tmp.write("bad.json", "[1, 2")), ParseError);
  CHECK_THROWS_AS(load_schema(tmp.write("arr.json", "[]")), ParseError);
  CHECK_THROWS_AS(
      load_schema(tmp.write("nodesc.json", R"({"train": {"day": {"values": null}}})")),
      ParseError);
}

TEST_CASE("load_corpus reads the bundled fixture and checks carryover") {
  Schema schema = load_schema(testutil::fixture("schema.json"));
  auto corpus = load_corpus(testutil::fixture("corpus_eval.json"), schema);
  REQUIRE(corpus.size() == 5);
  CHECK(corpus[0].dialogue_id == "eval-001");
  REQUIRE(corpus[0].turns.size() == 3);

  const Turn& t1 = corpus[0].turns[1];
  CHECK(t1.turn_id == 1);
  CHECK(t1.user_utterance == "I want to leave at 10:45.");
  REQUIRE(t1.system_utterance.has_value());
  CHECK(t1.gold_turn_state.get({"train", "leaveat"}) == "10:45");
  CHECK(t1.gold_state.size() == 4);

  CHECK_FALSE(corpus[0].turns[0].system_utterance.has_value());
  CHECK(corpus[4].turns[1].gold_turn_state.empty());
}

TEST_CASE("load_corpus validation errors") {
  Schema schema = load_schema(testutil::fixture("schema.json"));
  testutil::TempDir tmp;

  auto corpus_with = [&](const std::string& turns) {
    return tmp.write("c.json", R"([{"dialogue_id": "d1", "turns": [)" + turns + "]}]");
  };

  SUBCASE("turn ids must increase from zero") {
    CHECK_THROWS_AS(
        load_corpus(corpus_with(R"({"turn_id": 1, "user": "hi", "gold_state": {},
                                    "gold_turn_state": {}})"),
                    schema),
        CorpusError);
  }
  SUBCASE("gold_turn_state must be contained in gold_state") {
    CHECK_THROWS_AS(
        load_corpus(corpus_with(R"({"turn_id": 0, "user": "hi",
                                    "gold_state": {},
                                    "gold_turn_state": {"train-day": "friday"}})"),
                    schema),
        CorpusError);
  }
  SUBCASE("gold states must be consistent with carryover") {
    CHECK_THROWS_AS(
        load_corpus(
            corpus_with(
                R"({"turn_id": 0, "user": "a", "gold_state": {"train-day": "friday"},
                    "gold_turn_state": {"train-day": "friday"}},
                   {"turn_id": 1, "user": "b", "gold_state": {"train-day": "monday"},
                    "gold_turn_state": {}})"),
            schema),
        CorpusError);
  }
  SUBCASE("unknown slots are rejected against the schema") {
    CHECK_THROWS_AS(
        load_corpus(corpus_with(R"({"turn_id": 0, "user": "hi",
                                    "gold_state": {"taxi-arriveby": "10:00"},
                                    "gold_turn_state": {}})"),
                    schema),
        SchemaError);
  }
}

TEST_CASE("state_to_json / state_from_json round-trip") {
  BeliefState state;
  state.set({"train", "departure"}, "cambridge");
  state.set({"hotel", "area"}, "north");

  nlohmann::json j = state_to_json(state);
  CHECK(j.dump() == R"({"hotel-area":"north","train-departure":"cambridge"})");
  CHECK(state_from_json(j) == state);
  CHECK(state_from_json(nlohmann::json::object()) == BeliefState{});
}
