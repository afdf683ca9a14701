#include "dstconf/corpus.hpp"

#include <nlohmann/json.hpp>

#include <fstream>
#include <sstream>

namespace dstconf {

using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw InvalidInputError("cannot open file: " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

json parse_json_document(const std::string& text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed " + what + " JSON at byte " + std::to_string(e.byte) + ": " +
                         e.what(),
                     e.byte);
  }
}

BeliefState parse_state(const json& obj, const Schema& schema, const std::string& where) {
  if (!obj.is_object()) {
    throw CorpusError(where + ": state must be a JSON object");
  }
  BeliefState state;
  for (const auto& [key, value] : obj.items()) {
    SlotRef ref = SlotRef::from_key(normalize_value(key));
    if (!schema.has_slot(ref)) {
      throw SchemaError(where + ": slot '" + ref.key() + "' is not in the schema");
    }
    if (!value.is_string()) {
      throw CorpusError(where + ": value for '" + ref.key() + "' must be a string");
    }
    state.set(ref, value.get<std::string>());
  }
  return state;
}

}  // namespace

Schema parse_schema(const std::string& json_text) {
  json doc = parse_json_document(json_text, "schema");
  if (!doc.is_object()) {
    throw ParseError("schema root must be a JSON object");
  }
  Schema schema;
  for (const auto& [domain, slots] : doc.items()) {
    if (!slots.is_object()) {
      throw ParseError("schema domain '" + domain + "' must map slots to specs");
    }
    for (const auto& [slot, spec] : slots.items()) {
      SlotSpec parsed;
      if (!spec.contains("description") || !spec["description"].is_string()) {
        throw ParseError("schema entry " + domain + "-" + slot + " needs a string description");
      }
      parsed.description = spec["description"].get<std::string>();
      if (spec.contains("values") && !spec["values"].is_null()) {
        std::vector<std::string> values;
        for (const auto& v : spec["values"]) {
          values.push_back(normalize_value(v.get<std::string>()));
        }
        parsed.values = std::move(values);
      }
      schema.add(normalize_value(domain), normalize_value(slot), std::move(parsed));
    }
  }
  return schema;
}

Schema load_schema(const std::string& path) {
  return parse_schema(read_file(path));
}

std::vector<Dialogue> parse_corpus(const std::string& json_text, const Schema& schema) {
  json doc = parse_json_document(json_text, "corpus");
  if (!doc.is_array()) {
    throw ParseError("corpus root must be a JSON array of dialogues");
  }

  std::vector<Dialogue> dialogues;
  dialogues.reserve(doc.size());
  for (const auto& d : doc) {
    Dialogue dialogue;
    dialogue.dialogue_id = d.at("dialogue_id").get<std::string>();
    const std::string where_d = "dialogue '" + dialogue.dialogue_id + "'";

    BeliefState running;
    int expected_turn_id = 0;
    for (const auto& t : d.at("turns")) {
      Turn turn;
      turn.turn_id = t.at("turn_id").get<int>();
      const std::string where =
          where_d + " turn " + std::to_string(turn.turn_id);
      if (turn.turn_id != expected_turn_id) {
        throw CorpusError(where + ": turn ids must increase from 0 without gaps");
      }
      ++expected_turn_id;

      turn.user_utterance = t.at("user").get<std::string>();
      if (t.contains("system") && !t["system"].is_null()) {
        turn.system_utterance = t["system"].get<std::string>();
      }
      turn.gold_state = parse_state(t.at("gold_state"), schema, where);
      turn.gold_turn_state = parse_state(t.at("gold_turn_state"), schema, where);

      if (!is_subset(turn.gold_turn_state, turn.gold_state)) {
        throw CorpusError(where + ": gold_turn_state is not contained in gold_state");
      }
      running = carryover_merge(running, turn.gold_turn_state);
      if (!(running == turn.gold_state)) {
        throw CorpusError(where +
                          ": gold_state does not equal the carryover of previous state and "
                          "gold_turn_state");
      }
      dialogue.turns.push_back(std::move(turn));
    }
    dialogues.push_back(std::move(dialogue));
  }
  return dialogues;
}

std::vector<Dialogue> load_corpus(const std::string& path, const Schema& schema) {
  return parse_corpus(read_file(path), schema);
}

json state_to_json(const BeliefState& state) {
  json obj = json::object();
  for (const auto& [ref, value] : state.entries()) {
    obj[ref.key()] = value;
  }
  return obj;
}

BeliefState state_from_json(const json& obj) {
  if (!obj.is_object()) {
    throw ParseError("belief state must be a JSON object");
  }
  BeliefState state;
  for (const auto& [key, value] : obj.items()) {
    state.set(SlotRef::from_key(key), value.get<std::string>());
  }
  return state;
}

}  // namespace dstconf
