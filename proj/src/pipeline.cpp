#include "dstconf/pipeline.hpp"

#include "dstconf/parse.hpp"
#include "dstconf/replay.hpp"
#include "dstconf/scores.hpp"
#include "dstconf/templates.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#ifndef DSTCONF_TEMPLATE_DIR
#define DSTCONF_TEMPLATE_DIR "templates"
#endif

namespace dstconf {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config
// ---------------------------------------------------------------------------

namespace {

prompts::Scope scope_from_string(const std::string& s) {
  if (s == "all") return prompts::Scope::All;
  if (s == "one") return prompts::Scope::One;
  throw ConfigError("scope must be 'all' or 'one', got '" + s + "'");
}

std::string scope_to_string(prompts::Scope s) {
  return s == prompts::Scope::All ? "all" : "one";
}

prompts::SelfProbeMode probe_from_string(const std::string& s) {
  if (s == "none") return prompts::SelfProbeMode::None;
  if (s == "turn") return prompts::SelfProbeMode::Turn;
  if (s == "slot") return prompts::SelfProbeMode::Slot;
  throw ConfigError("self_probe must be 'none', 'turn' or 'slot', got '" + s + "'");
}

std::string probe_to_string(prompts::SelfProbeMode m) {
  switch (m) {
    case prompts::SelfProbeMode::None: return "none";
    case prompts::SelfProbeMode::Turn: return "turn";
    case prompts::SelfProbeMode::Slot: return "slot";
  }
  return "none";
}

void check_verbalized_source(const std::string& s) {
  if (s != "auto" && s != "generation" && s != "probe") {
    throw ConfigError("verbalized_source must be 'auto', 'generation' or 'probe', got '" + s +
                      "'");
  }
}

}  // namespace

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open config file: " + path);
  }
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("config file is not valid JSON: " + std::string(e.what()), e.byte);
  }
  if (!j.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }

  RunConfig c;
  for (const auto& [key, value] : j.items()) {
    if (key == "corpus") c.corpus_path = value.get<std::string>();
    else if (key == "schema") c.schema_path = value.get<std::string>();
    else if (key == "train_corpus") c.train_corpus_path = value.get<std::string>();
    else if (key == "backend") c.backend = value.get<std::string>();
    else if (key == "mock_script") c.mock_script_path = value.get<std::string>();
    else if (key == "replay_file") c.replay_path = value.get<std::string>();
    else if (key == "replay_mode") c.replay_mode = value.get<std::string>();
    else if (key == "replay_fallback") c.replay_fallback = value.get<std::string>();
    else if (key == "endpoint") c.http.endpoint = value.get<std::string>();
    else if (key == "http_path") c.http.path = value.get<std::string>();
    else if (key == "model") c.model_id = value.get<std::string>();
    else if (key == "max_tokens") c.max_tokens = value.get<int>();
    else if (key == "timeout_ms") c.http.timeout_ms = value.get<int>();
    else if (key == "max_attempts") c.http.max_attempts = value.get<int>();
    else if (key == "backoff_ms") c.http.backoff_ms = value.get<int>();
    else if (key == "description_scope") c.strategy.description_scope = scope_from_string(value.get<std::string>());
    else if (key == "example_scope") c.strategy.example_scope = scope_from_string(value.get<std::string>());
    else if (key == "few_shot_k") c.few_shot_k = value.get<int>();
    else if (key == "self_probe") c.self_probe = probe_from_string(value.get<std::string>());
    else if (key == "verbalized_source") c.verbalized_source = value.get<std::string>();
    else if (key == "combiner") c.combiner_path = value.get<std::string>();
    else if (key == "combiner_intercept") c.combiner_intercept = value.get<bool>();
    else if (key == "ece_bins") c.ece_bins = value.get<int>();
    else if (key == "seed") c.rng_seed = value.get<std::uint64_t>();
    else if (key == "out_dir") c.output_dir = value.get<std::string>();
    else if (key == "concurrency") c.concurrency = value.get<int>();
    else if (key == "template_dir") c.template_dir = value.get<std::string>();
    else throw ConfigError("unknown config key: '" + key + "'");
  }
  check_verbalized_source(c.verbalized_source);
  return c;
}

std::shared_ptr<llm::LlmBackend> make_backend(const RunConfig& config) {
  auto make_inner = [&](const std::string& kind) -> std::shared_ptr<llm::LlmBackend> {
    if (kind == "mock") {
      if (config.mock_script_path.empty()) {
        throw ConfigError("mock backend needs mock_script");
      }
      return llm::MockBackend::from_file(config.mock_script_path);
    }
    if (kind == "http") {
      llm::HttpOptions options = config.http;
      options.model_id = config.model_id;
      return std::make_shared<llm::HttpBackend>(options);
    }
    throw ConfigError("unknown backend kind: '" + kind + "'");
  };

  if (config.backend == "mock" || config.backend == "http") {
    return make_inner(config.backend);
  }
  if (config.backend == "replay") {
    if (config.replay_path.empty()) {
      throw ConfigError("replay backend needs replay_file");
    }
    llm::ReplayMode mode;
    if (config.replay_mode == "strict") mode = llm::ReplayMode::Strict;
    else if (config.replay_mode == "hybrid") mode = llm::ReplayMode::Hybrid;
    else throw ConfigError("replay_mode must be 'strict' or 'hybrid'");
    std::shared_ptr<llm::LlmBackend> fallback;
    if (mode == llm::ReplayMode::Hybrid) {
      if (config.replay_fallback.empty()) {
        throw ConfigError("hybrid replay needs replay_fallback (mock or http)");
      }
      fallback = make_inner(config.replay_fallback);
    }
    return std::make_shared<llm::ReplayBackend>(config.replay_path, mode, fallback);
  }
  throw ConfigError("unknown backend: '" + config.backend + "'");
}

// ---------------------------------------------------------------------------
// Row serialization
// ---------------------------------------------------------------------------

namespace {

json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::optional<double> opt_from(const json& j, const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

json to_json(const DumpRow& row) {
  return json{{"dialogue_id", row.dialogue_id},
              {"turn_id", row.turn_id},
              {"domain", row.domain},
              {"slot", row.item.slot.slot},
              {"value", row.item.value},
              {"conf_softmax", opt_json(row.item.conf_softmax)},
              {"conf_minicons", opt_json(row.item.conf_minicons)},
              {"conf_verbalized", opt_json(row.item.conf_verbalized)},
              {"conf_self_probe", opt_json(row.item.conf_self_probe)},
              {"conf_combined", opt_json(row.item.conf_combined)},
              {"correct", row.item.correct ? json(*row.item.correct) : json(nullptr)}};
}

DumpRow dump_row_from_json(const json& j) {
  DumpRow row;
  row.dialogue_id = j.at("dialogue_id").get<std::string>();
  row.turn_id = j.at("turn_id").get<int>();
  row.domain = j.at("domain").get<std::string>();
  row.item.slot = SlotRef(row.domain, j.at("slot").get<std::string>());
  row.item.value = j.at("value").get<std::string>();
  row.item.conf_softmax = opt_from(j, "conf_softmax");
  row.item.conf_minicons = opt_from(j, "conf_minicons");
  row.item.conf_verbalized = opt_from(j, "conf_verbalized");
  row.item.conf_self_probe = opt_from(j, "conf_self_probe");
  row.item.conf_combined = opt_from(j, "conf_combined");
  if (j.contains("correct") && !j.at("correct").is_null()) {
    row.item.correct = j.at("correct").get<bool>();
  }
  row.item.validate();
  return row;
}

json to_json(const TurnRow& row) {
  return json{{"dialogue_id", row.dialogue_id},
              {"turn_id", row.turn_id},
              {"domain", row.domain},
              {"failed", row.failed},
              {"gold_state", state_to_json(row.gold_state)},
              {"predicted_state", state_to_json(row.predicted_state)}};
}

TurnRow turn_row_from_json(const json& j) {
  TurnRow row;
  row.dialogue_id = j.at("dialogue_id").get<std::string>();
  row.turn_id = j.at("turn_id").get<int>();
  row.domain = j.at("domain").get<std::string>();
  row.failed = j.value("failed", false);
  row.gold_state = state_from_json(j.at("gold_state"));
  row.predicted_state = state_from_json(j.at("predicted_state"));
  return row;
}

namespace {

std::vector<json> load_jsonl(const std::string& path, const char* what) {
  std::ifstream in(path);
  if (!in) {
    throw InvalidInputError(std::string("cannot open ") + what + ": " + path);
  }
  std::vector<json> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw ParseError(std::string(what) + " " + path + " line " + std::to_string(lineno) +
                       " is not valid JSON: " + e.what());
    }
  }
  return out;
}

}  // namespace

std::vector<DumpRow> load_dump(const std::string& path) {
  std::vector<DumpRow> rows;
  for (const auto& j : load_jsonl(path, "dump")) rows.push_back(dump_row_from_json(j));
  return rows;
}

std::vector<TurnRow> load_turns(const std::string& path) {
  std::vector<TurnRow> rows;
  for (const auto& j : load_jsonl(path, "turns file")) rows.push_back(turn_row_from_json(j));
  return rows;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace {

struct LogLine {
  std::string dialogue_id;
  int turn_id = 0;
  std::string event;
  std::string detail;
};

struct TurnOutcome {
  TurnRow turn_row;
  std::vector<DumpRow> rows;
  std::vector<LogLine> logs;
  std::size_t llm_calls = 0;
};

struct EvalContext {
  const RunConfig* config = nullptr;
  const Schema* schema = nullptr;
  const TemplateSet* templates = nullptr;
  std::shared_ptr<llm::LlmBackend> backend;
  const prompts::FewShotIndex* few_shot = nullptr;  // null when zero-shot
  std::optional<CombinerModel> combiner;
  std::vector<std::string> domains;
};

llm::LlmRequest make_request(const EvalContext& ctx, std::vector<llm::Message> messages) {
  llm::LlmRequest req;
  req.model_id = ctx.config->model_id;
  req.messages = std::move(messages);
  req.max_tokens = ctx.config->max_tokens;
  req.temperature = 0.0;
  req.want_logprobs = true;
  return req;
}

std::string truncate_detail(const std::string& text) {
  constexpr std::size_t kMax = 160;
  if (text.size() <= kMax) return text;
  return text.substr(0, kMax) + "...";
}

/// A predicted pair plus the exchange it was parsed from.
struct PendingPair {
  ParsedPair pair;
  const llm::LlmExchange* exchange = nullptr;
  const std::string* prompt_text = nullptr;
};

/// Softmax and minicons scores for one pair, via token alignment or,
/// failing that, the score-a-fixed-string pathway.
void score_pair(const EvalContext& ctx, const PendingPair& pending, ScoredSlotValue& item,
                TurnOutcome& outcome) {
  const auto& tokens = pending.exchange->tokens;
  if (!tokens.empty()) {
    PairAlignment aligned = align_pair(tokens, pending.pair.slot.slot, pending.pair.value);
    if (aligned.complete()) {
      item.conf_softmax = slot_value_softmax_conf(aligned.slot, aligned.value);
      std::vector<llm::TokenScore> pair_tokens = aligned.slot.tokens;
      pair_tokens.insert(pair_tokens.end(), aligned.value.tokens.begin(),
                         aligned.value.tokens.end());
      item.conf_minicons = minicons_conf(pair_tokens);
      return;
    }
  }
  // Alignment impossible; score the serialized pair as a fixed continuation.
  // Built as an explicit request (not via score_string) so the configured
  // model id flows into the replay key.
  const std::string target =
      render_pairs({{pending.pair.slot.slot, pending.pair.value}});
  try {
    auto ex = ctx.backend->complete(
        llm::make_score_request(ctx.config->model_id, *pending.prompt_text, target));
    ++outcome.llm_calls;
    if (!ex.tokens.empty()) {
      TokenGroup group{ex.tokens};
      item.conf_softmax = word_confidence(group);
      item.conf_minicons = minicons_conf(ex.tokens);
    }
  } catch (const CapabilityError&) {
    outcome.logs.push_back({outcome.turn_row.dialogue_id, outcome.turn_row.turn_id,
                            "score_fallback_unavailable",
                            pending.pair.slot.key() + "=" + pending.pair.value});
  }
}

TurnOutcome eval_turn(const EvalContext& ctx, const Dialogue& dialogue,
                      const std::vector<Turn>& history, const BeliefState& prev_state) {
  const Turn& turn = history.back();
  const RunConfig& config = *ctx.config;

  TurnOutcome outcome;
  outcome.turn_row.dialogue_id = dialogue.dialogue_id;
  outcome.turn_row.turn_id = turn.turn_id;
  outcome.turn_row.gold_state = turn.gold_state;

  auto log = [&](const char* event, std::string detail) {
    outcome.logs.push_back(
        {dialogue.dialogue_id, turn.turn_id, event, truncate_detail(std::move(detail))});
  };

  std::vector<prompts::FewShotExample> examples;
  if (ctx.few_shot != nullptr) {
    examples = ctx.few_shot->select(history, config.few_shot_k);
  }

  // 1. Domain classification.
  auto domain_exchange = ctx.backend->complete(make_request(
      ctx, prompts::build_domain_prompt(history, ctx.domains, examples, *ctx.templates)));
  ++outcome.llm_calls;
  const auto domain = parse_domain(domain_exchange.response_text, ctx.domains);
  if (!domain) {
    log("domain_failure", domain_exchange.response_text);
    outcome.turn_row.failed = true;
    outcome.turn_row.predicted_state = prev_state;
    return outcome;
  }
  outcome.turn_row.domain = *domain;

  // 2. Slot filling per strategy.
  const auto prompt_lists =
      prompts::build_slot_prompt(config.strategy, *domain, *ctx.schema, examples, history,
                                 std::nullopt, *ctx.templates);
  std::vector<std::string> prompt_targets;  // bare slot per prompt; empty for All
  if (config.strategy.description_scope == prompts::Scope::One) {
    prompt_targets = ctx.schema->slots(*domain);
  } else {
    prompt_targets.assign(prompt_lists.size(), std::string());
  }

  std::vector<llm::LlmExchange> exchanges;
  std::vector<std::string> prompt_texts;
  exchanges.reserve(prompt_lists.size());
  for (const auto& messages : prompt_lists) {
    prompt_texts.push_back(messages.front().text);
    exchanges.push_back(ctx.backend->complete(make_request(ctx, messages)));
    ++outcome.llm_calls;
  }

  std::vector<PendingPair> pending;
  for (std::size_t i = 0; i < exchanges.size(); ++i) {
    ParsedPrediction parsed;
    try {
      parsed = parse_belief_output(exchanges[i].response_text, *ctx.schema, *domain);
    } catch (const ParseError& e) {
      log("parse_failure", std::string(e.what()) + " | " + exchanges[i].response_text);
      outcome.turn_row.failed = true;
      continue;
    }
    for (const auto& w : parsed.warnings) log("parse_warning", w);
    for (auto& pair : parsed.pairs) {
      if (!prompt_targets[i].empty() && pair.slot.slot != prompt_targets[i]) {
        log("parse_warning", "dropped off-target slot '" + pair.slot.slot +
                                 "' from single-slot prompt for '" + prompt_targets[i] + "'");
        continue;
      }
      // Across per-slot prompts a slot can only repeat if the model strayed;
      // the later mention wins, matching the parser's own rule.
      std::erase_if(pending,
                    [&](const PendingPair& p) { return p.pair.slot == pair.slot; });
      pending.push_back({std::move(pair), &exchanges[i], &prompt_texts[i]});
    }
  }

  // 3. Estimator scores.
  std::vector<ScoredSlotValue> items(pending.size());
  for (std::size_t i = 0; i < pending.size(); ++i) {
    items[i].slot = pending[i].pair.slot;
    items[i].value = pending[i].pair.value;
    items[i].conf_verbalized = pending[i].pair.verbalized_conf.value_or(0.5);
    score_pair(ctx, pending[i], items[i], outcome);
  }

  // 4. Self-probing over the predicted delta.
  if (config.self_probe != prompts::SelfProbeMode::None && !pending.empty()) {
    std::vector<std::pair<std::string, std::string>> bare;
    bare.reserve(pending.size());
    for (const auto& p : pending) bare.emplace_back(p.pair.slot.slot, p.pair.value);
    const std::string snippet = "'" + prompts::render_history({turn}) + "'";

    if (config.self_probe == prompts::SelfProbeMode::Turn) {
      auto probe = ctx.backend->complete(make_request(
          ctx, prompts::build_self_probe_prompt(prompts::SelfProbeMode::Turn, snippet, bare,
                                                *ctx.templates)));
      ++outcome.llm_calls;
      auto confs = parse_self_probe(probe.response_text, items.size());
      if (confs.empty()) {
        log("probe_unparsed", probe.response_text);
      }
      for (std::size_t i = 0; i < items.size(); ++i) {
        items[i].conf_self_probe = confs.empty() ? 0.5 : confs[i];
      }
    } else {
      for (std::size_t i = 0; i < items.size(); ++i) {
        auto probe = ctx.backend->complete(make_request(
            ctx, prompts::build_self_probe_prompt(prompts::SelfProbeMode::Slot, snippet,
                                                  {bare[i]}, *ctx.templates)));
        ++outcome.llm_calls;
        auto confs = parse_self_probe(probe.response_text, 1);
        if (confs.empty()) {
          log("probe_unparsed", probe.response_text);
        }
        items[i].conf_self_probe = confs.empty() ? 0.5 : confs.front();
      }
    }
  }

  // 5. Combined score.
  if (ctx.combiner) {
    for (auto& item : items) {
      if (!item.conf_softmax || !item.conf_minicons) continue;
      double verbalized = *item.conf_verbalized;
      if (config.verbalized_source == "probe") {
        verbalized = item.conf_self_probe.value_or(0.5);
      } else if (config.verbalized_source == "auto" && item.conf_self_probe) {
        verbalized = *item.conf_self_probe;
      }
      item.conf_combined = combine(*ctx.combiner, *item.conf_softmax,
                                   std::exp(*item.conf_minicons), verbalized);
    }
  }

  // 6. Labels, carryover, dump rows.
  items = label_correctness(std::move(items), turn.gold_state);

  BeliefState delta;
  for (const auto& item : items) {
    item.validate();
    delta.set(item.slot, item.value);
  }
  outcome.turn_row.predicted_state = carryover_merge(prev_state, delta);

  outcome.rows.reserve(items.size());
  for (auto& item : items) {
    outcome.rows.push_back(
        {dialogue.dialogue_id, turn.turn_id, *domain, std::move(item)});
  }
  return outcome;
}

std::vector<TurnOutcome> eval_dialogue(const EvalContext& ctx, const Dialogue& dialogue) {
  std::vector<TurnOutcome> outcomes;
  outcomes.reserve(dialogue.turns.size());
  std::vector<Turn> history;
  BeliefState state;
  for (const auto& turn : dialogue.turns) {
    history.push_back(turn);
    outcomes.push_back(eval_turn(ctx, dialogue, history, state));
    state = outcomes.back().turn_row.predicted_state;
  }
  return outcomes;
}

std::string config_summary(const RunConfig& config) {
  std::ostringstream out;
  out << "backend=" << config.backend
      << " corpus=" << fs::path(config.corpus_path).filename().string()
      << " strategy=" << scope_to_string(config.strategy.description_scope) << "/"
      << scope_to_string(config.strategy.example_scope) << " few_shot_k=" << config.few_shot_k
      << " self_probe=" << probe_to_string(config.self_probe)
      << " verbalized_source=" << config.verbalized_source << " ece_bins=" << config.ece_bins
      << " seed=" << config.rng_seed;
  return out.str();
}

void validate_eval_config(const RunConfig& config) {
  if (config.corpus_path.empty() || !fs::exists(config.corpus_path)) {
    throw ConfigError("corpus file not found: '" + config.corpus_path + "'");
  }
  if (config.schema_path.empty() || !fs::exists(config.schema_path)) {
    throw ConfigError("schema file not found: '" + config.schema_path + "'");
  }
  if (config.few_shot_k < 0) {
    throw ConfigError("few_shot_k must be >= 0");
  }
  if (config.few_shot_k > 0) {
    if (config.train_corpus_path.empty() || !fs::exists(config.train_corpus_path)) {
      throw ConfigError("few_shot_k > 0 needs an existing train_corpus");
    }
  }
  if (config.ece_bins < 1) {
    throw ConfigError("ece_bins must be >= 1");
  }
  if (config.concurrency < 1) {
    throw ConfigError("concurrency must be >= 1");
  }
  check_verbalized_source(config.verbalized_source);
}

}  // namespace

MetricsReport compute_report(const std::vector<DumpRow>& rows,
                             const std::vector<TurnRow>& turns, int ece_bins,
                             const std::string& verbalized_source) {
  check_verbalized_source(verbalized_source);
  MetricsReport report;
  report.pairs = rows.size();
  report.turns = turns.size();
  {
    std::vector<std::string> ids;
    for (const auto& t : turns) ids.push_back(t.dialogue_id);
    std::sort(ids.begin(), ids.end());
    report.dialogues = static_cast<std::size_t>(
        std::distance(ids.begin(), std::unique(ids.begin(), ids.end())));
    for (const auto& t : turns) {
      if (t.failed) ++report.failed_turns;
    }
  }

  if (!turns.empty()) {
    std::vector<BeliefState> predicted, gold;
    predicted.reserve(turns.size());
    gold.reserve(turns.size());
    for (const auto& t : turns) {
      predicted.push_back(t.predicted_state);
      gold.push_back(t.gold_state);
    }
    report.jga = jga(predicted, gold);
    SlotF f = slot_f(predicted, gold);
    report.slot_precision = f.precision;
    report.slot_recall = f.recall;
    report.slot_f1 = f.f1;
  }

  const auto feature = [&](const DumpRow& row,
                           const std::string& name) -> std::optional<double> {
    const auto& it = row.item;
    if (name == "softmax") return it.conf_softmax;
    if (name == "minicons") {
      if (!it.conf_minicons) return std::nullopt;
      return std::exp(*it.conf_minicons);
    }
    if (name == "verbalized") {
      if (verbalized_source == "probe") return it.conf_self_probe;
      if (verbalized_source == "auto" && it.conf_self_probe) return it.conf_self_probe;
      return it.conf_verbalized;
    }
    if (name == "self_probe") return it.conf_self_probe;
    return it.conf_combined;  // "combined"
  };

  for (const std::string name : {"softmax", "minicons", "verbalized", "self_probe",
                                 "combined"}) {
    EstimatorMetrics em;
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& row : rows) {
      auto score = feature(row, name);
      if (!score || !row.item.correct) continue;
      scores.push_back(*score);
      labels.push_back(*row.item.correct ? 1 : 0);
    }
    em.count = scores.size();
    if (!scores.empty()) {
      try {
        em.auc = roc_auc(scores, labels);
      } catch (const UndefinedMetricError&) {
      }
      em.ece = ece(scores, labels, ece_bins);
      try {
        std::vector<double> label_values(labels.begin(), labels.end());
        em.pearson = pearson(scores, label_values);
      } catch (const UndefinedMetricError&) {
      }
    }
    // The self-probe and combined columns only exist under the matching
    // configs; suppress their all-absent rows entirely.
    if (em.count == 0 && (name == "self_probe" || name == "combined")) continue;
    report.estimators[name] = em;
  }
  return report;
}

EvalResult run_eval(const RunConfig& config) {
  validate_eval_config(config);

  const Schema schema = load_schema(config.schema_path);
  const std::vector<Dialogue> corpus = load_corpus(config.corpus_path, schema);
  const std::string template_dir =
      config.template_dir.empty() ? DSTCONF_TEMPLATE_DIR : config.template_dir;
  const TemplateSet templates = TemplateSet::load(template_dir);

  EvalContext ctx;
  ctx.config = &config;
  ctx.schema = &schema;
  ctx.templates = &templates;
  ctx.backend = make_backend(config);
  ctx.domains = schema.domains();

  std::optional<prompts::FewShotIndex> few_shot;
  if (config.few_shot_k > 0) {
    few_shot.emplace(
        prompts::FewShotIndex::from_corpus(load_corpus(config.train_corpus_path, schema)));
    ctx.few_shot = &*few_shot;
  }
  if (!config.combiner_path.empty()) {
    ctx.combiner = load_combiner(config.combiner_path);
  }

  // Dialogue-level worker pool; turns within a dialogue stay sequential
  // because of carryover. Results land in corpus order regardless of
  // scheduling.
  std::vector<std::vector<TurnOutcome>> results(corpus.size());
  std::vector<std::exception_ptr> failures(corpus.size());
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= corpus.size()) return;
      try {
        results[i] = eval_dialogue(ctx, corpus[i]);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  const std::size_t n_workers = std::min<std::size_t>(
      static_cast<std::size_t>(config.concurrency), std::max<std::size_t>(corpus.size(), 1));
  if (n_workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(n_workers);
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (const auto& failure : failures) {
    if (failure) std::rethrow_exception(failure);
  }

  // Aggregate in corpus order.
  std::vector<DumpRow> rows;
  std::vector<TurnRow> turns;
  std::vector<LogLine> logs;
  std::size_t llm_calls = 0;
  for (const auto& dialogue : results) {
    for (const auto& outcome : dialogue) {
      llm_calls += outcome.llm_calls;
      turns.push_back(outcome.turn_row);
      rows.insert(rows.end(), outcome.rows.begin(), outcome.rows.end());
      logs.insert(logs.end(), outcome.logs.begin(), outcome.logs.end());
    }
  }

  MetricsReport report =
      compute_report(rows, turns, config.ece_bins, config.verbalized_source);
  report.llm_calls = llm_calls;
  report.config_summary = config_summary(config);

  fs::create_directories(config.output_dir);
  EvalResult result;
  result.report = report;
  result.dump_path = (fs::path(config.output_dir) / "dump.jsonl").string();
  result.turns_path = (fs::path(config.output_dir) / "turns.jsonl").string();
  result.report_path = (fs::path(config.output_dir) / "report.json").string();
  result.log_path = (fs::path(config.output_dir) / "run_log.jsonl").string();

  {
    std::ofstream out(result.dump_path, std::ios::trunc);
    for (const auto& row : rows) out << to_json(row).dump() << '\n';
  }
  {
    std::ofstream out(result.turns_path, std::ios::trunc);
    for (const auto& row : turns) out << to_json(row).dump() << '\n';
  }
  {
    std::ofstream out(result.report_path, std::ios::trunc);
    out << to_json(report).dump(2) << '\n';
  }
  {
    std::ofstream out(result.log_path, std::ios::trunc);
    for (const auto& line : logs) {
      out << json{{"dialogue_id", line.dialogue_id},
                  {"turn_id", line.turn_id},
                  {"event", line.event},
                  {"detail", line.detail}}
                 .dump()
          << '\n';
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Combiner training
// ---------------------------------------------------------------------------

namespace {

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "-";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", *v);
  return buf;
}

}  // namespace

CombinerModel train_combiner_cmd(const RunConfig& config, const std::string& dev_dump_path,
                                 const std::string& model_out_path) {
  check_verbalized_source(config.verbalized_source);
  const std::vector<DumpRow> rows = load_dump(dev_dump_path);

  std::vector<CombinerSample> samples;
  std::vector<std::string> offending;
  samples.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& item = rows[i].item;
    std::optional<double> verbalized = item.conf_verbalized;
    if (config.verbalized_source == "probe") {
      verbalized = item.conf_self_probe;
    } else if (config.verbalized_source == "auto" && item.conf_self_probe) {
      verbalized = item.conf_self_probe;
    }
    if (!item.conf_softmax || !item.conf_minicons || !verbalized || !item.correct) {
      offending.push_back(rows[i].dialogue_id + "#" + std::to_string(rows[i].turn_id) + "/" +
                          item.slot.slot);
      continue;
    }
    CombinerSample s;
    s.softmax = *item.conf_softmax;
    s.minicons_prob = std::exp(*item.conf_minicons);
    s.verbalized = *verbalized;
    s.label = *item.correct ? 1.0 : 0.0;
    samples.push_back(s);
  }
  if (!offending.empty()) {
    std::string listing;
    for (std::size_t i = 0; i < offending.size() && i < 10; ++i) {
      listing += (i ? ", " : "") + offending[i];
    }
    if (offending.size() > 10) listing += ", ...";
    throw InvalidInputError(std::to_string(offending.size()) +
                            " dump rows lack a required feature or label: " + listing);
  }

  CombinerModel model = fit_combiner(samples, config.combiner_intercept);
  model.trained_on = fs::path(dev_dump_path).filename().string();
  save_combiner(model, model_out_path);

  // In-sample calibration before/after combination.
  const auto report_feature = [&](const char* name, auto getter) {
    std::vector<double> scores;
    std::vector<int> labels;
    for (const auto& s : samples) {
      scores.push_back(getter(s));
      labels.push_back(s.label > 0.5 ? 1 : 0);
    }
    std::optional<double> auc, ece_v;
    try {
      auc = roc_auc(scores, labels);
    } catch (const UndefinedMetricError&) {
    }
    ece_v = ece(scores, labels, config.ece_bins);
    std::printf("%-10s auc=%s ece=%s\n", name, fmt_opt(auc).c_str(), fmt_opt(ece_v).c_str());
  };
  report_feature("softmax", [](const CombinerSample& s) { return s.softmax; });
  report_feature("minicons", [](const CombinerSample& s) { return s.minicons_prob; });
  report_feature("verbalized", [](const CombinerSample& s) { return s.verbalized; });
  report_feature("combined", [&](const CombinerSample& s) {
    return combine(model, s.softmax, s.minicons_prob, s.verbalized);
  });
  std::printf("model written to %s (alpha=%.6f beta=%.6f gamma=%.6f intercept=%.6f)\n",
              model_out_path.c_str(), model.alpha, model.beta, model.gamma, model.intercept);
  return model;
}

// ---------------------------------------------------------------------------
// Fine-tuning data generation
// ---------------------------------------------------------------------------

void gen_ft_data(const RunConfig& config, const std::string& corpus_path,
                 const std::string& out_path) {
  if (config.schema_path.empty() || !fs::exists(config.schema_path)) {
    throw ConfigError("schema file not found: '" + config.schema_path + "'");
  }
  if (corpus_path.empty() || !fs::exists(corpus_path)) {
    throw ConfigError("corpus file not found: '" + corpus_path + "'");
  }
  const Schema schema = load_schema(config.schema_path);
  const std::vector<Dialogue> corpus = load_corpus(corpus_path, schema);
  const std::string template_dir =
      config.template_dir.empty() ? DSTCONF_TEMPLATE_DIR : config.template_dir;
  const TemplateSet templates = TemplateSet::load(template_dir);
  auto backend = make_backend(config);

  std::ofstream out(out_path, std::ios::trunc);
  if (!out) {
    throw ConfigError("cannot write fine-tuning data: " + out_path);
  }

  std::map<std::string, std::size_t> histogram;
  for (const auto& dialogue : corpus) {
    std::vector<Turn> prior;
    for (const auto& turn : dialogue.turns) {
      std::string history_text = prompts::render_history(prior);
      if (turn.system_utterance) {
        if (!history_text.empty()) history_text += "\n";
        history_text += "Assistant: " + *turn.system_utterance;
      }
      auto prompt = prompts::build_difficulty_prompt(turn.user_utterance, history_text,
                                                     templates);
      llm::LlmRequest req;
      req.model_id = config.model_id;
      req.messages = prompt;
      req.max_tokens = config.max_tokens;
      req.temperature = 0.0;
      req.want_logprobs = true;
      auto exchange = backend->complete(req);
      const Difficulty level = parse_difficulty(exchange.response_text);
      ++histogram[to_string(level)];

      const std::uint64_t seed =
          llm::fnv1a64(dialogue.dialogue_id + "#" + std::to_string(turn.turn_id)) ^
          config.rng_seed;
      const double confidence = map_difficulty_to_confidence(level, seed);

      json gold_conf = json::object();
      for (const auto& [ref, _] : turn.gold_turn_state.entries()) {
        gold_conf[ref.key()] = confidence;
      }
      out << json{{"dialogue_id", dialogue.dialogue_id},
                  {"turn_id", turn.turn_id},
                  {"prompt", prompt.front().text},
                  {"difficulty", to_string(level)},
                  {"confidence", confidence},
                  {"gold_state", state_to_json(turn.gold_turn_state)},
                  {"gold_confidence", std::move(gold_conf)}}
                 .dump()
          << '\n';
      prior.push_back(turn);
    }
  }

  std::printf("difficulty levels:");
  for (const char* level : {"Easy", "Medium", "Hard", "Other"}) {
    std::printf(" %s=%zu", level, histogram[level]);
  }
  std::printf("\n");
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

namespace {

/// Shortest round-trip number text, identical to the JSON rendering.
std::string num_text(const std::optional<double>& v) {
  if (!v) return "";
  return json(*v).dump();
}

}  // namespace

std::string render_metrics_table(const MetricsReport& report) {
  std::ostringstream out;
  out << "counts: dialogues=" << report.dialogues << " turns=" << report.turns
      << " pairs=" << report.pairs << " llm_calls=" << report.llm_calls
      << " failed_turns=" << report.failed_turns << "\n";
  out << "dst:    jga=" << fmt_opt(report.jga) << " slot_p=" << fmt_opt(report.slot_precision)
      << " slot_r=" << fmt_opt(report.slot_recall) << " slot_f1=" << fmt_opt(report.slot_f1)
      << "\n";
  out << "\n";
  out << "estimator     count       auc       ece   pearson\n";
  for (const auto& [name, m] : report.estimators) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-12s %6zu %9s %9s %9s\n", name.c_str(), m.count,
                  fmt_opt(m.auc).c_str(), fmt_opt(m.ece).c_str(), fmt_opt(m.pearson).c_str());
    out << line;
  }
  if (!report.config_summary.empty()) {
    out << "\nconfig: " << report.config_summary << "\n";
  }
  return out.str();
}

namespace {

std::string render_csv(const MetricsReport& report) {
  std::ostringstream out;
  out << "section,metric,value\n";
  out << "counts,dialogues," << report.dialogues << "\n";
  out << "counts,turns," << report.turns << "\n";
  out << "counts,pairs," << report.pairs << "\n";
  out << "counts,llm_calls," << report.llm_calls << "\n";
  out << "counts,failed_turns," << report.failed_turns << "\n";
  out << "dst,jga," << num_text(report.jga) << "\n";
  out << "dst,slot_precision," << num_text(report.slot_precision) << "\n";
  out << "dst,slot_recall," << num_text(report.slot_recall) << "\n";
  out << "dst,slot_f1," << num_text(report.slot_f1) << "\n";
  for (const auto& [name, m] : report.estimators) {
    out << "estimator." << name << ",count," << m.count << "\n";
    out << "estimator." << name << ",auc," << num_text(m.auc) << "\n";
    out << "estimator." << name << ",ece," << num_text(m.ece) << "\n";
    out << "estimator." << name << ",pearson," << num_text(m.pearson) << "\n";
  }
  return out.str();
}

}  // namespace

std::string render_report(const std::string& dump_path,
                          const std::optional<std::string>& turns_path,
                          const std::string& format, int ece_bins,
                          const std::string& verbalized_source) {
  if (format != "table" && format != "json" && format != "csv") {
    throw ConfigError("unknown report format: '" + format + "' (use table, json or csv)");
  }
  const std::vector<DumpRow> rows = load_dump(dump_path);
  std::vector<TurnRow> turns;
  if (turns_path) {
    turns = load_turns(*turns_path);
  }
  MetricsReport report = compute_report(rows, turns, ece_bins, verbalized_source);
  report.config_summary = "report over " + fs::path(dump_path).filename().string();

  if (format == "json") return to_json(report).dump(2) + "\n";
  if (format == "csv") return render_csv(report);
  return render_metrics_table(report);
}

}  // namespace dstconf
