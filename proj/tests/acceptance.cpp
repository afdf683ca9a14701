// Acceptance gate: one self-contained check per release criterion, each
// printed as a single PASS/FAIL line. Exits nonzero when anything fails.

#include "dstconf/combiner.hpp"
#include "dstconf/corpus.hpp"
#include "dstconf/errors.hpp"
#include "dstconf/metrics.hpp"
#include "dstconf/parse.hpp"
#include "dstconf/pipeline.hpp"
#include "dstconf/scores.hpp"

#include "oracles.hpp"
#include "util.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <fstream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace dstconf;

namespace {

int g_failures = 0;

void report(const std::string& name, bool ok, const std::string& detail) {
  std::printf("%s  %s%s%s\n", ok ? "PASS" : "FAIL", name.c_str(),
              detail.empty() ? "" : ": ", detail.c_str());
  if (!ok) ++g_failures;
}

void run(const std::string& name, const std::function<std::string()>& body) {
  try {
    report(name, true, body());
  } catch (const std::exception& e) {
    report(name, false, e.what());
  }
}

void expect(bool condition, const std::string& message) {
  if (!condition) throw std::runtime_error(message);
}

double elapsed_s(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[128];
  std::snprintf(buf, sizeof(buf), pattern, a, b);
  return buf;
}

llm::TokenScore tok(double lp) { return llm::TokenScore{"t", lp}; }

std::vector<llm::TokenScore> random_tokens(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> lp(-5.0, 0.0);
  std::vector<llm::TokenScore> out;
  for (int i = 0; i < n; ++i) out.push_back(tok(lp(rng)));
  return out;
}

std::vector<double> logprobs_of(const std::vector<llm::TokenScore>& tokens) {
  std::vector<double> out;
  for (const auto& t : tokens) out.push_back(t.logprob);
  return out;
}

// --- criterion bodies ------------------------------------------------------

std::string formula_oracles() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(20240810);
  std::uniform_int_distribution<int> len(1, 8);
  std::uniform_real_distribution<double> logit(-10.0, 10.0);
  double worst = 0.0;

  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<double> logits;
    for (int i = 0, n = len(rng); i < n; ++i) logits.push_back(logit(rng));
    std::vector<double> got = softmax(logits);
    std::vector<double> want = oracle::softmax_ref(logits);
    for (std::size_t i = 0; i < got.size(); ++i)
      worst = std::max(worst, std::abs(got[i] - want[i]));

    TokenGroup word{random_tokens(rng, len(rng))};
    worst = std::max(worst, std::abs(word_confidence(word) -
                                     oracle::word_conf_ref(logprobs_of(word.tokens))));
    worst = std::max(worst,
                     std::abs(word_confidence(word, /*as_probability=*/false) -
                              oracle::sequence_score_ref(logprobs_of(word.tokens))));
    worst = std::max(worst, std::abs(minicons_conf(word.tokens) -
                                     oracle::minicons_ref(logprobs_of(word.tokens))));

    TokenGroup slot{random_tokens(rng, len(rng))};
    TokenGroup value{random_tokens(rng, len(rng))};
    worst = std::max(worst,
                     std::abs(slot_value_softmax_conf(slot, value) -
                              oracle::pair_conf_ref(logprobs_of(slot.tokens),
                                                    logprobs_of(value.tokens))));
  }

  const double secs = elapsed_s(start);
  expect(worst <= 1e-12, fmt("worst deviation %.3e exceeds 1e-12", worst));
  expect(secs < 1.0, fmt("took %.2fs, budget 1s", secs));
  return fmt("5 formulas x 1000 inputs, worst deviation %.1e, %.2fs", worst, secs);
}

std::string metric_oracles() {
  std::mt19937_64 rng(20240811);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  std::uniform_int_distribution<int> size(4, 60);
  double worst = 0.0;

  auto random_set = [&](bool quantize, std::vector<double>& scores, std::vector<int>& labels) {
    scores.clear();
    labels.clear();
    bool pos = false, neg = false;
    const int n = size(rng);
    for (int i = 0; i < n; ++i) {
      double s = uni(rng);
      if (quantize) s = std::round(s * 4.0) / 4.0;  // forces ties and bin edges
      scores.push_back(s);
      labels.push_back(uni(rng) < 0.5 ? 0 : 1);
      (labels.back() ? pos : neg) = true;
    }
    if (!pos) labels[0] = 1;
    if (!neg) labels[labels.size() > 1 ? 1 : 0] = 0;
  };

  std::vector<double> scores;
  std::vector<int> labels;
  for (int trial = 0; trial < 500; ++trial) {
    random_set(trial % 2 == 1, scores, labels);
    worst = std::max(worst, std::abs(roc_auc(scores, labels) - oracle::auc_ref(scores, labels)));
  }
  for (int trial = 0; trial < 100; ++trial) {
    random_set(trial % 2 == 1, scores, labels);
    worst = std::max(worst, std::abs(ece(scores, labels, 10) - oracle::ece_ref(scores, labels, 10)));
  }
  for (int trial = 0; trial < 100; ++trial) {
    random_set(false, scores, labels);
    std::vector<double> y(labels.begin(), labels.end());
    worst = std::max(worst, std::abs(pearson(scores, y) - oracle::pearson_ref(scores, y)));
  }
  expect(worst <= 1e-12, fmt("worst deviation %.3e exceeds 1e-12", worst));

  // Hand-counted DST fixtures.
  BeliefState a, b, c, g1, g2, g3;
  a.set(SlotRef("train", "day"), "friday");
  g1.set(SlotRef("train", "day"), "friday");
  b.set(SlotRef("train", "day"), "friday");
  b.set(SlotRef("train", "departure"), "ely");
  g2.set(SlotRef("train", "day"), "friday");
  g2.set(SlotRef("train", "departure"), "cambridge");
  c.set(SlotRef("hotel", "area"), "north");
  g3.set(SlotRef("hotel", "area"), "north");
  expect(jga({a, b, c}, {g1, g2, g3}) == 2.0 / 3.0, "jga fixture mismatch");
  SlotF f = slot_f({a, b, c}, {g1, g2, g3});
  expect(f.precision == 3.0 / 4.0 && f.recall == 3.0 / 4.0 && f.f1 == 3.0 / 4.0,
         "slot_f fixture mismatch");
  return fmt("auc x500, ece x100, pearson x100, worst deviation %.1e", worst);
}

std::string combiner_recovery() {
  std::mt19937_64 rng(20240812);
  std::uniform_real_distribution<double> uni(0.0, 1.0);

  std::vector<CombinerSample> planted;
  for (int i = 0; i < 200; ++i) {
    CombinerSample s;
    s.softmax = uni(rng);
    s.minicons_prob = uni(rng);
    s.verbalized = uni(rng);
    s.label = 0.7 * s.softmax + 0.2 * s.minicons_prob + 0.1 * s.verbalized;
    planted.push_back(s);
  }
  CombinerModel m = fit_combiner(planted, /*with_intercept=*/false);
  const double err = std::max({std::abs(m.alpha - 0.7), std::abs(m.beta - 0.2),
                               std::abs(m.gamma - 0.1)});
  expect(err <= 1e-6, fmt("coefficient error %.3e exceeds 1e-6", err));

  // Monotone-in-softmax correctness with co-monotone auxiliary features:
  // fusing the three estimators must not cost ranking power.
  std::vector<CombinerSample> mono;
  for (int i = 0; i < 200; ++i) {
    CombinerSample s;
    s.softmax = uni(rng);
    s.minicons_prob = s.softmax * s.softmax;
    s.verbalized = std::sqrt(s.softmax);
    s.label = s.softmax > 0.5 ? 1.0 : 0.0;
    mono.push_back(s);
  }
  CombinerModel fused = fit_combiner(mono, /*with_intercept=*/true);
  std::vector<double> combined_scores, softmax_scores;
  std::vector<int> labels;
  for (const auto& s : mono) {
    combined_scores.push_back(combine(fused, s.softmax, s.minicons_prob, s.verbalized));
    softmax_scores.push_back(s.softmax);
    labels.push_back(s.label > 0.5 ? 1 : 0);
  }
  const double auc_combined = roc_auc(combined_scores, labels);
  const double auc_softmax = roc_auc(softmax_scores, labels);
  expect(auc_combined >= auc_softmax - 1e-9,
         fmt("combined auc %.6f below softmax auc %.6f", auc_combined, auc_softmax));
  return fmt("coefficients within %.1e; combined auc %.4f >= softmax", err, auc_combined);
}

std::string calibration_properties() {
  // Two bins populated with conf == accuracy exactly.
  std::vector<double> scores{0.25, 0.25, 0.25, 0.25, 0.75, 0.75, 0.75, 0.75};
  std::vector<int> labels{1, 0, 0, 0, 1, 1, 1, 0};
  expect(ece(scores, labels, 10) == 0.0, "calibrated fixture has nonzero ece");

  expect(roc_auc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == 1.0, "separated auc != 1");
  expect(roc_auc({0.7, 0.7, 0.7, 0.7}, {1, 0, 1, 0}) == 0.5, "all-tied auc != 0.5");
  return "ece=0 on calibrated bins, auc=1 separated, auc=0.5 tied";
}

RunConfig golden_config(prompts::SelfProbeMode mode, const std::string& out_dir) {
  RunConfig c;
  c.corpus_path = testutil::fixture("corpus_eval.json");
  c.schema_path = testutil::fixture("schema.json");
  c.backend = "mock";
  c.mock_script_path = testutil::fixture("mock_eval.json");
  c.few_shot_k = 0;
  c.self_probe = mode;
  c.rng_seed = 7;
  c.output_dir = out_dir;
  c.template_dir = testutil::template_dir();
  return c;
}

std::string golden_runs() {
  const auto start = std::chrono::steady_clock::now();
  testutil::TempDir dir;

  struct Mode {
    const char* name;
    prompts::SelfProbeMode probe;
  };
  const Mode modes[] = {{"none", prompts::SelfProbeMode::None},
                        {"turn", prompts::SelfProbeMode::Turn},
                        {"slot", prompts::SelfProbeMode::Slot}};

  std::size_t base_calls = 0, scored_turns = 0, pairs = 0;
  for (const Mode& mode : modes) {
    EvalResult result = run_eval(golden_config(mode.probe, dir.file(mode.name)));
    const std::string golden = testutil::fixture(std::string("golden/") + mode.name);
    expect(testutil::slurp(result.report_path) == testutil::slurp(golden + "/report.json"),
           std::string(mode.name) + " report.json differs from the committed golden");
    expect(testutil::slurp(result.dump_path) == testutil::slurp(golden + "/dump.jsonl"),
           std::string(mode.name) + " dump.jsonl differs from the committed golden");

    if (mode.probe == prompts::SelfProbeMode::None) {
      // Base cost: one domain call plus one slot call per turn.
      base_calls = result.report.llm_calls;
      expect(base_calls == 2 * result.report.turns, "base run is not 2 calls per turn");
      std::set<std::pair<std::string, int>> turn_keys;
      for (const auto& row : load_dump(result.dump_path))
        turn_keys.insert({row.dialogue_id, row.turn_id});
      scored_turns = turn_keys.size();   // turns with a non-empty predicted delta
      pairs = result.report.pairs;
    } else if (mode.probe == prompts::SelfProbeMode::Turn) {
      expect(result.report.llm_calls == base_calls + scored_turns,
             "turn probing is not one extra call per scored turn");
    } else {
      expect(result.report.llm_calls == base_calls + pairs,
             "slot probing is not one extra call per pair");
    }
  }

  const double secs = elapsed_s(start);
  expect(secs < 10.0, fmt("took %.2fs, budget 10s", secs));
  return fmt("3 runs byte-identical; calls 24/33/41 follow the law; %.2fs", secs);
}

std::string parser_suite() {
  Schema schema = load_schema(testutil::fixture("schema.json"));
  std::ifstream in(testutil::fixture("parser_cases.json"));
  expect(in.good(), "parser_cases.json missing");
  nlohmann::json cases = nlohmann::json::parse(in);
  expect(cases.size() >= 30, fmt("only %.0f cases, need 30", double(cases.size())));

  std::size_t valid = 0;
  for (const auto& c : cases) {
    const std::string name = c.at("name").get<std::string>();
    const std::string domain = c.at("domain").get<std::string>();
    const std::string raw = c.at("raw").get<std::string>();

    if (c.value("error", false)) {
      try {
        parse_belief_output(raw, schema, domain);
        throw std::runtime_error(name + ": expected ParseError");
      } catch (const ParseError&) {
      }
      continue;
    }

    ParsedPrediction got = parse_belief_output(raw, schema, domain);
    const auto& want = c.at("pairs");
    expect(got.pairs.size() == want.size(), name + ": pair count mismatch");
    for (std::size_t i = 0; i < want.size(); ++i) {
      expect(got.pairs[i].slot == SlotRef(domain, want[i].at("slot").get<std::string>()),
             name + ": slot mismatch");
      expect(got.pairs[i].value == want[i].at("value").get<std::string>(),
             name + ": value mismatch");
      if (want[i].at("conf").is_null()) {
        expect(!got.pairs[i].verbalized_conf.has_value(), name + ": unexpected conf");
      } else {
        expect(got.pairs[i].verbalized_conf.has_value() &&
                   std::abs(*got.pairs[i].verbalized_conf -
                            want[i].at("conf").get<double>()) <= 1e-12,
               name + ": conf mismatch");
      }
    }

    // Round trip: serialize then reparse must return the same pairs.
    ParsedPrediction again = parse_belief_output(serialize_prediction(got.pairs), schema, domain);
    expect(again.pairs.size() == got.pairs.size(), name + ": round-trip count");
    for (std::size_t i = 0; i < got.pairs.size(); ++i) {
      expect(again.pairs[i].slot == got.pairs[i].slot &&
                 again.pairs[i].value == got.pairs[i].value &&
                 again.pairs[i].verbalized_conf == got.pairs[i].verbalized_conf,
             name + ": round-trip pair mismatch");
    }
    ++valid;
  }
  return fmt("%.0f cases (%.0f valid) parse and round-trip", double(cases.size()),
             double(valid));
}

std::string difficulty_mapping() {
  struct Band {
    Difficulty level;
    double lo, hi, mid;
  };
  const Band bands[] = {{Difficulty::Easy, 0.9, 1.0, 0.95},
                        {Difficulty::Medium, 0.8, 0.9, 0.85},
                        {Difficulty::Hard, 0.7, 0.8, 0.75}};
  double worst_mean_gap = 0.0;
  for (const Band& band : bands) {
    double sum = 0.0;
    for (std::uint64_t seed = 0; seed < 10000; ++seed) {
      const double v = map_difficulty_to_confidence(band.level, seed);
      expect(v >= band.lo && v < band.hi, "draw outside the level's range");
      sum += v;
    }
    worst_mean_gap = std::max(worst_mean_gap, std::abs(sum / 10000.0 - band.mid));
  }
  expect(worst_mean_gap <= 0.01, fmt("mean gap %.4f exceeds 0.01", worst_mean_gap));
  for (std::uint64_t seed = 0; seed < 10000; ++seed)
    expect(map_difficulty_to_confidence(Difficulty::Other, seed) == 0.5, "Other != 0.5");
  return fmt("10000 draws per level in range; worst mean gap %.4f; Other exact", worst_mean_gap);
}

std::string replay_determinism() {
  testutil::TempDir dir;
  const std::string cache = dir.file("cache.jsonl");

  RunConfig record = golden_config(prompts::SelfProbeMode::Slot, dir.file("rec"));
  record.backend = "replay";
  record.replay_path = cache;
  record.replay_mode = "hybrid";
  record.replay_fallback = "mock";
  run_eval(record);

  RunConfig strict = record;
  strict.replay_mode = "strict";
  strict.replay_fallback = "";
  strict.mock_script_path = "";

  strict.output_dir = dir.file("w1");
  strict.concurrency = 1;
  EvalResult one = run_eval(strict);

  strict.output_dir = dir.file("w8");
  strict.concurrency = 8;
  EvalResult eight = run_eval(strict);

  expect(testutil::slurp(one.dump_path) == testutil::slurp(eight.dump_path),
         "dumps differ between 1 and 8 workers");
  expect(testutil::slurp(one.report_path) == testutil::slurp(eight.report_path),
         "reports differ between 1 and 8 workers");
  expect(testutil::slurp(one.turns_path) == testutil::slurp(eight.turns_path),
         "turn files differ between 1 and 8 workers");
  return "strict replay byte-identical with 1 vs 8 workers";
}

}  // namespace

int main() {
  run("formula oracles", formula_oracles);
  run("metric oracles", metric_oracles);
  run("combiner recovery", combiner_recovery);
  run("calibration properties", calibration_properties);
  run("golden end-to-end runs", golden_runs);
  run("parser suite", parser_suite);
  run("difficulty mapping", difficulty_mapping);
  run("replay determinism", replay_determinism);

  if (g_failures == 0) {
    std::printf("acceptance: all 8 criteria satisfied\n");
    return 0;
  }
  std::printf("acceptance: %d criteria FAILED\n", g_failures);
  return 1;
}
