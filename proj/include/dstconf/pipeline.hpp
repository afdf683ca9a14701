#pragma once

/**
 * End-to-end orchestration: evaluation runs over a corpus, combiner
 * training from a score dump, fine-tuning data generation, and report
 * rendering. This is the layer the CLI calls into.
 *
 * Artifacts of an evaluation run (all under the output directory):
 *   dump.jsonl    one row per predicted pair:
 *                 {dialogue_id, turn_id, domain, slot, value, conf_softmax,
 *                  conf_minicons, conf_verbalized, conf_self_probe,
 *                  conf_combined, correct}
 *   turns.jsonl   one row per turn: {dialogue_id, turn_id, domain,
 *                 gold_state, predicted_state} (feeds JGA/Slot-F in
 *                 `report` without rerunning the backend)
 *   report.json   the MetricsReport
 *   run_log.jsonl parse failures and dropped-pair warnings
 *
 * Runs are deterministic: with a mock or strict-replay backend and a fixed
 * seed, artifacts are byte-identical across runs and worker counts.
 */

#include "dstconf/combiner.hpp"
#include "dstconf/corpus.hpp"
#include "dstconf/dialogue.hpp"
#include "dstconf/http_backend.hpp"
#include "dstconf/llm.hpp"
#include "dstconf/metrics.hpp"
#include "dstconf/prompts.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace dstconf {

struct RunConfig {
  // Data
  std::string corpus_path;
  std::string schema_path;
  std::string train_corpus_path;  // few-shot example source; required when few_shot_k > 0

  // Backend
  std::string backend = "mock";  // mock | http | replay
  std::string mock_script_path;
  std::string replay_path;
  std::string replay_mode = "strict";  // strict | hybrid
  std::string replay_fallback;         // mock | http; inner backend for hybrid mode
  llm::HttpOptions http;
  std::string model_id = "mock";
  int max_tokens = 256;

  // Strategy
  prompts::PromptStrategy strategy;  // default All/All
  int few_shot_k = 3;                // 0 means zero-shot
  prompts::SelfProbeMode self_probe = prompts::SelfProbeMode::None;

  // Scoring
  std::string verbalized_source = "auto";  // auto | generation | probe
  std::string combiner_path;               // optional; enables conf_combined
  bool combiner_intercept = true;          // false gives the strict 3-weight form
  int ece_bins = 10;
  std::uint64_t rng_seed = 0;

  // Execution
  std::string output_dir = "out";
  int concurrency = 1;
  std::string template_dir;  // empty -> compiled-in default
};

/// Reads a JSON config file whose keys mirror the flag names; unknown keys
/// are rejected so typos surface immediately.
RunConfig load_run_config(const std::string& path);

/// Resolves the backend named by the config (shared by all commands).
std::shared_ptr<llm::LlmBackend> make_backend(const RunConfig& config);

/// One dump row: a scored pair plus its provenance.
struct DumpRow {
  std::string dialogue_id;
  int turn_id = 0;
  std::string domain;
  ScoredSlotValue item;
};

nlohmann::json to_json(const DumpRow& row);
DumpRow dump_row_from_json(const nlohmann::json& j);

/// One per-turn state row backing JGA/Slot-F recomputation.
struct TurnRow {
  std::string dialogue_id;
  int turn_id = 0;
  std::string domain;  // empty when domain classification failed
  bool failed = false;  // a parse/domain failure emptied this turn's delta
  BeliefState gold_state;
  BeliefState predicted_state;
};

nlohmann::json to_json(const TurnRow& row);
TurnRow turn_row_from_json(const nlohmann::json& j);

std::vector<DumpRow> load_dump(const std::string& path);
std::vector<TurnRow> load_turns(const std::string& path);

struct EvalResult {
  MetricsReport report;
  std::string dump_path;
  std::string turns_path;
  std::string report_path;
  std::string log_path;
};

/// Full evaluation: DST with carryover, all applicable estimators, labels
/// against gold, artifact files, metrics. Parse failures never abort a run;
/// the turn scores as an empty prediction and is logged.
EvalResult run_eval(const RunConfig& config);

/// Fits the combiner on a labeled dump and persists it. Prints per-feature
/// and combined in-sample AUC/ECE. Rows missing a required feature raise
/// InvalidInputError naming the offending rows.
CombinerModel train_combiner_cmd(const RunConfig& config, const std::string& dev_dump_path,
                                 const std::string& model_out_path);

/// Per-turn difficulty assessment -> seeded confidence targets, as JSONL:
/// {dialogue_id, turn_id, prompt, difficulty, confidence, gold_state,
/// gold_confidence}. Prints the level histogram.
void gen_ft_data(const RunConfig& config, const std::string& corpus_path,
                 const std::string& out_path);

/// Human-readable fixed-width rendering of a report.
std::string render_metrics_table(const MetricsReport& report);

/// Renders metrics recomputed from a dump (plus optional turns file) as
/// "table", "json", or "csv". Unknown format throws ConfigError.
std::string render_report(const std::string& dump_path,
                          const std::optional<std::string>& turns_path,
                          const std::string& format, int ece_bins,
                          const std::string& verbalized_source);

/// Report assembly shared by run_eval and render_report.
MetricsReport compute_report(const std::vector<DumpRow>& rows,
                             const std::vector<TurnRow>& turns, int ece_bins,
                             const std::string& verbalized_source);

}  // namespace dstconf
