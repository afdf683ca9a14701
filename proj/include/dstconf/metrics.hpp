#pragma once

/**
 * Evaluation metrics: joint goal accuracy, slot-level F, ROC-AUC, expected
 * calibration error, Pearson correlation, and the difficulty-to-confidence
 * mapping used when building fine-tuning targets.
 *
 * Metrics that are mathematically undefined on the given input (single-class
 * AUC, constant-series Pearson) throw UndefinedMetricError so callers report
 * an absence instead of a fabricated number.
 */

#include "dstconf/dialogue.hpp"
#include "dstconf/parse.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace dstconf {

/// Fraction of turns whose predicted cumulative state equals gold exactly.
/// Empty-vs-empty counts as a match. Length mismatch throws
/// InvalidInputError.
double jga(const std::vector<BeliefState>& predictions, const std::vector<BeliefState>& golds);

struct SlotF {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Micro-averaged slot-value pair F over aligned per-turn states:
/// TP = exact pair matches, precision = TP/predicted, recall = TP/gold,
/// f1 their harmonic mean, with 0/0 defined as 0.
SlotF slot_f(const std::vector<BeliefState>& predictions, const std::vector<BeliefState>& golds);

/// Mann-Whitney formulation via average ranks: the probability that a random
/// positive outscores a random negative, ties credited 0.5. Labels must be
/// 0/1 with both classes present (else UndefinedMetricError).
double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels);

/// Expected calibration error over `bins` equal-width right-closed bins of
/// [0,1]: sum over bins of (n_b/N) * |accuracy_b - mean confidence_b|.
/// Empty bins contribute nothing; scores must lie in [0,1].
double ece(const std::vector<double>& scores, const std::vector<int>& labels, int bins = 10);

/// Sample Pearson correlation; either series constant throws
/// UndefinedMetricError.
double pearson(const std::vector<double>& x, const std::vector<double>& y);

/// Difficulty level to confidence: Easy -> uniform [0.9,1.0), Medium ->
/// [0.8,0.9), Hard -> [0.7,0.8), Other -> exactly 0.5. Deterministic for
/// equal (level, seed).
double map_difficulty_to_confidence(Difficulty level, std::uint64_t rng_seed);

// ---------------------------------------------------------------------------
// Aggregated report
// ---------------------------------------------------------------------------

/// Calibration metrics of one confidence estimator over the dump's pairs.
/// Absent values mean the metric was undefined on this data.
struct EstimatorMetrics {
  std::size_t count = 0;  // pairs carrying this estimator's feature
  std::optional<double> auc;
  std::optional<double> ece;
  std::optional<double> pearson;  // against the 0/1 correctness labels
};

struct MetricsReport {
  std::size_t dialogues = 0;
  std::size_t turns = 0;
  std::size_t pairs = 0;
  std::size_t llm_calls = 0;
  std::size_t failed_turns = 0;

  std::optional<double> jga;
  std::optional<double> slot_precision;
  std::optional<double> slot_recall;
  std::optional<double> slot_f1;

  // Keyed softmax / minicons / verbalized / self_probe / combined.
  std::map<std::string, EstimatorMetrics> estimators;

  std::string config_summary;  // one-line run description
};

/// Stable serialization (sorted keys, shortest-round-trip numbers); equal
/// reports dump to identical bytes.
nlohmann::json to_json(const MetricsReport& report);
MetricsReport report_from_json(const nlohmann::json& j);

}  // namespace dstconf
