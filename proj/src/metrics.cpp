#include "dstconf/metrics.hpp"

#include "dstconf/errors.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace dstconf {

double jga(const std::vector<BeliefState>& predictions,
           const std::vector<BeliefState>& golds) {
  if (predictions.size() != golds.size()) {
    throw InvalidInputError("jga needs aligned prediction/gold lists");
  }
  if (predictions.empty()) {
    throw InvalidInputError("jga over zero turns is undefined");
  }
  std::size_t exact = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    if (predictions[i] == golds[i]) ++exact;
  }
  return static_cast<double>(exact) / static_cast<double>(predictions.size());
}

SlotF slot_f(const std::vector<BeliefState>& predictions,
             const std::vector<BeliefState>& golds) {
  if (predictions.size() != golds.size()) {
    throw InvalidInputError("slot_f needs aligned prediction/gold lists");
  }
  std::size_t tp = 0, pred_total = 0, gold_total = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    pred_total += predictions[i].size();
    gold_total += golds[i].size();
    for (const auto& [slot, value] : predictions[i].entries()) {
      auto got = golds[i].get(slot);
      if (got && *got == value) ++tp;
    }
  }
  const auto ratio = [](std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
  };
  SlotF out;
  out.precision = ratio(tp, pred_total);
  out.recall = ratio(tp, gold_total);
  out.f1 = (out.precision + out.recall) == 0.0
               ? 0.0
               : 2.0 * out.precision * out.recall / (out.precision + out.recall);
  return out;
}

namespace {

void check_binary_labels(const std::vector<double>& scores, const std::vector<int>& labels,
                         const char* metric) {
  if (scores.size() != labels.size()) {
    throw InvalidInputError(std::string(metric) + " needs aligned scores and labels");
  }
  if (scores.empty()) {
    throw InvalidInputError(std::string(metric) + " needs at least one sample");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) {
      throw InvalidInputError(std::string(metric) + " got a non-finite score");
    }
  }
  for (int l : labels) {
    if (l != 0 && l != 1) {
      throw InvalidInputError(std::string(metric) + " labels must be 0 or 1");
    }
  }
}

}  // namespace

double roc_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_binary_labels(scores, labels, "roc_auc");
  const std::size_t n = scores.size();
  const std::size_t positives =
      static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const std::size_t negatives = n - positives;
  if (positives == 0 || negatives == 0) {
    throw UndefinedMetricError("roc_auc needs both classes present");
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Average ranks over tie runs, then the Mann-Whitney statistic.
  double positive_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1) positive_rank_sum += avg_rank;
    }
    i = j;
  }
  const double p = static_cast<double>(positives);
  return (positive_rank_sum - p * (p + 1.0) / 2.0) /
         (p * static_cast<double>(negatives));
}

double ece(const std::vector<double>& scores, const std::vector<int>& labels, int bins) {
  check_binary_labels(scores, labels, "ece");
  if (bins < 1) {
    throw InvalidInputError("ece needs at least one bin");
  }
  for (double s : scores) {
    if (s < 0.0 || s > 1.0) {
      throw InvalidInputError("ece scores must lie in [0,1]");
    }
  }
  std::vector<double> conf_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<double> acc_sum(static_cast<std::size_t>(bins), 0.0);
  std::vector<std::size_t> count(static_cast<std::size_t>(bins), 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    // Right-closed bins: (0, 1/B], (1/B, 2/B], ...; 0 joins the first bin.
    int idx = static_cast<int>(std::ceil(scores[i] * bins)) - 1;
    idx = std::clamp(idx, 0, bins - 1);
    conf_sum[static_cast<std::size_t>(idx)] += scores[i];
    acc_sum[static_cast<std::size_t>(idx)] += labels[i];
    ++count[static_cast<std::size_t>(idx)];
  }
  double out = 0.0;
  const double n = static_cast<double>(scores.size());
  for (std::size_t b = 0; b < static_cast<std::size_t>(bins); ++b) {
    if (count[b] == 0) continue;
    const double cb = static_cast<double>(count[b]);
    out += (cb / n) * std::fabs(acc_sum[b] / cb - conf_sum[b] / cb);
  }
  return out;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) {
    throw InvalidInputError("pearson needs equal-length series");
  }
  if (x.size() < 2) {
    throw InvalidInputError("pearson needs at least two samples");
  }
  const double n = static_cast<double>(x.size());
  const double mean_x = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double mean_y = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mean_x;
    const double dy = y[i] - mean_y;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  if (sxx == 0.0 || syy == 0.0) {
    throw UndefinedMetricError("pearson is undefined for a constant series");
  }
  return sxy / std::sqrt(sxx * syy);
}

double map_difficulty_to_confidence(Difficulty level, std::uint64_t rng_seed) {
  double lo = 0.0;
  switch (level) {
    case Difficulty::Easy: lo = 0.9; break;
    case Difficulty::Medium: lo = 0.8; break;
    case Difficulty::Hard: lo = 0.7; break;
    case Difficulty::Other: return 0.5;
  }
  std::mt19937_64 rng(rng_seed);
  // 53-bit uniform in [0,1); platform-independent, unlike
  // std::uniform_real_distribution.
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + u * 0.1;
}

// ---------------------------------------------------------------------------
// Report serialization
// ---------------------------------------------------------------------------

namespace {

nlohmann::json opt_json(const std::optional<double>& v) {
  if (!v) return nullptr;
  return *v;
}

std::optional<double> opt_from(const nlohmann::json& j, const std::string& key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<double>();
}

}  // namespace

nlohmann::json to_json(const MetricsReport& report) {
  nlohmann::json estimators = nlohmann::json::object();
  for (const auto& [name, m] : report.estimators) {
    estimators[name] = {{"count", m.count},
                        {"auc", opt_json(m.auc)},
                        {"ece", opt_json(m.ece)},
                        {"pearson", opt_json(m.pearson)}};
  }
  return nlohmann::json{
      {"counts",
       {{"dialogues", report.dialogues},
        {"turns", report.turns},
        {"pairs", report.pairs},
        {"llm_calls", report.llm_calls},
        {"failed_turns", report.failed_turns}}},
      {"dst",
       {{"jga", opt_json(report.jga)},
        {"slot_precision", opt_json(report.slot_precision)},
        {"slot_recall", opt_json(report.slot_recall)},
        {"slot_f1", opt_json(report.slot_f1)}}},
      {"estimators", std::move(estimators)},
      {"config", report.config_summary}};
}

MetricsReport report_from_json(const nlohmann::json& j) {
  MetricsReport report;
  const auto& counts = j.at("counts");
  report.dialogues = counts.at("dialogues").get<std::size_t>();
  report.turns = counts.at("turns").get<std::size_t>();
  report.pairs = counts.at("pairs").get<std::size_t>();
  report.llm_calls = counts.at("llm_calls").get<std::size_t>();
  report.failed_turns = counts.at("failed_turns").get<std::size_t>();
  const auto& dst = j.at("dst");
  report.jga = opt_from(dst, "jga");
  report.slot_precision = opt_from(dst, "slot_precision");
  report.slot_recall = opt_from(dst, "slot_recall");
  report.slot_f1 = opt_from(dst, "slot_f1");
  for (const auto& [name, m] : j.at("estimators").items()) {
    EstimatorMetrics em;
    em.count = m.at("count").get<std::size_t>();
    em.auc = opt_from(m, "auc");
    em.ece = opt_from(m, "ece");
    em.pearson = opt_from(m, "pearson");
    report.estimators[name] = em;
  }
  report.config_summary = j.value("config", std::string());
  return report;
}

}  // namespace dstconf
