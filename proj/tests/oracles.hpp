#pragma once

// Independent brute-force reference implementations. These intentionally
// use the most literal formulation of each definition (extended precision,
// all-pairs loops, explicit binning) so agreement with the library is
// evidence, not tautology.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace oracle {

inline std::vector<double> softmax_ref(const std::vector<double>& logits) {
  long double max = logits.at(0);
  for (double v : logits) max = std::max<long double>(max, v);
  long double sum = 0.0L;
  std::vector<long double> exps;
  for (double v : logits) {
    exps.push_back(expl(static_cast<long double>(v) - max));
    sum += exps.back();
  }
  std::vector<double> out;
  for (long double e : exps) out.push_back(static_cast<double>(e / sum));
  return out;
}

/// Word confidence: product of per-token probabilities.
inline double word_conf_ref(const std::vector<double>& logprobs) {
  long double p = 1.0L;
  for (double lp : logprobs) p *= expl(static_cast<long double>(lp));
  return static_cast<double>(p);
}

/// Sequence score: joint log-probability of a token sequence.
inline double sequence_score_ref(const std::vector<double>& logprobs) {
  long double s = 0.0L;
  for (double lp : logprobs) s += lp;
  return static_cast<double>(s);
}

/// Minicons aggregation: mean token log-probability.
inline double minicons_ref(const std::vector<double>& logprobs) {
  long double s = 0.0L;
  for (double lp : logprobs) s += lp;
  return static_cast<double>(s / static_cast<long double>(logprobs.size()));
}

/// Pair confidence: product of the slot and value word confidences.
inline double pair_conf_ref(const std::vector<double>& slot_lp,
                            const std::vector<double>& value_lp) {
  return static_cast<double>(static_cast<long double>(word_conf_ref(slot_lp)) *
                             static_cast<long double>(word_conf_ref(value_lp)));
}

/// All-pairs Mann-Whitney: wins + half-credit for ties over pos*neg pairs.
inline double auc_ref(const std::vector<double>& scores, const std::vector<int>& labels) {
  long double wins = 0.0L;
  std::size_t pos = 0, neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) ++pos;
    else ++neg;
  }
  if (pos == 0 || neg == 0) throw std::runtime_error("auc needs both classes");
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) wins += 1.0L;
      else if (scores[i] == scores[j]) wins += 0.5L;
    }
  }
  return static_cast<double>(wins / (static_cast<long double>(pos) * neg));
}

/// Equal-width ECE with right-closed bins: (0, 1/B], (1/B, 2/B], ...; a
/// score of exactly 0 lands in the first bin.
inline double ece_ref(const std::vector<double>& scores, const std::vector<int>& labels,
                      int bins) {
  std::vector<long double> conf_sum(bins, 0.0L), acc_sum(bins, 0.0L);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < scores.size(); ++i) {
    int b = bins - 1;
    for (int k = 0; k < bins; ++k) {
      if (scores[i] <= static_cast<double>(k + 1) / bins) {
        b = k;
        break;
      }
    }
    conf_sum[b] += scores[i];
    acc_sum[b] += labels[i];
    ++count[b];
  }
  long double total = 0.0L;
  for (int b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const long double gap =
        fabsl(acc_sum[b] / count[b] - conf_sum[b] / count[b]);
    total += (static_cast<long double>(count[b]) / scores.size()) * gap;
  }
  return static_cast<double>(total);
}

inline double pearson_ref(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  long double mx = 0.0L, my = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  long double sxy = 0.0L, sxx = 0.0L, syy = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0.0L || syy == 0.0L) throw std::runtime_error("pearson undefined");
  return static_cast<double>(sxy / sqrtl(sxx * syy));
}

}  // namespace oracle
