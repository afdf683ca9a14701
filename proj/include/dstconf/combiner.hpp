#pragma once

/**
 * Combined confidence score: a linear model over the three per-pair
 * estimators,
 *
 *   conf = alpha * softmax + beta * minicons + gamma * verbalized + intercept
 *
 * fit by ordinary least squares against correctness labels. All features
 * live in probability space [0,1] (the minicons feature is exp(mean
 * logprob)), so the coefficients are directly comparable.
 */

#include <string>
#include <vector>

namespace dstconf {

struct CombinerModel {
  double alpha = 0.0;
  double beta = 0.0;
  double gamma = 0.0;
  double intercept = 0.0;
  std::string feature_scaling = "prob-space";
  std::string trained_on;  // split id, informational

  bool operator==(const CombinerModel&) const = default;
};

struct CombinerSample {
  double softmax = 0.0;
  double minicons_prob = 0.0;  // exp(mean logprob), in (0,1]
  double verbalized = 0.0;
  double label = 0.0;  // correctness, {0,1} in production, any [0,1] accepted
};

/**
 * Least squares via normal equations with ridge damping 1e-8 on the
 * diagonal, so degenerate designs (constant columns, duplicated features)
 * solve without pivoting failures. Needs at least 4 samples; the intercept
 * can be disabled for the strict 3-weight form.
 */
CombinerModel fit_combiner(const std::vector<CombinerSample>& samples,
                           bool with_intercept = true);

/// alpha*s + beta*m + gamma*v + intercept, clamped to [0,1].
double combine(const CombinerModel& model, double softmax, double minicons_prob,
               double verbalized);

/// JSON persistence: {alpha, beta, gamma, intercept, feature_scaling,
/// trained_on}. Doubles survive the round trip bit-exactly.
void save_combiner(const CombinerModel& model, const std::string& path);
CombinerModel load_combiner(const std::string& path);

}  // namespace dstconf
