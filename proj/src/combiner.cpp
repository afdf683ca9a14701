#include "dstconf/combiner.hpp"

#include "dstconf/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

namespace dstconf {

namespace {

constexpr double kRidge = 1e-8;

/// In-place Gaussian elimination with partial pivoting on the n x n system
/// a * x = b. The ridge on the diagonal keeps every pivot nonzero.
std::array<double, 4> solve(std::array<std::array<double, 4>, 4>& a, std::array<double, 4>& b,
                            std::size_t n) {
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t row = col + 1; row < n; ++row) {
      if (std::fabs(a[row][col]) > std::fabs(a[pivot][col])) pivot = row;
    }
    std::swap(a[col], a[pivot]);
    std::swap(b[col], b[pivot]);
    for (std::size_t row = col + 1; row < n; ++row) {
      const double factor = a[row][col] / a[col][col];
      for (std::size_t k = col; k < n; ++k) a[row][k] -= factor * a[col][k];
      b[row] -= factor * b[col];
    }
  }
  std::array<double, 4> x{};
  for (std::size_t i = n; i-- > 0;) {
    double sum = b[i];
    for (std::size_t k = i + 1; k < n; ++k) sum -= a[i][k] * x[k];
    x[i] = sum / a[i][i];
  }
  return x;
}

}  // namespace

CombinerModel fit_combiner(const std::vector<CombinerSample>& samples, bool with_intercept) {
  if (samples.size() < 4) {
    throw InvalidInputError("combiner fit needs at least 4 samples, got " +
                            std::to_string(samples.size()));
  }
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const double values[] = {s.softmax, s.minicons_prob, s.verbalized, s.label};
    for (double v : values) {
      if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
        throw InvalidInputError("combiner sample " + std::to_string(i) +
                                " has a feature or label outside [0,1]");
      }
    }
  }

  const std::size_t n = with_intercept ? 4 : 3;
  std::array<std::array<double, 4>, 4> xtx{};
  std::array<double, 4> xty{};
  for (const auto& s : samples) {
    const std::array<double, 4> row = {s.softmax, s.minicons_prob, s.verbalized, 1.0};
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) xtx[i][j] += row[i] * row[j];
      xty[i] += row[i] * s.label;
    }
  }
  for (std::size_t i = 0; i < n; ++i) xtx[i][i] += kRidge;

  const auto coef = solve(xtx, xty, n);
  CombinerModel model;
  model.alpha = coef[0];
  model.beta = coef[1];
  model.gamma = coef[2];
  model.intercept = with_intercept ? coef[3] : 0.0;
  return model;
}

double combine(const CombinerModel& model, double softmax, double minicons_prob,
               double verbalized) {
  const double raw = model.alpha * softmax + model.beta * minicons_prob +
                     model.gamma * verbalized + model.intercept;
  return std::clamp(raw, 0.0, 1.0);
}

void save_combiner(const CombinerModel& model, const std::string& path) {
  nlohmann::json j{{"alpha", model.alpha},
                   {"beta", model.beta},
                   {"gamma", model.gamma},
                   {"intercept", model.intercept},
                   {"feature_scaling", model.feature_scaling},
                   {"trained_on", model.trained_on}};
  std::ofstream out(path);
  if (!out) {
    throw ConfigError("cannot write combiner model: " + path);
  }
  out << j.dump(2) << '\n';
}

CombinerModel load_combiner(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("cannot open combiner model: " + path);
  }
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("combiner model is not valid JSON: " + std::string(e.what()), e.byte);
  }
  CombinerModel model;
  model.alpha = j.at("alpha").get<double>();
  model.beta = j.at("beta").get<double>();
  model.gamma = j.at("gamma").get<double>();
  model.intercept = j.at("intercept").get<double>();
  model.feature_scaling = j.value("feature_scaling", std::string("prob-space"));
  model.trained_on = j.value("trained_on", std::string());
  for (double v : {model.alpha, model.beta, model.gamma, model.intercept}) {
    if (!std::isfinite(v)) {
      throw ConfigError("combiner model has a non-finite coefficient: " + path);
    }
  }
  if (model.feature_scaling != "prob-space") {
    throw ConfigError("unsupported feature_scaling '" + model.feature_scaling + "' in " + path);
  }
  return model;
}

}  // namespace dstconf
