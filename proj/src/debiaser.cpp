#include "debias/debiaser.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "debias/error.hpp"

namespace debias {

double DebiasTransform::apply(double y_hat, int age) const {
  double out = y_hat;
  for (const auto& [name, coef] : terms) out -= coef * age_regressor(name, age);
  return out;
}

DebiasTransform make_transform(const PathModel& model, PathVariant requested) {
  if (requested != model.variant) {
    throw Error(ErrorKind::ModelVariantMismatch,
                "cannot build a " + std::string(to_string(requested)) + " transform from a " +
                    std::string(to_string(model.variant)) + " path model");
  }
  DebiasTransform t;
  t.variant = model.variant;
  t.source_model_digest = model.digest();
  for (const auto& c : model.yhat_equation.coefficients) {
    if (c.name != kRisk) t.terms.emplace_back(c.name, c.estimate);
  }
  return t;
}

DebiasTransform make_transform(const PathModel& model) { return make_transform(model, model.variant); }

ScoredRecord debias(const ScoredRecord& record, const DebiasTransform& transform) {
  ScoredRecord out = record;
  out.y_tilde = transform.apply(record.y_hat, record.age);
  return out;
}

ScoredRecord debias(const ScoredRecord& record, const PathModel& model) {
  return debias(record, make_transform(model));
}

std::vector<ScoredRecord> debias_all(std::span<const ScoredRecord> records,
                                     const DebiasTransform& transform) {
  std::vector<ScoredRecord> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(debias(r, transform));
  return out;
}

std::string_view to_string(QuantileMethod method) {
  return method == QuantileMethod::Interpolate ? "interpolate" : "nearest";
}

QuantileMethod parse_quantile_method(std::string_view text) {
  if (text == "interpolate") return QuantileMethod::Interpolate;
  if (text == "nearest") return QuantileMethod::Nearest;
  throw Error(ErrorKind::ConfigError, "unknown quantile method '" + std::string(text) + "'");
}

std::string_view to_string(ScoreKind kind) {
  return kind == ScoreKind::BiasedScores ? "BiasedScores" : "DebiasedScores";
}

double quantile(std::span<const double> scores, double level, QuantileMethod method) {
  if (scores.empty()) throw Error(ErrorKind::EmptyScores, "no scores to take a quantile of");
  if (!(level > 0.0 && level < 1.0)) {
    throw Error(ErrorKind::ConfigError, "quantile level must lie in (0, 1)");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (method == QuantileMethod::Nearest) {
    auto rank = static_cast<std::size_t>(std::ceil(level * double(n)));
    return sorted[std::clamp<std::size_t>(rank, 1, n) - 1];
  }
  const double h = double(n - 1) * level;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= n) return sorted[n - 1];
  return sorted[lo] + (h - double(lo)) * (sorted[lo + 1] - sorted[lo]);
}

ThresholdRule fit_threshold(std::span<const double> train_scores, double quantile_level,
                            ScoreKind fitted_on, QuantileMethod method) {
  ThresholdRule rule;
  rule.quantile_level = quantile_level;
  rule.threshold = quantile(train_scores, quantile_level, method);
  rule.fitted_on = fitted_on;
  rule.n_train = train_scores.size();
  rule.method = method;
  return rule;
}

nlohmann::ordered_json to_json(const DebiasTransform& transform) {
  nlohmann::ordered_json terms = nlohmann::ordered_json::array();
  for (const auto& [name, coef] : transform.terms) terms.push_back({{"name", name}, {"coef", coef}});
  return {{"variant", to_string(transform.variant)},
          {"formula", "y_tilde = y_hat - sum(coef * regressor(age))"},
          {"terms", terms},
          {"source_model_digest", transform.source_model_digest}};
}

nlohmann::ordered_json to_json(const ThresholdRule& rule) {
  return {{"fitted_on", to_string(rule.fitted_on)},
          {"quantile_level", rule.quantile_level},
          {"method", to_string(rule.method)},
          {"threshold", rule.threshold},
          {"n_train", rule.n_train},
          {"tie_rule", "score <= threshold -> LowRisk"}};
}

}  // namespace debias
