#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "debias/blackbox.hpp"
#include "debias/causal.hpp"

namespace debias {

// Counterfactual transform: subtract the fitted direct age paths from y_hat.
struct DebiasTransform {
  PathVariant variant = PathVariant::Quadratic;
  std::vector<std::pair<std::string, double>> terms;  // regressor -> subtracted coefficient
  std::string source_model_digest;

  double apply(double y_hat, int age) const;
};

// Throws ModelVariantMismatch when the requested variant differs from the
// model's own variant.
DebiasTransform make_transform(const PathModel& model, PathVariant requested);
DebiasTransform make_transform(const PathModel& model);

ScoredRecord debias(const ScoredRecord& record, const DebiasTransform& transform);
ScoredRecord debias(const ScoredRecord& record, const PathModel& model);
std::vector<ScoredRecord> debias_all(std::span<const ScoredRecord> records,
                                     const DebiasTransform& transform);

enum class QuantileMethod {
  Interpolate,  // order statistic at 1 + (n-1)q, linearly interpolated
  Nearest,      // smallest x with empirical CDF >= q
};

enum class ScoreKind { BiasedScores, DebiasedScores };

std::string_view to_string(QuantileMethod method);
QuantileMethod parse_quantile_method(std::string_view text);
std::string_view to_string(ScoreKind kind);

double quantile(std::span<const double> scores, double level,
                QuantileMethod method = QuantileMethod::Interpolate);

struct ThresholdRule {
  double quantile_level = 0.70;
  double threshold = 0.0;
  ScoreKind fitted_on = ScoreKind::BiasedScores;
  std::size_t n_train = 0;
  QuantileMethod method = QuantileMethod::Interpolate;
};

ThresholdRule fit_threshold(std::span<const double> train_scores, double quantile_level,
                            ScoreKind fitted_on = ScoreKind::BiasedScores,
                            QuantileMethod method = QuantileMethod::Interpolate);

// Ties go to LowRisk.
inline RiskLabel classify(double score, const ThresholdRule& rule) {
  return score > rule.threshold ? RiskLabel::HighRisk : RiskLabel::LowRisk;
}

nlohmann::ordered_json to_json(const DebiasTransform& transform);
nlohmann::ordered_json to_json(const ThresholdRule& rule);

}  // namespace debias
