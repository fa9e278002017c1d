#pragma once

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>
#include "json.hpp"

#include "debias/blackbox.hpp"

namespace debias {

enum class PathVariant { Linear, Quadratic, Discretized };

std::string_view to_string(PathVariant variant);
PathVariant parse_variant(std::string_view text);

enum class SeConvention {
  MaximumLikelihood,  // sigma^2 = RSS / n
  Unbiased,           // sigma^2 = RSS / (n - p)
};

struct LeastSquaresFit {
  Eigen::VectorXd coefficients;
  Eigen::VectorXd std_errors;
  Eigen::VectorXd residuals;
  double rss = 0.0;
  double sigma2_ml = 0.0;      // rss / n
  Eigen::MatrixXd covariance;  // sigma^2 (X'X)^-1 under the requested convention
};

// Least squares through a Householder QR of the design. Throws RankDeficient
// naming the first column that is linearly dependent on the ones before it.
LeastSquaresFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    std::span<const std::string> column_names = {},
                    SeConvention se = SeConvention::MaximumLikelihood);

struct WaldResult {
  double z_value = 0.0;
  double p_value = 1.0;
};

// Two-sided normal test of estimate / std_error.
WaldResult wald_test(double estimate, double std_error);

struct Coefficient {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double z_value = 0.0;
  double p_value = 1.0;
};

struct Equation {
  std::string response;
  Coefficient intercept;
  std::vector<Coefficient> coefficients;  // regressors in model order
  double rss = 0.0;
  double log_likelihood = 0.0;
  bool degenerate_variance = false;

  const Coefficient* find(std::string_view name) const;
  std::size_t parameter_count() const { return coefficients.size() + 2; }  // + intercept, variance
};

struct PathModel {
  PathVariant variant = PathVariant::Quadratic;
  Equation yhat_equation;
  Equation y_equation;
  double aic = 0.0;
  double log_likelihood = 0.0;
  std::size_t n = 0;
  SeConvention se_convention = SeConvention::MaximumLikelihood;
  std::vector<std::string> warnings;

  // Regressors carrying the protected attribute in the yhat equation.
  std::vector<std::string> age_terms() const;
  std::string digest() const;
};

// Regressor names used in equations and serialized output.
inline constexpr std::string_view kAge = "a";
inline constexpr std::string_view kAgeSquared = "a^2";
inline constexpr std::string_view kAgeMiddle = "a_m";
inline constexpr std::string_view kAgeSenior = "a_s";
inline constexpr std::string_view kRisk = "y";

// Value of an age regressor for a given age. Dummies use the Young/Middle/
// Senior bounds and are zero below the Middle range.
double age_regressor(std::string_view name, int age);

// Gaussian log-likelihood at sigma^2 = max(rss / n, 1e-12).
double gaussian_log_likelihood(double rss, std::size_t n, bool* degenerate = nullptr);

// AIC = 2k - 2l over the two-equation system; k counts every coefficient,
// both intercepts and both error variances.
double model_aic(const Equation& yhat_equation, const Equation& y_equation);

// Fits yhat = b0 + <age terms> + b_y y and y = b0 + b_a a equation by
// equation. Discretized drops a dummy with a warning when its group is empty.
PathModel fit_path_model(std::span<const ScoredRecord> scored, PathVariant variant,
                         SeConvention se = SeConvention::MaximumLikelihood);

// Refits only the yhat-style equation with an arbitrary response; used to
// check that de-biased scores carry no residual age effect.
Equation fit_score_equation(std::span<const ScoredRecord> scored, std::span<const double> response,
                            const std::vector<std::string>& age_terms,
                            SeConvention se = SeConvention::MaximumLikelihood);

nlohmann::ordered_json to_json(const Coefficient& c);
nlohmann::ordered_json to_json(const PathModel& model);

}  // namespace debias
