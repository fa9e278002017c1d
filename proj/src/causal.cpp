#include "debias/causal.hpp"

#include <algorithm>
#include <cmath>

#include "debias/digest.hpp"
#include "debias/error.hpp"

namespace debias {

namespace {

constexpr double kVarianceFloor = 1e-12;
constexpr double kLog2Pi = 1.8378770664093454836;

std::size_t matrix_rank(const Eigen::MatrixXd& x) {
  // Unit-norm columns so raw-years-squared does not swamp the pivot threshold.
  Eigen::MatrixXd scaled = x;
  for (Eigen::Index c = 0; c < scaled.cols(); ++c) {
    const double norm = scaled.col(c).norm();
    if (norm > 0) scaled.col(c) /= norm;
  }
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(scaled);
  qr.setThreshold(1e-10);
  return static_cast<std::size_t>(qr.rank());
}

std::string column_label(std::span<const std::string> names, Eigen::Index c) {
  if (static_cast<std::size_t>(c) < names.size()) return names[static_cast<std::size_t>(c)];
  return "column " + std::to_string(c);
}

Coefficient make_coefficient(std::string name, double estimate, double std_error) {
  const auto wald = wald_test(estimate, std_error);
  return {std::move(name), estimate, std_error, wald.z_value, wald.p_value};
}

Equation fit_equation(std::string response_name, const std::vector<std::string>& regressors,
                      const Eigen::MatrixXd& columns, const Eigen::VectorXd& response,
                      SeConvention se) {
  const Eigen::Index n = response.size();
  Eigen::MatrixXd design(n, columns.cols() + 1);
  design.col(0).setOnes();
  design.rightCols(columns.cols()) = columns;
  std::vector<std::string> names{"(intercept)"};
  names.insert(names.end(), regressors.begin(), regressors.end());

  LeastSquaresFit fit = ols(design, response, names, se);
  Equation eq;
  eq.response = std::move(response_name);
  eq.rss = fit.rss;
  eq.log_likelihood = gaussian_log_likelihood(fit.rss, static_cast<std::size_t>(n),
                                              &eq.degenerate_variance);
  if (eq.degenerate_variance) {
    // Floor the residual variance so every standard error stays positive.
    const double denom = se == SeConvention::Unbiased ? double(n - design.cols()) : double(n);
    const double sigma2 = std::max(fit.rss / denom, kVarianceFloor);
    const double current = se == SeConvention::Unbiased ? fit.rss / denom : fit.sigma2_ml;
    if (current > 0) {
      fit.std_errors *= std::sqrt(sigma2 / current);
    } else {
      Eigen::MatrixXd xtx = design.transpose() * design;
      fit.std_errors = (sigma2 * xtx.inverse().diagonal()).array().sqrt();
    }
  }
  eq.intercept = make_coefficient("(intercept)", fit.coefficients(0), fit.std_errors(0));
  for (std::size_t k = 0; k < regressors.size(); ++k) {
    const auto idx = static_cast<Eigen::Index>(k + 1);
    eq.coefficients.push_back(
        make_coefficient(regressors[k], fit.coefficients(idx), fit.std_errors(idx)));
  }
  return eq;
}

Eigen::MatrixXd regressor_columns(std::span<const ScoredRecord> scored,
                                  const std::vector<std::string>& names) {
  Eigen::MatrixXd cols(static_cast<Eigen::Index>(scored.size()),
                       static_cast<Eigen::Index>(names.size()));
  for (std::size_t i = 0; i < scored.size(); ++i) {
    for (std::size_t k = 0; k < names.size(); ++k) {
      const double v = names[k] == kRisk ? risk_code(scored[i].label)
                                         : age_regressor(names[k], scored[i].age);
      cols(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = v;
    }
  }
  return cols;
}

}  // namespace

std::string_view to_string(PathVariant variant) {
  switch (variant) {
    case PathVariant::Linear: return "linear";
    case PathVariant::Quadratic: return "quadratic";
    case PathVariant::Discretized: return "discretized";
  }
  return "?";
}

PathVariant parse_variant(std::string_view text) {
  if (text == "linear") return PathVariant::Linear;
  if (text == "quadratic") return PathVariant::Quadratic;
  if (text == "discretized") return PathVariant::Discretized;
  throw Error(ErrorKind::ConfigError, "unknown variant '" + std::string(text) + "'");
}

LeastSquaresFit ols(const Eigen::MatrixXd& design, const Eigen::VectorXd& response,
                    std::span<const std::string> column_names, SeConvention se) {
  const Eigen::Index n = design.rows();
  const Eigen::Index p = design.cols();
  if (response.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "design rows and response length differ");
  }
  if (p == 0 || n <= p) {
    throw Error(ErrorKind::TooFewRows, "need more rows than columns (n=" + std::to_string(n) +
                                           ", p=" + std::to_string(p) + ")");
  }
  if (matrix_rank(design) < static_cast<std::size_t>(p)) {
    for (Eigen::Index c = 0; c < p; ++c) {
      if (matrix_rank(design.leftCols(c + 1)) < static_cast<std::size_t>(c + 1)) {
        throw Error(ErrorKind::RankDeficient,
                    column_label(column_names, c) + " is linearly dependent on earlier columns");
      }
    }
  }

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(design);
  LeastSquaresFit fit;
  fit.coefficients = qr.solve(response);
  fit.residuals = response - design * fit.coefficients;
  fit.rss = fit.residuals.squaredNorm();
  fit.sigma2_ml = fit.rss / double(n);

  // (X'X)^-1 = R^-1 R^-T from the triangular factor.
  const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  const Eigen::MatrixXd r_inv =
      r.triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
  const double sigma2 =
      se == SeConvention::MaximumLikelihood ? fit.sigma2_ml : fit.rss / double(n - p);
  fit.covariance = sigma2 * (r_inv * r_inv.transpose());
  fit.std_errors = fit.covariance.diagonal().array().sqrt();
  return fit;
}

WaldResult wald_test(double estimate, double std_error) {
  if (!(std_error > 0.0) || !std::isfinite(std_error)) {
    throw Error(ErrorKind::ZeroStdError, "standard error must be positive and finite");
  }
  WaldResult r;
  r.z_value = estimate / std_error;
  r.p_value = std::clamp(std::erfc(std::abs(r.z_value) / std::sqrt(2.0)), 0.0, 1.0);
  return r;
}

const Coefficient* Equation::find(std::string_view name) const {
  for (const auto& c : coefficients) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

std::vector<std::string> PathModel::age_terms() const {
  std::vector<std::string> terms;
  for (const auto& c : yhat_equation.coefficients) {
    if (c.name != kRisk) terms.push_back(c.name);
  }
  return terms;
}

std::string PathModel::digest() const { return short_digest(to_json(*this).dump()); }

double age_regressor(std::string_view name, int age) {
  if (name == kAge) return age;
  if (name == kAgeSquared) return double(age) * double(age);
  if (name == kAgeMiddle) return age >= 38 && age <= 56 ? 1.0 : 0.0;
  if (name == kAgeSenior) return age >= 57 ? 1.0 : 0.0;
  throw Error(ErrorKind::ModelVariantMismatch, "unknown age regressor '" + std::string(name) + "'");
}

double gaussian_log_likelihood(double rss, std::size_t n, bool* degenerate) {
  double sigma2 = rss / double(n);
  const bool floored = sigma2 < kVarianceFloor;
  if (floored) sigma2 = kVarianceFloor;
  if (degenerate) *degenerate = floored;
  // At the ML variance rss/n the quadratic term reduces to n/2; otherwise use rss directly.
  const double quad = floored ? rss / sigma2 : double(n);
  return -0.5 * (double(n) * (kLog2Pi + std::log(sigma2)) + quad);
}

double model_aic(const Equation& yhat_equation, const Equation& y_equation) {
  const double k = double(yhat_equation.parameter_count() + y_equation.parameter_count());
  return 2.0 * k - 2.0 * (yhat_equation.log_likelihood + y_equation.log_likelihood);
}

PathModel fit_path_model(std::span<const ScoredRecord> scored, PathVariant variant,
                         SeConvention se) {
  if (scored.size() < 10) {
    throw Error(ErrorKind::TooFewRows, "path model needs at least 10 records");
  }
  PathModel model;
  model.variant = variant;
  model.n = scored.size();
  model.se_convention = se;

  std::vector<std::string> age_terms;
  switch (variant) {
    case PathVariant::Linear: age_terms = {std::string(kAge)}; break;
    case PathVariant::Quadratic: age_terms = {std::string(kAge), std::string(kAgeSquared)}; break;
    case PathVariant::Discretized:
      for (auto term : {kAgeMiddle, kAgeSenior}) {
        const bool present = std::any_of(scored.begin(), scored.end(), [&](const auto& r) {
          return age_regressor(term, r.age) != 0.0;
        });
        if (present) {
          age_terms.emplace_back(term);
        } else {
          model.warnings.push_back("dummy " + std::string(term) +
                                   " dropped: no records in its age group");
        }
      }
      break;
  }

  model.yhat_equation = fit_score_equation(scored, [&] {
    std::vector<double> y_hat;
    for (const auto& r : scored) y_hat.push_back(r.y_hat);
    return y_hat;
  }(), age_terms, se);

  const std::vector<std::string> y_regressors{std::string(kAge)};
  Eigen::VectorXd y(static_cast<Eigen::Index>(scored.size()));
  for (std::size_t i = 0; i < scored.size(); ++i) y(static_cast<Eigen::Index>(i)) = risk_code(scored[i].label);
  model.y_equation =
      fit_equation(std::string(kRisk), y_regressors, regressor_columns(scored, y_regressors), y, se);

  for (const auto* eq : {&model.yhat_equation, &model.y_equation}) {
    if (eq->degenerate_variance) {
      model.warnings.push_back("DegenerateVariance: residual variance of the " + eq->response +
                               " equation floored at 1e-12");
    }
  }
  model.log_likelihood = model.yhat_equation.log_likelihood + model.y_equation.log_likelihood;
  model.aic = model_aic(model.yhat_equation, model.y_equation);
  return model;
}

Equation fit_score_equation(std::span<const ScoredRecord> scored, std::span<const double> response,
                            const std::vector<std::string>& age_terms, SeConvention se) {
  if (response.size() != scored.size()) {
    throw Error(ErrorKind::DimensionMismatch, "response length differs from record count");
  }
  std::vector<std::string> regressors = age_terms;
  regressors.emplace_back(kRisk);
  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(response.data(),
                                                        static_cast<Eigen::Index>(response.size()));
  return fit_equation("y_hat", regressors, regressor_columns(scored, regressors), y, se);
}

nlohmann::ordered_json to_json(const Coefficient& c) {
  return {{"name", c.name}, {"est", c.estimate}, {"se", c.std_error}, {"z", c.z_value},
          {"p", c.p_value}};
}

namespace {

nlohmann::ordered_json equation_json(const Equation& eq) {
  nlohmann::ordered_json coefs = nlohmann::ordered_json::array();
  coefs.push_back(to_json(eq.intercept));
  for (const auto& c : eq.coefficients) coefs.push_back(to_json(c));
  return {{"response", eq.response},
          {"coefficients", coefs},
          {"rss", eq.rss},
          {"log_likelihood", eq.log_likelihood}};
}

}  // namespace

nlohmann::ordered_json to_json(const PathModel& model) {
  return {{"variant", to_string(model.variant)},
          {"se_convention", model.se_convention == SeConvention::MaximumLikelihood ? "ml" : "unbiased"},
          {"n", model.n},
          {"log_likelihood", model.log_likelihood},
          {"aic", model.aic},
          {"aic_scope", "joint two-equation system (y_hat and y equations); "
                        "intercepts and both error variances counted"},
          {"equations", {{"y_hat", equation_json(model.yhat_equation)},
                         {"y", equation_json(model.y_equation)}}},
          {"warnings", model.warnings}};
}

}  // namespace debias
