#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "debias/data_ingest.hpp"

namespace debias {

struct LogisticModel {
  // weights(0) is the intercept; weights(1..) align with column_names.
  Eigen::VectorXd weights;
  std::vector<std::string> column_names;
  int n_iterations = 0;
  bool converged = false;
  double final_gradient_norm = 0.0;
};

struct LogisticOptions {
  int max_iter = 100;
  double tol = 1e-8;           // max-norm of the log-likelihood gradient
  double ridge_jitter = 1e-8;  // added to the diagonal of X'WX
};

// Newton / IRLS maximum likelihood. Convergence needs both a small gradient and
// a small Newton step, so separable data (where the step never settles) comes
// back with converged == false.
LogisticModel fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                           const LogisticOptions& options = {});
LogisticModel fit_logistic(const EncodedMatrix& train, const LogisticOptions& options = {});

// Gradient of the log-likelihood at the given weights (intercept first).
Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                                  const Eigen::VectorXd& weights);
double logistic_log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                               const Eigen::VectorXd& weights);

// Probability of HighRisk, strictly inside (0, 1).
double sigmoid(double eta);
std::vector<double> predict(const LogisticModel& model, const Eigen::MatrixXd& rows);
std::vector<double> predict(const LogisticModel& model, const EncodedMatrix& rows);

struct ScoredRecord {
  int age = 0;
  AgeGroup group = AgeGroup::Young;
  RiskLabel label = RiskLabel::LowRisk;
  double y_hat = 0.0;
  std::optional<double> y_tilde;
};

std::vector<ScoredRecord> join_scores(std::span<const CreditRecord> records,
                                      std::span<const double> scores);

struct CalibrationBin {
  double mean_predicted = 0.0;
  double observed_rate = 0.0;
  std::size_t count = 0;
};

struct CalibrationCurve {
  std::vector<CalibrationBin> bins;
};

// Ten equal-frequency bins over the sorted scores; the n % 10 leftover rows go
// one each to the lowest bins.
CalibrationCurve calibration_curve(std::span<const double> scores,
                                   std::span<const RiskLabel> labels);

}  // namespace debias
