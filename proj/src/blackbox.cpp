#include "debias/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "debias/error.hpp"

namespace debias {

namespace {

// Newton steps below this (relative to the weight scale) count as settled.
constexpr double kStepTol = 1e-6;

Eigen::MatrixXd with_intercept(const Eigen::MatrixXd& design) {
  Eigen::MatrixXd x(design.rows(), design.cols() + 1);
  x.col(0).setOnes();
  x.rightCols(design.cols()) = design;
  return x;
}

double softplus(double eta) { return eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta)); }

Eigen::VectorXd probabilities(const Eigen::MatrixXd& x1, const Eigen::VectorXd& w) {
  Eigen::VectorXd eta = x1 * w;
  return eta.unaryExpr([](double v) { return sigmoid(v); });
}

}  // namespace

double sigmoid(double eta) {
  double p;
  if (eta >= 0) {
    p = 1.0 / (1.0 + std::exp(-eta));
  } else {
    double e = std::exp(eta);
    p = e / (1.0 + e);
  }
  if (p <= 0.0) return std::nextafter(0.0, 1.0);
  if (p >= 1.0) return std::nextafter(1.0, 0.0);
  return p;
}

Eigen::VectorXd logistic_gradient(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                                  const Eigen::VectorXd& weights) {
  const Eigen::MatrixXd x1 = with_intercept(design);
  return x1.transpose() * (target - probabilities(x1, weights));
}

double logistic_log_likelihood(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                               const Eigen::VectorXd& weights) {
  const Eigen::VectorXd eta = with_intercept(design) * weights;
  double ll = 0.0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) ll += target(i) * eta(i) - softplus(eta(i));
  return ll;
}

LogisticModel fit_logistic(const Eigen::MatrixXd& design, const Eigen::VectorXd& target,
                           const LogisticOptions& options) {
  if (options.max_iter < 1) throw Error(ErrorKind::ConfigError, "max_iter must be >= 1");
  if (design.rows() != target.size()) {
    throw Error(ErrorKind::DimensionMismatch, "design rows and target length differ");
  }
  if (design.rows() == 0) throw Error(ErrorKind::EmptyInput, "no training rows");

  const Eigen::MatrixXd x1 = with_intercept(design);
  const Eigen::Index p = x1.cols();
  LogisticModel model;
  model.weights = Eigen::VectorXd::Zero(p);

  Eigen::VectorXd grad;
  for (int it = 0; it < options.max_iter; ++it) {
    const Eigen::VectorXd prob = probabilities(x1, model.weights);
    grad = x1.transpose() * (target - prob);
    const Eigen::VectorXd w = prob.array() * (1.0 - prob.array());

    Eigen::MatrixXd normal = x1.transpose() * w.asDiagonal() * x1;
    normal.diagonal().array() += options.ridge_jitter;

    // Solve the Newton system after symmetric diagonal scaling; raw columns
    // such as credit amount make the unscaled matrix badly conditioned.
    const Eigen::VectorXd scale = normal.diagonal().array().rsqrt();
    const Eigen::MatrixXd scaled = scale.asDiagonal() * normal * scale.asDiagonal();
    Eigen::LDLT<Eigen::MatrixXd> ldlt(scaled);
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
      throw Error(ErrorKind::SingularSystem, "jittered normal matrix is not positive definite");
    }
    const Eigen::VectorXd step = scale.asDiagonal() * ldlt.solve(scale.asDiagonal() * grad);
    if (!step.allFinite()) {
      throw Error(ErrorKind::SingularSystem, "Newton step is not finite");
    }

    model.n_iterations = it + 1;
    model.final_gradient_norm = grad.lpNorm<Eigen::Infinity>();
    const double weight_scale = 1.0 + model.weights.lpNorm<Eigen::Infinity>();
    if (model.final_gradient_norm <= options.tol &&
        step.lpNorm<Eigen::Infinity>() <= kStepTol * weight_scale) {
      model.converged = true;
      break;
    }
    model.weights += step;
  }
  if (!model.converged) {
    model.final_gradient_norm = logistic_gradient(design, target, model.weights).lpNorm<Eigen::Infinity>();
  }
  return model;
}

LogisticModel fit_logistic(const EncodedMatrix& train, const LogisticOptions& options) {
  auto model = fit_logistic(train.design, train.target, options);
  model.column_names = train.column_names;
  return model;
}

std::vector<double> predict(const LogisticModel& model, const Eigen::MatrixXd& rows) {
  if (rows.cols() + 1 != model.weights.size()) {
    throw Error(ErrorKind::DimensionMismatch,
                "row width " + std::to_string(rows.cols()) + " does not match model width " +
                    std::to_string(model.weights.size() - 1));
  }
  const Eigen::VectorXd eta =
      (rows * model.weights.tail(rows.cols())).array() + model.weights(0);
  std::vector<double> out(static_cast<std::size_t>(eta.size()));
  for (Eigen::Index i = 0; i < eta.size(); ++i) out[static_cast<std::size_t>(i)] = sigmoid(eta(i));
  return out;
}

std::vector<double> predict(const LogisticModel& model, const EncodedMatrix& rows) {
  return predict(model, rows.design);
}

std::vector<ScoredRecord> join_scores(std::span<const CreditRecord> records,
                                      std::span<const double> scores) {
  if (records.size() != scores.size()) {
    throw Error(ErrorKind::DimensionMismatch, "record and score counts differ");
  }
  std::vector<ScoredRecord> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    out.push_back({records[i].age, age_group(records[i].age), records[i].label, scores[i], {}});
  }
  return out;
}

CalibrationCurve calibration_curve(std::span<const double> scores,
                                   std::span<const RiskLabel> labels) {
  constexpr std::size_t kBins = 10;
  if (scores.size() != labels.size()) {
    throw Error(ErrorKind::DimensionMismatch, "score and label counts differ");
  }
  if (scores.size() < kBins) {
    throw Error(ErrorKind::TooFewRows, "calibration needs at least 10 scored rows");
  }
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const std::size_t base = scores.size() / kBins;
  const std::size_t extra = scores.size() % kBins;
  CalibrationCurve curve;
  std::size_t pos = 0;
  for (std::size_t b = 0; b < kBins; ++b) {
    const std::size_t count = base + (b < extra ? 1 : 0);
    double score_sum = 0.0;
    std::size_t positives = 0;
    for (std::size_t k = 0; k < count; ++k, ++pos) {
      score_sum += scores[order[pos]];
      positives += labels[order[pos]] == RiskLabel::HighRisk;
    }
    curve.bins.push_back({score_sum / double(count), double(positives) / double(count), count});
  }
  return curve;
}

}  // namespace debias
