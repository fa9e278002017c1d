#include <algorithm>
#include <cmath>
#include <map>
#include <random>

#include "doctest.h"

#include "debias/audit.hpp"
#include "debias/debiaser.hpp"
#include "debias/error.hpp"
#include "synthetic.hpp"

using namespace debias;

namespace {

PathModel reference_quadratic() {
  PathModel m;
  m.variant = PathVariant::Quadratic;
  m.yhat_equation.intercept = {"(intercept)", 0.4603, 0.0, 0.0, 0.0};
  m.yhat_equation.coefficients = {{"a", -0.0104, 0.0, 0.0, 0.0},
                                  {"a^2", 8.3336e-5, 0.0, 0.0, 0.0},
                                  {"y", 0.3053, 0.0, 0.0, 0.0}};
  return m;
}

ScoredRecord record(int age, double y_hat, RiskLabel label = RiskLabel::LowRisk) {
  ScoredRecord r;
  r.age = age;
  r.group = age_group(age);
  r.label = label;
  r.y_hat = y_hat;
  return r;
}

}  // namespace

TEST_CASE("reference quadratic coefficients") {
  const auto t = make_transform(reference_quadratic());
  REQUIRE(t.terms.size() == 2);
  // 0.5 + 0.0104 * 30 - 8.3336e-5 * 900
  CHECK(t.apply(0.5, 30) == doctest::Approx(0.7369976).epsilon(1e-12));
  CHECK(format_fixed(t.apply(0.5, 30), 4) == "0.7370");
  CHECK(t.apply(0.5, 0) == 0.5);
  const auto d = debias::debias(record(30, 0.5), reference_quadratic());
  REQUIRE(d.y_tilde.has_value());
  CHECK(*d.y_tilde == t.apply(0.5, 30));
  CHECK(d.y_hat == 0.5);
}

TEST_CASE("zero age coefficients leave scores unchanged") {
  auto m = reference_quadratic();
  m.yhat_equation.coefficients[0].estimate = 0.0;
  m.yhat_equation.coefficients[1].estimate = 0.0;
  const auto t = make_transform(m);
  for (int age = 19; age <= 75; ++age) CHECK(t.apply(0.37, age) == 0.37);
}

TEST_CASE("transform is unclipped and has unit slope in y_hat") {
  const auto t = make_transform(reference_quadratic());
  const double low = t.apply(-0.5, 70);
  CHECK(low < 0.0);
  for (int age : {19, 37, 38, 56, 57, 75}) {
    CHECK(t.apply(0.8, age) - t.apply(0.3, age) == doctest::Approx(0.5).epsilon(1e-12));
  }
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int age = 19; age <= 75; ++age) {
    std::vector<double> a(30);
    for (auto& s : a) s = u(rng);
    std::vector<std::size_t> before(a.size()), after(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) before[i] = after[i] = i;
    std::sort(before.begin(), before.end(), [&](auto i, auto j) { return a[i] < a[j]; });
    std::sort(after.begin(), after.end(),
              [&](auto i, auto j) { return t.apply(a[i], age) < t.apply(a[j], age); });
    CHECK(before == after);
  }
}

TEST_CASE("variant mismatch is refused") {
  const auto m = reference_quadratic();
  CHECK_THROWS_AS(make_transform(m, PathVariant::Discretized), Error);
  try {
    make_transform(m, PathVariant::Linear);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::ModelVariantMismatch);
  }
  CHECK_NOTHROW(make_transform(m, PathVariant::Quadratic));
}

TEST_CASE("discretized transform subtracts group offsets") {
  PathModel m;
  m.variant = PathVariant::Discretized;
  m.yhat_equation.coefficients = {{"a_m", -0.0589, 0, 0, 0}, {"a_s", -0.0902, 0, 0, 0}, {"y", 0.3118, 0, 0, 0}};
  const auto t = make_transform(m);
  CHECK(t.apply(0.3, 19) == 0.3);
  CHECK(t.apply(0.3, 37) == 0.3);
  CHECK(t.apply(0.3, 38) == doctest::Approx(0.3589));
  CHECK(t.apply(0.3, 56) == doctest::Approx(0.3589));
  CHECK(t.apply(0.3, 57) == doctest::Approx(0.3902));
  CHECK(t.apply(0.3, 75) == doctest::Approx(0.3902));
}

TEST_CASE("de-biased scores carry no remaining age path") {
  for (auto variant : {PathVariant::Linear, PathVariant::Quadratic, PathVariant::Discretized}) {
    const auto data = synthetic::scored(400, 31, {0.46, -0.0104, 8.3e-5, 0.3, 0.05});
    const auto model = fit_path_model(data, variant);
    const auto out = debias_all(data, make_transform(model));
    std::vector<double> tilde;
    for (const auto& r : out) tilde.push_back(*r.y_tilde);
    const auto refit = fit_score_equation(out, tilde, model.age_terms());
    for (const auto& c : refit.coefficients) {
      if (c.name == "y") {
        CHECK(c.estimate == doctest::Approx(model.yhat_equation.find("y")->estimate).epsilon(1e-9));
      } else {
        CHECK(std::abs(c.estimate) <= 1e-10);
      }
    }
    CHECK(refit.intercept.estimate ==
          doctest::Approx(model.yhat_equation.intercept.estimate).epsilon(1e-9));
  }
}

TEST_CASE("quantile examples") {
  std::vector<double> ten;
  for (int i = 0; i <= 10; ++i) ten.push_back(i);
  CHECK(quantile(ten, 0.7) == doctest::Approx(7.0).epsilon(1e-14));
  CHECK(quantile(ten, 0.7, QuantileMethod::Nearest) == 7.0);
  const std::vector<double> four{4, 1, 3, 2};
  CHECK(quantile(four, 0.5) == 2.5);
  CHECK(quantile(four, 0.5, QuantileMethod::Nearest) == 2.0);
  const std::vector<double> one{0.42};
  CHECK(quantile(one, 0.3) == 0.42);
  CHECK_THROWS_AS(quantile(std::vector<double>{}, 0.7), Error);
  CHECK_THROWS_AS(quantile(four, 0.0), Error);
  CHECK_THROWS_AS(quantile(four, 1.0), Error);
}

TEST_CASE("quantile coverage is within 1/n") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (std::size_t n = 1; n < 400; n += 13) {
    std::vector<double> s(n);
    for (auto& v : s) v = u(rng);
    for (double q : {0.05, 0.3, 0.5, 0.7, 0.95}) {
      for (auto method : {QuantileMethod::Interpolate, QuantileMethod::Nearest}) {
        const double t = quantile(s, q, method);
        const double covered = double(std::count_if(s.begin(), s.end(), [&](double v) { return v <= t; })) / double(n);
        CHECK(std::abs(covered - q) <= 1.0 / double(n) + 1e-12);
        if (method == QuantileMethod::Nearest) CHECK(covered >= q);
      }
    }
  }
}

TEST_CASE("threshold rule classification") {
  ThresholdRule rule;
  rule.threshold = 0.4174;
  CHECK(classify(0.50, rule) == RiskLabel::HighRisk);
  CHECK(classify(0.4174, rule) == RiskLabel::LowRisk);
  CHECK(classify(-0.2, rule) == RiskLabel::LowRisk);
  CHECK(classify(std::nextafter(0.4174, 1.0), rule) == RiskLabel::HighRisk);

  std::vector<double> train;
  for (int i = 0; i < 100; ++i) train.push_back(i / 100.0);
  const auto fitted = fit_threshold(train, 0.7, ScoreKind::DebiasedScores);
  CHECK(fitted.threshold == doctest::Approx(0.693));
  CHECK(fitted.n_train == 100);
  CHECK(fitted.fitted_on == ScoreKind::DebiasedScores);
  const auto low = std::count_if(train.begin(), train.end(),
                                 [&](double s) { return classify(s, fitted) == RiskLabel::LowRisk; });
  CHECK(low == 70);
  const auto j = to_json(fitted);
  CHECK(j["quantile_level"] == 0.7);
  CHECK(j["n_train"] == 100);
}
