// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "debias/pipeline.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace debias;

namespace {

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [fail: " << what << "]";
    }
  }
};

std::string fixed(double v, int places = 4) { return format_fixed(v, places); }

PipelineConfig default_config() {
  PipelineConfig c;
  c.data_path = DEBIAS_DATA_FILE;
  return c;
}

// Rows as laid out in the reference tables: LowRisk Young/Middle/Senior, then
// HighRisk Young/Middle/Senior, each {classified low, classified high}.
using CountTable = std::array<std::array<std::uint64_t, 2>, 6>;

std::vector<Prediction> expand(const CountTable& t) {
  std::vector<Prediction> out;
  for (std::size_t i = 0; i < 6; ++i) {
    const RiskLabel label = i < 3 ? RiskLabel::LowRisk : RiskLabel::HighRisk;
    for (std::uint64_t c = 0; c < t[i][0]; ++c) out.push_back({kAgeGroups[i % 3], label, RiskLabel::LowRisk});
    for (std::uint64_t c = 0; c < t[i][1]; ++c) out.push_back({kAgeGroups[i % 3], label, RiskLabel::HighRisk});
  }
  return out;
}

void golden_tables(Outcome& o) {
  struct Case {
    const char* name;
    CountTable counts;
    std::array<const char*, 3> eo;
    const char* accuracy;
  };
  const Case cases[] = {
      {"train biased", {{{245, 60}, {132, 14}, {39, 2}, {53, 97}, {17, 28}, {6, 7}}}, {"0.8033", "0.9041", "0.9512"}, "0.7829"},
      {"train de-biased", {{{251, 54}, {129, 17}, {37, 4}, {58, 92}, {13, 32}, {5, 8}}}, {"0.8230", "0.8836", "0.9024"}, "0.7843"},
      {"test biased", {{{108, 31}, {56, 5}, {8, 0}, {24, 38}, {13, 11}, {2, 4}}}, {"0.7770", "0.9180", "1.0000"}, "0.7500"},
      {"test de-biased", {{{110, 29}, {53, 8}, {8, 0}, {25, 37}, {12, 12}, {1, 5}}}, {"0.7914", "0.8689", "1.0000"}, "0.7500"},
  };
  for (const auto& c : cases) {
    const auto a = tabulate(expand(c.counts));
    std::string got;
    for (std::size_t g = 0; g < 3; ++g) {
      const auto text = a.equal_opportunity[g]->format(4);
      o.require(text == c.eo[g], std::string(c.name) + " EO " + text + " != " + c.eo[g]);
      got += (g ? "/" : "") + text;
    }
    const auto acc = a.overall_accuracy.format(4);
    o.require(acc == c.accuracy, std::string(c.name) + " accuracy " + acc + " != " + c.accuracy);
    o.detail << ' ' << c.name << ' ' << got << " acc " << acc << ';';
  }
}

void qualitative_sweep(Outcome& o) {
  const auto summary = seed_sweep(default_config(), 20);
  const double n = double(summary.seeds.size());
  int a = 0, b = 0, c = 0, d = 0, all = 0;
  for (const auto& s : summary.seeds) {
    if (!s.ok) continue;
    const auto* age = s.coefficient("a");
    const bool pa = age && age->estimate < 0.0 && age->p_value < 0.05;
    const auto& eo = s.eo_train_biased;
    const bool pb = eo[0] && eo[1] && eo[2] && *eo[0] < *eo[1] && *eo[1] < *eo[2];
    const bool pc = s.eo_gap_train_after < s.eo_gap_train_before;
    const bool pd = std::abs(s.accuracy_delta_train) <= 0.03 && std::abs(s.accuracy_delta_test) <= 0.03;
    a += pa;
    b += pb;
    c += pc;
    d += pd;
    all += pa && pb && pc && pd;
  }
  o.detail << " seeds 1.." << summary.seeds.size() << ": (a) " << fixed(a / n, 2) << " (b) " << fixed(b / n, 2)
           << " (c) " << fixed(c / n, 2) << " (d) " << fixed(d / n, 2) << " jointly " << fixed(all / n, 2) << ';';
  o.require(a / n >= 0.8, "(a) beta_a < 0 with p < 0.05 below 0.80");
  o.require(b / n >= 0.8, "(b) monotone biased EO below 0.80");
  o.require(c / n >= 0.8, "(c) gap decrease below 0.80");
  o.require(d / n >= 0.8, "(d) accuracy stability below 0.80");
}

void coefficient_corridor(Outcome& o) {
  const auto records = parse_dataset(std::filesystem::path(DEBIAS_DATA_FILE));
  const auto run = execute_pipeline(default_config(), records);
  const auto& eq = run.post.path_model.yhat_equation;
  const double by = eq.find("y")->estimate;
  const double ba = eq.find("a")->estimate;
  const double ba2 = eq.find("a^2")->estimate;
  const double b0 = eq.intercept.estimate;
  o.detail << " seed 42 quadratic: b0 " << fixed(b0) << " b_a " << fixed(ba) << " b_a2 " << ba2 << " b_y "
           << fixed(by) << ';';
  o.require(by >= 0.20 && by <= 0.40, "beta_y outside [0.20, 0.40]");
  o.require(ba2 > 0.0 && ba2 < 5e-4, "beta_a2 outside (0, 5e-4)");
  o.require(b0 > 0.0 && ba < 0.0 && ba2 > 0.0 && by > 0.0, "signs differ from the reference fit");

  auto disc = default_config();
  disc.variant = PathVariant::Discretized;
  const auto summary = seed_sweep(disc, 20);
  int ordered = 0, middle_negative = 0;
  for (const auto& s : summary.seeds) {
    if (!s.ok) continue;
    const auto* am = s.coefficient("a_m");
    const auto* as = s.coefficient("a_s");
    if (am && am->estimate < 0.0) ++middle_negative;
    if (am && as && am->estimate < 0.0 && as->estimate < am->estimate) ++ordered;
  }
  const double n = double(summary.seeds.size());
  o.detail << " discretized over 20 seeds: b_am < 0 " << fixed(middle_negative / n, 2) << ", b_as < b_am < 0 "
           << fixed(ordered / n, 2) << ';';
  o.require(ordered / n >= 0.7, "discretized ordering below 0.70");
}

double max_age_term(const Equation& eq) {
  double worst = 0.0;
  for (const auto& c : eq.coefficients) {
    if (c.name != "y") worst = std::max(worst, std::abs(c.estimate));
  }
  return worst;
}

double refit_age_terms(std::span<const ScoredRecord> data, const PathModel& model) {
  const auto out = debias_all(data, make_transform(model));
  std::vector<double> tilde;
  tilde.reserve(out.size());
  for (const auto& r : out) tilde.push_back(*r.y_tilde);
  return max_age_term(fit_score_equation(out, tilde, model.age_terms()));
}

void orthogonality(Outcome& o) {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const PathVariant variants[] = {PathVariant::Linear, PathVariant::Quadratic, PathVariant::Discretized};
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    synthetic::ScoreModel m;
    m.intercept = 0.2 + 0.4 * u(rng);
    m.age = -0.02 * u(rng);
    m.age_squared = 2e-4 * u(rng);
    m.risk = 0.1 + 0.4 * u(rng);
    m.noise_sd = 0.01 + 0.1 * u(rng);
    const std::size_t n = 30 + std::size_t(u(rng) * 700);
    const auto data = synthetic::scored(n, 5000 + std::uint64_t(rep), m);
    const auto variant = variants[rep % 3];
    worst = std::max(worst, refit_age_terms(data, fit_path_model(data, variant)));
  }
  o.detail << " 100 synthetic fits max |age coef| " << worst << ';';
  o.require(worst <= 1e-10, "synthetic refit age coefficient above 1e-10");

  const auto records = parse_dataset(std::filesystem::path(DEBIAS_DATA_FILE));
  for (auto variant : variants) {
    auto cfg = default_config();
    cfg.variant = variant;
    const auto run = execute_pipeline(cfg, records);
    const double w = refit_age_terms(run.train_scores, run.post.path_model);
    o.detail << " canonical " << to_string(variant) << ' ' << w << ';';
    o.require(w <= 1e-10, "canonical refit age coefficient above 1e-10");
  }
}

void oracle_equivalence(Outcome& o) {
  std::mt19937_64 rng(77);
  std::uniform_int_distribution<int> cols(1, 6);
  std::normal_distribution<double> z(0.0, 1.0);
  double worst_coef = 0.0, worst_se = 0.0;
  for (int rep = 0; rep < 200; ++rep) {
    const int p = cols(rng);
    const int n = std::uniform_int_distribution<int>(p + 1, 50)(rng);
    Eigen::MatrixXd x(n, p);
    Eigen::VectorXd y(n);
    oracle::Matrix ox(static_cast<std::size_t>(n), oracle::Vector(static_cast<std::size_t>(p)));
    oracle::Vector oy(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      for (int j = 1; j < p; ++j) x(i, j) = z(rng) * (1 + j);
      y(i) = z(rng) + 0.5 * x.row(i).sum();
      for (int j = 0; j < p; ++j) ox[std::size_t(i)][std::size_t(j)] = x(i, j);
      oy[std::size_t(i)] = y(i);
    }
    const auto fit = ols(x, y);
    const auto ref = oracle::normal_equations(ox, oy);
    for (int j = 0; j < p; ++j) {
      worst_coef = std::max(worst_coef, std::abs(fit.coefficients(j) - ref.coefficients[std::size_t(j)]));
      worst_se = std::max(worst_se, std::abs(fit.std_errors(j) - ref.std_errors[std::size_t(j)]));
    }
  }
  o.detail << " 200 instances: max coef diff " << worst_coef << ", max se diff " << worst_se << ';';
  o.require(worst_coef <= 1e-8, "coefficient difference above 1e-8");
  o.require(worst_se <= 1e-6, "standard error difference above 1e-6");
}

void threshold_semantics(Outcome& o) {
  const std::vector<double> four{1, 2, 3, 4};
  const double q = quantile(four, 0.5);
  o.require(q == 2.5, "{1,2,3,4} at 0.5 gave " + std::to_string(q));
  std::vector<double> eleven;
  for (int i = 0; i <= 10; ++i) eleven.push_back(i);
  const double q7 = quantile(eleven, 0.7);
  o.require(std::abs(q7 - 7.0) <= 1e-12, "{0..10} at 0.7 gave " + std::to_string(q7));
  o.detail << " {1,2,3,4}@0.5 = " << q << ", {0..10}@0.7 = " << q7 << ';';

  const auto records = parse_dataset(std::filesystem::path(DEBIAS_DATA_FILE));
  const auto run = execute_pipeline(default_config(), records);
  const auto& post = run.post;
  const double n = double(post.train.size());
  std::size_t low_b = 0, low_d = 0;
  for (const auto& r : post.train) {
    low_b += r.pred_biased == RiskLabel::LowRisk;
    low_d += r.pred_debiased == RiskLabel::LowRisk;
  }
  o.detail << " canonical LowRisk fraction y_hat " << fixed(low_b / n) << " y_tilde " << fixed(low_d / n)
           << " (level " << post.biased_rule.quantile_level << ", n " << post.train.size() << ");";
  o.require(std::abs(low_b / n - post.biased_rule.quantile_level) <= 1.0 / n, "biased coverage off by more than 1/n");
  o.require(std::abs(low_d / n - post.debiased_rule.quantile_level) <= 1.0 / n, "de-biased coverage off by more than 1/n");

  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (std::size_t size = 5; size < 500; size += 37) {
    std::vector<double> s(size);
    for (auto& v : s) v = u(rng);
    for (double level : {0.1, 0.5, 0.7, 0.9}) {
      const auto rule = fit_threshold(s, level);
      const double low = double(std::count_if(s.begin(), s.end(), [&](double v) {
                           return classify(v, rule) == RiskLabel::LowRisk;
                         })) / double(size);
      o.require(std::abs(low - level) <= 1.0 / double(size), "random sample coverage off by more than 1/n");
    }
  }
}

void predictor_sanity(Outcome& o) {
  const auto records = parse_dataset(std::filesystem::path(DEBIAS_DATA_FILE));
  const auto run = execute_pipeline(default_config(), records);
  const auto plan = split(records, 42, 0.7);
  const auto enc = encode(select<CreditRecord>(records, plan.train_indices));
  const double grad = logistic_gradient(enc.design, enc.target, run.model.weights).lpNorm<Eigen::Infinity>();
  double mean = 0.0;
  for (const auto& r : run.train_scores) mean += r.y_hat;
  mean /= double(run.train_scores.size());
  const double base = enc.target.mean();
  std::size_t total = 0, lo = SIZE_MAX, hi = 0;
  for (const auto& b : run.post.calibration.bins) {
    total += b.count;
    lo = std::min(lo, b.count);
    hi = std::max(hi, b.count);
  }
  o.detail << " converged " << (run.model.converged ? "yes" : "no") << " in " << run.model.n_iterations
           << " iterations, |grad| " << grad << ", mean " << fixed(mean, 9) << " vs base " << fixed(base, 9)
           << ", bins " << run.post.calibration.bins.size() << " sizes " << lo << ".." << hi << ';';
  o.require(run.model.converged, "IRLS did not converge");
  o.require(grad <= 1e-8, "gradient above 1e-8");
  o.require(std::abs(mean - base) <= 1e-6, "mean prediction differs from base rate");
  o.require(total == run.train_scores.size() && hi - lo <= 1, "calibration bins do not partition evenly");
}

void aic_behaviour(Outcome& o) {
  int quad_wins = 0, lin_wins = 0;
  for (std::uint64_t rep = 0; rep < 50; ++rep) {
    const auto curved = synthetic::scored(700, 9000 + rep, {0.46, -0.0104, 1e-4, 0.3, 0.05});
    quad_wins += fit_path_model(curved, PathVariant::Quadratic).aic < fit_path_model(curved, PathVariant::Linear).aic;
    const auto straight = synthetic::scored(700, 9500 + rep, {0.46, -0.0104, 0.0, 0.3, 0.05});
    lin_wins += fit_path_model(straight, PathVariant::Linear).aic < fit_path_model(straight, PathVariant::Quadratic).aic;
  }
  o.detail << " quadratic preferred on curved data " << quad_wins << "/50, linear preferred on straight data "
           << lin_wins << "/50;";
  o.require(quad_wins >= 45, "quadratic preferred in fewer than 90% of curved replications");
  o.require(lin_wins >= 30, "linear preferred in fewer than 60% of straight replications");
}

}  // namespace

int main() {
  struct Criterion {
    int id;
    const char* name;
    std::function<void(Outcome&)> check;
    double budget_seconds;
  };
  const Criterion criteria[] = {
      {1, "golden metric reproduction", golden_tables, 1.0},
      {2, "qualitative replication over 20 seeds", qualitative_sweep, 120.0},
      {3, "coefficient corridor", coefficient_corridor, 120.0},
      {4, "de-bias orthogonality", orthogonality, 120.0},
      {5, "ols oracle equivalence", oracle_equivalence, 120.0},
      {6, "threshold semantics", threshold_semantics, 120.0},
      {7, "predictor sanity", predictor_sanity, 120.0},
      {8, "AIC behaviour", aic_behaviour, 120.0},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    Outcome o;
    const auto start = std::chrono::steady_clock::now();
    try {
      c.check(o);
    } catch (const std::exception& e) {
      o.require(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    o.require(secs < c.budget_seconds, "runtime over budget");
    failed += !o.pass;
    std::printf("%s %d %s (%.2fs):%s\n", o.pass ? "PASS" : "FAIL", c.id, c.name, secs, o.detail.str().c_str());
  }
  std::printf("%d of %zu criteria passed\n", int(std::size(criteria)) - failed, std::size(criteria));
  return failed == 0 ? 0 : 1;
}
