#include "debias/pipeline.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>

#include "debias/digest.hpp"

namespace debias {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

template <typename F>
auto in_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.kind(), e.detail());
  } catch (const std::exception& e) {
    throw StageError(stage, ErrorKind::IoError, e.what());
  }
}

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

int label_code(RiskLabel label) { return label == RiskLabel::HighRisk ? 1 : 0; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                     : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

struct CsvLines {
  std::optional<Provenance> provenance;
  std::string_view header;
  std::size_t header_line = 0;
  std::vector<std::pair<std::size_t, std::string_view>> rows;  // (line number, text)
};

std::optional<Provenance> parse_provenance(std::string_view line) {
  constexpr std::string_view kTag = "# provenance";
  if (line.substr(0, kTag.size()) != kTag) return std::nullopt;
  Provenance p;
  std::istringstream is{std::string(line.substr(kTag.size()))};
  std::string kv;
  while (is >> kv) {
    auto eq = kv.find('=');
    if (eq == std::string::npos) continue;
    auto key = kv.substr(0, eq);
    auto value = kv.substr(eq + 1);
    if (key == "population") p.population = value;
    else if (key == "seed") p.seed = std::stoull(value);
    else if (key == "split") p.split_digest = value;
    else if (key == "config") p.config_digest = value;
  }
  return p;
}

CsvLines split_csv(std::string_view text) {
  CsvLines out;
  std::size_t line_no = 0;
  bool have_header = false;
  while (!text.empty()) {
    ++line_no;
    auto eol = text.find('\n');
    auto line = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      if (!have_header && !out.provenance) out.provenance = parse_provenance(line);
      continue;
    }
    if (!have_header) {
      out.header = line;
      out.header_line = line_no;
      have_header = true;
    } else {
      out.rows.emplace_back(line_no, line);
    }
  }
  if (!have_header) throw Error(ErrorKind::SchemaError, "missing header row");
  return out;
}

[[noreturn]] void schema_error(std::size_t line, std::size_t col, std::string_view col_name,
                               const std::string& what) {
  throw Error(ErrorKind::SchemaError, "line " + std::to_string(line) + ", column " +
                                          std::to_string(col + 1) + " (" + std::string(col_name) +
                                          "): " + what);
}

int parse_int_field(std::string_view text, std::size_t line, std::size_t col, std::string_view name) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    schema_error(line, col, name, "not an integer: '" + std::string(text) + "'");
  }
  return v;
}

double parse_double_field(std::string_view text, std::size_t line, std::size_t col,
                          std::string_view name) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size() || !std::isfinite(v)) {
    schema_error(line, col, name, "not a finite number: '" + std::string(text) + "'");
  }
  return v;
}

RiskLabel parse_label_field(std::string_view text, std::size_t line, std::size_t col,
                            std::string_view name) {
  if (text == "0") return RiskLabel::LowRisk;
  if (text == "1") return RiskLabel::HighRisk;
  schema_error(line, col, name, "expected 0 or 1, got '" + std::string(text) + "'");
}

void check_header(const CsvLines& csv, const std::vector<std::string_view>& expected) {
  const auto fields = split_fields(csv.header);
  if (fields != expected) {
    std::string want;
    for (auto f : expected) want += (want.empty() ? "" : ",") + std::string(f);
    throw Error(ErrorKind::SchemaError, "line " + std::to_string(csv.header_line) +
                                            ": header must be '" + want + "', got '" +
                                            std::string(csv.header) + "'");
  }
}

// Shared prefix age,group,label of both boundary schemas.
void parse_identity(const std::vector<std::string_view>& f, std::size_t line, int& age,
                    AgeGroup& group, RiskLabel& label) {
  age = parse_int_field(f[0], line, 0, "age");
  AgeGroup expected;
  try {
    expected = age_group(age);
  } catch (const Error& e) {
    schema_error(line, 0, "age", e.what());
  }
  try {
    group = parse_age_group(f[1]);
  } catch (const Error&) {
    schema_error(line, 1, "group", "unknown group '" + std::string(f[1]) + "'");
  }
  if (group != expected) {
    schema_error(line, 1, "group", "group " + std::string(f[1]) + " does not match age " +
                                       std::to_string(age));
  }
  label = parse_label_field(f[2], line, 2, "label");
}

// ---------------------------------------------------------------------------
// Artifact bookkeeping.
// ---------------------------------------------------------------------------

struct RunContext {
  std::string config_digest;
  std::uint64_t seed = 0;
  std::string split_digest;
};

class ArtifactWriter {
 public:
  explicit ArtifactWriter(fs::path dir) : dir_(std::move(dir)) {}

  const std::string& write(const std::string& name, const std::string& content) {
    std::ofstream out(dir_ / name, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorKind::IoError, "cannot write " + (dir_ / name).string());
    out << content;
    if (!out) throw Error(ErrorKind::IoError, "short write to " + (dir_ / name).string());
    order_.push_back(name);
    return digests_[name] = short_digest(content);
  }

  void adopt(const std::string& name, const std::string& digest) { digests_[name] = digest; }

  const std::string& digest(const std::string& name) const { return digests_.at(name); }
  const std::vector<std::string>& order() const { return order_; }
  const fs::path& dir() const { return dir_; }

 private:
  fs::path dir_;
  std::map<std::string, std::string> digests_;
  std::vector<std::string> order_;
};

ojson envelope(const std::string& name, const RunContext& ctx, const ArtifactWriter& w,
               std::initializer_list<std::string> upstream, const ojson& payload) {
  ojson up = ojson::object();
  for (const auto& u : upstream) up[u] = w.digest(u);
  ojson j = {{"artifact", name},
             {"provenance",
              {{"config_digest", ctx.config_digest},
               {"seed", ctx.seed},
               {"split_digest", ctx.split_digest},
               {"upstream", up}}}};
  for (const auto& [k, v] : payload.items()) j[k] = v;
  return j;
}

std::string dump(const ojson& j) { return j.dump(2) + "\n"; }

Provenance provenance_for(const RunContext& ctx, std::string population) {
  return {std::move(population), ctx.seed, ctx.split_digest, ctx.config_digest};
}

ojson audit_payload(const std::string& population, const PipelineConfig& config,
                    std::string_view score, const GroupAudit& audit) {
  ojson j = {{"population", population},
             {"model_variant", to_string(config.variant)},
             {"score", score}};
  const auto body = to_json(audit);
  for (const auto& [k, v] : body.items()) j[k] = v;
  return j;
}

std::string calibration_csv(const CalibrationCurve& curve, const Provenance& prov) {
  std::ostringstream os;
  os << prov.comment_line() << '\n' << "bin,count,mean_predicted,observed_rate\n";
  for (std::size_t b = 0; b < curve.bins.size(); ++b) {
    const auto& bin = curve.bins[b];
    os << b + 1 << ',' << bin.count << ',' << fmt_full(bin.mean_predicted) << ','
       << fmt_full(bin.observed_rate) << '\n';
  }
  return os.str();
}

std::string tables_markdown(const PostProcessResult& r, const PipelineConfig& config,
                            const RunContext& ctx) {
  std::ostringstream os;
  os << "# Equal-opportunity audit (" << to_string(config.variant) << " path model, seed "
     << ctx.seed << ")\n\n";
  os << "Thresholds: y_hat " << format_fixed(r.biased_rule.threshold) << ", y_tilde "
     << format_fixed(r.debiased_rule.threshold) << " (quantile " << config.quantile_level
     << ", fitted on training scores)\n\n";
  auto section = [&](const std::string& title, const GroupAudit& a, const std::string& score) {
    os << "## " << title << "\n\n" << confusion_markdown(a, score) << '\n'
       << "Accuracy: " << a.overall_accuracy.format(4) << "\n\n"
       << equal_opportunity_markdown(a, score) << '\n';
  };
  section("Training, biased scores", r.train_biased, "y_hat");
  section("Training, de-biased scores", r.train_debiased, "y_tilde");
  if (r.test_biased) section("Test, biased scores", *r.test_biased, "y_hat");
  if (r.test_debiased) section("Test, de-biased scores", *r.test_debiased, "y_tilde");
  std::vector<std::pair<std::string, ComparisonReport>> rows{{"Train", r.train_comparison}};
  if (r.test_comparison) rows.emplace_back("Test", *r.test_comparison);
  os << "## Accuracy comparison\n\n" << comparison_markdown(rows);
  os << "\nThe equal-opportunity gap (max - min across groups) is this tool's scalar summary of "
        "how equalized the groups are.\n";
  return os.str();
}

void write_post_process(ArtifactWriter& w, const PipelineConfig& config, const RunContext& ctx,
                        const PostProcessResult& r, bool with_test) {
  w.write("path_model.json",
          dump(envelope("path_model", ctx, w, {"scores_train.csv"}, to_json(r.path_model))));
  w.write("debias_transform.json",
          dump(envelope("debias_transform", ctx, w, {"path_model.json"}, to_json(r.transform))));
  w.write("threshold.json",
          dump(envelope("threshold", ctx, w, {"debias_transform.json", "scores_train.csv"},
                        {{"biased", to_json(r.biased_rule)}, {"debiased", to_json(r.debiased_rule)}})));
  w.write("debiased_train.csv", debiased_csv(r.train, provenance_for(ctx, "train")));
  if (with_test) w.write("debiased_test.csv", debiased_csv(r.test, provenance_for(ctx, "test")));

  w.write("audit_train_biased.json",
          dump(envelope("audit_train_biased", ctx, w, {"debiased_train.csv", "threshold.json"},
                        audit_payload("train", config, "y_hat", r.train_biased))));
  w.write("audit_train_debiased.json",
          dump(envelope("audit_train_debiased", ctx, w, {"debiased_train.csv", "threshold.json"},
                        audit_payload("train", config, "y_tilde", r.train_debiased))));
  if (with_test) {
    w.write("audit_test_biased.json",
            dump(envelope("audit_test_biased", ctx, w, {"debiased_test.csv", "threshold.json"},
                          audit_payload("test", config, "y_hat", *r.test_biased))));
    w.write("audit_test_debiased.json",
            dump(envelope("audit_test_debiased", ctx, w, {"debiased_test.csv", "threshold.json"},
                          audit_payload("test", config, "y_tilde", *r.test_debiased))));
  }

  ojson comparison = {{"model_variant", to_string(config.variant)},
                      {"fairness_improved_definition", "eo_gap_after < eo_gap_before"},
                      {"train", to_json(r.train_comparison)}};
  if (with_test) {
    comparison["test"] = to_json(*r.test_comparison);
    w.write("comparison.json",
            dump(envelope("comparison", ctx, w,
                          {"audit_train_biased.json", "audit_train_debiased.json",
                           "audit_test_biased.json", "audit_test_debiased.json"},
                          comparison)));
  } else {
    w.write("comparison.json",
            dump(envelope("comparison", ctx, w,
                          {"audit_train_biased.json", "audit_train_debiased.json"}, comparison)));
  }
  w.write("calibration.csv", calibration_csv(r.calibration, provenance_for(ctx, "train")));
  w.write("tables.md", tables_markdown(r, config, ctx));
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void write_run_manifest(const ArtifactWriter& w, const PipelineConfig& config,
                        const std::string& command, const std::string& started) {
  ojson artifacts = ojson::array();
  for (const auto& name : w.order()) artifacts.push_back({{"name", name}, {"digest", w.digest(name)}});
  ojson j = {{"command", command},
             {"started_utc", started},
             {"finished_utc", utc_now()},
             {"config", config.to_text()},
             {"config_digest", config.digest()},
             {"artifacts", artifacts}};
  std::ofstream(w.dir() / "run_manifest.json") << j.dump(2) << '\n';
}

void prepare_output_dir(const fs::path& dir) {
  fs::create_directories(dir);
  fs::remove(dir / ".failed");
  fs::remove(dir / "error.json");
}

int report_failure(const fs::path& dir, const StageError& e) {
  ojson record = {{"stage", e.stage()}, {"kind", to_string(e.kind())}, {"message", e.detail()}};
  std::cerr << "error: " << record.dump() << '\n';
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (!ec) {
    std::ofstream(dir / "error.json") << record.dump(2) << '\n';
    std::ofstream(dir / ".failed") << e.stage() << '\n';
  }
  return kExitStageFailure;
}

template <typename F>
int guarded(const fs::path& out_dir, F&& body) {
  try {
    return body();
  } catch (const StageError& e) {
    return report_failure(out_dir, e);
  } catch (const Error& e) {
    return report_failure(out_dir, StageError("unknown", e.kind(), e.detail()));
  } catch (const std::exception& e) {
    return report_failure(out_dir, StageError("unknown", ErrorKind::IoError, e.what()));
  }
}

ojson model_summary(const LogisticModel& model, std::span<const ScoredRecord> train) {
  ojson weights = ojson::array();
  weights.push_back({{"name", "(intercept)"}, {"weight", model.weights(0)}});
  for (std::size_t i = 0; i < model.column_names.size(); ++i) {
    weights.push_back({{"name", model.column_names[i]},
                       {"weight", model.weights(static_cast<Eigen::Index>(i + 1))}});
  }
  double mean = 0.0, base = 0.0;
  for (const auto& r : train) {
    mean += r.y_hat;
    base += risk_code(r.label);
  }
  mean /= double(train.size());
  base /= double(train.size());
  return {{"learner", "logistic regression (IRLS)"},
          {"n_iterations", model.n_iterations},
          {"converged", model.converged},
          {"final_gradient_norm", model.final_gradient_norm},
          {"mean_predicted_train", mean},
          {"high_risk_rate_train", base},
          {"weights", weights}};
}

}  // namespace

// ---------------------------------------------------------------------------
// Boundary files.
// ---------------------------------------------------------------------------

std::string Provenance::comment_line() const {
  return "# provenance population=" + population + " seed=" + std::to_string(seed) +
         " split=" + split_digest + " config=" + config_digest;
}

std::string scores_csv(std::span<const ScoredRecord> rows, const std::optional<Provenance>& prov) {
  std::ostringstream os;
  if (prov) os << prov->comment_line() << '\n';
  os << "age,group,label,y_hat\n";
  for (const auto& r : rows) {
    os << r.age << ',' << to_string(r.group) << ',' << label_code(r.label) << ','
       << fmt_full(r.y_hat) << '\n';
  }
  return os.str();
}

ScoresTable parse_scores_csv(std::string_view text) {
  const auto csv = split_csv(text);
  check_header(csv, {"age", "group", "label", "y_hat"});
  ScoresTable table;
  table.provenance = csv.provenance;
  table.digest = short_digest(text);
  for (const auto& [line, row] : csv.rows) {
    const auto f = split_fields(row);
    if (f.size() != 4) {
      throw Error(ErrorKind::SchemaError, "line " + std::to_string(line) + ": expected 4 columns, got " +
                                              std::to_string(f.size()));
    }
    ScoredRecord r;
    parse_identity(f, line, r.age, r.group, r.label);
    r.y_hat = parse_double_field(f[3], line, 3, "y_hat");
    if (r.y_hat < 0.0 || r.y_hat > 1.0) {
      schema_error(line, 3, "y_hat", "score " + std::string(f[3]) + " is not a probability");
    }
    table.rows.push_back(r);
  }
  if (table.rows.empty()) throw Error(ErrorKind::SchemaError, "no data rows");
  return table;
}

ScoresTable read_scores_csv(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scores_csv(buf.str());
}

std::vector<DebiasedRow> classify_rows(std::span<const ScoredRecord> rows, const ThresholdRule& biased,
                                       const ThresholdRule& debiased) {
  std::vector<DebiasedRow> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    if (!r.y_tilde) throw Error(ErrorKind::SchemaError, "record has no de-biased score");
    out.push_back({r.age, r.group, r.label, r.y_hat, *r.y_tilde, classify(r.y_hat, biased),
                   classify(*r.y_tilde, debiased)});
  }
  return out;
}

std::string debiased_csv(std::span<const DebiasedRow> rows, const std::optional<Provenance>& prov) {
  std::ostringstream os;
  if (prov) os << prov->comment_line() << '\n';
  os << "age,group,label,y_hat,y_tilde,pred_biased,pred_debiased\n";
  for (const auto& r : rows) {
    os << r.age << ',' << to_string(r.group) << ',' << label_code(r.label) << ','
       << fmt_full(r.y_hat) << ',' << fmt_full(r.y_tilde) << ',' << label_code(r.pred_biased)
       << ',' << label_code(r.pred_debiased) << '\n';
  }
  return os.str();
}

std::vector<DebiasedRow> parse_debiased_csv(std::string_view text) {
  const auto csv = split_csv(text);
  check_header(csv, {"age", "group", "label", "y_hat", "y_tilde", "pred_biased", "pred_debiased"});
  std::vector<DebiasedRow> out;
  for (const auto& [line, row] : csv.rows) {
    const auto f = split_fields(row);
    if (f.size() != 7) {
      throw Error(ErrorKind::SchemaError, "line " + std::to_string(line) + ": expected 7 columns, got " +
                                              std::to_string(f.size()));
    }
    DebiasedRow r;
    parse_identity(f, line, r.age, r.group, r.label);
    r.y_hat = parse_double_field(f[3], line, 3, "y_hat");
    r.y_tilde = parse_double_field(f[4], line, 4, "y_tilde");
    r.pred_biased = parse_label_field(f[5], line, 5, "pred_biased");
    r.pred_debiased = parse_label_field(f[6], line, 6, "pred_debiased");
    out.push_back(r);
  }
  return out;
}

std::vector<Prediction> predictions(std::span<const DebiasedRow> rows, ScoreKind which) {
  std::vector<Prediction> out;
  out.reserve(rows.size());
  for (const auto& r : rows) {
    out.push_back({r.group, r.label,
                   which == ScoreKind::BiasedScores ? r.pred_biased : r.pred_debiased});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages.
// ---------------------------------------------------------------------------

PostProcessResult post_process(const PipelineConfig& config, std::span<const ScoredRecord> train,
                               std::span<const ScoredRecord> test) {
  PostProcessResult r;
  r.path_model = in_stage("causal", [&] {
    return fit_path_model(train, config.variant, config.se_convention);
  });

  std::vector<ScoredRecord> train_t, test_t;
  in_stage("debias", [&] {
    r.transform = make_transform(r.path_model, config.variant);
    train_t = debias_all(train, r.transform);
    test_t = debias_all(test, r.transform);
  });

  in_stage("threshold", [&] {
    std::vector<double> y_hat, y_tilde;
    for (const auto& s : train_t) {
      y_hat.push_back(s.y_hat);
      y_tilde.push_back(*s.y_tilde);
    }
    r.biased_rule =
        fit_threshold(y_hat, config.quantile_level, ScoreKind::BiasedScores, config.quantile_method);
    r.debiased_rule = fit_threshold(y_tilde, config.quantile_level, ScoreKind::DebiasedScores,
                                    config.quantile_method);
    r.train = classify_rows(train_t, r.biased_rule, r.debiased_rule);
    r.test = classify_rows(test_t, r.biased_rule, r.debiased_rule);
  });

  in_stage("audit", [&] {
    r.train_biased = tabulate(predictions(r.train, ScoreKind::BiasedScores));
    r.train_debiased = tabulate(predictions(r.train, ScoreKind::DebiasedScores));
    r.train_comparison = compare(r.train_biased, r.train_debiased);
    if (!r.test.empty()) {
      r.test_biased = tabulate(predictions(r.test, ScoreKind::BiasedScores));
      r.test_debiased = tabulate(predictions(r.test, ScoreKind::DebiasedScores));
      r.test_comparison = compare(*r.test_biased, *r.test_debiased);
    }
  });

  r.calibration = in_stage("calibration", [&] {
    std::vector<double> scores;
    std::vector<RiskLabel> labels;
    for (const auto& s : train) {
      scores.push_back(s.y_hat);
      labels.push_back(s.label);
    }
    return calibration_curve(scores, labels);
  });
  return r;
}

PipelineResult execute_pipeline(const PipelineConfig& config, std::span<const CreditRecord> records) {
  in_stage("config", [&] { config.validate(); });
  PipelineResult result;
  result.n_records = records.size();
  result.split = in_stage("split", [&] {
    return split(records, config.seed, config.train_fraction, config.stratify);
  });
  const auto train_records = select<CreditRecord>(records, result.split.train_indices);
  const auto test_records = select<CreditRecord>(records, result.split.test_indices);

  const auto train_x = in_stage("encode", [&] { return encode(train_records); });
  const auto test_x = in_stage("encode", [&] { return encode(test_records, train_x.schema); });

  result.model = in_stage("fit", [&] {
    return fit_logistic(train_x, LogisticOptions{config.max_iter, config.tol});
  });
  in_stage("predict", [&] {
    result.train_scores = join_scores(train_records, predict(result.model, train_x));
    result.test_scores = join_scores(test_records, predict(result.model, test_x));
  });
  result.post = post_process(config, result.train_scores, result.test_scores);
  return result;
}

// ---------------------------------------------------------------------------
// Artifact-writing entry points.
// ---------------------------------------------------------------------------

const std::vector<std::string>& pipeline_artifact_names() {
  static const std::vector<std::string> names = {
      "split_manifest.json",     "model_summary.json",       "scores_train.csv",
      "scores_test.csv",         "path_model.json",          "debias_transform.json",
      "threshold.json",          "debiased_train.csv",       "debiased_test.csv",
      "audit_train_biased.json", "audit_train_debiased.json", "audit_test_biased.json",
      "audit_test_debiased.json", "comparison.json",         "calibration.csv",
      "tables.md"};
  return names;
}

const std::vector<std::string>& audit_artifact_names() {
  static const std::vector<std::string> names(pipeline_artifact_names().begin() + 4,
                                              pipeline_artifact_names().end());
  return names;
}

int run_pipeline(const PipelineConfig& config) {
  const auto started = utc_now();
  return guarded(config.output_dir, [&] {
    in_stage("config", [&] { config.validate(); });
    in_stage("output", [&] { prepare_output_dir(config.output_dir); });
    ArtifactWriter w(config.output_dir);

    const auto [records, data_digest] = in_stage("ingest", [&] {
      std::ifstream in(config.data_path, std::ios::binary);
      if (!in) throw Error(ErrorKind::FileNotFound, "cannot open " + config.data_path.string());
      std::stringstream buf;
      buf << in.rdbuf();
      const auto bytes = buf.str();
      std::istringstream lines(bytes);
      return std::make_pair(parse_dataset(lines), sha256_hex(bytes));
    });

    const auto result = execute_pipeline(config, records);
    const RunContext ctx{config.digest(), config.seed, result.split.digest()};

    in_stage("write", [&] {
      ojson manifest = {{"n_records", result.n_records},
                        {"data_sha256", data_digest},
                        {"train_fraction", config.train_fraction},
                        {"stratified", config.stratify},
                        {"n_train", result.split.train_indices.size()},
                        {"n_test", result.split.test_indices.size()},
                        {"shuffle", "Fisher-Yates over std::mt19937_64(seed), rejection-sampled draws"},
                        {"train_indices", result.split.train_indices},
                        {"test_indices", result.split.test_indices}};
      w.write("split_manifest.json", dump(envelope("split_manifest", ctx, w, {}, manifest)));
      w.write("model_summary.json",
              dump(envelope("model_summary", ctx, w, {"split_manifest.json"},
                            model_summary(result.model, result.train_scores))));
      w.write("scores_train.csv", scores_csv(result.train_scores, provenance_for(ctx, "train")));
      w.write("scores_test.csv", scores_csv(result.test_scores, provenance_for(ctx, "test")));
      write_post_process(w, config, ctx, result.post, true);
    });
    write_run_manifest(w, config, "run", started);
    return kExitOk;
  });
}

int audit_external(const PipelineConfig& config, const fs::path& train_scores,
                   const std::optional<fs::path>& test_scores) {
  const auto started = utc_now();
  return guarded(config.output_dir, [&] {
    in_stage("config", [&] { config.validate(); });
    in_stage("output", [&] { prepare_output_dir(config.output_dir); });

    const auto train = in_stage("ingest", [&] { return read_scores_csv(train_scores); });
    const auto test = in_stage("ingest", [&] {
      return test_scores ? std::optional(read_scores_csv(*test_scores)) : std::nullopt;
    });

    RunContext ctx{config.digest(), config.seed, "external"};
    in_stage("provenance", [&] {
      auto check = [&](const ScoresTable& t, const std::string& population) {
        if (!t.provenance) return;
        const auto& p = *t.provenance;
        if (p.population != population) {
          throw Error(ErrorKind::ProvenanceMismatch,
                      "file tagged population=" + p.population + " supplied as " + population);
        }
        if (p.seed != config.seed || p.config_digest != config.digest()) {
          throw Error(ErrorKind::ProvenanceMismatch,
                      population + " scores were produced under seed " + std::to_string(p.seed) +
                          " / config " + p.config_digest + ", current run is seed " +
                          std::to_string(config.seed) + " / config " + config.digest());
        }
      };
      check(train, "train");
      if (test) check(*test, "test");
      if (train.provenance && test && test->provenance &&
          train.provenance->split_digest != test->provenance->split_digest) {
        throw Error(ErrorKind::ProvenanceMismatch, "train and test scores come from different splits");
      }
      if (train.provenance) ctx.split_digest = train.provenance->split_digest;
    });

    std::vector<ScoredRecord> no_test;
    const auto result =
        post_process(config, train.rows, test ? std::span<const ScoredRecord>(test->rows) : no_test);

    ArtifactWriter w(config.output_dir);
    w.adopt("scores_train.csv", train.digest);
    in_stage("write", [&] { write_post_process(w, config, ctx, result, test.has_value()); });
    write_run_manifest(w, config, "audit", started);
    return kExitOk;
  });
}

// ---------------------------------------------------------------------------
// Seed sweep.
// ---------------------------------------------------------------------------

const Coefficient* SeedOutcome::coefficient(std::string_view name) const {
  for (const auto& c : age_coefficients) {
    if (c.name == name) return &c;
  }
  return nullptr;
}

SeedOutcome summarize_seed(std::uint64_t seed, const PipelineResult& result) {
  const auto& post = result.post;
  SeedOutcome o;
  o.seed = seed;
  o.ok = true;
  for (const auto& c : post.path_model.yhat_equation.coefficients) {
    if (c.name != kRisk) o.age_coefficients.push_back(c);
  }
  for (std::size_t g = 0; g < 3; ++g) {
    if (post.train_biased.equal_opportunity[g]) {
      o.eo_train_biased[g] = post.train_biased.equal_opportunity[g]->value();
    }
  }
  const auto& eo = o.eo_train_biased;
  o.eo_monotone = eo[0] && eo[1] && eo[2] && *eo[0] < *eo[1] && *eo[1] < *eo[2];
  o.eo_gap_train_before = post.train_comparison.eo_gap_before;
  o.eo_gap_train_after = post.train_comparison.eo_gap_after;
  o.accuracy_delta_train = post.train_comparison.accuracy_delta;
  o.accuracy_delta_test = post.test_comparison ? post.test_comparison->accuracy_delta : 0.0;
  o.aic = post.path_model.aic;
  return o;
}

std::size_t SweepSummary::completed() const {
  return static_cast<std::size_t>(
      std::count_if(seeds.begin(), seeds.end(), [](const auto& s) { return s.ok; }));
}

namespace {

template <typename Pred>
double fraction(const std::vector<SeedOutcome>& seeds, Pred pred) {
  if (seeds.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& s : seeds) hits += s.ok && pred(s);
  return double(hits) / double(seeds.size());
}

bool age_negative_significant(const SeedOutcome& s) {
  const auto* a = s.coefficient(kAge);
  return a && a->estimate < 0 && a->p_value < 0.05;
}

bool gap_decreased(const SeedOutcome& s) { return s.eo_gap_train_after < s.eo_gap_train_before; }

bool accuracy_stable(const SeedOutcome& s, double tol) {
  return std::abs(s.accuracy_delta_train) <= tol && std::abs(s.accuracy_delta_test) <= tol;
}

}  // namespace

double SweepSummary::frac_age_negative_significant() const {
  return fraction(seeds, age_negative_significant);
}

double SweepSummary::frac_eo_monotone() const {
  return fraction(seeds, [](const auto& s) { return s.eo_monotone; });
}

double SweepSummary::frac_gap_decreased() const { return fraction(seeds, gap_decreased); }

double SweepSummary::frac_accuracy_stable(double tolerance) const {
  return fraction(seeds, [&](const auto& s) { return accuracy_stable(s, tolerance); });
}

double SweepSummary::frac_all_qualitative(double tolerance) const {
  return fraction(seeds, [&](const auto& s) {
    return age_negative_significant(s) && s.eo_monotone && gap_decreased(s) &&
           accuracy_stable(s, tolerance);
  });
}

double SweepSummary::frac_discretized_ordered() const {
  return fraction(seeds, [](const auto& s) {
    const auto* m = s.coefficient(kAgeMiddle);
    const auto* sen = s.coefficient(kAgeSenior);
    return m && sen && m->estimate < 0 && sen->estimate < m->estimate;
  });
}

SweepSummary seed_sweep(const PipelineConfig& config, std::size_t n_seeds, bool write_runs) {
  if (n_seeds == 0) throw Error(ErrorKind::ConfigError, "sweep needs at least one seed");
  config.validate();
  SweepSummary summary;
  summary.variant = config.variant;

  std::optional<std::vector<CreditRecord>> records;
  std::optional<StageError> ingest_failure;
  try {
    records = in_stage("ingest", [&] { return parse_dataset(config.data_path); });
  } catch (const StageError& e) {
    ingest_failure = e;
  }

  for (std::uint64_t seed = 1; seed <= n_seeds; ++seed) {
    PipelineConfig cfg = config;
    cfg.seed = seed;
    SeedOutcome outcome;
    outcome.seed = seed;
    try {
      if (ingest_failure) throw *ingest_failure;
      if (write_runs) {
        cfg.output_dir = config.output_dir / ("seed_" + std::to_string(seed));
        if (run_pipeline(cfg) != kExitOk) {
          throw StageError("run", ErrorKind::IoError,
                           "see " + (cfg.output_dir / "error.json").string());
        }
      }
      outcome = summarize_seed(seed, execute_pipeline(cfg, *records));
    } catch (const StageError& e) {
      outcome.failure_stage = e.stage();
      outcome.failure_kind = std::string(to_string(e.kind()));
      outcome.failure_message = e.what();
    } catch (const Error& e) {
      outcome.failure_stage = "unknown";
      outcome.failure_kind = std::string(to_string(e.kind()));
      outcome.failure_message = e.what();
    }
    summary.seeds.push_back(std::move(outcome));
  }
  return summary;
}

ojson to_json(const SweepSummary& summary) {
  ojson seeds = ojson::array();
  for (const auto& s : summary.seeds) {
    ojson j = {{"seed", s.seed}, {"ok", s.ok}};
    if (!s.ok) {
      j["error"] = {{"stage", s.failure_stage}, {"kind", s.failure_kind}, {"message", s.failure_message}};
      seeds.push_back(j);
      continue;
    }
    ojson coefs = ojson::array();
    for (const auto& c : s.age_coefficients) coefs.push_back(to_json(c));
    ojson eo = ojson::object();
    for (auto g : kAgeGroups) {
      const auto& v = s.eo_train_biased[std::size_t(g)];
      eo[std::string(to_string(g))] = v ? ojson(*v) : ojson(nullptr);
    }
    j["age_coefficients"] = coefs;
    j["eo_train_biased"] = eo;
    j["eo_monotone"] = s.eo_monotone;
    j["eo_gap_train_before"] = s.eo_gap_train_before;
    j["eo_gap_train_after"] = s.eo_gap_train_after;
    j["accuracy_delta_train"] = s.accuracy_delta_train;
    j["accuracy_delta_test"] = s.accuracy_delta_test;
    j["aic"] = s.aic;
    seeds.push_back(j);
  }
  ojson aggregate = {{"n_seeds", summary.seeds.size()},
                     {"completed", summary.completed()},
                     {"frac_eo_monotone", summary.frac_eo_monotone()},
                     {"frac_gap_decreased", summary.frac_gap_decreased()},
                     {"frac_accuracy_stable_0.03", summary.frac_accuracy_stable()}};
  if (summary.variant != PathVariant::Discretized) {
    aggregate["frac_age_negative_significant"] = summary.frac_age_negative_significant();
    aggregate["frac_age_negative"] = fraction(summary.seeds, [](const SeedOutcome& s) {
      const auto* a = s.coefficient(kAge);
      return a && a->estimate < 0;
    });
    aggregate["frac_all_qualitative"] = summary.frac_all_qualitative();
  } else {
    aggregate["frac_discretized_ordered"] = summary.frac_discretized_ordered();
  }
  return {{"variant", to_string(summary.variant)}, {"aggregate", aggregate}, {"seeds", seeds}};
}

}  // namespace debias
