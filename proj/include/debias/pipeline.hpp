#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "debias/audit.hpp"
#include "debias/blackbox.hpp"
#include "debias/causal.hpp"
#include "debias/config.hpp"
#include "debias/data_ingest.hpp"
#include "debias/debiaser.hpp"
#include "debias/error.hpp"

namespace debias {

// An Error tagged with the pipeline stage that raised it.
class StageError : public Error {
 public:
  StageError(std::string stage, ErrorKind kind, const std::string& message)
      : Error(kind, message), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

// ---------------------------------------------------------------------------
// Scored-record boundary files.
//
// Scored CSV:   age,group,label,y_hat
// De-biased:    age,group,label,y_hat,y_tilde,pred_biased,pred_debiased
//
// label and pred_* use the numeric risk coding (0 = LowRisk, 1 = HighRisk).
// Files written by this tool start with a `# provenance ...` comment line that
// readers accept but do not require.
// ---------------------------------------------------------------------------

struct Provenance {
  std::string population;  // train | test
  std::uint64_t seed = 0;
  std::string split_digest;
  std::string config_digest;

  std::string comment_line() const;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

struct ScoresTable {
  std::optional<Provenance> provenance;
  std::vector<ScoredRecord> rows;
  std::string digest;  // of the file bytes
};

std::string scores_csv(std::span<const ScoredRecord> rows, const std::optional<Provenance>& prov);
// Throws SchemaError naming the first offending row and column.
ScoresTable parse_scores_csv(std::string_view text);
ScoresTable read_scores_csv(const std::filesystem::path& path);

struct DebiasedRow {
  int age = 0;
  AgeGroup group = AgeGroup::Young;
  RiskLabel label = RiskLabel::LowRisk;
  double y_hat = 0.0;
  double y_tilde = 0.0;
  RiskLabel pred_biased = RiskLabel::LowRisk;
  RiskLabel pred_debiased = RiskLabel::LowRisk;
};

std::vector<DebiasedRow> classify_rows(std::span<const ScoredRecord> rows, const ThresholdRule& biased,
                                       const ThresholdRule& debiased);
std::string debiased_csv(std::span<const DebiasedRow> rows, const std::optional<Provenance>& prov);
std::vector<DebiasedRow> parse_debiased_csv(std::string_view text);
std::vector<Prediction> predictions(std::span<const DebiasedRow> rows, ScoreKind which);

// ---------------------------------------------------------------------------
// In-memory stages.
// ---------------------------------------------------------------------------

struct PostProcessResult {
  PathModel path_model;
  DebiasTransform transform;
  ThresholdRule biased_rule;
  ThresholdRule debiased_rule;
  std::vector<DebiasedRow> train;
  std::vector<DebiasedRow> test;  // empty when no test scores were given
  GroupAudit train_biased;
  GroupAudit train_debiased;
  std::optional<GroupAudit> test_biased;
  std::optional<GroupAudit> test_debiased;
  ComparisonReport train_comparison;
  std::optional<ComparisonReport> test_comparison;
  CalibrationCurve calibration;
};

// Causal fit, de-biasing, thresholds and audits. Thresholds are fitted on the
// training scores only and then applied unchanged to the test scores.
PostProcessResult post_process(const PipelineConfig& config, std::span<const ScoredRecord> train,
                               std::span<const ScoredRecord> test);

struct PipelineResult {
  SplitPlan split;
  std::size_t n_records = 0;
  LogisticModel model;
  std::vector<ScoredRecord> train_scores;
  std::vector<ScoredRecord> test_scores;
  PostProcessResult post;
};

PipelineResult execute_pipeline(const PipelineConfig& config, std::span<const CreditRecord> records);

// ---------------------------------------------------------------------------
// Artifact-writing entry points; each returns a process exit status and never
// throws for stage failures (an error.json record and a .failed marker are
// written instead).
// ---------------------------------------------------------------------------

inline constexpr int kExitOk = 0;
inline constexpr int kExitStageFailure = 1;
inline constexpr int kExitUsage = 2;

// Names of the files run_pipeline writes, in write order (run_manifest.json,
// which carries the wall-clock timestamp, is written last and excluded here).
const std::vector<std::string>& pipeline_artifact_names();
// Subset written by audit_external.
const std::vector<std::string>& audit_artifact_names();

int run_pipeline(const PipelineConfig& config);
int audit_external(const PipelineConfig& config, const std::filesystem::path& train_scores,
                   const std::optional<std::filesystem::path>& test_scores);

struct SeedOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string failure_stage;
  std::string failure_kind;
  std::string failure_message;

  std::vector<Coefficient> age_coefficients;  // y_hat equation age terms
  std::array<std::optional<double>, 3> eo_train_biased{};
  bool eo_monotone = false;  // Young < Middle < Senior on biased training scores
  double eo_gap_train_before = 0.0;
  double eo_gap_train_after = 0.0;
  double accuracy_delta_train = 0.0;
  double accuracy_delta_test = 0.0;
  double aic = 0.0;

  const Coefficient* coefficient(std::string_view name) const;
};

struct SweepSummary {
  PathVariant variant = PathVariant::Quadratic;
  std::vector<SeedOutcome> seeds;

  std::size_t completed() const;
  // Fractions over all requested seeds; failed seeds count as misses.
  double frac_age_negative_significant() const;  // beta_a < 0 and p < 0.05
  double frac_eo_monotone() const;
  double frac_gap_decreased() const;
  double frac_accuracy_stable(double tolerance = 0.03) const;  // train and test
  double frac_all_qualitative(double tolerance = 0.03) const;
  double frac_discretized_ordered() const;  // beta_a_s < beta_a_m < 0
};

SeedOutcome summarize_seed(std::uint64_t seed, const PipelineResult& result);
// Runs seeds 1..n_seeds; per-seed failures are recorded, never rethrown.
// With write_runs each seed's artifacts go to <out>/seed_<k>/.
SweepSummary seed_sweep(const PipelineConfig& config, std::size_t n_seeds, bool write_runs = false);
nlohmann::ordered_json to_json(const SweepSummary& summary);

}  // namespace debias
