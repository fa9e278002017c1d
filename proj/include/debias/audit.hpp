#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "debias/data_ingest.hpp"

namespace debias {

// Non-negative count ratio kept exact until formatting.
struct Ratio {
  std::uint64_t num = 0;
  std::uint64_t den = 1;

  double value() const { return double(num) / double(den); }
  // Round-half-up to `places` decimals using integer arithmetic only.
  std::string format(int places = 4) const;
  friend bool operator==(const Ratio& a, const Ratio& b) {
    return a.num * b.den == b.num * a.den;
  }
};

std::string format_fixed(double value, int places = 4);

struct Prediction {
  AgeGroup group = AgeGroup::Young;
  RiskLabel label = RiskLabel::LowRisk;
  RiskLabel predicted = RiskLabel::LowRisk;
};

struct GroupConfusion {
  AgeGroup group = AgeGroup::Young;
  RiskLabel label = RiskLabel::LowRisk;
  std::uint64_t predicted_low = 0;
  std::uint64_t predicted_high = 0;

  std::uint64_t total() const { return predicted_low + predicted_high; }
};

struct GroupAudit {
  // Row order Young/Middle/Senior for LowRisk, then the same for HighRisk.
  std::array<GroupConfusion, 6> confusions{};
  std::array<std::optional<Ratio>, 3> equal_opportunity{};  // empty if no LowRisk members
  Ratio overall_accuracy;
  std::optional<double> eo_gap;
  std::array<std::optional<Ratio>, 3> demographic_parity{};  // classified-low rate per group
  std::uint64_t n = 0;
  std::vector<std::string> warnings;

  const GroupConfusion& cell(AgeGroup group, RiskLabel label) const;
  GroupConfusion& cell(AgeGroup group, RiskLabel label);
};

inline constexpr std::uint64_t kSmallCell = 20;

GroupAudit tabulate(std::span<const Prediction> predictions);
// Builds the audit from a finished count table.
GroupAudit audit_from_counts(const std::array<GroupConfusion, 6>& cells);

// max - min of the defined equal-opportunity values; SingleGroup if fewer than two.
double eo_gap(const GroupAudit& audit);

struct ComparisonReport {
  std::array<std::optional<Ratio>, 3> eo_before{};
  std::array<std::optional<Ratio>, 3> eo_after{};
  double eo_gap_before = 0.0;
  double eo_gap_after = 0.0;
  Ratio accuracy_before;
  Ratio accuracy_after;
  double accuracy_delta = 0.0;
  bool fairness_improved = false;
};

ComparisonReport compare(const GroupAudit& before, const GroupAudit& after);

nlohmann::ordered_json to_json(const GroupAudit& audit);
nlohmann::ordered_json to_json(const ComparisonReport& report);

// Markdown in the layout of the reference confusion, equal-opportunity and
// accuracy-comparison tables.
std::string confusion_markdown(const GroupAudit& audit, const std::string& score_name);
std::string equal_opportunity_markdown(const GroupAudit& audit, const std::string& score_name);
std::string comparison_markdown(const std::vector<std::pair<std::string, ComparisonReport>>& rows);

}  // namespace debias
