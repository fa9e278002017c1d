#include "debias/audit.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "debias/error.hpp"

namespace debias {

namespace {

std::size_t cell_index(AgeGroup group, RiskLabel label) {
  return (label == RiskLabel::HighRisk ? 3 : 0) + static_cast<std::size_t>(group);
}

std::array<GroupConfusion, 6> empty_cells() {
  std::array<GroupConfusion, 6> cells{};
  for (auto label : kRiskLabels) {
    for (auto group : kAgeGroups) {
      auto& c = cells[cell_index(group, label)];
      c.group = group;
      c.label = label;
    }
  }
  return cells;
}

std::optional<double> gap_of(const std::array<std::optional<Ratio>, 3>& eo) {
  std::vector<double> values;
  for (const auto& r : eo) {
    if (r) values.push_back(r->value());
  }
  if (values.size() < 2) return std::nullopt;
  auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return *hi - *lo;
}

nlohmann::ordered_json ratio_json(const std::optional<Ratio>& r) {
  if (!r) return nullptr;
  return {{"num", r->num}, {"den", r->den}, {"value", r->value()}, {"rounded", r->format(4)}};
}

nlohmann::ordered_json per_group_json(const std::array<std::optional<Ratio>, 3>& values) {
  nlohmann::ordered_json out = nlohmann::ordered_json::object();
  for (auto g : kAgeGroups) out[std::string(to_string(g))] = ratio_json(values[std::size_t(g)]);
  return out;
}

std::string group_range(AgeGroup g) {
  switch (g) {
    case AgeGroup::Young: return "Young (19-37)";
    case AgeGroup::Middle: return "Middle (38-56)";
    case AgeGroup::Senior: return "Senior (57-75)";
  }
  return "?";
}

std::string cell_or_dash(const std::optional<Ratio>& r) { return r ? r->format(4) : "-"; }

}  // namespace

std::string Ratio::format(int places) const {
  std::uint64_t scale = 1;
  for (int i = 0; i < places; ++i) scale *= 10;
  const std::uint64_t rounded = (2 * num * scale + den) / (2 * den);
  std::string frac = std::to_string(rounded % scale);
  frac.insert(0, static_cast<std::size_t>(places) - frac.size(), '0');
  return std::to_string(rounded / scale) + (places > 0 ? "." + frac : "");
}

std::string format_fixed(double value, int places) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", places, value);
  return buf;
}

const GroupConfusion& GroupAudit::cell(AgeGroup group, RiskLabel label) const {
  return confusions[cell_index(group, label)];
}

GroupConfusion& GroupAudit::cell(AgeGroup group, RiskLabel label) {
  return confusions[cell_index(group, label)];
}

GroupAudit audit_from_counts(const std::array<GroupConfusion, 6>& cells) {
  GroupAudit audit;
  audit.confusions = empty_cells();
  for (const auto& c : cells) {
    auto& dst = audit.cell(c.group, c.label);
    dst.predicted_low += c.predicted_low;
    dst.predicted_high += c.predicted_high;
  }
  std::uint64_t correct = 0;
  for (const auto& c : audit.confusions) {
    audit.n += c.total();
    correct += c.label == RiskLabel::LowRisk ? c.predicted_low : c.predicted_high;
  }
  if (audit.n == 0) throw Error(ErrorKind::EmptyInput, "audit over zero records");
  audit.overall_accuracy = {correct, audit.n};

  for (auto g : kAgeGroups) {
    const auto& low = audit.cell(g, RiskLabel::LowRisk);
    const auto& high = audit.cell(g, RiskLabel::HighRisk);
    if (low.total() > 0) audit.equal_opportunity[std::size_t(g)] = Ratio{low.predicted_low, low.total()};
    const auto members = low.total() + high.total();
    if (members > 0) {
      audit.demographic_parity[std::size_t(g)] =
          Ratio{low.predicted_low + high.predicted_low, members};
    }
  }
  audit.eo_gap = gap_of(audit.equal_opportunity);

  for (const auto& c : audit.confusions) {
    if (c.total() < kSmallCell) {
      audit.warnings.push_back("small cell: " + std::string(to_string(c.group)) + "/" +
                               std::string(to_string(c.label)) + " has " +
                               std::to_string(c.total()) + " members (< 20)");
    }
  }
  return audit;
}

GroupAudit tabulate(std::span<const Prediction> predictions) {
  if (predictions.empty()) throw Error(ErrorKind::EmptyInput, "no predictions to tabulate");
  auto cells = empty_cells();
  for (const auto& p : predictions) {
    auto& c = cells[cell_index(p.group, p.label)];
    (p.predicted == RiskLabel::LowRisk ? c.predicted_low : c.predicted_high) += 1;
  }
  return audit_from_counts(cells);
}

double eo_gap(const GroupAudit& audit) {
  auto gap = gap_of(audit.equal_opportunity);
  if (!gap) throw Error(ErrorKind::SingleGroup, "equal-opportunity gap needs two groups with LowRisk members");
  return *gap;
}

ComparisonReport compare(const GroupAudit& before, const GroupAudit& after) {
  if (before.n != after.n) {
    throw Error(ErrorKind::MismatchedPopulations, "audits cover " + std::to_string(before.n) +
                                                      " and " + std::to_string(after.n) +
                                                      " records");
  }
  ComparisonReport r;
  r.eo_before = before.equal_opportunity;
  r.eo_after = after.equal_opportunity;
  r.eo_gap_before = eo_gap(before);
  r.eo_gap_after = eo_gap(after);
  r.accuracy_before = before.overall_accuracy;
  r.accuracy_after = after.overall_accuracy;
  r.accuracy_delta = after.overall_accuracy.value() - before.overall_accuracy.value();
  r.fairness_improved = r.eo_gap_after < r.eo_gap_before;
  return r;
}

nlohmann::ordered_json to_json(const GroupAudit& audit) {
  nlohmann::ordered_json counts = nlohmann::ordered_json::array();
  for (const auto& c : audit.confusions) {
    counts.push_back({{"group", to_string(c.group)},
                      {"label", to_string(c.label)},
                      {"predicted_low", c.predicted_low},
                      {"predicted_high", c.predicted_high}});
  }
  return {{"n", audit.n},
          {"counts", counts},
          {"eo", per_group_json(audit.equal_opportunity)},
          {"eo_gap", audit.eo_gap ? nlohmann::ordered_json(*audit.eo_gap) : nullptr},
          {"eo_gap_definition", "max - min of per-group Pr{pred = LowRisk | group, y = LowRisk}"},
          {"accuracy", ratio_json(audit.overall_accuracy)},
          {"supplementary_demographic_parity",
           {{"note", "classified-LowRisk rate per group, unconditioned on y; not an equal-opportunity metric"},
            {"rate", per_group_json(audit.demographic_parity)}}},
          {"warnings", audit.warnings}};
}

nlohmann::ordered_json to_json(const ComparisonReport& report) {
  return {{"eo_before", per_group_json(report.eo_before)},
          {"eo_after", per_group_json(report.eo_after)},
          {"eo_gap_before", report.eo_gap_before},
          {"eo_gap_after", report.eo_gap_after},
          {"accuracy_before", ratio_json(report.accuracy_before)},
          {"accuracy_after", ratio_json(report.accuracy_after)},
          {"accuracy_delta", report.accuracy_delta},
          {"fairness_improved", report.fairness_improved}};
}

std::string confusion_markdown(const GroupAudit& audit, const std::string& score_name) {
  std::ostringstream os;
  os << "| a | y | " << score_name << " = Low risk (0) | " << score_name << " = High risk (1) |\n";
  os << "|---|---|---:|---:|\n";
  for (auto label : kRiskLabels) {
    for (auto g : kAgeGroups) {
      const auto& c = audit.cell(g, label);
      os << "| " << group_range(g) << " | " << (label == RiskLabel::LowRisk ? "Low risk" : "High risk")
         << " | " << c.predicted_low << " | " << c.predicted_high << " |\n";
    }
  }
  return os.str();
}

std::string equal_opportunity_markdown(const GroupAudit& audit, const std::string& score_name) {
  std::ostringstream os;
  os << "| a | Pr{" << score_name << " = low risk \\| A = a, y = low risk} |\n|---|---:|\n";
  for (auto g : kAgeGroups) {
    os << "| " << group_range(g) << " | " << cell_or_dash(audit.equal_opportunity[std::size_t(g)])
       << " |\n";
  }
  return os.str();
}

std::string comparison_markdown(const std::vector<std::pair<std::string, ComparisonReport>>& rows) {
  std::ostringstream os;
  os << "| Data | Estimated score | Young, Low Risk | Middle, Low Risk | Senior, Low Risk | Overall |\n";
  os << "|---|---|---:|---:|---:|---:|\n";
  for (const auto& [data, r] : rows) {
    os << "| " << data << " | biased y_hat | " << cell_or_dash(r.eo_before[0]) << " | "
       << cell_or_dash(r.eo_before[1]) << " | " << cell_or_dash(r.eo_before[2]) << " | "
       << r.accuracy_before.format(4) << " |\n";
    os << "| " << data << " | de-biased y_tilde | " << cell_or_dash(r.eo_after[0]) << " | "
       << cell_or_dash(r.eo_after[1]) << " | " << cell_or_dash(r.eo_after[2]) << " | "
       << r.accuracy_after.format(4) << " |\n";
  }
  return os.str();
}

}  // namespace debias
