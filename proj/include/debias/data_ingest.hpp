#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace debias {

enum class RiskLabel { LowRisk, HighRisk };

enum class AgeGroup { Young, Middle, Senior };

inline constexpr std::array<AgeGroup, 3> kAgeGroups = {AgeGroup::Young, AgeGroup::Middle,
                                                       AgeGroup::Senior};
inline constexpr std::array<RiskLabel, 2> kRiskLabels = {RiskLabel::LowRisk,
                                                         RiskLabel::HighRisk};

std::string_view to_string(RiskLabel label);
std::string_view to_string(AgeGroup group);
AgeGroup parse_age_group(std::string_view text);

// Numeric coding used by every regression: HighRisk = 1, LowRisk = 0.
inline double risk_code(RiskLabel label) { return label == RiskLabel::HighRisk ? 1.0 : 0.0; }

inline constexpr std::size_t kFeatureCount = 20;
// 0-based position of the age attribute (attribute 13 in the UCI layout).
inline constexpr std::size_t kAgeAttribute = 12;

// True for the 13 qualitative attributes of german.data.
bool is_categorical_attribute(std::size_t index);

struct CreditRecord {
  std::array<std::string, kFeatureCount> features;
  int age = 0;
  RiskLabel label = RiskLabel::LowRisk;

  // Re-serializes to the 21 whitespace-separated tokens of the source line.
  std::string to_line() const;
};

// Parses one german.data line. line_no is only used in error messages.
CreditRecord parse_record(std::string_view line, std::size_t line_no);
std::vector<CreditRecord> parse_dataset(std::istream& in);
std::vector<CreditRecord> parse_dataset(const std::filesystem::path& path);

// Throws OutOfRange outside [19, 75].
AgeGroup age_group(int age);

struct SplitPlan {
  std::uint64_t seed = 0;
  double train_fraction = 0.0;
  bool stratified = false;
  std::vector<std::size_t> train_indices;  // ascending
  std::vector<std::size_t> test_indices;   // ascending

  std::string digest() const;
};

// Seeded Fisher-Yates shuffle; the first round(fraction * n) shuffled
// positions become the training set. With stratify, each label is shuffled
// separately and the training quota is apportioned by largest remainder.
SplitPlan split(std::span<const CreditRecord> records, std::uint64_t seed, double train_fraction,
                bool stratify = false);

template <typename T>
std::vector<T> select(std::span<const T> items, std::span<const std::size_t> indices) {
  std::vector<T> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(items[i]);
  return out;
}

// Per-attribute column layout. Categorical attributes keep every observed
// level except the lexicographically first one.
struct EncodingSchema {
  struct Attribute {
    bool categorical = false;
    std::vector<std::string> kept_levels;
  };
  std::array<Attribute, kFeatureCount> attributes;

  std::size_t column_count() const;
  std::vector<std::string> column_names() const;
};

struct EncodedMatrix {
  Eigen::MatrixXd design;  // no intercept column
  std::vector<std::string> column_names;
  Eigen::VectorXd target;
  EncodingSchema schema;

  Eigen::Index rows() const { return design.rows(); }
};

EncodingSchema fit_schema(std::span<const CreditRecord> records);
// Without a schema one is fitted on the records; with one (test path) the
// columns are forced to match it and unseen levels encode as zeros.
EncodedMatrix encode(std::span<const CreditRecord> records,
                     const std::optional<EncodingSchema>& fit_columns = std::nullopt);

// Debug dump: header `age,group,label,<encoded columns...>`.
void write_encoded_csv(std::ostream& out, std::span<const CreditRecord> records,
                       const EncodedMatrix& encoded);

}  // namespace debias
