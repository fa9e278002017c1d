#include "debias/data_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "debias/digest.hpp"
#include "debias/error.hpp"

namespace debias {

namespace {

constexpr std::array<bool, kFeatureCount> kCategorical = {
    true,  false, true,  true,  false, true,  true,  false, true,  true,
    false, true,  false, true,  true,  false, true,  false, true,  true};

std::vector<std::string_view> tokenize(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t start = i;
    while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

std::optional<int> parse_int(std::string_view token) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc{} || ptr != token.data() + token.size()) return std::nullopt;
  return value;
}

bool blank(std::string_view line) {
  return std::all_of(line.begin(), line.end(),
                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
}

// Unbiased draw from [0, bound) by rejection; std::uniform_int_distribution
// is not reproducible across standard library implementations.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t draw;
  do {
    draw = rng();
  } while (draw >= limit);
  return draw % bound;
}

void fisher_yates(std::vector<std::size_t>& items, std::mt19937_64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    std::size_t j = uniform_below(rng, i);
    std::swap(items[i - 1], items[j]);
  }
}

}  // namespace

std::string_view to_string(RiskLabel label) {
  return label == RiskLabel::HighRisk ? "HighRisk" : "LowRisk";
}

std::string_view to_string(AgeGroup group) {
  switch (group) {
    case AgeGroup::Young: return "Young";
    case AgeGroup::Middle: return "Middle";
    case AgeGroup::Senior: return "Senior";
  }
  return "?";
}

AgeGroup parse_age_group(std::string_view text) {
  for (auto g : kAgeGroups) {
    if (to_string(g) == text) return g;
  }
  throw Error(ErrorKind::SchemaError, "unknown age group '" + std::string(text) + "'");
}

bool is_categorical_attribute(std::size_t index) { return kCategorical.at(index); }

std::string CreditRecord::to_line() const {
  std::string line;
  for (const auto& f : features) {
    line += f;
    line += ' ';
  }
  line += label == RiskLabel::HighRisk ? '2' : '1';
  return line;
}

CreditRecord parse_record(std::string_view line, std::size_t line_no) {
  const auto tokens = tokenize(line);
  const auto where = "line " + std::to_string(line_no);
  if (tokens.size() != kFeatureCount + 1) {
    throw Error(ErrorKind::MalformedRow,
                where + ": expected 21 fields, got " + std::to_string(tokens.size()));
  }
  CreditRecord rec;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    if (!kCategorical[j] && !parse_int(tokens[j])) {
      throw Error(ErrorKind::MalformedRow, where + ": attribute " + std::to_string(j + 1) +
                                               " is not an integer: '" + std::string(tokens[j]) +
                                               "'");
    }
    rec.features[j] = std::string(tokens[j]);
  }
  rec.age = *parse_int(tokens[kAgeAttribute]);
  if (rec.age < 18 || rec.age > 120) {
    throw Error(ErrorKind::MalformedRow, where + ": implausible age " + std::to_string(rec.age));
  }
  const auto label = parse_int(tokens[kFeatureCount]);
  if (!label) {
    throw Error(ErrorKind::MalformedRow,
                where + ": target is not an integer: '" + std::string(tokens[kFeatureCount]) + "'");
  }
  if (*label == 1) {
    rec.label = RiskLabel::LowRisk;
  } else if (*label == 2) {
    rec.label = RiskLabel::HighRisk;
  } else {
    throw Error(ErrorKind::InvalidLabel, where + ": target must be 1 or 2, got " +
                                             std::to_string(*label));
  }
  return rec;
}

std::vector<CreditRecord> parse_dataset(std::istream& in) {
  std::vector<CreditRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (blank(line)) continue;
    records.push_back(parse_record(line, line_no));
  }
  return records;
}

std::vector<CreditRecord> parse_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::FileNotFound, "cannot open " + path.string());
  return parse_dataset(in);
}

AgeGroup age_group(int age) {
  if (age >= 19 && age <= 37) return AgeGroup::Young;
  if (age >= 38 && age <= 56) return AgeGroup::Middle;
  if (age >= 57 && age <= 75) return AgeGroup::Senior;
  throw Error(ErrorKind::OutOfRange, "age " + std::to_string(age) + " outside [19, 75]");
}

std::string SplitPlan::digest() const {
  std::ostringstream os;
  os << seed << ';' << train_fraction << ';' << stratified << ";train";
  for (auto i : train_indices) os << ',' << i;
  os << ";test";
  for (auto i : test_indices) os << ',' << i;
  return short_digest(os.str());
}

SplitPlan split(std::span<const CreditRecord> records, std::uint64_t seed, double train_fraction,
                bool stratify) {
  const std::size_t n = records.size();
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::ConfigError, "train fraction must lie in (0, 1)");
  }
  if (n < 2) throw Error(ErrorKind::TooFewRows, "need at least 2 records to split");

  SplitPlan plan;
  plan.seed = seed;
  plan.train_fraction = train_fraction;
  plan.stratified = stratify;
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * double(n)));

  std::mt19937_64 rng(seed);
  if (!stratify) {
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    fisher_yates(order, rng);
    plan.train_indices.assign(order.begin(), order.begin() + n_train);
    plan.test_indices.assign(order.begin() + n_train, order.end());
  } else {
    std::array<std::vector<std::size_t>, 2> by_label;
    for (std::size_t i = 0; i < n; ++i) {
      by_label[records[i].label == RiskLabel::HighRisk].push_back(i);
    }
    // Largest-remainder apportionment of n_train across the two labels.
    std::array<std::size_t, 2> quota{};
    std::array<double, 2> remainder{};
    std::size_t assigned = 0;
    for (int k = 0; k < 2; ++k) {
      double exact = double(n_train) * double(by_label[k].size()) / double(n);
      quota[k] = static_cast<std::size_t>(std::floor(exact));
      remainder[k] = exact - double(quota[k]);
      assigned += quota[k];
    }
    while (assigned < n_train) {
      int k = remainder[0] >= remainder[1] ? 0 : 1;
      ++quota[k];
      remainder[k] = -1.0;
      ++assigned;
    }
    for (int k = 0; k < 2; ++k) {
      fisher_yates(by_label[k], rng);
      plan.train_indices.insert(plan.train_indices.end(), by_label[k].begin(),
                                by_label[k].begin() + quota[k]);
      plan.test_indices.insert(plan.test_indices.end(), by_label[k].begin() + quota[k],
                               by_label[k].end());
    }
  }
  std::sort(plan.train_indices.begin(), plan.train_indices.end());
  std::sort(plan.test_indices.begin(), plan.test_indices.end());
  return plan;
}

std::size_t EncodingSchema::column_count() const {
  std::size_t count = 0;
  for (const auto& a : attributes) count += a.categorical ? a.kept_levels.size() : 1;
  return count;
}

std::vector<std::string> EncodingSchema::column_names() const {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    const auto base = "attr" + std::to_string(j + 1);
    if (!attributes[j].categorical) {
      names.push_back(base);
      continue;
    }
    for (const auto& level : attributes[j].kept_levels) names.push_back(base + "=" + level);
  }
  return names;
}

EncodingSchema fit_schema(std::span<const CreditRecord> records) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "cannot fit encoding on no records");
  EncodingSchema schema;
  for (std::size_t j = 0; j < kFeatureCount; ++j) {
    auto& attr = schema.attributes[j];
    attr.categorical = kCategorical[j];
    if (!attr.categorical) continue;
    std::set<std::string> levels;
    for (const auto& r : records) levels.insert(r.features[j]);
    attr.kept_levels.assign(std::next(levels.begin()), levels.end());
  }
  return schema;
}

EncodedMatrix encode(std::span<const CreditRecord> records,
                     const std::optional<EncodingSchema>& fit_columns) {
  if (records.empty()) throw Error(ErrorKind::EmptyInput, "cannot encode no records");
  EncodedMatrix out;
  out.schema = fit_columns ? *fit_columns : fit_schema(records);
  out.column_names = out.schema.column_names();
  const auto n = static_cast<Eigen::Index>(records.size());
  out.design = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(out.schema.column_count()));
  out.target.resize(n);

  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i)];
    Eigen::Index col = 0;
    for (std::size_t j = 0; j < kFeatureCount; ++j) {
      const auto& attr = out.schema.attributes[j];
      if (!attr.categorical) {
        out.design(i, col++) = *parse_int(rec.features[j]);
        continue;
      }
      for (const auto& level : attr.kept_levels) {
        out.design(i, col++) = rec.features[j] == level ? 1.0 : 0.0;
      }
    }
    out.target(i) = risk_code(rec.label);
  }
  return out;
}

void write_encoded_csv(std::ostream& out, std::span<const CreditRecord> records,
                       const EncodedMatrix& encoded) {
  out << "age,group,label";
  for (const auto& name : encoded.column_names) out << ',' << name;
  out << '\n';
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& rec = records[i];
    out << rec.age << ',' << to_string(age_group(rec.age)) << ',' << risk_code(rec.label);
    for (Eigen::Index c = 0; c < encoded.design.cols(); ++c) {
      out << ',' << encoded.design(static_cast<Eigen::Index>(i), c);
    }
    out << '\n';
  }
}

}  // namespace debias
