#include "debias/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "debias/digest.hpp"
#include "debias/error.hpp"

namespace debias {

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T>
T parse_number(std::string_view key, std::string_view value) {
  T out{};
  auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) {
    throw Error(ErrorKind::ConfigError,
                "invalid value for " + std::string(key) + ": '" + std::string(value) + "'");
  }
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw Error(ErrorKind::ConfigError,
              "invalid boolean for " + std::string(key) + ": '" + std::string(value) + "'");
}

std::string_view se_name(SeConvention se) {
  return se == SeConvention::MaximumLikelihood ? "ml" : "unbiased";
}

}  // namespace

void PipelineConfig::validate() const {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorKind::ConfigError, "train-fraction must lie in (0, 1)");
  }
  if (!(quantile_level > 0.0 && quantile_level < 1.0)) {
    throw Error(ErrorKind::ConfigError, "quantile-level must lie in (0, 1)");
  }
  if (max_iter < 1) throw Error(ErrorKind::ConfigError, "max-iter must be >= 1");
  if (!(tol > 0.0)) throw Error(ErrorKind::ConfigError, "tol must be positive");
}

std::string PipelineConfig::to_text() const {
  std::ostringstream os;
  os << "data = " << data_path.string() << '\n'
     << "seed = " << seed << '\n'
     << "train-fraction = " << fmt_double(train_fraction) << '\n'
     << "stratify = " << (stratify ? "true" : "false") << '\n'
     << "variant = " << to_string(variant) << '\n'
     << "quantile-level = " << fmt_double(quantile_level) << '\n'
     << "quantile-method = " << to_string(quantile_method) << '\n'
     << "se-convention = " << se_name(se_convention) << '\n'
     << "max-iter = " << max_iter << '\n'
     << "tol = " << fmt_double(tol) << '\n'
     << "out = " << output_dir.string() << '\n';
  return os.str();
}

std::string PipelineConfig::digest() const {
  PipelineConfig canonical = *this;
  canonical.data_path.clear();
  canonical.output_dir.clear();
  return short_digest(canonical.to_text());
}

void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value) {
  if (key == "data") {
    config.data_path = std::string(value);
  } else if (key == "seed") {
    config.seed = parse_number<std::uint64_t>(key, value);
  } else if (key == "train-fraction") {
    config.train_fraction = parse_number<double>(key, value);
  } else if (key == "stratify") {
    config.stratify = parse_bool(key, value);
  } else if (key == "variant") {
    config.variant = parse_variant(value);
  } else if (key == "quantile-level") {
    config.quantile_level = parse_number<double>(key, value);
  } else if (key == "quantile-method") {
    config.quantile_method = parse_quantile_method(value);
  } else if (key == "se-convention") {
    if (value == "ml") {
      config.se_convention = SeConvention::MaximumLikelihood;
    } else if (value == "unbiased") {
      config.se_convention = SeConvention::Unbiased;
    } else {
      throw Error(ErrorKind::ConfigError, "se-convention must be ml or unbiased");
    }
  } else if (key == "max-iter") {
    config.max_iter = parse_number<int>(key, value);
  } else if (key == "tol") {
    config.tol = parse_number<double>(key, value);
  } else if (key == "out") {
    config.output_dir = std::string(value);
  } else {
    throw Error(ErrorKind::ConfigError, "unknown config key '" + std::string(key) + "'");
  }
}

PipelineConfig parse_config(std::string_view text, PipelineConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto eol = text.find('\n');
    const auto raw = text.substr(0, eol);
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    const auto line = trim(raw);
    if (line.empty() || line.front() == '#' || line.front() == ';') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw Error(ErrorKind::ConfigError, "config line " + std::to_string(line_no) + " has no '='");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::ConfigError, "cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

}  // namespace debias
