#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>

#include "debias/causal.hpp"
#include "debias/debiaser.hpp"

namespace debias {

struct PipelineConfig {
  std::filesystem::path data_path = "data/german.data";
  std::uint64_t seed = 42;
  double train_fraction = 0.7;
  bool stratify = false;
  PathVariant variant = PathVariant::Quadratic;
  double quantile_level = 0.70;
  QuantileMethod quantile_method = QuantileMethod::Interpolate;
  SeConvention se_convention = SeConvention::MaximumLikelihood;
  int max_iter = 100;
  double tol = 1e-8;
  std::filesystem::path output_dir = "out";

  // Throws ConfigError on out-of-range values.
  void validate() const;

  // `key = value` lines, one per field; parse_config inverts it exactly.
  std::string to_text() const;

  // Digest over every field that can change artifact contents (paths excluded).
  std::string digest() const;
};

// Applies `key = value` lines on top of `base`. Blank lines and lines starting
// with '#' or ';' are ignored; unknown keys are a ConfigError.
PipelineConfig parse_config(std::string_view text, PipelineConfig base = {});
PipelineConfig load_config(const std::filesystem::path& path, PipelineConfig base = {});

// Sets a single field by its key name (the CLI flag name without dashes).
void set_config_value(PipelineConfig& config, std::string_view key, std::string_view value);

}  // namespace debias
