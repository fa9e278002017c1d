// debias-kit: train a black-box credit scorer, fit a causal path model over
// its scores and audit equal opportunity before and after removing the direct
// age effect.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "debias/config.hpp"
#include "debias/pipeline.hpp"

namespace {

// Config keys exposed as --<key> on every subcommand.
const char* const kConfigKeys[] = {"data",           "seed",          "train-fraction",
                                   "stratify",       "variant",       "quantile-level",
                                   "quantile-method", "se-convention", "max-iter",
                                   "tol",            "out"};

struct CommonOptions {
  std::string config_file;
  std::map<std::string, std::string> overrides;
};

void add_common(CLI::App* app, CommonOptions& opts) {
  app->add_option("--config", opts.config_file, "key = value config file; flags override it")
      ->check(CLI::ExistingFile);
  for (const char* key : kConfigKeys) {
    app->add_option_function<std::string>(
        std::string("--") + key, [&opts, key](const std::string& v) { opts.overrides[key] = v; },
        std::string("override config key '") + key + "'");
  }
}

debias::PipelineConfig resolve(const CommonOptions& opts) {
  debias::PipelineConfig config;
  if (!opts.config_file.empty()) config = debias::load_config(opts.config_file);
  for (const auto& [key, value] : opts.overrides) debias::set_config_value(config, key, value);
  config.validate();
  return config;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal post-processing bias audit for binary credit-risk scores"};
  app.require_subcommand(1);

  CommonOptions run_opts, audit_opts, sweep_opts;
  auto* run = app.add_subcommand("run", "ingest, split, fit, score, de-bias and audit");
  add_common(run, run_opts);

  auto* audit = app.add_subcommand("audit", "de-bias and audit externally produced scores");
  add_common(audit, audit_opts);
  std::string train_scores;
  std::optional<std::string> test_scores;
  audit->add_option("--scores", train_scores, "training scores CSV (age,group,label,y_hat)")
      ->required();
  audit->add_option("--test-scores", test_scores, "test scores CSV with the same schema");

  auto* sweep = app.add_subcommand("sweep", "repeat the pipeline over seeds 1..N");
  add_common(sweep, sweep_opts);
  std::size_t n_seeds = 20;
  bool write_runs = false;
  sweep->add_option("--n-seeds", n_seeds, "number of seeds")->capture_default_str();
  sweep->add_flag("--write-runs", write_runs, "also write each seed's artifacts to <out>/seed_<k>");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : debias::kExitUsage;
  }

  try {
    if (*run) {
      return debias::run_pipeline(resolve(run_opts));
    }
    if (*audit) {
      std::optional<std::filesystem::path> test;
      if (test_scores) test = *test_scores;
      return debias::audit_external(resolve(audit_opts), train_scores, test);
    }
    if (*sweep) {
      const auto config = resolve(sweep_opts);
      const auto summary = debias::seed_sweep(config, n_seeds, write_runs);
      const auto json = debias::to_json(summary);
      std::filesystem::create_directories(config.output_dir);
      std::ofstream(config.output_dir / "sweep_summary.json") << json.dump(2) << '\n';
      std::cout << json["aggregate"].dump(2) << '\n';
      return debias::kExitOk;
    }
  } catch (const debias::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.kind() == debias::ErrorKind::ConfigError ? debias::kExitUsage
                                                      : debias::kExitStageFailure;
  }
  return debias::kExitUsage;
}
