#pragma once

#include <filesystem>

#include "ecoinf/synth.hpp"
#include "json.hpp"

namespace ecoinf {

/// Replication study: generate, estimate with every method, diagnose, aggregate.
struct ExperimentConfig {
  GeneratorConfig generator;
  /// goodman, king-ols, brown-payne, multilevel, raw
  std::vector<std::string> methods{"goodman", "king-ols", "brown-payne", "raw"};
  /// Covariate names per method, drawn from the generated covariates and `marginal_covariates`.
  std::map<std::string, std::vector<std::string>> covariate_sets;
  std::vector<MarginalCovariate> marginal_covariates;
  int replications = 1;
  std::uint64_t seed = 1;
  std::filesystem::path output_dir;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json experiment_config_to_json(const ExperimentConfig& config);

struct ExperimentResult {
  nlohmann::json report;    // per-replication results and aggregates
  nlohmann::json manifest;  // stages completed and failures
  bool ok = true;
};

/// Replications run in order and use generator seeds derived from `seed`, so
/// the report is identical across runs. When `output_dir` is set, report.json
/// and manifest.json are written there (also after a failure).
ExperimentResult run_experiment(const ExperimentConfig& config);

}  // namespace ecoinf
