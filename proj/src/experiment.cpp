#include "ecoinf/experiment.hpp"

#include "ecoinf/brown_payne.hpp"
#include "ecoinf/diagnostics.hpp"
#include "ecoinf/goodman.hpp"
#include "ecoinf/io.hpp"
#include "ecoinf/king_ols.hpp"
#include "ecoinf/multilevel.hpp"

namespace ecoinf {

namespace {

const std::vector<std::string> kMethods{"goodman", "king-ols", "brown-payne", "multilevel", "raw"};

std::uint64_t replication_seed(std::uint64_t seed, int replication) {
  // splitmix64 finalizer
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(replication + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

UnitPredictions observed_outcome(const SyntheticPopulation& pop, Index outcome) {
  UnitPredictions obs;
  const Index N = static_cast<Index>(pop.tables.size());
  const Index R = pop.meta.rows();
  obs.totals.resize(N);
  obs.cells.resize(N, R);
  for (Index u = 0; u < N; ++u) {
    const IndividualTable& t = pop.tables[static_cast<std::size_t>(u)];
    obs.unit_ids.push_back(t.id);
    obs.cells.row(u) = t.counts.col(outcome).cast<double>().transpose();
    obs.totals(u) = obs.cells.row(u).sum();
  }
  return obs;
}

UnitPredictions from_cells(const SyntheticPopulation& pop, const Eigen::MatrixXd& cells) {
  UnitPredictions p;
  for (const UnitAggregate& u : pop.units) p.unit_ids.push_back(u.id);
  p.cells = cells;
  p.totals = cells.rowwise().sum();
  return p;
}

nlohmann::json error_sd_json(const ErrorSD& sd) {
  return {{"overall", sd.overall}, {"per_cell", std::vector<double>(sd.per_cell.data(), sd.per_cell.data() + sd.per_cell.size())}};
}

}  // namespace

ExperimentConfig experiment_config_from_json(const nlohmann::json& j) {
  try {
    ExperimentConfig c;
    c.generator = config_from_json(j.at("generator"));
    if (j.contains("methods")) c.methods = j.at("methods").get<std::vector<std::string>>();
    if (j.contains("covariate_sets")) {
      c.covariate_sets = j.at("covariate_sets").get<std::map<std::string, std::vector<std::string>>>();
    }
    if (j.contains("marginal_covariates")) {
      for (const auto& m : j.at("marginal_covariates")) {
        c.marginal_covariates.push_back({m.at("name").get<std::string>(), m.at("rows").get<std::vector<Index>>()});
      }
    }
    if (j.contains("replications")) c.replications = j.at("replications").get<int>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
    if (c.methods.empty()) throw ValidationError("experiment needs at least one method");
    for (const std::string& m : c.methods) {
      if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
        throw ValidationError("unknown method '" + m + "'");
      }
    }
    if (c.replications < 1) throw ValidationError("replications must be at least 1");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("experiment config: ") + e.what());
  }
}

nlohmann::json experiment_config_to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["generator"] = config_to_json(c.generator);
  j["methods"] = c.methods;
  j["covariate_sets"] = c.covariate_sets;
  j["marginal_covariates"] = nlohmann::json::array();
  for (const MarginalCovariate& m : c.marginal_covariates) {
    j["marginal_covariates"].push_back({{"name", m.name}, {"rows", m.rows}});
  }
  j["replications"] = c.replications;
  j["seed"] = c.seed;
  return j;
}

ExperimentResult run_experiment(const ExperimentConfig& config) {
  if (config.methods.empty()) throw ValidationError("experiment needs at least one method");
  if (config.replications < 1) throw ValidationError("replications must be at least 1");
  const Index R = config.generator.rows();
  const Index C = config.generator.cols();
  const Index outcome = C - 1;

  ExperimentResult result;
  result.report["config"] = experiment_config_to_json(config);
  result.report["replications"] = nlohmann::json::array();
  result.manifest["stages"] = nlohmann::json::array();
  result.manifest["failures"] = nlohmann::json::array();

  std::map<std::string, Eigen::MatrixXd> pi_sum;
  std::map<std::string, int> pi_count;
  std::map<std::string, double> max_err_sum;
  std::map<std::string, double> mean_err_sum;
  std::map<std::string, Eigen::VectorXd> sd_cell_sum;
  std::map<std::string, double> sd_total_sum;
  std::map<std::string, int> sd_count;
  Eigen::MatrixXd truth_sum = Eigen::MatrixXd::Zero(R, C);
  int bias_violations = 0;
  int bias_tests = 0;

  const auto write_outputs = [&] {
    if (config.output_dir.empty()) return;
    std::filesystem::create_directories(config.output_dir);
    write_file(config.output_dir / "report.json", result.report.dump(2) + "\n");
    write_file(config.output_dir / "manifest.json", result.manifest.dump(2) + "\n");
  };
  const auto record_failure = [&](int rep, const std::string& stage, const std::string& what) {
    result.ok = false;
    result.manifest["failures"].push_back({{"replication", rep}, {"stage", stage}, {"error", what}});
  };

  for (int rep = 0; rep < config.replications; ++rep) {
    GeneratorConfig gen = config.generator;
    gen.seed = replication_seed(config.seed, rep);
    nlohmann::json entry{{"replication", rep}, {"seed", gen.seed}};
    SyntheticPopulation pop;
    CovariateTable covariates;
    try {
      pop = generate(gen);
      covariates = join_covariates(pop.covariates, marginal_covariates(pop.units, config.marginal_covariates));
    } catch (const std::exception& e) {
      record_failure(rep, "generate", e.what());
      result.report["replications"].push_back(entry);
      continue;
    }
    result.manifest["stages"].push_back({{"replication", rep}, {"stage", "generate"}});
    const TransitionMatrix truth(pop.truth.expected_pooled, 1e-9);
    truth_sum += truth.matrix();
    entry["truth"] = matrix_to_json(truth.matrix());

    const UnitPredictions observed = observed_outcome(pop, outcome);
    nlohmann::json methods = nlohmann::json::object();
    nlohmann::json error_sds = nlohmann::json::object();
    for (const std::string& method : config.methods) {
      const auto set = config.covariate_sets.find(method);
      const std::vector<std::string> names = set != config.covariate_sets.end() ? set->second : std::vector<std::string>{};
      nlohmann::json m;
      try {
        const CovariateTable cov = names.empty() ? CovariateTable{} : covariates.select(names);
        const Eigen::MatrixXd z = names.empty() ? Eigen::MatrixXd() : cov.aligned(pop.units);
        Eigen::MatrixXd pi;
        std::optional<Eigen::MatrixXd> cells;
        bool converged = true;
        if (method == "goodman") {
          pi = fit_goodman(pop.units, pop.meta).pi_hat;
        } else if (method == "king-ols") {
          KingOptions opt;
          opt.covariate_names = names;
          const KingFit fit = fit_king_ols(pop.units, pop.meta, z, opt);
          pi = fit.pi_hat.matrix();
          converged = fit.converged;
        } else if (method == "brown-payne") {
          BPOptions opt;
          opt.covariate_names = names;
          const BPFit fit = fit_brown_payne(pop.units, pop.meta, z, opt);
          pi = fit.pi_hat.matrix();
          converged = fit.converged;
          const std::vector<Eigen::MatrixXd> pred = bp_predict_cells(fit, pop.units, z);
          Eigen::MatrixXd c(static_cast<Index>(pred.size()), R);
          for (std::size_t u = 0; u < pred.size(); ++u) c.row(static_cast<Index>(u)) = pred[u].col(outcome).transpose();
          cells = c;
        } else if (method == "raw") {
          pi = raw_estimates(pop.tables).transition().matrix();
        } else if (method == "multilevel") {
          if (C != 2) throw EstimationError("multilevel comparison needs two columns");
          const std::vector<CellObservation> obs = cell_observations(pop.tables, pop.meta, outcome);
          MultilevelStructure structure;
          structure.group_labels = pop.meta.row_labels;
          structure.compute_se = false;
          const MLFit fit = fit_multilevel(obs, cov, structure);
          pi = averaged_probabilities(fit, pop.units, cov).matrix();
          converged = fit.converged;
          cells = ml_predict_cells(fit, pop.units, cov);
          m["sigma_station"] = fit.sigma_station(0);
          m["sigma_seat"] = fit.sigma_seat(0);
        }
        const std::vector<NamedEstimate> est{{method, TransitionMatrix(pi, 1e-8)}};
        const ComparisonReport cmp = compare_estimates(est, truth);
        m["pi"] = matrix_to_json(pi);
        m["max_abs_error"] = cmp.errors.front().max_abs;
        m["mean_abs_error"] = cmp.errors.front().mean_abs;
        m["converged"] = converged;
        if (!converged) record_failure(rep, method, "did not converge");
        if (pi_sum.count(method) == 0) pi_sum[method] = Eigen::MatrixXd::Zero(R, C);
        pi_sum[method] += pi;
        ++pi_count[method];
        max_err_sum[method] += cmp.errors.front().max_abs;
        mean_err_sum[method] += cmp.errors.front().mean_abs;
        if (cells) {
          const ErrorSD sd = prediction_error_sd(from_cells(pop, *cells), observed);
          error_sds[method] = error_sd_json(sd);
          if (sd_cell_sum.count(method) == 0) sd_cell_sum[method] = Eigen::VectorXd::Zero(sd.per_cell.size());
          sd_cell_sum[method] += sd.per_cell;
          sd_total_sum[method] += sd.overall;
          ++sd_count[method];
        }
        result.manifest["stages"].push_back({{"replication", rep}, {"stage", method}});
      } catch (const std::exception& e) {
        m["error"] = e.what();
        record_failure(rep, method, e.what());
      }
      methods[method] = m;
    }
    entry["methods"] = methods;
    entry["error_sd"] = error_sds;
    try {
      const BiasTestReport bias = bias_condition_test(pop.tables);
      entry["bias_test"] = {{"violated", bias.violated},
                            {"fraction_significant_5pct", bias.fraction_significant_5pct}};
      bias_violations += bias.violated ? 1 : 0;
      ++bias_tests;
      result.manifest["stages"].push_back({{"replication", rep}, {"stage", "bias-condition"}});
    } catch (const std::exception& e) {
      record_failure(rep, "bias-condition", e.what());
    }
    result.report["replications"].push_back(entry);
    write_outputs();
  }

  nlohmann::json summary;
  summary["truth_mean"] = matrix_to_json(truth_sum / std::max(1, config.replications));
  nlohmann::json grid = nlohmann::json::object();
  for (const auto& [method, sum] : pi_sum) {
    const double n = pi_count[method];
    grid[method] = {{"mean_pi", matrix_to_json(sum / n)},
                    {"mean_max_abs_error", max_err_sum[method] / n},
                    {"mean_mean_abs_error", mean_err_sum[method] / n},
                    {"replications", pi_count[method]}};
  }
  summary["estimates"] = grid;
  nlohmann::json sds = nlohmann::json::object();
  for (const auto& [method, sum] : sd_cell_sum) {
    const double n = sd_count[method];
    sds[method] = error_sd_json({sd_total_sum[method] / n, sum / n});
  }
  summary["error_sd"] = sds;
  summary["bias_test_violation_rate"] = bias_tests > 0 ? static_cast<double>(bias_violations) / bias_tests : 0.0;
  result.report["summary"] = summary;
  result.manifest["complete"] = result.ok;
  write_outputs();
  return result;
}

}  // namespace ecoinf
