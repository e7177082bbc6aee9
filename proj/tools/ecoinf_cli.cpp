// Command-line front end: simulate, estimate, diagnose, compare, experiment.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "ecoinf/brown_payne.hpp"
#include "ecoinf/diagnostics.hpp"
#include "ecoinf/experiment.hpp"
#include "ecoinf/goodman.hpp"
#include "ecoinf/io.hpp"
#include "ecoinf/king_ols.hpp"
#include "ecoinf/multilevel.hpp"
#include "ecoinf/report.hpp"

namespace fs = std::filesystem;
using namespace ecoinf;

namespace {

constexpr int kValidationFailure = 2;
constexpr int kNotConverged = 3;

struct Common {
  std::uint64_t seed = 1;
  std::string out;
  std::string format = "json";
};

void emit(const Common& common, const std::string& text) {
  if (common.out.empty() || common.out == "-") {
    std::cout << text;
  } else {
    write_file(common.out, text);
  }
}

nlohmann::json load_json(const std::string& path) {
  try {
    return nlohmann::json::parse(read_file(path));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void require_valid(const Dataset& d) {
  const ValidationReport report = validate_dataset(d.units, d.tables.empty() ? nullptr : &d.tables, d.meta);
  if (!report.ok()) {
    std::string msg;
    for (const Violation& v : report.violations) msg += "\n  " + to_string(v.kind) + " " + v.unit + ": " + v.detail;
    throw ValidationError("dataset failed validation:" + msg);
  }
}

// Covariates t_<row> with each row using only its own share.
std::pair<CovariateTable, CovariateMask> own_marginals(const Dataset& d) {
  std::vector<MarginalCovariate> specs;
  for (Index i = 0; i < d.meta.rows(); ++i) specs.push_back({"t_" + d.meta.row_labels[static_cast<std::size_t>(i)], {i}});
  CovariateMask mask = CovariateMask::Constant(d.meta.rows(), d.meta.rows(), false);
  mask.diagonal().setConstant(true);
  return {marginal_covariates(d.units, specs), mask};
}

struct EstimateArgs {
  std::string data;
  std::string individual;
  std::string covariates;
  std::string use;
  std::string method = "goodman";
  bool weighted = false;
  bool no_truncate = false;
  bool own_marginals = false;
  std::optional<double> fix_phi;
  std::optional<double> fix_tau;
  bool per_group = false;
  std::string groups;
  int levels = 3;
  int nodes = 9;
  int outcome = 0;  // 1-based; 0 means the last column
};

int run_estimate(const EstimateArgs& a, const Common& common) {
  Dataset d = read_dataset(a.data, a.individual, a.covariates);
  require_valid(d);
  if (!a.use.empty()) {
    const std::vector<std::string> keep = split_names(a.use);
    d.covariates = d.covariates.select(keep);
  }
  CovariateMask mask;
  if (a.own_marginals) {
    auto [table, m] = own_marginals(d);
    if (d.covariates.size() > 0) throw ValidationError("--own-marginals cannot be combined with --covariates");
    d.covariates = table;
    mask = m;
  }
  const Eigen::MatrixXd z = d.covariates.size() > 0 ? d.covariates.aligned(d.units) : Eigen::MatrixXd();

  EstimateReport report;
  if (a.method == "goodman") {
    report = make_report(fit_goodman(d.units, d.meta, {a.weighted, !a.no_truncate}), d.meta);
  } else if (a.method == "king-ols") {
    KingOptions opt;
    opt.weighted = a.weighted;
    opt.mask = mask;
    opt.covariate_names = d.covariates.names;
    report = make_report(fit_king_ols(d.units, d.meta, z, opt), d.meta, d.covariates.names);
  } else if (a.method == "brown-payne") {
    BPOptions opt;
    opt.mask = mask;
    opt.covariate_names = d.covariates.names;
    opt.fix_phi = a.fix_phi;
    opt.fix_tau = a.fix_tau;
    report = make_report(fit_brown_payne(d.units, d.meta, z, opt), d.meta);
  } else if (a.method == "raw") {
    if (d.tables.empty()) throw ValidationError("raw estimates need --individual");
    const RawEstimate raw = raw_estimates(d.tables);
    report.method = "raw";
    report.row_labels = d.meta.row_labels;
    report.col_labels = d.meta.col_labels;
    report.pi = raw.transition().matrix();
  } else if (a.method == "multilevel") {
    if (d.tables.empty()) throw ValidationError("multilevel needs --individual");
    const Index outcome = a.outcome > 0 ? a.outcome - 1 : d.meta.cols() - 1;
    const std::vector<CellObservation> obs = cell_observations(d.tables, d.meta, outcome);
    MultilevelStructure structure;
    structure.levels = a.levels;
    structure.quadrature_nodes = a.nodes;
    structure.per_group_sigmas = a.per_group;
    structure.group_labels = d.meta.row_labels;
    MLFit fit;
    if (!a.groups.empty()) {
      std::vector<Index> groups;
      for (const std::string& g : split_names(a.groups)) groups.push_back(std::stoll(g) - 1);
      fit = fit_per_group(obs, d.covariates, groups, structure);
    } else {
      fit = fit_multilevel(obs, d.covariates, structure);
    }
    const TransitionMatrix pi = averaged_probabilities(fit, d.units, d.covariates);
    const std::string label = d.meta.col_labels[static_cast<std::size_t>(outcome)];
    report = make_report(fit, pi, {"not " + label, label});
  } else {
    throw ValidationError("unknown method '" + a.method + "'");
  }
  emit(common, common.format == "csv" ? report_to_csv(report) : report_to_json(report).dump(2) + "\n");
  return report.converged ? 0 : kNotConverged;
}

struct DiagnoseArgs {
  std::string test;
  std::string data;
  std::string individual;
  std::string covariates;
  std::string group_by = "own";
  bool weight_by_size = false;
  std::string method = "brown-payne";
  std::vector<std::string> reports;
  std::string truth;
  int outcome = 0;
};

int run_compare(const std::vector<std::string>& reports, const std::string& truth_path, const Common& common) {
  const nlohmann::json truth = load_json(truth_path);
  const TransitionMatrix pooled(matrix_from_json(truth.at("expected_pooled")), 1e-8);
  std::vector<Eigen::MatrixXd> units;
  if (truth.contains("unit_pi")) {
    for (const auto& p : truth.at("unit_pi")) units.push_back(matrix_from_json(p));
  }
  std::vector<NamedEstimate> estimates;
  for (const std::string& path : reports) {
    const EstimateReport r = report_from_json(load_json(path));
    estimates.emplace_back(r.method, TransitionMatrix(r.pi, 1e-8));
  }
  const ComparisonReport cmp = compare_estimates(estimates, pooled, units);
  if (common.format == "csv") {
    std::ostringstream out;
    out << "cell";
    for (const std::string& c : cmp.grid_columns) out << ',' << c;
    out << '\n';
    const std::vector<std::string> rows = truth.at("row_labels").get<std::vector<std::string>>();
    const std::vector<std::string> cols = truth.at("col_labels").get<std::vector<std::string>>();
    for (Index k = 0; k < cmp.grid.rows(); ++k) {
      out << rows[static_cast<std::size_t>(k / pooled.cols())] << ':' << cols[static_cast<std::size_t>(k % pooled.cols())];
      for (Index c = 0; c < cmp.grid.cols(); ++c) out << ',' << cmp.grid(k, c);
      out << '\n';
    }
    emit(common, out.str());
    return 0;
  }
  nlohmann::json j;
  j["errors"] = nlohmann::json::array();
  for (const MethodError& e : cmp.errors) {
    j["errors"].push_back({{"method", e.method}, {"max_abs", e.max_abs}, {"mean_abs", e.mean_abs}});
  }
  j["sign_reversals"] = nlohmann::json::array();
  for (const SignReversal& s : cmp.reversals) {
    j["sign_reversals"].push_back(
        {{"method", s.method}, {"row_a", s.row_a + 1}, {"row_b", s.row_b + 1}, {"col", s.col + 1}, {"estimate_diff", s.estimate_diff}});
  }
  j["grid_columns"] = cmp.grid_columns;
  j["grid"] = matrix_to_json(cmp.grid);
  emit(common, j.dump(2) + "\n");
  return 0;
}

int run_diagnose(const DiagnoseArgs& a, const Common& common) {
  if (a.test == "compare") return run_compare(a.reports, a.truth, common);
  if (a.data.empty() || a.individual.empty()) throw ValidationError("--data and --individual are required");
  const Dataset d = read_dataset(a.data, a.individual, a.covariates);
  require_valid(d);
  const Index outcome = a.outcome > 0 ? a.outcome - 1 : d.meta.cols() - 1;

  if (a.test == "bias-condition") {
    const BiasTestReport r = bias_condition_test(d.tables, d.covariates.size() > 0 ? &d.covariates : nullptr);
    nlohmann::json j;
    j["violated"] = r.violated;
    j["level"] = r.level;
    j["fraction_significant_5pct"] = r.fraction_significant_5pct;
    j["cells"] = nlohmann::json::array();
    for (const BiasCellTest& c : r.cells) {
      nlohmann::json coefs = nlohmann::json::array();
      for (std::size_t k = 0; k < c.names.size(); ++k) {
        const auto idx = static_cast<Index>(k);
        coefs.push_back({{"name", c.names[k]},
                         {"estimate", c.beta(idx)},
                         {"se", std::isfinite(c.se(idx)) ? nlohmann::json(c.se(idx)) : nlohmann::json("inf")},
                         {"p_value", c.p_values(idx)}});
      }
      j["cells"].push_back({{"row", d.meta.row_labels[static_cast<std::size_t>(c.row)]},
                            {"col", d.meta.col_labels[static_cast<std::size_t>(c.col)]},
                            {"separated", c.separated},
                            {"coefficients", coefs}});
    }
    emit(common, j.dump(2) + "\n");
    return 0;
  }
  if (a.test == "quartiles") {
    QuartileGrouping grouping = OwnMarginal{};
    if (a.group_by.rfind("row:", 0) == 0) {
      grouping = RowMarginal{std::stoll(a.group_by.substr(4)) - 1};
    } else if (a.group_by.rfind("cov:", 0) == 0) {
      grouping = CovariateGrouping{a.group_by.substr(4)};
    } else if (a.group_by != "own") {
      throw ValidationError("--group-by must be own, row:<k> or cov:<name>");
    }
    const std::vector<QuartileRow> rows =
        quartile_summary(d.tables, grouping, &d.covariates, {outcome, a.weight_by_size});
    std::ostringstream out;
    write_quartiles_csv(out, rows, d.meta.row_labels);
    emit(common, out.str());
    return 0;
  }
  if (a.test == "error-sd") {
    UnitPredictions observed;
    const Index N = static_cast<Index>(d.tables.size());
    observed.totals.resize(N);
    observed.cells.resize(N, d.meta.rows());
    for (Index u = 0; u < N; ++u) {
      const IndividualTable& t = d.tables[static_cast<std::size_t>(u)];
      observed.unit_ids.push_back(t.id);
      observed.cells.row(u) = t.counts.col(outcome).cast<double>().transpose();
      observed.totals(u) = observed.cells.row(u).sum();
    }
    UnitPredictions predicted;
    for (const UnitAggregate& u : d.units) predicted.unit_ids.push_back(u.id);
    bool converged = true;
    if (a.method == "brown-payne") {
      const Eigen::MatrixXd z = d.covariates.size() > 0 ? d.covariates.aligned(d.units) : Eigen::MatrixXd();
      BPOptions opt;
      opt.covariate_names = d.covariates.names;
      const BPFit fit = fit_brown_payne(d.units, d.meta, z, opt);
      converged = fit.converged;
      const auto cells = bp_predict_cells(fit, d.units, z);
      predicted.cells.resize(static_cast<Index>(cells.size()), d.meta.rows());
      for (std::size_t u = 0; u < cells.size(); ++u) {
        predicted.cells.row(static_cast<Index>(u)) = cells[u].col(outcome).transpose();
      }
    } else if (a.method == "multilevel") {
      MultilevelStructure structure;
      structure.group_labels = d.meta.row_labels;
      structure.compute_se = false;
      const MLFit fit = fit_multilevel(cell_observations(d.tables, d.meta, outcome), d.covariates, structure);
      converged = fit.converged;
      predicted.cells = ml_predict_cells(fit, d.units, d.covariates);
    } else {
      throw ValidationError("error-sd supports brown-payne and multilevel");
    }
    predicted.totals = predicted.cells.rowwise().sum();
    const ErrorSD sd = prediction_error_sd(predicted, observed);
    nlohmann::json j{{"method", a.method}, {"overall_sd", sd.overall}, {"per_cell", nlohmann::json::array()}};
    for (Index g = 0; g < sd.per_cell.size(); ++g) {
      j["per_cell"].push_back({{"row", d.meta.row_labels[static_cast<std::size_t>(g)]}, {"sd", sd.per_cell(g)}});
    }
    emit(common, j.dump(2) + "\n");
    return converged ? 0 : kNotConverged;
  }
  throw ValidationError("unknown test '" + a.test + "'");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Ecological inference for R x C voter-transition tables"};
  app.require_subcommand(1);
  Common common;
  const auto add_common = [&](CLI::App* sub) {
    sub->add_option("--seed", common.seed, "Random seed");
    sub->add_option("--out", common.out, "Output file or directory");
    sub->add_option("--format", common.format, "Output format")->check(CLI::IsMember({"csv", "json"}));
  };

  std::string sim_config;
  std::string sim_preset;
  int table1_scale = 20;
  CLI::App* simulate = app.add_subcommand("simulate", "Generate a synthetic population");
  simulate->add_option("--config", sim_config, "Generator config (JSON)");
  simulate->add_option("--preset", sim_preset, "palermo-like or table1")->check(CLI::IsMember({"palermo-like", "table1"}));
  simulate->add_option("--scale", table1_scale, "Scale of the table1 preset (multiple of 20)");
  add_common(simulate);

  EstimateArgs est;
  CLI::App* estimate = app.add_subcommand("estimate", "Estimate a transition matrix");
  estimate->add_option("--data", est.data, "Aggregated CSV")->required();
  estimate->add_option("--method", est.method, "Estimator")
      ->check(CLI::IsMember({"goodman", "king-ols", "brown-payne", "multilevel", "raw"}));
  estimate->add_option("--individual", est.individual, "Individual CSV");
  estimate->add_option("--covariates", est.covariates, "Covariate CSV");
  estimate->add_option("--use", est.use, "Comma-separated covariate names to keep");
  estimate->add_flag("--own-marginals", est.own_marginals, "Each row's logits depend on its own marginal share");
  estimate->add_flag("--weighted", est.weighted, "Weight units by size (goodman, king-ols)");
  estimate->add_flag("--no-truncate", est.no_truncate, "Report raw Goodman values");
  estimate->add_option("--fix-phi", est.fix_phi, "Fix the within-row correlation (brown-payne)");
  estimate->add_option("--fix-tau", est.fix_tau, "Fix the between-row correlation (brown-payne)");
  estimate->add_flag("--per-group", est.per_group, "Separate random effects per group (multilevel)");
  estimate->add_option("--groups", est.groups, "Comma-separated 1-based rows for a per-group model (multilevel)");
  estimate->add_option("--levels", est.levels, "2 or 3 (multilevel)")->check(CLI::IsMember({2, 3}));
  estimate->add_option("--nodes", est.nodes, "Quadrature nodes (multilevel)")->check(CLI::Range(1, 64));
  estimate->add_option("--outcome", est.outcome, "1-based outcome column (multilevel, default last)");
  add_common(estimate);

  DiagnoseArgs diag;
  CLI::App* diagnose = app.add_subcommand("diagnose", "Run a diagnostic");
  diagnose->add_option("--test", diag.test, "Diagnostic")
      ->required()
      ->check(CLI::IsMember({"bias-condition", "quartiles", "error-sd", "compare"}));
  diagnose->add_option("--data", diag.data, "Aggregated CSV");
  diagnose->add_option("--individual", diag.individual, "Individual CSV");
  diagnose->add_option("--covariates", diag.covariates, "Covariate CSV");
  diagnose->add_option("--group-by", diag.group_by, "own, row:<k> or cov:<name> (quartiles)");
  diagnose->add_flag("--weight-by-size", diag.weight_by_size, "Quartiles of equal voter counts");
  diagnose->add_option("--method", diag.method, "brown-payne or multilevel (error-sd)");
  diagnose->add_option("--report", diag.reports, "Estimate report JSON (compare)");
  diagnose->add_option("--truth", diag.truth, "truth.json (compare)");
  diagnose->add_option("--outcome", diag.outcome, "1-based outcome column (default last)");
  add_common(diagnose);

  std::vector<std::string> cmp_reports;
  std::string cmp_truth;
  CLI::App* compare = app.add_subcommand("compare", "Compare estimate reports with the truth");
  compare->add_option("reports", cmp_reports, "Estimate report JSON files")->required();
  compare->add_option("--truth", cmp_truth, "truth.json")->required();
  add_common(compare);

  std::string exp_config;
  int exp_replications = 0;
  CLI::App* experiment = app.add_subcommand("experiment", "Run a replication study");
  experiment->add_option("--config", exp_config, "Experiment config (JSON)")->required();
  experiment->add_option("--replications", exp_replications, "Override the replication count");
  add_common(experiment);

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) {
      if (common.out.empty()) throw ValidationError("simulate needs --out <dir>");
      SyntheticPopulation pop;
      if (sim_preset == "table1") {
        pop = table1_fixture(table1_scale);
      } else {
        GeneratorConfig cfg = !sim_config.empty() ? config_from_json(load_json(sim_config)) : palermo_like_config();
        if (simulate->count("--seed") > 0) cfg.seed = common.seed;
        pop = generate(cfg);
      }
      write_population(common.out, pop);
      return 0;
    }
    if (estimate->parsed()) return run_estimate(est, common);
    if (diagnose->parsed()) return run_diagnose(diag, common);
    if (compare->parsed()) return run_compare(cmp_reports, cmp_truth, common);
    if (experiment->parsed()) {
      ExperimentConfig cfg = experiment_config_from_json(load_json(exp_config));
      if (experiment->count("--seed") > 0) cfg.seed = common.seed;
      if (exp_replications > 0) cfg.replications = exp_replications;
      if (!common.out.empty()) cfg.output_dir = common.out;
      const ExperimentResult result = run_experiment(cfg);
      if (cfg.output_dir.empty()) std::cout << result.report.dump(2) << '\n';
      if (result.ok) return 0;
      const auto& failures = result.manifest["failures"];
      const bool only_convergence = std::all_of(failures.begin(), failures.end(), [](const nlohmann::json& f) {
        return f.at("error").get<std::string>() == "did not converge";
      });
      return only_convergence ? kNotConverged : 1;
    }
  } catch (const ValidationError& e) {
    std::cerr << "validation error: " << e.what() << '\n';
    return kValidationFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
