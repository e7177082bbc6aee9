#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "ecoinf/experiment.hpp"
#include "ecoinf/io.hpp"
#include "ecoinf/report.hpp"
#include "helpers.hpp"

using namespace ecoinf;

namespace {

std::string error_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("ecoinf_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace

TEST_CASE("aggregated CSV round trip keeps labels and seats") {
  GeneratorConfig cfg = palermo_like_config();
  cfg.num_units = 30;
  cfg.num_seats = 3;
  const SyntheticPopulation pop = generate(cfg);
  std::stringstream buf;
  write_aggregated_csv(buf, pop.units, pop.meta);
  const AggregatedData back = read_aggregated_csv(buf);
  CHECK(back.units == pop.units);
  CHECK(back.meta.row_labels == pop.meta.row_labels);
  CHECK(back.meta.col_labels == pop.meta.col_labels);
  CHECK(back.meta.seat_of_unit == pop.meta.seat_of_unit);
}

TEST_CASE("aggregated CSV errors carry line numbers") {
  std::stringstream bad_total("unit,seat,x_a,x_b,y_no,y_yes\nu1,s,1,2,3,0\nu2,s,1,1,1,2\n");
  CHECK(error_of([&] { read_aggregated_csv(bad_total); }).rfind("line 3:", 0) == 0);
  std::stringstream short_row("unit,seat,x_a,y_no,y_yes\nu1,s,1,1\n");
  CHECK(error_of([&] { read_aggregated_csv(short_row); }).rfind("line 2:", 0) == 0);
  std::stringstream bad_header("id,seat,x_a,y_b\n");
  CHECK(error_of([&] { read_aggregated_csv(bad_header); }).rfind("line 1:", 0) == 0);
  std::stringstream negative("unit,seat,x_a,y_b\nu1,s,-1,-1\n");
  CHECK(error_of([&] { read_aggregated_csv(negative); }).rfind("line 2:", 0) == 0);
  std::stringstream duplicate("unit,seat,x_a,y_b\nu1,s,1,1\nu1,s,2,2\n");
  CHECK(error_of([&] { read_aggregated_csv(duplicate); }).rfind("line 3:", 0) == 0);
}

TEST_CASE("individual CSV round trip and errors") {
  const SyntheticPopulation pop = table1_fixture();
  std::stringstream buf;
  write_individual_csv(buf, pop.tables);
  CHECK(read_individual_csv(buf, 2, 2) == pop.tables);
  std::stringstream out_of_range("unit,row,col,count\n1,3,1,5\n");
  CHECK(error_of([&] { read_individual_csv(out_of_range, 2, 2); }).rfind("line 2:", 0) == 0);
  std::stringstream twice("unit,row,col,count\n1,1,1,5\n1,1,1,5\n");
  CHECK(error_of([&] { read_individual_csv(twice, 2, 2); }).rfind("line 3:", 0) == 0);
}

TEST_CASE("covariate CSV round trip is exact") {
  CovariateTable t;
  t.names = {"pd", "idv"};
  t.unit_ids = {"a", "b"};
  t.values.resize(2, 2);
  t.values << 0.1, 1.0 / 3.0, 2e-17, -4.5;
  std::stringstream buf;
  write_covariates_csv(buf, t);
  CHECK(read_covariates_csv(buf) == t);
  std::stringstream bad("unit,z\na,1\nb,abc\n");
  CHECK(error_of([&] { read_covariates_csv(bad); }).rfind("line 3:", 0) == 0);
}

TEST_CASE("generator config JSON round trip and presets") {
  const GeneratorConfig cfg = palermo_like_config();
  const GeneratorConfig back = config_from_json(config_to_json(cfg));
  CHECK(back.num_units == cfg.num_units);
  CHECK(test::max_abs(back.base_pi, cfg.base_pi) == 0.0);
  CHECK(back.bias.size() == cfg.bias.size());
  CHECK(back.covariates.size() == 2);
  CHECK(config_to_json(back) == config_to_json(cfg));
  const GeneratorConfig preset = config_from_json({{"preset", "palermo_like"}, {"num_units", 62}, {"seed", 9}});
  CHECK(preset.num_units == 62);
  CHECK(preset.seed == 9);
  CHECK_THROWS_AS(config_from_json({{"preset", "nope"}}), ValidationError);
  CHECK_THROWS_AS(config_from_json({{"preset", "palermo_like"}, {"num_seats", 0}}), ValidationError);
}

TEST_CASE("population files round trip through read_dataset") {
  GeneratorConfig cfg = palermo_like_config();
  cfg.num_units = 20;
  cfg.num_seats = 2;
  const SyntheticPopulation pop = generate(cfg);
  const auto dir = scratch("population");
  write_population(dir, pop);
  const Dataset d = read_dataset(dir / "aggregated.csv", dir / "individual.csv", dir / "covariates.csv");
  CHECK(d.units == pop.units);
  CHECK(d.tables == pop.tables);
  CHECK(test::max_abs(d.covariates.values, pop.covariates.values) == 0.0);
  const auto truth = nlohmann::json::parse(read_file(dir / "truth.json"));
  CHECK(truth.contains("expected_pooled"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("report JSON round trip and validation") {
  const SyntheticPopulation pop = table1_fixture();
  const EstimateReport r = make_report(fit_goodman(pop.units, pop.meta), pop.meta);
  const nlohmann::json j = report_to_json(r);
  CHECK(validate_report_json(j).empty());
  const EstimateReport back = report_from_json(j);
  CHECK(back.method == "goodman");
  CHECK(test::max_abs(back.pi, r.pi) == 0.0);
  REQUIRE(back.se.has_value());

  nlohmann::json bad = j;
  bad["method"] = "magic";
  CHECK_FALSE(validate_report_json(bad).empty());
  bad = j;
  bad["pi"][0][0] = 0.9;
  CHECK_FALSE(validate_report_json(bad).empty());
  bad = j;
  bad.erase("diagnostics");
  CHECK_FALSE(validate_report_json(bad).empty());
  bad = j;
  bad["se"] = nlohmann::json::array({{1.0}});
  CHECK_FALSE(validate_report_json(bad).empty());
  bad = j;
  bad["se"] = nullptr;
  CHECK(validate_report_json(bad).empty());
  CHECK_THROWS_AS(report_from_json(nlohmann::json::array()), ValidationError);

  const std::string csv = report_to_csv(r);
  CHECK(csv.rfind("row,col,estimate,se\n", 0) == 0);
}

TEST_CASE("reports from every estimator validate") {
  const SyntheticPopulation pop = generate(no_bias_config(2, 2, 60, 200.0, 3));
  std::vector<nlohmann::json> reports;
  reports.push_back(report_to_json(make_report(fit_king_ols(pop.units, pop.meta), pop.meta, {})));
  reports.push_back(report_to_json(make_report(fit_brown_payne(pop.units, pop.meta), pop.meta)));
  MultilevelStructure st;
  st.levels = 2;
  const MLFit ml = fit_multilevel(cell_observations(pop.tables, pop.meta, 1), {}, st);
  reports.push_back(report_to_json(make_report(ml, averaged_probabilities(ml, pop.units, {}), {"c1", "c2"})));
  for (const auto& j : reports) {
    const auto problems = validate_report_json(j);
    CHECK_MESSAGE(problems.empty(), j.at("method").get<std::string>());
  }
  CHECK(reports[2]["diagnostics"].contains("beta"));
}

TEST_CASE("experiments are reproducible and write their outputs") {
  ExperimentConfig cfg;
  cfg.generator = no_bias_config(2, 2, 60, 200.0, 1);
  cfg.replications = 2;
  cfg.seed = 5;
  cfg.output_dir = scratch("experiment");
  const ExperimentResult a = run_experiment(cfg);
  CHECK(a.ok);
  CHECK(a.report["replications"].size() == 2);
  CHECK(std::filesystem::exists(cfg.output_dir / "report.json"));
  CHECK(std::filesystem::exists(cfg.output_dir / "manifest.json"));
  const ExperimentResult b = run_experiment(cfg);
  CHECK(a.report.dump() == b.report.dump());
  const ExperimentConfig back = experiment_config_from_json(experiment_config_to_json(cfg));
  CHECK(back.replications == 2);
  CHECK(back.methods == cfg.methods);
  std::filesystem::remove_all(cfg.output_dir);
}
