#include <set>

#include "doctest.h"
#include "ecoinf/synth.hpp"
#include "helpers.hpp"

using namespace ecoinf;

TEST_CASE("generation is deterministic in the seed") {
  GeneratorConfig cfg = palermo_like_config();
  cfg.num_units = 40;
  cfg.num_seats = 4;
  const SyntheticPopulation a = generate(cfg);
  const SyntheticPopulation b = generate(cfg);
  CHECK(a.units == b.units);
  CHECK(a.tables == b.tables);
  CHECK(a.covariates == b.covariates);
  cfg.seed = 2;
  CHECK_FALSE(generate(cfg).units == a.units);
}

TEST_CASE("generated data pass validation and have the configured shape") {
  const GeneratorConfig cfg = palermo_like_config();
  const SyntheticPopulation pop = generate(cfg);
  CHECK(pop.units.size() == 593);
  CHECK(pop.meta.rows() == 12);
  CHECK(pop.covariates.names == std::vector<std::string>{"pd", "idv"});
  std::set<std::string> seats;
  for (const auto& [unit, seat] : pop.meta.seat_of_unit) seats.insert(seat);
  CHECK(seats.size() == 31);
  const ValidationReport rep = validate_dataset(pop.units, &pop.tables, pop.meta);
  CHECK(rep.ok());
  CHECK(pop.truth.expected_pooled.rowwise().sum().isOnes(1e-12));
  // turnout in the low range of the configuration
  CHECK(pop.truth.expected_pooled.col(1).maxCoeff() < 0.12);
  CHECK(pop.truth.expected_pooled.col(1).minCoeff() > 0.005);
}

TEST_CASE("no-bias data have constant unit probabilities") {
  const SyntheticPopulation pop = generate(no_bias_config(3, 2, 50, 400.0, 4));
  for (const Eigen::MatrixXd& p : pop.truth.unit_pi) CHECK(test::max_abs(p, pop.truth.base_pi) < 1e-14);
  CHECK(test::max_abs(pop.truth.expected_pooled, pop.truth.base_pi) < 1e-12);
  double mean = 0.0;
  for (const UnitAggregate& u : pop.units) mean += static_cast<double>(u.n) / 50.0;
  CHECK(mean == doctest::Approx(400.0).epsilon(0.1));
}

TEST_CASE("pooled cell shares converge to the truth with many voters") {
  const SyntheticPopulation pop = generate(no_bias_config(2, 3, 400, 2000.0, 9));
  Eigen::MatrixXd pooled = Eigen::MatrixXd::Zero(2, 3);
  for (const IndividualTable& t : pop.tables) pooled += t.counts.cast<double>();
  pooled.array().colwise() /= pooled.rowwise().sum().array();
  CHECK(test::max_abs(pooled, pop.truth.expected_pooled) < 0.005);
}

TEST_CASE("two-station fixture scales") {
  const SyntheticPopulation base = table1_fixture();
  const SyntheticPopulation big = table1_fixture(60);
  CHECK(big.tables[0].counts == 3 * base.tables[0].counts);
  CHECK(base.units[0].n == 20);
  CHECK_THROWS_AS(table1_fixture(30), ValidationError);
}

TEST_CASE("invalid configurations are rejected") {
  GeneratorConfig cfg = no_bias_config(2, 2, 10, 100.0);
  cfg.base_pi(0, 0) = 0.9;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = no_bias_config(2, 2, 10, 100.0);
  cfg.num_seats = 11;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = no_bias_config(2, 2, 10, 100.0);
  cfg.bias.assign(1, Eigen::MatrixXd::Zero(2, 1));
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
  cfg = no_bias_config(2, 2, 10, 100.0);
  cfg.sigma_seat = -1.0;
  CHECK_THROWS_AS(validate_config(cfg), ValidationError);
}

TEST_CASE("marginal covariates sum row shares") {
  const SyntheticPopulation pop = table1_fixture();
  const std::vector<MarginalCovariate> specs{{"all", {0, 1}}, {"f", {0}}};
  const CovariateTable t = marginal_covariates(pop.units, specs);
  CHECK(t.values(0, 0) == doctest::Approx(1.0));
  CHECK(t.values(0, 1) == doctest::Approx(16.0 / 20.0));
  CovariateTable other;
  other.names = {"z"};
  other.unit_ids = {"2", "1"};
  other.values = test::vec({5, 7});
  const CovariateTable joined = join_covariates(t, other);
  CHECK(joined.names == std::vector<std::string>{"all", "f", "z"});
  CHECK(joined.values(0, 2) == 7);
}
