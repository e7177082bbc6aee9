#pragma once

#include <cstdint>

#include "ecoinf/core.hpp"

namespace ecoinf {

/// Unit-level covariate drawn from a Beta law with the given mean and SD.
struct CovariateLaw {
  std::string name;
  double mean = 0.5;
  double sd = 0.1;
  Eigen::MatrixXd slopes;  // R x (C-1), on (z - mean)
};

/// Generator of R x C voter tables with known transition probabilities.
///
/// Cell logits relative to the last column are
///   log(pi0_ij / pi0_iC) + sum_k bias[k](i, j) * (t_uk - tbar_k)
///                        + sum_l slopes_l(i, j) * (z_ul - mean_l) + a_s + b_u,
/// where t_u are the unit's observed row shares and tbar the Dirichlet mean.
struct GeneratorConfig {
  Index num_units = 100;
  Index num_seats = 10;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Eigen::MatrixXd base_pi;          // R x C, rows sum to 1
  Eigen::VectorXd concentration;    // Dirichlet law of the row shares
  double size_mean = 950.0;
  double size_sd = 250.0;
  std::vector<Eigen::MatrixXd> bias;  // empty, or R matrices of size R x (C-1): bias[k] acts on t_k
  std::vector<CovariateLaw> covariates;
  double sigma_station = 0.0;
  double sigma_seat = 0.0;
  bool per_group_effects = false;  // independent random intercepts for every row
  std::uint64_t seed = 1;

  Index rows() const { return base_pi.rows(); }
  Index cols() const { return base_pi.cols(); }
};

/// Throws ValidationError describing the first problem found.
void validate_config(const GeneratorConfig& config);

struct GeneratorTruth {
  Eigen::MatrixXd base_pi;
  std::vector<Eigen::MatrixXd> unit_pi;  // per-unit cell probabilities
  Eigen::MatrixXd expected_pooled;       // sum_u x_ui pi_uij / sum_u x_ui
  std::vector<Eigen::MatrixXd> bias;
  double sigma_station = 0.0;
  double sigma_seat = 0.0;
};

struct SyntheticPopulation {
  DatasetMeta meta;
  std::vector<UnitAggregate> units;
  std::vector<IndividualTable> tables;
  CovariateTable covariates;
  GeneratorTruth truth;
};

/// Deterministic given config.seed; every unit and seat has its own random stream.
SyntheticPopulation generate(const GeneratorConfig& config);

/// The two-station ecological fallacy example (rows F, M; columns no, yes)
/// with counts multiplied by scale / 20.
SyntheticPopulation table1_fixture(int scale = 20);

/// 593 stations in 31 seats, 12 sex-by-age rows, turnout between 1.5% and 7%,
/// participation rising with the shares of 45-75 year olds.
GeneratorConfig palermo_like_config();

/// Configuration without bias, covariates or random effects.
GeneratorConfig no_bias_config(Index rows, Index cols, Index units, double size_mean, std::uint64_t seed = 1);

/// Covariates equal to sums of marginal row shares, e.g. P(45-65) = t_M45-65 + t_F45-65.
struct MarginalCovariate {
  std::string name;
  std::vector<Index> rows;
};
CovariateTable marginal_covariates(std::span<const UnitAggregate> units, std::span<const MarginalCovariate> specs);

/// Concatenates the columns of two tables covering the same units.
CovariateTable join_covariates(const CovariateTable& a, const CovariateTable& b);

}  // namespace ecoinf
