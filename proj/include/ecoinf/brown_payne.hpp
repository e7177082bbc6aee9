#pragma once

#include <optional>

#include "ecoinf/link.hpp"

namespace ecoinf {

/// Overdispersion of the observed column shares of a unit.
///
/// Voters in the same unit are treated as pairwise correlated: `phi` is the
/// correlation between two voters of the same row category (Dirichlet
/// heterogeneity of that row's transition probabilities), `tau` the
/// correlation between voters of different row categories (a cluster effect
/// shared across rows). With w_u the probability that two distinct voters of
/// unit u share a row,
///
///   c_u = 1 + (n_u - 1) * (phi * w_u + tau * (1 - w_u)),
///   V_u = c_u / n_u * (diag(mu_u) - mu_u mu_u^T).
struct BPVarianceSpec {
  double phi = 0.0;
  double tau = 0.0;
};

/// Share of ordered voter pairs in the unit that belong to the same row: sum_i x_i (x_i - 1) / (n (n - 1)).
double same_row_pair_share(const UnitAggregate& unit);

/// Variance inflation c_u relative to the multinomial.
double inflation_factor(const BPVarianceSpec& variance, const UnitAggregate& unit);

struct UnitCovariance {
  Eigen::MatrixXd matrix;  // C x C
  double inflation = 1.0;
  bool jittered = false;
};

/// Mean column shares sum_i t_ui pi_uij(theta, z).
Eigen::VectorXd bp_mean(const LinkParams& theta, const UnitAggregate& unit, const Eigen::VectorXd& z = {});

UnitCovariance bp_covariance(const LinkParams& theta, const BPVarianceSpec& variance, const UnitAggregate& unit,
                             const Eigen::VectorXd& z = {});

struct BPOptions {
  CovariateMask mask;  // empty: all covariates in all rows
  std::vector<std::string> covariate_names;
  std::optional<double> fix_phi;
  std::optional<double> fix_tau;
  std::optional<LinkParams> init;
  int max_iterations = 500;
  double relative_tolerance = 1e-10;
  double gradient_tolerance = 1e-8;
};

struct BPFit {
  LinkParams params;
  BPVarianceSpec variance;
  TransitionMatrix pi_hat;
  Eigen::MatrixXd pi_se;        // delta-method SEs of pi_hat from the sandwich covariance
  Eigen::VectorXd param_estimates;  // packed as in LinkLayout
  Eigen::VectorXd param_se;     // sandwich SEs
  Eigen::MatrixXd param_cov;
  std::vector<std::string> param_names;
  double quasi_loglik = 0.0;
  std::vector<double> trace;    // quasi-log-likelihood after each accepted iteration
  bool converged = false;
  int iterations = 0;
  bool phi_at_boundary = false;
  bool tau_at_boundary = false;
  std::vector<std::string> skipped;
};

/// Gaussian quasi-log-likelihood (constants dropped) and, optionally, its
/// gradient with respect to the packed link parameters.
double bp_quasi_loglik(const LinkLayout& layout, const Eigen::VectorXd& theta, const BPVarianceSpec& variance,
                       const StackedProportions& data, const Eigen::MatrixXd& z, Eigen::VectorXd* gradient = nullptr);

BPFit fit_brown_payne(std::span<const UnitAggregate> units, const DatasetMeta& meta,
                      const Eigen::MatrixXd& z = {}, const BPOptions& options = {});

/// Expected joint counts x_ui * pi_uij(theta_hat, z_u) for every unit.
std::vector<Eigen::MatrixXd> bp_predict_cells(const BPFit& fit, std::span<const UnitAggregate> units,
                                              const Eigen::MatrixXd& z = {});

}  // namespace ecoinf
