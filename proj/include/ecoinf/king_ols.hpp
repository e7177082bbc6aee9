#pragma once

#include <optional>

#include "ecoinf/link.hpp"
#include "ecoinf/optimize.hpp"

namespace ecoinf {

struct KingOptions {
  bool weighted = false;  // weight each unit's squared residuals by n_u
  std::optional<LinkParams> init;
  CovariateMask mask;  // empty: every covariate enters every row
  std::vector<std::string> covariate_names;
  MinimizeOptions minimize{};
};

/// Least squares on the accounting identity with logit-scale transition probabilities.
struct KingFit {
  LinkParams params;
  TransitionMatrix pi_hat;
  double objective = 0.0;
  double initial_objective = 0.0;
  bool converged = false;
  int iterations = 0;
  std::vector<double> objective_trace;
  std::vector<std::string> skipped;
};

/// Sum over units and the first C-1 columns of (v_uj - mu_uj(theta))^2.
double king_objective(const LinkLayout& layout, const Eigen::VectorXd& theta, const StackedProportions& data,
                      const Eigen::MatrixXd& z, bool weighted, Eigen::VectorXd* gradient = nullptr);

/// Analytic gradient of the least-squares objective, packed as in LinkLayout.
Eigen::VectorXd king_gradient(const LinkParams& theta, std::span<const UnitAggregate> units,
                              const Eigen::MatrixXd& z, bool weighted = false, const CovariateMask& mask = {});

/// Deterministic start: truncated Goodman estimates through the logit, zero slopes.
LinkParams goodman_start(std::span<const UnitAggregate> units, const DatasetMeta& meta, const LinkLayout& layout);

KingFit fit_king_ols(std::span<const UnitAggregate> units, const DatasetMeta& meta,
                     const Eigen::MatrixXd& z = {}, const KingOptions& options = {});

/// Mask enabling all covariates for all rows when `mask` is empty.
CovariateMask resolve_mask(const CovariateMask& mask, Index rows, Index num_covariates);

}  // namespace ecoinf
