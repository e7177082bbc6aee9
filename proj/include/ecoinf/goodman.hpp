#pragma once

#include "ecoinf/core.hpp"

namespace ecoinf {

struct GoodmanOptions {
  bool weighted = false;  // weight units by n_u
  bool truncate = true;   // clip to [0,1] and renormalize rows for reporting
};

/// Ordinary ecological regression of each column share on the row shares.
struct GoodmanFit {
  Eigen::MatrixXd pi_raw;     // OLS values, may leave [0,1]
  Eigen::MatrixXd pi_hat;     // reported values (truncated when requested)
  Eigen::MatrixXd se;         // classical OLS standard errors of pi_raw
  Eigen::MatrixXd residuals;  // N x (C-1), pre-truncation
  std::vector<std::string> unit_ids;  // units that entered the regression
  std::vector<std::string> skipped;   // units with n == 0
  GoodmanOptions options;
  bool truncation_applied = false;
};

/// Design matrix [1, t_1 - t_R, ..., t_{R-1} - t_R] for stacked row shares.
Eigen::MatrixXd goodman_design(const Eigen::MatrixXd& t);

GoodmanFit fit_goodman(std::span<const UnitAggregate> units, const DatasetMeta& meta,
                       GoodmanOptions options = {});

/// v_uj - sum_i t_ui pi_raw_ij for the first C-1 columns, for every unit with n > 0.
Eigen::MatrixXd goodman_residuals(const GoodmanFit& fit, std::span<const UnitAggregate> units);

/// Clip to [0,1] and renormalize each row.
Eigen::MatrixXd truncate_rows(const Eigen::MatrixXd& pi);

}  // namespace ecoinf
