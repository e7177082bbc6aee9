#pragma once

#include <iosfwd>
#include <variant>

#include "ecoinf/core.hpp"

namespace ecoinf {

/// Logistic regression of one cell's proportions p_uij on the unit's marginal shares.
struct BiasCellTest {
  Index row = 0;
  Index col = 0;
  std::vector<std::string> names;  // "(Intercept)", "t_1", ..., extras
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::VectorXd p_values;
  bool separated = false;
};

struct BiasTestReport {
  std::vector<BiasCellTest> cells;
  bool violated = false;  // some non-intercept coefficient significant at `level`
  double level = 0.01;
  /// Share of non-intercept coefficients with p < 0.05.
  double fraction_significant_5pct = 0.0;
  Index num_coefficients = 0;
};

/// Tests whether within-row proportions depend on the marginal row shares.
/// Column 0 is the reference outcome; every other column is tested in every
/// row against [1, t_1, ..., t_{R-1}] plus the optional extra covariates.
BiasTestReport bias_condition_test(std::span<const IndividualTable> tables, const CovariateTable* extra = nullptr,
                                   double level = 0.01);

/// Group units by the row's own marginal share, a fixed row's share, or a covariate.
struct OwnMarginal {};
struct RowMarginal {
  Index row = 0;
};
struct CovariateGrouping {
  std::string name;
};
using QuartileGrouping = std::variant<OwnMarginal, RowMarginal, CovariateGrouping>;

struct QuartileRow {
  Index row = 0;
  int quartile = 0;  // 1..4
  double mean_grouping = 0.0;
  double mean_proportion = 0.0;
  Index units = 0;
};

struct QuartileOptions {
  Index outcome_column = 1;
  /// Split by cumulative voter count instead of equal unit counts.
  bool weight_by_size = false;
};

/// Per row, units are sorted by the grouping value (ties by unit id) and split
/// into quartiles; within each quartile the mean grouping value and the mean
/// proportion p_u,row,outcome are reported. Units with no voters in the row are left out.
std::vector<QuartileRow> quartile_summary(std::span<const IndividualTable> tables, const QuartileGrouping& grouping,
                                          const CovariateTable* covariates = nullptr,
                                          const QuartileOptions& options = {});

void write_quartiles_csv(std::ostream& out, std::span<const QuartileRow> rows,
                         const std::vector<std::string>& row_labels);

/// Per-unit predictions or observations of one outcome: totals and cells.
struct UnitPredictions {
  std::vector<std::string> unit_ids;
  Eigen::VectorXd totals;  // N
  Eigen::MatrixXd cells;   // N x G
};

struct ErrorSD {
  double overall = 0.0;
  Eigen::VectorXd per_cell;
};

/// Centered SD of predicted - observed over units; observed may list units in any order.
ErrorSD prediction_error_sd(const UnitPredictions& predicted, const UnitPredictions& observed);

struct ErrorSDReport {
  std::vector<std::string> methods;
  std::vector<ErrorSD> sds;
};

struct MethodError {
  std::string method;
  double max_abs = 0.0;
  double mean_abs = 0.0;
};

/// Ecological ordering of two rows in one column opposite to the ordering
/// inside every unit.
struct SignReversal {
  std::string method;
  Index row_a = 0;
  Index row_b = 0;
  Index col = 0;
  double estimate_diff = 0.0;  // estimate(row_a) - estimate(row_b)
};

struct ComparisonReport {
  std::vector<MethodError> errors;
  std::vector<SignReversal> reversals;
  Eigen::MatrixXd grid;  // rows (i, j); columns truth, then each method
  std::vector<std::string> grid_columns;
};

using NamedEstimate = std::pair<std::string, TransitionMatrix>;

/// Absolute errors of every estimate against `truth`. When `unit_truth` is
/// given, every pair of rows whose ordering in some column is reversed
/// relative to all units is listed.
ComparisonReport compare_estimates(std::span<const NamedEstimate> estimates, const TransitionMatrix& truth,
                                   std::span<const Eigen::MatrixXd> unit_truth = {});

/// Within-unit proportions n_uij / x_ui; rows with no voters are NaN.
Eigen::MatrixXd within_unit_proportions(const IndividualTable& table);

}  // namespace ecoinf
