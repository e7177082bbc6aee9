#pragma once

#include <optional>

#include "ecoinf/brown_payne.hpp"
#include "ecoinf/goodman.hpp"
#include "ecoinf/king_ols.hpp"
#include "ecoinf/multilevel.hpp"
#include "json.hpp"

namespace ecoinf {

/// Estimated transition matrix plus method-specific diagnostics, serialized as
/// `{method, row_labels, col_labels, pi, se|null, diagnostics}` (docs/report.schema.json).
struct EstimateReport {
  std::string method;
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  Eigen::MatrixXd pi;
  std::optional<Eigen::MatrixXd> se;
  nlohmann::json diagnostics = nlohmann::json::object();
  bool converged = true;
};

/// Non-finite numbers are written as null.
nlohmann::json report_to_json(const EstimateReport& report);
EstimateReport report_from_json(const nlohmann::json& j);

/// Problems found when checking `j` against the report schema; empty when valid.
std::vector<std::string> validate_report_json(const nlohmann::json& j);

EstimateReport make_report(const GoodmanFit& fit, const DatasetMeta& meta);
EstimateReport make_report(const KingFit& fit, const DatasetMeta& meta, const std::vector<std::string>& covariates);
EstimateReport make_report(const BPFit& fit, const DatasetMeta& meta);
/// `pi` is the averaged probability matrix of the fit (groups x (other, outcome)).
EstimateReport make_report(const MLFit& fit, const TransitionMatrix& pi, const std::vector<std::string>& outcome_labels);

/// Writes pi (and se) as long-format CSV: `row,col,estimate,se`.
std::string report_to_csv(const EstimateReport& report);

}  // namespace ecoinf
