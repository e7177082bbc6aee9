#include "ecoinf/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "ecoinf/io.hpp"

namespace ecoinf {

namespace {

nlohmann::json number_or_null(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

nlohmann::json vector_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Index k = 0; k < v.size(); ++k) out.push_back(number_or_null(v(k)));
  return out;
}

bool is_matrix(const nlohmann::json& j, bool allow_null, std::size_t& rows, std::size_t& cols) {
  if (!j.is_array() || j.empty()) return false;
  rows = j.size();
  cols = j.front().is_array() ? j.front().size() : 0;
  if (cols == 0) return false;
  for (const auto& row : j) {
    if (!row.is_array() || row.size() != cols) return false;
    for (const auto& v : row) {
      if (!(v.is_number() || (allow_null && v.is_null()))) return false;
    }
  }
  return true;
}

}  // namespace

nlohmann::json report_to_json(const EstimateReport& r) {
  nlohmann::json j;
  j["method"] = r.method;
  j["row_labels"] = r.row_labels;
  j["col_labels"] = r.col_labels;
  // rounding can leave probabilities a few ulps outside [0, 1]
  j["pi"] = matrix_to_json(r.pi.cwiseMax(0.0).cwiseMin(1.0));
  j["se"] = r.se ? matrix_to_json(*r.se) : nlohmann::json(nullptr);
  j["converged"] = r.converged;
  j["diagnostics"] = r.diagnostics;
  return j;
}

EstimateReport report_from_json(const nlohmann::json& j) {
  const std::vector<std::string> problems = validate_report_json(j);
  if (!problems.empty()) throw ValidationError("invalid report: " + problems.front());
  EstimateReport r;
  r.method = j.at("method").get<std::string>();
  r.row_labels = j.at("row_labels").get<std::vector<std::string>>();
  r.col_labels = j.at("col_labels").get<std::vector<std::string>>();
  r.pi = matrix_from_json(j.at("pi"));
  if (!j.at("se").is_null()) r.se = matrix_from_json(j.at("se"));
  r.converged = j.value("converged", true);
  r.diagnostics = j.at("diagnostics");
  return r;
}

std::vector<std::string> validate_report_json(const nlohmann::json& j) {
  std::vector<std::string> problems;
  if (!j.is_object()) return {"report must be an object"};
  for (const char* key : {"method", "row_labels", "col_labels", "pi", "se", "diagnostics"}) {
    if (!j.contains(key)) problems.push_back(std::string("missing '") + key + "'");
  }
  if (!problems.empty()) return problems;
  static const std::vector<std::string> methods{"goodman", "king-ols", "brown-payne", "multilevel", "raw"};
  if (!j["method"].is_string() ||
      std::find(methods.begin(), methods.end(), j["method"].get<std::string>()) == methods.end()) {
    problems.push_back("'method' must be one of goodman, king-ols, brown-payne, multilevel, raw");
  }
  for (const char* key : {"row_labels", "col_labels"}) {
    const auto& labels = j[key];
    const bool ok = labels.is_array() && std::all_of(labels.begin(), labels.end(),
                                                     [](const nlohmann::json& v) { return v.is_string(); });
    if (!ok) problems.push_back(std::string("'") + key + "' must be an array of strings");
  }
  std::size_t rows = 0;
  std::size_t cols = 0;
  if (!is_matrix(j["pi"], false, rows, cols)) {
    problems.push_back("'pi' must be a nonempty rectangular array of numbers");
  } else {
    for (const auto& row : j["pi"]) {
      double sum = 0.0;
      for (const auto& v : row) {
        const double x = v.get<double>();
        if (x < -1e-12 || x > 1.0 + 1e-12) problems.push_back("'pi' entries must lie in [0, 1]");
        sum += x;
      }
      if (std::abs(sum - 1.0) > 1e-6) problems.push_back("'pi' rows must sum to 1");
    }
    if (j["row_labels"].is_array() && j["row_labels"].size() != rows) {
      problems.push_back("'row_labels' length differs from the rows of 'pi'");
    }
    if (j["col_labels"].is_array() && j["col_labels"].size() != cols) {
      problems.push_back("'col_labels' length differs from the columns of 'pi'");
    }
  }
  if (!j["se"].is_null()) {
    std::size_t sr = 0;
    std::size_t sc = 0;
    if (!is_matrix(j["se"], true, sr, sc) || sr != rows || sc != cols) {
      problems.push_back("'se' must be null or an array shaped like 'pi' (numbers or null)");
    }
  }
  if (j.contains("converged") && !j["converged"].is_boolean()) problems.push_back("'converged' must be a boolean");
  if (!j["diagnostics"].is_object()) problems.push_back("'diagnostics' must be an object");
  return problems;
}

EstimateReport make_report(const GoodmanFit& fit, const DatasetMeta& meta) {
  EstimateReport r;
  r.method = "goodman";
  r.row_labels = meta.row_labels;
  r.col_labels = meta.col_labels;
  r.pi = fit.pi_hat;
  r.se = fit.se;
  r.diagnostics["pi_raw"] = matrix_to_json(fit.pi_raw);
  r.diagnostics["weighted"] = fit.options.weighted;
  r.diagnostics["truncated"] = fit.options.truncate;
  r.diagnostics["truncation_applied"] = fit.truncation_applied;
  r.diagnostics["units"] = fit.unit_ids.size();
  r.diagnostics["skipped_units"] = fit.skipped;
  return r;
}

EstimateReport make_report(const KingFit& fit, const DatasetMeta& meta, const std::vector<std::string>& covariates) {
  EstimateReport r;
  r.method = "king-ols";
  r.row_labels = meta.row_labels;
  r.col_labels = meta.col_labels;
  r.pi = fit.pi_hat.matrix();
  r.converged = fit.converged;
  r.diagnostics["objective"] = fit.objective;
  r.diagnostics["initial_objective"] = fit.initial_objective;
  r.diagnostics["iterations"] = fit.iterations;
  r.diagnostics["gamma"] = matrix_to_json(fit.params.gamma);
  nlohmann::json slopes = nlohmann::json::object();
  for (std::size_t l = 0; l < fit.params.delta.size(); ++l) {
    const std::string name = l < covariates.size() ? covariates[l] : "z_" + std::to_string(l + 1);
    slopes[name] = matrix_to_json(fit.params.delta[l]);
  }
  r.diagnostics["slopes"] = slopes;
  r.diagnostics["skipped_units"] = fit.skipped;
  return r;
}

EstimateReport make_report(const BPFit& fit, const DatasetMeta& meta) {
  EstimateReport r;
  r.method = "brown-payne";
  r.row_labels = meta.row_labels;
  r.col_labels = meta.col_labels;
  r.pi = fit.pi_hat.matrix();
  r.se = fit.pi_se;
  r.converged = fit.converged;
  r.diagnostics["phi"] = fit.variance.phi;
  r.diagnostics["tau"] = fit.variance.tau;
  r.diagnostics["phi_at_boundary"] = fit.phi_at_boundary;
  r.diagnostics["tau_at_boundary"] = fit.tau_at_boundary;
  r.diagnostics["quasi_loglik"] = fit.quasi_loglik;
  r.diagnostics["iterations"] = fit.iterations;
  nlohmann::json params = nlohmann::json::array();
  for (std::size_t k = 0; k < fit.param_names.size(); ++k) {
    const auto idx = static_cast<Index>(k);
    params.push_back({{"name", fit.param_names[k]},
                      {"estimate", number_or_null(fit.param_estimates(idx))},
                      {"se", number_or_null(fit.param_se(idx))}});
  }
  r.diagnostics["parameters"] = params;
  r.diagnostics["skipped_units"] = fit.skipped;
  return r;
}

EstimateReport make_report(const MLFit& fit, const TransitionMatrix& pi, const std::vector<std::string>& outcome_labels) {
  EstimateReport r;
  r.method = "multilevel";
  for (const Index g : fit.design.groups) {
    r.row_labels.push_back(g < static_cast<Index>(fit.design.group_labels.size())
                               ? fit.design.group_labels[static_cast<std::size_t>(g)]
                               : "g" + std::to_string(g + 1));
  }
  r.col_labels = outcome_labels;
  r.pi = pi.matrix();
  r.converged = fit.converged;
  nlohmann::json beta = nlohmann::json::array();
  for (std::size_t k = 0; k < fit.coef_names.size(); ++k) {
    const auto idx = static_cast<Index>(k);
    beta.push_back({{"name", fit.coef_names[k]},
                    {"estimate", number_or_null(fit.beta(idx))},
                    {"se", number_or_null(fit.beta_se(idx))},
                    {"p_value", number_or_null(fit.p_values(idx))},
                    {"significance", fit.significance[k]}});
  }
  r.diagnostics["beta"] = beta;
  r.diagnostics["sigma"] = {{"station", vector_json(fit.sigma_station)},
                            {"seat", vector_json(fit.sigma_seat)},
                            {"station_at_boundary", fit.sigma_station_at_boundary},
                            {"seat_at_boundary", fit.sigma_seat_at_boundary}};
  r.diagnostics["loglik"] = fit.loglik;
  r.diagnostics["levels"] = fit.levels;
  r.diagnostics["quadrature_nodes"] = fit.quadrature_nodes;
  r.diagnostics["iterations"] = fit.iterations;
  r.diagnostics["significance_legend"] = {{"•", "p < 0.001"}, {"∗", "p < 0.01"}, {"⋆", "p < 0.05"}, {"∘", "n.s."}};
  return r;
}

std::string report_to_csv(const EstimateReport& r) {
  std::ostringstream out;
  out << "row,col,estimate,se\n";
  char buf[64];
  for (Index i = 0; i < r.pi.rows(); ++i) {
    for (Index j = 0; j < r.pi.cols(); ++j) {
      out << r.row_labels[static_cast<std::size_t>(i)] << ',' << r.col_labels[static_cast<std::size_t>(j)] << ',';
      std::snprintf(buf, sizeof buf, "%.17g", r.pi(i, j));
      out << buf << ',';
      if (r.se && std::isfinite((*r.se)(i, j))) {
        std::snprintf(buf, sizeof buf, "%.17g", (*r.se)(i, j));
        out << buf;
      }
      out << '\n';
    }
  }
  return out.str();
}

}  // namespace ecoinf
