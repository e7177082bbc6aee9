#include "ecoinf/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "ecoinf/glm.hpp"

namespace ecoinf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void check_tables(std::span<const IndividualTable> tables) {
  if (tables.empty()) throw ValidationError("no tables");
  for (const IndividualTable& t : tables) {
    if (t.counts.rows() != tables.front().counts.rows() || t.counts.cols() != tables.front().counts.cols()) {
      throw ValidationError("table '" + t.id + "' has different dimensions");
    }
  }
}

}  // namespace

Eigen::MatrixXd within_unit_proportions(const IndividualTable& table) {
  Eigen::MatrixXd p = table.counts.cast<double>();
  for (Index i = 0; i < p.rows(); ++i) {
    const double total = p.row(i).sum();
    if (total > 0.0) {
      p.row(i) /= total;
    } else {
      p.row(i).setConstant(kNaN);
    }
  }
  return p;
}

BiasTestReport bias_condition_test(std::span<const IndividualTable> tables, const CovariateTable* extra,
                                   double level) {
  check_tables(tables);
  const Index R = tables.front().counts.rows();
  const Index C = tables.front().counts.cols();
  if (C < 2) throw ValidationError("bias test needs at least two columns");
  const Index q = extra != nullptr ? extra->size() : 0;

  std::vector<std::string> ids;
  for (const IndividualTable& t : tables) ids.push_back(t.id);
  const Eigen::MatrixXd z = q > 0 ? extra->aligned(ids) : Eigen::MatrixXd(static_cast<Index>(tables.size()), 0);

  std::vector<std::string> names{"(Intercept)"};
  for (Index i = 0; i + 1 < R; ++i) names.push_back("t_" + std::to_string(i + 1));
  for (Index l = 0; l < q; ++l) names.push_back(extra->names[static_cast<std::size_t>(l)]);
  const Index p = static_cast<Index>(names.size());

  BiasTestReport report;
  report.level = level;
  Index significant = 0;
  for (Index i = 0; i < R; ++i) {
    std::vector<Index> used;
    for (std::size_t u = 0; u < tables.size(); ++u) {
      if (tables[u].counts.row(i).sum() > 0) used.push_back(static_cast<Index>(u));
    }
    const Index m = static_cast<Index>(used.size());
    Eigen::MatrixXd X(m, p);
    Eigen::VectorXd trials(m);
    for (Index r = 0; r < m; ++r) {
      const IndividualTable& t = tables[static_cast<std::size_t>(used[static_cast<std::size_t>(r)])];
      const Eigen::VectorXd rows = t.counts.rowwise().sum().cast<double>();
      X(r, 0) = 1.0;
      X.row(r).segment(1, R - 1) = (rows.head(R - 1) / rows.sum()).transpose();
      X.row(r).tail(q) = z.row(used[static_cast<std::size_t>(r)]);
      trials(r) = rows(i);
    }
    for (Index j = 1; j < C; ++j) {
      Eigen::VectorXd successes(m);
      for (Index r = 0; r < m; ++r) {
        successes(r) = static_cast<double>(tables[static_cast<std::size_t>(used[static_cast<std::size_t>(r)])].counts(i, j));
      }
      BiasCellTest cell;
      cell.row = i;
      cell.col = j;
      cell.names = names;
      if (m <= p) {
        throw EstimationError("row " + std::to_string(i + 1) + ": " + std::to_string(m) + " units for " +
                              std::to_string(p) + " coefficients");
      }
      const LogisticFit fit = fit_binomial_logistic(X, trials, successes);
      cell.beta = fit.beta;
      cell.se = fit.se;
      cell.separated = fit.separated;
      cell.p_values.resize(p);
      for (Index c = 0; c < p; ++c) {
        cell.p_values(c) = std::isinf(fit.se(c)) ? 1.0 : normal_two_sided_p(fit.beta(c) / fit.se(c));
        if (c == 0) continue;
        ++report.num_coefficients;
        if (cell.p_values(c) < 0.05) ++significant;
        if (cell.p_values(c) < level) report.violated = true;
      }
      report.cells.push_back(std::move(cell));
    }
  }
  report.fraction_significant_5pct =
      report.num_coefficients > 0 ? static_cast<double>(significant) / static_cast<double>(report.num_coefficients)
                                  : 0.0;
  return report;
}

std::vector<QuartileRow> quartile_summary(std::span<const IndividualTable> tables, const QuartileGrouping& grouping,
                                          const CovariateTable* covariates, const QuartileOptions& options) {
  check_tables(tables);
  if (tables.size() < 4) throw ValidationError("quartiles need at least 4 units");
  const Index R = tables.front().counts.rows();
  const Index C = tables.front().counts.cols();
  if (options.outcome_column < 0 || options.outcome_column >= C) throw ValidationError("outcome column out of range");

  const Index N = static_cast<Index>(tables.size());
  Eigen::MatrixXd shares(N, R);
  Eigen::VectorXd size(N);
  for (Index u = 0; u < N; ++u) {
    const Eigen::VectorXd rows = tables[static_cast<std::size_t>(u)].counts.rowwise().sum().cast<double>();
    size(u) = rows.sum();
    shares.row(u) = size(u) > 0.0 ? Eigen::RowVectorXd(rows.transpose() / size(u))
                                  : Eigen::RowVectorXd::Constant(R, kNaN);
  }
  Eigen::VectorXd covariate;
  if (const auto* g = std::get_if<CovariateGrouping>(&grouping)) {
    if (covariates == nullptr) throw ValidationError("covariate grouping needs a covariate table");
    const std::vector<std::string> keep{g->name};
    std::vector<std::string> ids;
    for (const IndividualTable& t : tables) ids.push_back(t.id);
    covariate = covariates->select(keep).aligned(ids).col(0);
  }
  if (const auto* g = std::get_if<RowMarginal>(&grouping); g != nullptr && (g->row < 0 || g->row >= R)) {
    throw ValidationError("grouping row out of range");
  }

  std::vector<QuartileRow> out;
  for (Index i = 0; i < R; ++i) {
    struct Entry {
      double key;
      const std::string* id;
      double proportion;
      double weight;
    };
    std::vector<Entry> entries;
    for (Index u = 0; u < N; ++u) {
      const IndividualTable& t = tables[static_cast<std::size_t>(u)];
      const double x = static_cast<double>(t.counts.row(i).sum());
      if (x <= 0.0) continue;
      double key = 0.0;
      if (std::holds_alternative<OwnMarginal>(grouping)) {
        key = shares(u, i);
      } else if (const auto* g = std::get_if<RowMarginal>(&grouping)) {
        key = shares(u, g->row);
      } else {
        key = covariate(u);
      }
      entries.push_back({key, &t.id, static_cast<double>(t.counts(i, options.outcome_column)) / x, size(u)});
    }
    if (entries.size() < 4) continue;
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
      return a.key != b.key ? a.key < b.key : *a.id < *b.id;
    });
    const std::size_t n = entries.size();
    const double total_weight =
        std::accumulate(entries.begin(), entries.end(), 0.0, [](double s, const Entry& e) { return s + e.weight; });
    std::vector<int> quartile(n);
    double running = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
      if (options.weight_by_size) {
        const double mid = running + 0.5 * entries[k].weight;
        quartile[k] = std::min(3, static_cast<int>(4.0 * mid / total_weight));
        running += entries[k].weight;
      } else {
        quartile[k] = static_cast<int>(4 * k / n);
      }
    }
    for (int qt = 0; qt < 4; ++qt) {
      QuartileRow row;
      row.row = i;
      row.quartile = qt + 1;
      double key_sum = 0.0;
      double prop_sum = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        if (quartile[k] != qt) continue;
        key_sum += entries[k].key;
        prop_sum += entries[k].proportion;
        ++row.units;
      }
      row.mean_grouping = row.units > 0 ? key_sum / static_cast<double>(row.units) : kNaN;
      row.mean_proportion = row.units > 0 ? prop_sum / static_cast<double>(row.units) : kNaN;
      out.push_back(row);
    }
  }
  return out;
}

void write_quartiles_csv(std::ostream& out, std::span<const QuartileRow> rows,
                         const std::vector<std::string>& row_labels) {
  out << "row,quartile,mean_grouping,mean_proportion,units\n";
  const auto old = out.precision(17);
  for (const QuartileRow& r : rows) {
    const std::string label =
        r.row < static_cast<Index>(row_labels.size()) ? row_labels[static_cast<std::size_t>(r.row)]
                                                      : std::to_string(r.row + 1);
    out << label << ',' << r.quartile << ',' << r.mean_grouping << ',' << r.mean_proportion << ',' << r.units << '\n';
  }
  out.precision(old);
}

namespace {

double centered_sd(const Eigen::VectorXd& e) {
  if (e.size() < 2) return 0.0;
  const double mean = e.mean();
  return std::sqrt((e.array() - mean).square().sum() / static_cast<double>(e.size() - 1));
}

}  // namespace

ErrorSD prediction_error_sd(const UnitPredictions& predicted, const UnitPredictions& observed) {
  const Index N = static_cast<Index>(predicted.unit_ids.size());
  if (static_cast<Index>(observed.unit_ids.size()) != N || predicted.totals.size() != N ||
      observed.totals.size() != N || predicted.cells.rows() != N || observed.cells.rows() != N ||
      predicted.cells.cols() != observed.cells.cols()) {
    throw ValidationError("predictions and observations cover different units or cells");
  }
  std::map<std::string, Index> where;
  for (Index u = 0; u < N; ++u) where[observed.unit_ids[static_cast<std::size_t>(u)]] = u;
  Eigen::VectorXd total_err(N);
  Eigen::MatrixXd cell_err(N, predicted.cells.cols());
  for (Index u = 0; u < N; ++u) {
    const auto it = where.find(predicted.unit_ids[static_cast<std::size_t>(u)]);
    if (it == where.end()) {
      throw ValidationError("unit '" + predicted.unit_ids[static_cast<std::size_t>(u)] + "' has no observation");
    }
    total_err(u) = predicted.totals(u) - observed.totals(it->second);
    cell_err.row(u) = predicted.cells.row(u) - observed.cells.row(it->second);
  }
  ErrorSD sd;
  sd.overall = centered_sd(total_err);
  sd.per_cell.resize(cell_err.cols());
  for (Index g = 0; g < cell_err.cols(); ++g) sd.per_cell(g) = centered_sd(cell_err.col(g));
  return sd;
}

ComparisonReport compare_estimates(std::span<const NamedEstimate> estimates, const TransitionMatrix& truth,
                                   std::span<const Eigen::MatrixXd> unit_truth) {
  const Index R = truth.rows();
  const Index C = truth.cols();
  ComparisonReport report;
  report.grid.resize(R * C, 1 + static_cast<Index>(estimates.size()));
  report.grid_columns.push_back("truth");
  for (Index i = 0; i < R; ++i) {
    for (Index j = 0; j < C; ++j) report.grid(i * C + j, 0) = truth(i, j);
  }
  for (const Eigen::MatrixXd& m : unit_truth) {
    if (m.rows() != R || m.cols() != C) throw ValidationError("unit truth has different dimensions");
  }
  Index col = 1;
  for (const auto& [name, est] : estimates) {
    if (est.rows() != R || est.cols() != C) {
      throw ValidationError("estimate '" + name + "' is " + std::to_string(est.rows()) + "x" +
                            std::to_string(est.cols()) + ", truth is " + std::to_string(R) + "x" + std::to_string(C));
    }
    const Eigen::MatrixXd diff = (est.matrix() - truth.matrix()).cwiseAbs();
    report.errors.push_back({name, diff.maxCoeff(), diff.mean()});
    report.grid_columns.push_back(name);
    for (Index i = 0; i < R; ++i) {
      for (Index j = 0; j < C; ++j) report.grid(i * C + j, col) = est(i, j);
    }
    ++col;

    if (unit_truth.empty()) continue;
    for (Index a = 0; a < R; ++a) {
      for (Index b = a + 1; b < R; ++b) {
        for (Index j = 0; j < C; ++j) {
          const double d = est(a, j) - est(b, j);
          if (d == 0.0) continue;
          const bool reversed = std::all_of(unit_truth.begin(), unit_truth.end(), [&](const Eigen::MatrixXd& m) {
            const double t = m(a, j) - m(b, j);
            return std::isfinite(t) && t * d < 0.0;
          });
          if (reversed) report.reversals.push_back({name, a, b, j, d});
        }
      }
    }
  }
  return report;
}

}  // namespace ecoinf
