#include "ecoinf/core.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <unordered_map>

namespace ecoinf {

DatasetMeta make_meta(Index rows, Index cols) {
  DatasetMeta meta;
  for (Index i = 0; i < rows; ++i) meta.row_labels.push_back("x_" + std::to_string(i + 1));
  for (Index j = 0; j < cols; ++j) meta.col_labels.push_back("y_" + std::to_string(j + 1));
  return meta;
}

UnitAggregate make_unit(std::string id, CountVector x, CountVector y) {
  if ((x.array() < 0).any() || (y.array() < 0).any()) {
    throw ValidationError("unit '" + id + "' has negative counts");
  }
  const Count sx = x.sum();
  const Count sy = y.sum();
  if (sx != sy) {
    throw ValidationError("unit '" + id + "': row total " + std::to_string(sx) +
                          " differs from column total " + std::to_string(sy));
  }
  return UnitAggregate{std::move(id), std::move(x), std::move(y), sx};
}

UnitAggregate aggregate(const IndividualTable& table) {
  if ((table.counts.array() < 0).any()) {
    throw ValidationError("unit '" + table.id + "' has negative cell counts");
  }
  CountVector x = table.counts.rowwise().sum();
  CountVector y = table.counts.colwise().sum().transpose();
  return make_unit(table.id, std::move(x), std::move(y));
}

TransitionMatrix::TransitionMatrix(Eigen::MatrixXd pi, double tol) : pi_(std::move(pi)) {
  for (Index i = 0; i < pi_.rows(); ++i) {
    for (Index j = 0; j < pi_.cols(); ++j) {
      const double p = pi_(i, j);
      if (!std::isfinite(p) || p < -tol || p > 1.0 + tol) {
        throw ValidationError("transition matrix entry (" + std::to_string(i) + "," +
                              std::to_string(j) + ") outside [0,1]");
      }
    }
    if (std::abs(pi_.row(i).sum() - 1.0) > tol) {
      throw ValidationError("transition matrix row " + std::to_string(i) + " does not sum to 1");
    }
  }
}

std::optional<Index> CovariateTable::find(const std::string& unit_id) const {
  auto it = std::find(unit_ids.begin(), unit_ids.end(), unit_id);
  if (it == unit_ids.end()) return std::nullopt;
  return static_cast<Index>(it - unit_ids.begin());
}

Eigen::MatrixXd CovariateTable::aligned(std::span<const std::string> ids) const {
  std::unordered_map<std::string, Index> lookup;
  for (std::size_t k = 0; k < unit_ids.size(); ++k) lookup.emplace(unit_ids[k], static_cast<Index>(k));
  Eigen::MatrixXd out(static_cast<Index>(ids.size()), size());
  for (std::size_t u = 0; u < ids.size(); ++u) {
    auto it = lookup.find(ids[u]);
    if (it == lookup.end()) throw ValidationError("no covariates for unit '" + ids[u] + "'");
    out.row(static_cast<Index>(u)) = values.row(it->second);
  }
  if (!out.allFinite()) throw ValidationError("covariates contain non-finite values");
  return out;
}

Eigen::MatrixXd CovariateTable::aligned(std::span<const UnitAggregate> units) const {
  std::vector<std::string> ids;
  ids.reserve(units.size());
  for (const auto& u : units) ids.push_back(u.id);
  return aligned(ids);
}

CovariateTable CovariateTable::select(std::span<const std::string> keep) const {
  CovariateTable out;
  out.unit_ids = unit_ids;
  out.values.resize(values.rows(), static_cast<Index>(keep.size()));
  for (std::size_t k = 0; k < keep.size(); ++k) {
    auto it = std::find(names.begin(), names.end(), keep[k]);
    if (it == names.end()) throw ValidationError("unknown covariate '" + keep[k] + "'");
    out.values.col(static_cast<Index>(k)) = values.col(it - names.begin());
    out.names.push_back(keep[k]);
  }
  return out;
}

std::string to_string(ViolationKind kind) {
  switch (kind) {
    case ViolationKind::dimension: return "dimension";
    case ViolationKind::marginal_mismatch: return "marginal_mismatch";
    case ViolationKind::unknown_seat: return "unknown_seat";
    case ViolationKind::negative_count: return "negative_count";
    case ViolationKind::missing_unit: return "missing_unit";
    case ViolationKind::duplicate_unit: return "duplicate_unit";
  }
  return "unknown";
}

ValidationReport validate_dataset(std::span<const UnitAggregate> units,
                                  const std::vector<IndividualTable>* tables,
                                  const DatasetMeta& meta) {
  ValidationReport report;
  auto violate = [&](ViolationKind k, const std::string& unit, std::string detail) {
    report.violations.push_back({k, unit, std::move(detail)});
  };
  const Index R = meta.rows();
  const Index C = meta.cols();

  std::unordered_map<std::string, const UnitAggregate*> by_id;
  for (const auto& u : units) {
    if (!by_id.emplace(u.id, &u).second) violate(ViolationKind::duplicate_unit, u.id, "unit listed twice");
    if (u.x.size() != R || u.y.size() != C) {
      violate(ViolationKind::dimension, u.id,
              "unit has " + std::to_string(u.x.size()) + "x" + std::to_string(u.y.size()) +
                  " margins, dataset is " + std::to_string(R) + "x" + std::to_string(C));
      continue;
    }
    if ((u.x.array() < 0).any() || (u.y.array() < 0).any()) {
      violate(ViolationKind::negative_count, u.id, "negative marginal count");
    }
    if (u.x.sum() != u.n || u.y.sum() != u.n) {
      violate(ViolationKind::marginal_mismatch, u.id, "row and column totals disagree with n");
    }
    if (!meta.seat_of_unit.contains(u.id)) violate(ViolationKind::unknown_seat, u.id, "unit has no seat");
    if (u.n == 0) {
      report.flags.push_back({FlagKind::empty_unit, u.id, -1});
    } else {
      for (Index i = 0; i < R; ++i) {
        if (u.x(i) == 0) report.flags.push_back({FlagKind::empty_row, u.id, i});
      }
    }
  }

  if (tables != nullptr) {
    std::set<std::string> seen;
    for (const auto& t : *tables) {
      seen.insert(t.id);
      auto it = by_id.find(t.id);
      if (it == by_id.end()) {
        violate(ViolationKind::missing_unit, t.id, "individual table without aggregate");
        continue;
      }
      if (t.counts.rows() != R || t.counts.cols() != C) {
        violate(ViolationKind::dimension, t.id, "individual table has wrong shape");
        continue;
      }
      if ((t.counts.array() < 0).any()) violate(ViolationKind::negative_count, t.id, "negative cell count");
      const UnitAggregate& u = *it->second;
      if (u.x.size() != R || u.y.size() != C) continue;
      for (Index i = 0; i < R; ++i) {
        if (t.counts.row(i).sum() != u.x(i)) {
          violate(ViolationKind::marginal_mismatch, t.id,
                  "row " + std::to_string(i + 1) + " (" + meta.row_labels[i] + ") sums to " +
                      std::to_string(t.counts.row(i).sum()) + ", x = " + std::to_string(u.x(i)));
        }
      }
      for (Index j = 0; j < C; ++j) {
        if (t.counts.col(j).sum() != u.y(j)) {
          violate(ViolationKind::marginal_mismatch, t.id,
                  "column " + std::to_string(j + 1) + " (" + meta.col_labels[j] + ") sums to " +
                      std::to_string(t.counts.col(j).sum()) + ", y = " + std::to_string(u.y(j)));
        }
      }
    }
    for (const auto& u : units) {
      if (!seen.contains(u.id)) violate(ViolationKind::missing_unit, u.id, "aggregate without individual table");
    }
  }
  return report;
}

StackedProportions stack_proportions(std::span<const UnitAggregate> units) {
  if (units.empty()) throw EstimationError("no units");
  const Index R = units.front().x.size();
  const Index C = units.front().y.size();
  StackedProportions s;
  for (std::size_t k = 0; k < units.size(); ++k) {
    const auto& u = units[k];
    if (u.x.size() != R || u.y.size() != C) throw ValidationError("unit '" + u.id + "' has inconsistent dimensions");
    if (u.n <= 0) {
      s.skipped.push_back(u.id);
    } else {
      s.source.push_back(static_cast<Index>(k));
    }
  }
  const auto N = static_cast<Index>(s.source.size());
  s.t.resize(N, R);
  s.v.resize(N, C);
  s.n.resize(N);
  s.x.resize(N, R);
  for (Index r = 0; r < N; ++r) {
    const auto& u = units[static_cast<std::size_t>(s.source[static_cast<std::size_t>(r)])];
    const auto p = proportions(u);
    s.t.row(r) = p.t.transpose();
    s.v.row(r) = p.v.transpose();
    s.n(r) = static_cast<double>(u.n);
    s.x.row(r) = u.x.cast<double>().transpose();
  }
  return s;
}

Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, std::span<const Index> index) {
  Eigen::MatrixXd out(static_cast<Index>(index.size()), m.cols());
  for (std::size_t k = 0; k < index.size(); ++k) out.row(static_cast<Index>(k)) = m.row(index[k]);
  return out;
}

}  // namespace ecoinf
