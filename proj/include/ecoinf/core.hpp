#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace ecoinf {

using Index = Eigen::Index;
using Count = std::int64_t;
using CountVector = Eigen::Matrix<Count, Eigen::Dynamic, 1>;
using CountMatrix = Eigen::Matrix<Count, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

/// Malformed or internally inconsistent input data.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An estimator could not be evaluated on the given data.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DatasetMeta {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  // unit id -> seat id
  std::map<std::string, std::string> seat_of_unit;

  Index rows() const { return static_cast<Index>(row_labels.size()); }
  Index cols() const { return static_cast<Index>(col_labels.size()); }
  Index num_units() const { return static_cast<Index>(seat_of_unit.size()); }
};

DatasetMeta make_meta(Index rows, Index cols);

/// Marginal counts of one polling station: the only thing ecological methods see.
struct UnitAggregate {
  std::string id;
  CountVector x;  // row totals x_ui
  CountVector y;  // column totals y_uj
  Count n = 0;

  bool operator==(const UnitAggregate&) const = default;
};

/// Builds a unit and checks sum(x) == sum(y) and nonnegativity.
UnitAggregate make_unit(std::string id, CountVector x, CountVector y);

/// Joint R x C counts n_uij of one unit.
struct IndividualTable {
  std::string id;
  CountMatrix counts;

  bool operator==(const IndividualTable&) const = default;
};

template <typename Scalar = double>
struct Proportions {
  VectorX<Scalar> t;
  VectorX<Scalar> v;
};

template <typename Scalar = double>
Proportions<Scalar> proportions(const UnitAggregate& unit) {
  if (unit.n <= 0) {
    throw ValidationError("unit '" + unit.id + "' has zero total; proportions undefined");
  }
  const Scalar n = static_cast<Scalar>(unit.n);
  return {unit.x.template cast<Scalar>() / n, unit.y.template cast<Scalar>() / n};
}

UnitAggregate aggregate(const IndividualTable& table);

/// Row-stochastic R x C matrix.
class TransitionMatrix {
 public:
  TransitionMatrix() = default;
  explicit TransitionMatrix(Eigen::MatrixXd pi, double tol = 1e-10);

  const Eigen::MatrixXd& matrix() const { return pi_; }
  double operator()(Index i, Index j) const { return pi_(i, j); }
  Index rows() const { return pi_.rows(); }
  Index cols() const { return pi_.cols(); }

 private:
  Eigen::MatrixXd pi_;
};

/// Unit-level covariates keyed by unit id.
struct CovariateTable {
  std::vector<std::string> names;
  std::vector<std::string> unit_ids;
  Eigen::MatrixXd values;  // one row per entry of unit_ids

  Index size() const { return static_cast<Index>(names.size()); }
  std::optional<Index> find(const std::string& unit_id) const;
  /// N x q matrix in the order of `ids`; throws if a unit is missing.
  Eigen::MatrixXd aligned(std::span<const std::string> ids) const;
  Eigen::MatrixXd aligned(std::span<const UnitAggregate> units) const;
  /// Keeps only the named columns, in the given order.
  CovariateTable select(std::span<const std::string> keep) const;

  bool operator==(const CovariateTable&) const = default;
};

enum class ViolationKind { dimension, marginal_mismatch, unknown_seat, negative_count, missing_unit, duplicate_unit };

struct Violation {
  ViolationKind kind;
  std::string unit;
  std::string detail;
};

enum class FlagKind { empty_unit, empty_row };

struct Flag {
  FlagKind kind;
  std::string unit;
  Index row = -1;
};

struct ValidationReport {
  std::vector<Violation> violations;
  std::vector<Flag> flags;

  bool ok() const { return violations.empty(); }
};

ValidationReport validate_dataset(std::span<const UnitAggregate> units,
                                  const std::vector<IndividualTable>* tables,
                                  const DatasetMeta& meta);

std::string to_string(ViolationKind kind);

/// Stacked proportions of all units with n > 0, used by the ecological estimators.
struct StackedProportions {
  Eigen::MatrixXd t;  // N x R
  Eigen::MatrixXd v;  // N x C
  Eigen::VectorXd n;  // N
  Eigen::MatrixXd x;  // N x R row totals as doubles
  std::vector<Index> source;  // index into the original unit list
  std::vector<std::string> skipped;  // ids of units with n == 0
};

StackedProportions stack_proportions(std::span<const UnitAggregate> units);

/// Rows of `m` selected by `index`.
Eigen::MatrixXd take_rows(const Eigen::MatrixXd& m, std::span<const Index> index);

}  // namespace ecoinf
