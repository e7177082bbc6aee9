#include "ecoinf/goodman.hpp"

#include <cmath>
#include <limits>

namespace ecoinf {

Eigen::MatrixXd goodman_design(const Eigen::MatrixXd& t) {
  const Index N = t.rows();
  const Index R = t.cols();
  Eigen::MatrixXd X(N, R);
  X.col(0).setOnes();
  for (Index i = 0; i + 1 < R; ++i) X.col(i + 1) = t.col(i) - t.col(R - 1);
  return X;
}

Eigen::MatrixXd truncate_rows(const Eigen::MatrixXd& pi) {
  Eigen::MatrixXd out = pi.cwiseMax(0.0).cwiseMin(1.0);
  for (Index i = 0; i < out.rows(); ++i) {
    const double s = out.row(i).sum();
    if (s > 0) out.row(i) /= s;
  }
  return out;
}

namespace {

std::string collinear_description(const Eigen::MatrixXd& X, const DatasetMeta& meta) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(X);
  lu.setThreshold(1e-10);
  const Eigen::MatrixXd kernel = lu.kernel();
  std::string names;
  for (Index k = 0; k < X.cols(); ++k) {
    if (kernel.row(k).cwiseAbs().maxCoeff() > 1e-8) {
      if (!names.empty()) names += ", ";
      if (k == 0) {
        names += "intercept";
      } else {
        const auto i = static_cast<std::size_t>(k - 1);
        names += i < meta.row_labels.size() ? meta.row_labels[i] : "row " + std::to_string(k);
      }
    }
  }
  if (meta.rows() > 1) {
    names += " (measured against " + meta.row_labels.back() + ")";
  }
  return names;
}

}  // namespace

GoodmanFit fit_goodman(std::span<const UnitAggregate> units, const DatasetMeta& meta, GoodmanOptions options) {
  const StackedProportions s = stack_proportions(units);
  const Index N = s.t.rows();
  const Index R = s.t.cols();
  const Index C = s.v.cols();
  if (R != meta.rows() || C != meta.cols()) throw ValidationError("units do not match dataset dimensions");
  if (N < R) {
    throw EstimationError("underdetermined: " + std::to_string(N) + " units for " + std::to_string(R) +
                          " row categories");
  }

  const Eigen::MatrixXd X = goodman_design(s.t);
  const Eigen::VectorXd w = options.weighted ? s.n : Eigen::VectorXd::Ones(N);
  const Eigen::VectorXd sw = w.cwiseSqrt();
  const Eigen::MatrixXd Xw = sw.asDiagonal() * X;

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Xw);
  qr.setThreshold(1e-10);
  if (qr.rank() < R) {
    throw EstimationError("rank-deficient design; collinear rows: " + collinear_description(Xw, meta));
  }
  // all C columns are regressed so the last column's SE comes out directly;
  // its coefficients equal 1 minus the others by linearity.
  const Eigen::MatrixXd coef = qr.solve(sw.asDiagonal() * s.v);  // R x C
  const Eigen::MatrixXd XtX_inv = (Xw.transpose() * Xw).inverse();

  GoodmanFit fit;
  fit.options = options;
  fit.pi_raw.resize(R, C);
  // v = c + sum_i b_i (t_i - t_R) gives pi_i = c + b_i and pi_R = c - sum_i b_i
  const auto contrast = [R](Index i) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(R);
    c(0) = 1.0;
    if (i + 1 < R) {
      c(i + 1) = 1.0;
    } else {
      c.tail(R - 1).setConstant(-1.0);
    }
    return c;
  };
  for (Index i = 0; i < R; ++i) fit.pi_raw.row(i) = contrast(i).transpose() * coef;
  // exact completion of the redundant last column
  fit.pi_raw.col(C - 1) = Eigen::VectorXd::Ones(R) - fit.pi_raw.leftCols(C - 1).rowwise().sum();

  const Eigen::MatrixXd fitted = s.t * fit.pi_raw;
  const Eigen::MatrixXd resid_all = s.v - fitted;
  fit.residuals = resid_all.leftCols(C - 1);

  fit.se.resize(R, C);
  const Index dof = N - R;
  for (Index j = 0; j < C; ++j) {
    const double s2 = dof > 0 ? (w.array() * resid_all.col(j).array().square()).sum() / static_cast<double>(dof)
                              : std::numeric_limits<double>::quiet_NaN();
    for (Index i = 0; i < R; ++i) {
      const Eigen::VectorXd c = contrast(i);
      fit.se(i, j) = std::sqrt(s2 * c.dot(XtX_inv * c));
    }
  }

  for (Index r : s.source) fit.unit_ids.push_back(units[static_cast<std::size_t>(r)].id);
  fit.skipped = s.skipped;

  if (options.truncate) {
    fit.pi_hat = truncate_rows(fit.pi_raw);
    fit.truncation_applied = (fit.pi_raw.array() < 0.0).any() || (fit.pi_raw.array() > 1.0).any();
  } else {
    fit.pi_hat = fit.pi_raw;
  }
  return fit;
}

Eigen::MatrixXd goodman_residuals(const GoodmanFit& fit, std::span<const UnitAggregate> units) {
  const StackedProportions s = stack_proportions(units);
  const Index C = s.v.cols();
  return (s.v - s.t * fit.pi_raw).leftCols(C - 1);
}

}  // namespace ecoinf
