#include "ecoinf/link.hpp"

#include <algorithm>

namespace ecoinf {

LinkLayout::LinkLayout(Index rows, Index cols, Index num_covariates)
    : LinkLayout(rows, cols, CovariateMask::Constant(rows, num_covariates, true)) {}

LinkLayout::LinkLayout(Index rows, Index cols, CovariateMask mask)
    : rows_(rows), cols_(cols), mask_(std::move(mask)) {
  if (rows < 1 || cols < 2) throw ValidationError("link needs at least one row and two columns");
  if (mask_.rows() != rows) throw ValidationError("covariate mask must have one row per row category");
  const Index q = mask_.cols();
  size_ = rows * (cols - 1);
  delta_index_.setConstant(rows * q, cols - 1, -1);
  for (Index i = 0; i < rows; ++i) {
    for (Index l = 0; l < q; ++l) {
      if (!mask_(i, l)) continue;
      for (Index j = 0; j + 1 < cols; ++j) delta_index_(i * q + l, j) = size_++;
    }
  }
}

Eigen::VectorXd LinkLayout::pack(const LinkParams& params) const {
  Eigen::VectorXd theta(size_);
  for (Index i = 0; i < rows_; ++i) {
    for (Index j = 0; j + 1 < cols_; ++j) {
      theta(gamma_index(i, j)) = params.gamma(i, j);
      for (Index l = 0; l < num_covariates(); ++l) {
        const Index k = delta_index(i, j, l);
        if (k >= 0) theta(k) = params.delta[static_cast<std::size_t>(l)](i, j);
      }
    }
  }
  return theta;
}

LinkParams LinkLayout::unpack(const Eigen::VectorXd& theta) const {
  LinkParams p = zeros();
  for (Index i = 0; i < rows_; ++i) {
    for (Index j = 0; j + 1 < cols_; ++j) {
      p.gamma(i, j) = theta(gamma_index(i, j));
      for (Index l = 0; l < num_covariates(); ++l) {
        const Index k = delta_index(i, j, l);
        if (k >= 0) p.delta[static_cast<std::size_t>(l)](i, j) = theta(k);
      }
    }
  }
  return p;
}

LinkParams LinkLayout::zeros() const {
  LinkParams p;
  p.gamma = Eigen::MatrixXd::Zero(rows_, cols_ - 1);
  p.delta.assign(static_cast<std::size_t>(num_covariates()), Eigen::MatrixXd::Zero(rows_, cols_ - 1));
  return p;
}

std::vector<std::string> LinkLayout::parameter_names(const std::vector<std::string>& row_labels,
                                                     const std::vector<std::string>& col_labels,
                                                     const std::vector<std::string>& covariate_names) const {
  std::vector<std::string> names(static_cast<std::size_t>(size_));
  for (Index i = 0; i < rows_; ++i) {
    for (Index j = 0; j + 1 < cols_; ++j) {
      const std::string cell = row_labels[static_cast<std::size_t>(i)] + ":" + col_labels[static_cast<std::size_t>(j)];
      names[static_cast<std::size_t>(gamma_index(i, j))] = "gamma[" + cell + "]";
      for (Index l = 0; l < num_covariates(); ++l) {
        const Index k = delta_index(i, j, l);
        if (k >= 0) {
          names[static_cast<std::size_t>(k)] = "delta[" + cell + ":" + covariate_names[static_cast<std::size_t>(l)] + "]";
        }
      }
    }
  }
  return names;
}

Eigen::VectorXd reference_logits(const Eigen::VectorXd& p, double lo) {
  const Eigen::VectorXd c = p.cwiseMax(lo).cwiseMin(1.0 - lo);
  const Index C = c.size();
  Eigen::VectorXd eta(C - 1);
  for (Index j = 0; j + 1 < C; ++j) eta(j) = std::log(c(j)) - std::log(c(C - 1));
  return eta;
}

Eigen::VectorXd link_mean(const LinkLayout& layout, const LinkParams& params, const Eigen::VectorXd& t,
                          const Eigen::VectorXd& z, Eigen::MatrixXd* jacobian) {
  const Index R = layout.rows();
  const Index C = layout.cols();
  const Index q = layout.num_covariates();
  const Eigen::MatrixXd pi = unit_transition(params, z);
  Eigen::VectorXd mu = pi.transpose() * t;
  if (jacobian != nullptr) {
    jacobian->setZero(C, layout.size());
    for (Index i = 0; i < R; ++i) {
      if (t(i) == 0.0) continue;
      for (Index k = 0; k + 1 < C; ++k) {
        // d mu_j / d eta_ik = t_i pi_ij (1{j=k} - pi_ik)
        Eigen::VectorXd d = -t(i) * pi(i, k) * pi.row(i).transpose();
        d(k) += t(i) * pi(i, k);
        jacobian->col(layout.gamma_index(i, k)) += d;
        for (Index l = 0; l < q; ++l) {
          const Index idx = layout.delta_index(i, k, l);
          if (idx >= 0) jacobian->col(idx) += d * z(l);
        }
      }
    }
  }
  return mu;
}

namespace {

Eigen::VectorXd row_weight_totals(const Eigen::MatrixXd& row_totals) {
  return row_totals.colwise().sum().transpose();
}

}  // namespace

Eigen::MatrixXd population_average(const LinkParams& params, const Eigen::MatrixXd& row_totals,
                                   const Eigen::MatrixXd& z) {
  const Index N = row_totals.rows();
  const Index R = params.rows();
  const Eigen::VectorXd wsum = row_weight_totals(row_totals);
  Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(R, params.cols());
  for (Index u = 0; u < N; ++u) {
    const Eigen::MatrixXd pi = unit_transition(params, z.row(u).transpose());
    for (Index i = 0; i < R; ++i) {
      const double w = wsum(i) > 0 ? row_totals(u, i) / wsum(i) : 1.0 / static_cast<double>(N);
      acc.row(i) += w * pi.row(i);
    }
  }
  return acc;
}

Eigen::MatrixXd population_average_jacobian(const LinkLayout& layout, const LinkParams& params,
                                            const Eigen::MatrixXd& row_totals, const Eigen::MatrixXd& z) {
  const Index N = row_totals.rows();
  const Index R = layout.rows();
  const Index C = layout.cols();
  const Index q = layout.num_covariates();
  const Eigen::VectorXd wsum = row_weight_totals(row_totals);
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(R * C, layout.size());
  for (Index u = 0; u < N; ++u) {
    const Eigen::MatrixXd pi = unit_transition(params, z.row(u).transpose());
    for (Index i = 0; i < R; ++i) {
      const double w = wsum(i) > 0 ? row_totals(u, i) / wsum(i) : 1.0 / static_cast<double>(N);
      if (w == 0.0) continue;
      for (Index k = 0; k + 1 < C; ++k) {
        for (Index j = 0; j < C; ++j) {
          const double d = w * pi(i, j) * ((j == k ? 1.0 : 0.0) - pi(i, k));
          J(i * C + j, layout.gamma_index(i, k)) += d;
          for (Index l = 0; l < q; ++l) {
            const Index idx = layout.delta_index(i, k, l);
            if (idx >= 0) J(i * C + j, idx) += d * z(u, l);
          }
        }
      }
    }
  }
  return J;
}

void check_covariate_rank(const Eigen::MatrixXd& z, const std::vector<std::string>& names) {
  if (z.cols() == 0) return;
  Eigen::MatrixXd X(z.rows(), z.cols() + 1);
  X.col(0).setOnes();
  X.rightCols(z.cols()) = z;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(X);
  lu.setThreshold(1e-10);
  if (lu.rank() < X.cols()) {
    const Eigen::MatrixXd kernel = lu.kernel();
    std::string which;
    for (Index l = 0; l < z.cols(); ++l) {
      if (kernel.row(l + 1).cwiseAbs().maxCoeff() > 1e-8) {
        if (!which.empty()) which += ", ";
        which += l < static_cast<Index>(names.size()) ? names[static_cast<std::size_t>(l)] : "z_" + std::to_string(l + 1);
      }
    }
    throw EstimationError("covariates are collinear with each other or the intercept: " + which);
  }
}

void check_covariate_rank(const Eigen::MatrixXd& z, const std::vector<std::string>& names, const CovariateMask& mask) {
  for (Index i = 0; i < mask.rows(); ++i) {
    std::vector<Index> cols;
    std::vector<std::string> sub;
    for (Index l = 0; l < mask.cols(); ++l) {
      if (!mask(i, l)) continue;
      cols.push_back(l);
      sub.push_back(l < static_cast<Index>(names.size()) ? names[static_cast<std::size_t>(l)] : "z_" + std::to_string(l + 1));
    }
    Eigen::MatrixXd zi(z.rows(), static_cast<Index>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) zi.col(static_cast<Index>(k)) = z.col(cols[k]);
    check_covariate_rank(zi, sub);
  }
}

}  // namespace ecoinf
