#pragma once

#include <cmath>

#include "ecoinf/core.hpp"

namespace ecoinf {

/// Multinomial-logit parameterization of unit-varying transition probabilities,
/// with column C as the reference category:
///   eta_uij = gamma_ij + sum_l delta[l](i,j) * z_ul,   eta_uiC = 0,
///   pi_uij  = softmax_j(eta_ui).
struct LinkParams {
  Eigen::MatrixXd gamma;               // R x (C-1)
  std::vector<Eigen::MatrixXd> delta;  // q matrices, each R x (C-1)

  Index rows() const { return gamma.rows(); }
  Index cols() const { return gamma.cols() + 1; }
  Index num_covariates() const { return static_cast<Index>(delta.size()); }
};

using CovariateMask = Eigen::Matrix<bool, Eigen::Dynamic, Eigen::Dynamic>;

/// Maps LinkParams to a flat parameter vector. Only covariates enabled in
/// the R x q mask for row i get free slopes in that row.
class LinkLayout {
 public:
  LinkLayout(Index rows, Index cols, Index num_covariates);
  LinkLayout(Index rows, Index cols, CovariateMask mask);

  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  Index num_covariates() const { return mask_.cols(); }
  const CovariateMask& mask() const { return mask_; }
  Index size() const { return size_; }

  Index gamma_index(Index i, Index j) const { return i * (cols_ - 1) + j; }
  /// -1 when the slope is fixed at zero.
  Index delta_index(Index i, Index j, Index l) const { return delta_index_(i * num_covariates() + l, j); }

  Eigen::VectorXd pack(const LinkParams& params) const;
  LinkParams unpack(const Eigen::VectorXd& theta) const;
  LinkParams zeros() const;
  std::vector<std::string> parameter_names(const std::vector<std::string>& row_labels,
                                           const std::vector<std::string>& col_labels,
                                           const std::vector<std::string>& covariate_names) const;

 private:
  Index rows_;
  Index cols_;
  CovariateMask mask_;
  Eigen::Matrix<Index, Eigen::Dynamic, Eigen::Dynamic> delta_index_;  // (R*q) x (C-1)
  Index size_ = 0;
};

/// Numerically stable softmax of a logit vector with an implicit trailing zero.
template <typename Scalar>
VectorX<Scalar> softmax_with_reference(const VectorX<Scalar>& eta) {
  using std::exp;
  Scalar m(0);
  for (Index j = 0; j < eta.size(); ++j) {
    if (eta(j) > m) m = eta(j);
  }
  VectorX<Scalar> p(eta.size() + 1);
  Scalar total(0);
  for (Index j = 0; j < eta.size(); ++j) {
    p(j) = exp(eta(j) - m);
    total += p(j);
  }
  p(eta.size()) = exp(-m);
  total += p(eta.size());
  return p / total;
}

/// R x C transition matrix of one unit with covariates z.
template <typename Scalar = double>
MatrixX<Scalar> unit_transition(const LinkParams& params, const Eigen::Ref<const Eigen::VectorXd>& z) {
  const Index R = params.rows();
  const Index C = params.cols();
  MatrixX<Scalar> pi(R, C);
  for (Index i = 0; i < R; ++i) {
    VectorX<Scalar> eta = params.gamma.row(i).transpose().template cast<Scalar>();
    for (Index l = 0; l < params.num_covariates(); ++l) {
      eta += (params.delta[static_cast<std::size_t>(l)].row(i).transpose() * z(l)).template cast<Scalar>();
    }
    pi.row(i) = softmax_with_reference<Scalar>(eta).transpose();
  }
  return pi;
}

/// Multinomial logits log(p_j / p_C) of a probability row; entries are clipped
/// to [lo, 1 - lo] first.
Eigen::VectorXd reference_logits(const Eigen::VectorXd& p, double lo = 0.01);

/// Mean column shares mu_u = sum_i t_ui pi_ui and, optionally, the C x P Jacobian
/// with respect to the packed parameters.
Eigen::VectorXd link_mean(const LinkLayout& layout, const LinkParams& params, const Eigen::VectorXd& t,
                          const Eigen::VectorXd& z, Eigen::MatrixXd* jacobian = nullptr);

/// Average of the unit transition matrices weighted by each unit's row totals.
/// Rows with zero total weight fall back to an unweighted mean.
Eigen::MatrixXd population_average(const LinkParams& params, const Eigen::MatrixXd& row_totals,
                                   const Eigen::MatrixXd& z);

/// Jacobian (R*C) x P of population_average, in row-major (i, j) order.
Eigen::MatrixXd population_average_jacobian(const LinkLayout& layout, const LinkParams& params,
                                            const Eigen::MatrixXd& row_totals, const Eigen::MatrixXd& z);

/// Throws EstimationError if [1, z] is rank deficient.
void check_covariate_rank(const Eigen::MatrixXd& z, const std::vector<std::string>& names);
/// Same check applied to the covariates enabled for each row.
void check_covariate_rank(const Eigen::MatrixXd& z, const std::vector<std::string>& names, const CovariateMask& mask);

}  // namespace ecoinf
