#pragma once

#include "ecoinf/core.hpp"

namespace ecoinf {

struct LogisticFit {
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  Eigen::MatrixXd covariance;
  double loglik = 0.0;  // includes the binomial coefficients
  bool converged = false;
  bool separated = false;  // some coefficient diverged; its SE is reported as +inf
  int iterations = 0;
};

/// Binomial logistic regression of successes out of trials on X, by IRLS.
LogisticFit fit_binomial_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& trials,
                                  const Eigen::VectorXd& successes, int max_iterations = 100);

/// log(1 + exp(x)) without overflow.
template <typename Scalar>
Scalar softplus(const Scalar& x) {
  using std::exp;
  using std::log;
  if (x > 0.0) return x + log(1.0 + exp(-x));
  return log(1.0 + exp(x));
}

template <typename Scalar>
Scalar inverse_logit(const Scalar& x) {
  using std::exp;
  if (x >= 0.0) return 1.0 / (1.0 + exp(-x));
  const Scalar e = exp(x);
  return e / (1.0 + e);
}

double log_binomial_coefficient(double n, double k);

/// k * eta - n * log(1 + exp(eta)); the binomial coefficient is left out.
template <typename Scalar>
Scalar binomial_loglik(double trials, double successes, const Scalar& eta) {
  return successes * eta - trials * softplus(eta);
}

/// Two-sided p-value of a standard normal statistic.
double normal_two_sided_p(double z);

/// Significance marker: "•" p < 0.001, "∗" p < 0.01, "⋆" p < 0.05, "∘" otherwise.
std::string significance_code(double p);

}  // namespace ecoinf
