#include "ecoinf/glm.hpp"

#include <cmath>
#include <limits>

namespace ecoinf {

double log_binomial_coefficient(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

double normal_two_sided_p(double z) {
  if (!std::isfinite(z)) return std::isnan(z) ? std::numeric_limits<double>::quiet_NaN() : 0.0;
  return std::erfc(std::abs(z) / std::sqrt(2.0));
}

std::string significance_code(double p) {
  if (!(p >= 0.0)) return "∘";
  if (p < 0.001) return "•";
  if (p < 0.01) return "∗";
  if (p < 0.05) return "⋆";
  return "∘";
}

namespace {

double loglik(const Eigen::VectorXd& eta, const Eigen::VectorXd& trials, const Eigen::VectorXd& successes) {
  double ll = 0.0;
  for (Index k = 0; k < eta.size(); ++k) ll += binomial_loglik(trials(k), successes(k), eta(k));
  return ll;
}

}  // namespace

LogisticFit fit_binomial_logistic(const Eigen::MatrixXd& X, const Eigen::VectorXd& trials,
                                  const Eigen::VectorXd& successes, int max_iterations) {
  const Index n = X.rows();
  const Index p = X.cols();
  if (trials.size() != n || successes.size() != n) throw ValidationError("logistic regression: size mismatch");
  if ((successes.array() < 0).any() || (successes.array() > trials.array()).any()) {
    throw ValidationError("logistic regression: successes must lie in [0, trials]");
  }
  LogisticFit fit;
  fit.beta = Eigen::VectorXd::Zero(p);
  double ll = loglik(X * fit.beta, trials, successes);
  constexpr double kDivergence = 30.0;

  for (int it = 0; it < max_iterations; ++it) {
    const Eigen::VectorXd eta = X * fit.beta;
    Eigen::VectorXd w(n), score_resid(n);
    for (Index k = 0; k < n; ++k) {
      const double mu = inverse_logit(eta(k));
      w(k) = trials(k) * mu * (1.0 - mu);
      score_resid(k) = successes(k) - trials(k) * mu;
    }
    const Eigen::VectorXd grad = X.transpose() * score_resid;
    Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    info.diagonal().array() += 1e-12 * std::max(1.0, info.diagonal().maxCoeff());
    const Eigen::VectorXd step = info.ldlt().solve(grad);

    double scale = 1.0;
    Eigen::VectorXd next = fit.beta + step;
    double ll_next = loglik(X * next, trials, successes);
    for (int half = 0; half < 30 && !(ll_next >= ll); ++half) {
      scale *= 0.5;
      next = fit.beta + scale * step;
      ll_next = loglik(X * next, trials, successes);
    }
    fit.iterations = it + 1;
    const double change = ll_next - ll;
    if (ll_next >= ll) {
      fit.beta = next;
      ll = ll_next;
    }
    if (fit.beta.cwiseAbs().maxCoeff() > kDivergence) {
      fit.separated = true;
      break;
    }
    if (std::abs(change) <= 1e-12 * std::max(1.0, std::abs(ll)) || step.lpNorm<Eigen::Infinity>() < 1e-10) {
      fit.converged = true;
      break;
    }
  }

  const Eigen::VectorXd eta = X * fit.beta;
  Eigen::VectorXd w(n);
  for (Index k = 0; k < n; ++k) {
    const double mu = inverse_logit(eta(k));
    w(k) = trials(k) * mu * (1.0 - mu);
  }
  fit.loglik = ll;
  for (Index k = 0; k < n; ++k) fit.loglik += log_binomial_coefficient(trials(k), successes(k));
  if (fit.separated) {
    fit.covariance = Eigen::MatrixXd::Constant(p, p, std::numeric_limits<double>::infinity());
    fit.se = Eigen::VectorXd::Constant(p, std::numeric_limits<double>::infinity());
  } else {
    const Eigen::MatrixXd info = X.transpose() * w.asDiagonal() * X;
    fit.covariance = info.completeOrthogonalDecomposition().pseudoInverse();
    fit.se = fit.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  }
  return fit;
}

}  // namespace ecoinf
