#include "ecoinf/quadrature.hpp"

#include <cmath>
#include <numbers>

namespace ecoinf {

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw ValidationError("quadrature needs at least one node");
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) {
    J(k, k - 1) = J(k - 1, k) = std::sqrt(k / 2.0);
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(J);
  GaussHermite rule;
  rule.nodes = eig.eigenvalues();
  rule.weights = std::sqrt(std::numbers::pi) * eig.eigenvectors().row(0).transpose().array().square();
  rule.log_weights = rule.weights.array().log();
  return rule;
}

}  // namespace ecoinf
