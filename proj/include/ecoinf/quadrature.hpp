#pragma once

#include "ecoinf/core.hpp"

namespace ecoinf {

/// Gauss-Hermite rule for the weight exp(-x^2).
struct GaussHermite {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  Eigen::VectorXd log_weights;
};

/// n-point rule from the Golub-Welsch eigenproblem.
GaussHermite gauss_hermite(int n);

}  // namespace ecoinf
