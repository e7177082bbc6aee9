#pragma once

#include <functional>

#include "ecoinf/core.hpp"

namespace ecoinf {

struct MinimizeOptions {
  int max_iterations = 500;
  double relative_tolerance = 1e-10;  // on the objective change
  double gradient_tolerance = 1e-8;   // on the gradient infinity norm
};

struct MinimizeResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // objective after each accepted step, starting at x0
};

/// Objective returning f(x) and writing the gradient when `grad` is non-null.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;

/// BFGS with a backtracking Armijo line search. Every accepted step strictly
/// decreases the objective.
MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& options = {});

/// Central finite-difference gradient, used by tests and for Hessians.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double step = 1e-6);

}  // namespace ecoinf
