#include "ecoinf/optimize.hpp"

#include <cmath>
#include <limits>

namespace ecoinf {

MinimizeResult minimize_bfgs(const Objective& f, Eigen::VectorXd x0, const MinimizeOptions& options) {
  const Index P = x0.size();
  MinimizeResult res;
  res.x = std::move(x0);
  res.gradient.resize(P);
  res.value = f(res.x, &res.gradient);
  if (!std::isfinite(res.value)) throw EstimationError("objective is not finite at the starting point");
  res.trace.push_back(res.value);

  Eigen::MatrixXd H = Eigen::MatrixXd::Identity(P, P);
  bool scaled = false;
  Eigen::VectorXd g_new(P);

  for (int it = 0; it < options.max_iterations; ++it) {
    if (res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -H * res.gradient;
    double slope = dir.dot(res.gradient);
    if (!(slope < 0.0)) {
      H.setIdentity();
      dir = -res.gradient;
      slope = dir.dot(res.gradient);
    }
    if (!scaled) {
      // keep the very first trial step at a modest length
      const double len = dir.norm();
      if (len > 1.0) {
        dir /= len;
        slope /= len;
      }
    }

    double step = 1.0;
    double f_new = std::numeric_limits<double>::infinity();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      x_new = res.x + step * dir;
      f_new = f(x_new, &g_new);
      if (std::isfinite(f_new) && f_new <= res.value + 1e-4 * step * slope && f_new < res.value) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) {
      // no further decrease representable in floating point
      res.converged = res.gradient.lpNorm<Eigen::Infinity>() < std::sqrt(options.gradient_tolerance);
      break;
    }

    const Eigen::VectorXd s = x_new - res.x;
    const Eigen::VectorXd y = g_new - res.gradient;
    const double f_old = res.value;
    res.x = x_new;
    res.value = f_new;
    res.gradient = g_new;
    res.iterations = it + 1;
    res.trace.push_back(f_new);

    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (!scaled) {
        H *= sy / y.squaredNorm();
        scaled = true;
      }
      const double rho = 1.0 / sy;
      const Eigen::VectorXd Hy = H * y;
      H += ((sy + y.dot(Hy)) * rho * rho) * (s * s.transpose()) - rho * (Hy * s.transpose() + s * Hy.transpose());
    }

    if (std::abs(f_old - f_new) <= options.relative_tolerance * std::abs(f_old)) {
      res.converged = true;
      break;
    }
  }
  if (!res.converged && res.gradient.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) res.converged = true;
  return res;
}

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f, const Eigen::VectorXd& x,
                                 double step) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd xp = x;
  for (Index k = 0; k < x.size(); ++k) {
    const double h = step * std::max(1.0, std::abs(x(k)));
    xp(k) = x(k) + h;
    const double fp = f(xp);
    xp(k) = x(k) - h;
    const double fm = f(xp);
    xp(k) = x(k);
    g(k) = (fp - fm) / (2.0 * h);
  }
  return g;
}

}  // namespace ecoinf
