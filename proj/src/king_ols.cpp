#include "ecoinf/king_ols.hpp"

#include "ecoinf/goodman.hpp"

namespace ecoinf {

CovariateMask resolve_mask(const CovariateMask& mask, Index rows, Index num_covariates) {
  if (mask.size() == 0) return CovariateMask::Constant(rows, num_covariates, true);
  if (mask.rows() != rows || mask.cols() != num_covariates) {
    throw ValidationError("covariate mask is " + std::to_string(mask.rows()) + "x" + std::to_string(mask.cols()) +
                          ", expected " + std::to_string(rows) + "x" + std::to_string(num_covariates));
  }
  return mask;
}

double king_objective(const LinkLayout& layout, const Eigen::VectorXd& theta, const StackedProportions& data,
                      const Eigen::MatrixXd& z, bool weighted, Eigen::VectorXd* gradient) {
  const Index N = data.t.rows();
  const Index C = layout.cols();
  const LinkParams params = layout.unpack(theta);
  if (gradient != nullptr) gradient->setZero(layout.size());
  Eigen::MatrixXd J;
  double total = 0.0;
  const Eigen::VectorXd none;
  for (Index u = 0; u < N; ++u) {
    const Eigen::VectorXd zu = z.cols() > 0 ? Eigen::VectorXd(z.row(u).transpose()) : none;
    const Eigen::VectorXd mu =
        link_mean(layout, params, data.t.row(u).transpose(), zu, gradient != nullptr ? &J : nullptr);
    const double w = weighted ? data.n(u) : 1.0;
    const Eigen::VectorXd r = (data.v.row(u).transpose() - mu).head(C - 1);
    total += w * r.squaredNorm();
    if (gradient != nullptr) *gradient -= 2.0 * w * J.topRows(C - 1).transpose() * r;
  }
  return total;
}

Eigen::VectorXd king_gradient(const LinkParams& theta, std::span<const UnitAggregate> units,
                              const Eigen::MatrixXd& z, bool weighted, const CovariateMask& mask) {
  const StackedProportions data = stack_proportions(units);
  const LinkLayout layout(theta.rows(), theta.cols(), resolve_mask(mask, theta.rows(), theta.num_covariates()));
  const Eigen::MatrixXd zs = z.cols() > 0 ? take_rows(z, data.source) : Eigen::MatrixXd(data.t.rows(), 0);
  Eigen::VectorXd g;
  king_objective(layout, layout.pack(theta), data, zs, weighted, &g);
  return g;
}

LinkParams goodman_start(std::span<const UnitAggregate> units, const DatasetMeta& meta, const LinkLayout& layout) {
  LinkParams start = layout.zeros();
  try {
    const GoodmanFit g = fit_goodman(units, meta, {.weighted = false, .truncate = true});
    for (Index i = 0; i < layout.rows(); ++i) {
      start.gamma.row(i) = reference_logits(g.pi_hat.row(i).transpose()).transpose();
    }
  } catch (const EstimationError&) {
    // uniform start when the linear regression is not identified
  }
  return start;
}

KingFit fit_king_ols(std::span<const UnitAggregate> units, const DatasetMeta& meta, const Eigen::MatrixXd& z,
                     const KingOptions& options) {
  const StackedProportions data = stack_proportions(units);
  const Index N = data.t.rows();
  const Index R = meta.rows();
  const Index C = meta.cols();
  if (data.t.cols() != R || data.v.cols() != C) throw ValidationError("units do not match dataset dimensions");
  const Index q = z.cols();
  if (q > 0 && z.rows() != static_cast<Index>(units.size())) {
    throw ValidationError("covariate matrix must have one row per unit");
  }
  const LinkLayout layout(R, C, resolve_mask(options.mask, R, q));
  if (N * (C - 1) < layout.size()) {
    throw EstimationError("too few units (" + std::to_string(N) + ") for " + std::to_string(layout.size()) +
                          " parameters");
  }
  const Eigen::MatrixXd zs = q > 0 ? take_rows(z, data.source) : Eigen::MatrixXd(N, 0);
  if (q > 0) check_covariate_rank(zs, options.covariate_names, layout.mask());

  const LinkParams init = options.init ? *options.init : goodman_start(units, meta, layout);
  const Objective objective = [&](const Eigen::VectorXd& theta, Eigen::VectorXd* grad) {
    return king_objective(layout, theta, data, zs, options.weighted, grad);
  };
  const MinimizeResult res = minimize_bfgs(objective, layout.pack(init), options.minimize);

  KingFit fit;
  fit.params = layout.unpack(res.x);
  fit.pi_hat = TransitionMatrix(population_average(fit.params, data.x, zs));
  fit.objective = res.value;
  fit.initial_objective = res.trace.front();
  fit.converged = res.converged;
  fit.iterations = res.iterations;
  fit.objective_trace = res.trace;
  fit.skipped = data.skipped;
  return fit;
}

}  // namespace ecoinf
