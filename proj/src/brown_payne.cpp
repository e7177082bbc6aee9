#include "ecoinf/brown_payne.hpp"

#include <cmath>
#include <limits>

#include <boost/math/tools/minima.hpp>

#include "ecoinf/king_ols.hpp"

namespace ecoinf {

namespace {

constexpr double kMaxCorrelation = 0.999;

double pair_share(const Eigen::VectorXd& x, double n) {
  if (n <= 1.0) return 1.0;
  double s = 0.0;
  for (Index i = 0; i < x.size(); ++i) s += x(i) * (x(i) - 1.0);
  return s / (n * (n - 1.0));
}

double inflation(const BPVarianceSpec& v, double n, double w) {
  return 1.0 + (n - 1.0) * (v.phi * w + v.tau * (1.0 - w));
}

Eigen::VectorXd unit_z(const Eigen::MatrixXd& z, Index u) {
  return z.cols() > 0 ? Eigen::VectorXd(z.row(u).transpose()) : Eigen::VectorXd();
}

// Per-unit pieces that do not depend on (phi, tau).
struct UnitTerms {
  Eigen::VectorXd mu;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd resid;
  double pearson = 0.0;  // n * sum_j r_j^2 / mu_j
  double log_mu = 0.0;
};

std::vector<UnitTerms> unit_terms(const LinkLayout& layout, const LinkParams& params, const StackedProportions& data,
                                  const Eigen::MatrixXd& z, bool with_jacobian) {
  const Index N = data.t.rows();
  std::vector<UnitTerms> out(static_cast<std::size_t>(N));
  for (Index u = 0; u < N; ++u) {
    auto& s = out[static_cast<std::size_t>(u)];
    s.mu = link_mean(layout, params, data.t.row(u).transpose(), unit_z(z, u), with_jacobian ? &s.jacobian : nullptr);
    s.resid = data.v.row(u).transpose() - s.mu;
    s.pearson = data.n(u) * (s.resid.array().square() / s.mu.array()).sum();
    s.log_mu = s.mu.array().log().sum();
  }
  return out;
}

double loglik_from_terms(const std::vector<UnitTerms>& terms, const BPVarianceSpec& v, const StackedProportions& data,
                         const Eigen::VectorXd& w) {
  const double k = static_cast<double>(data.v.cols() - 1);
  double total = 0.0;
  for (std::size_t u = 0; u < terms.size(); ++u) {
    const double c = inflation(v, data.n(static_cast<Index>(u)), w(static_cast<Index>(u)));
    total += -0.5 * (terms[u].pearson / c + k * std::log(c) + terms[u].log_mu);
  }
  return total;
}

// d loglik_u / d mu_j with c held fixed
Eigen::VectorXd mean_score(const UnitTerms& s, double n, double c) {
  const Eigen::ArrayXd r = s.resid.array();
  const Eigen::ArrayXd m = s.mu.array();
  return ((n / c) * (r / m + r.square() / (2.0 * m.square())) - 0.5 / m).matrix();
}

}  // namespace

double same_row_pair_share(const UnitAggregate& unit) {
  return pair_share(unit.x.cast<double>(), static_cast<double>(unit.n));
}

double inflation_factor(const BPVarianceSpec& variance, const UnitAggregate& unit) {
  return inflation(variance, static_cast<double>(unit.n), same_row_pair_share(unit));
}

Eigen::VectorXd bp_mean(const LinkParams& theta, const UnitAggregate& unit, const Eigen::VectorXd& z) {
  const Proportions p = proportions(unit);
  const Eigen::VectorXd zz = z.size() > 0 ? z : Eigen::VectorXd::Zero(theta.num_covariates());
  return unit_transition(theta, zz).transpose() * p.t;
}

UnitCovariance bp_covariance(const LinkParams& theta, const BPVarianceSpec& variance, const UnitAggregate& unit,
                             const Eigen::VectorXd& z) {
  const Eigen::VectorXd mu = bp_mean(theta, unit, z);
  UnitCovariance out;
  out.inflation = inflation_factor(variance, unit);
  const Eigen::MatrixXd base = Eigen::MatrixXd(mu.asDiagonal()) - mu * mu.transpose();
  out.matrix = out.inflation / static_cast<double>(unit.n) * base;
  out.matrix = 0.5 * (out.matrix + out.matrix.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(out.matrix, Eigen::EigenvaluesOnly);
  if (eig.eigenvalues().minCoeff() < -1e-14) {
    out.matrix.diagonal().array() += 1e-10;
    out.jittered = true;
  }
  return out;
}

double bp_quasi_loglik(const LinkLayout& layout, const Eigen::VectorXd& theta, const BPVarianceSpec& variance,
                       const StackedProportions& data, const Eigen::MatrixXd& z, Eigen::VectorXd* gradient) {
  const LinkParams params = layout.unpack(theta);
  const auto terms = unit_terms(layout, params, data, z, gradient != nullptr);
  Eigen::VectorXd w(data.t.rows());
  for (Index u = 0; u < w.size(); ++u) w(u) = pair_share(data.x.row(u).transpose(), data.n(u));
  if (gradient != nullptr) {
    gradient->setZero(layout.size());
    for (std::size_t u = 0; u < terms.size(); ++u) {
      const auto ui = static_cast<Index>(u);
      const double c = inflation(variance, data.n(ui), w(ui));
      *gradient += terms[u].jacobian.transpose() * mean_score(terms[u], data.n(ui), c);
    }
  }
  return loglik_from_terms(terms, variance, data, w);
}

BPFit fit_brown_payne(std::span<const UnitAggregate> units, const DatasetMeta& meta, const Eigen::MatrixXd& z,
                      const BPOptions& options) {
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
  const Index P = layout.size();
  if (N * (C - 1) < P) {
    throw EstimationError("too few units (" + std::to_string(N) + ") for " + std::to_string(P) + " parameters");
  }
  const Eigen::MatrixXd zs = q > 0 ? take_rows(z, data.source) : Eigen::MatrixXd(N, 0);
  if (q > 0) check_covariate_rank(zs, options.covariate_names, layout.mask());
  for (const auto& fixed : {options.fix_phi, options.fix_tau}) {
    if (fixed && (*fixed < 0.0 || *fixed >= 1.0)) throw ValidationError("fixed phi/tau must lie in [0, 1)");
  }

  Eigen::VectorXd w(N);
  for (Index u = 0; u < N; ++u) w(u) = pair_share(data.x.row(u).transpose(), data.n(u));

  Eigen::VectorXd theta = layout.pack(options.init ? *options.init : goodman_start(units, meta, layout));
  BPVarianceSpec var{options.fix_phi.value_or(0.0), options.fix_tau.value_or(0.0)};

  auto terms = unit_terms(layout, layout.unpack(theta), data, zs, true);
  double ll = loglik_from_terms(terms, var, data, w);

  BPFit fit;
  fit.trace.push_back(ll);

  // profile update of (phi, tau) given the current mean model
  auto update_variance = [&]() {
    if (options.fix_phi && options.fix_tau) return;
    const int bits = std::numeric_limits<double>::digits / 2;
    for (int cycle = 0; cycle < 20; ++cycle) {
      const BPVarianceSpec before = var;
      for (double BPVarianceSpec::*field : {&BPVarianceSpec::phi, &BPVarianceSpec::tau}) {
        if ((field == &BPVarianceSpec::phi && options.fix_phi) || (field == &BPVarianceSpec::tau && options.fix_tau)) {
          continue;
        }
        auto f = [&](double value) {
          BPVarianceSpec v = var;
          v.*field = value;
          return -loglik_from_terms(terms, v, data, w);
        };
        auto best = boost::math::tools::brent_find_minima(f, 0.0, kMaxCorrelation, bits);
        const double at_zero = f(0.0);
        if (at_zero <= best.second) best = {0.0, at_zero};
        if (best.second <= f(var.*field)) var.*field = best.first;
      }
      if (std::abs(var.phi - before.phi) < 1e-10 && std::abs(var.tau - before.tau) < 1e-10) break;
    }
  };

  int it = 0;
  for (; it < options.max_iterations; ++it) {
    const double ll_start = ll;
    update_variance();
    ll = loglik_from_terms(terms, var, data, w);

    // scoring step for the link parameters
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(P);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(P, P);
    for (Index u = 0; u < N; ++u) {
      const auto& s = terms[static_cast<std::size_t>(u)];
      const double c = inflation(var, data.n(u), w(u));
      grad += s.jacobian.transpose() * mean_score(s, data.n(u), c);
      info += s.jacobian.transpose() * ((data.n(u) / c) * s.mu.cwiseInverse()).asDiagonal() * s.jacobian;
    }
    if (grad.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      fit.converged = true;
      break;
    }
    const double ridge = 1e-10 * std::max(1.0, info.diagonal().maxCoeff());
    info.diagonal().array() += ridge;
    const Eigen::VectorXd delta = info.ldlt().solve(grad);

    double step = 1.0;
    bool accepted = false;
    for (int half = 0; half < 40; ++half) {
      const Eigen::VectorXd trial = theta + step * delta;
      auto trial_terms = unit_terms(layout, layout.unpack(trial), data, zs, true);
      const double trial_ll = loglik_from_terms(trial_terms, var, data, w);
      if (std::isfinite(trial_ll) && trial_ll >= ll) {
        theta = trial;
        terms = std::move(trial_terms);
        ll = trial_ll;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    fit.trace.push_back(ll);
    if (!accepted || std::abs(ll - ll_start) <= options.relative_tolerance * std::max(1.0, std::abs(ll_start))) {
      fit.converged = true;
      ++it;
      break;
    }
  }
  fit.iterations = it;

  fit.params = layout.unpack(theta);
  fit.param_estimates = theta;
  fit.variance = var;
  fit.quasi_loglik = ll;
  fit.phi_at_boundary = !options.fix_phi && var.phi < 1e-8;
  fit.tau_at_boundary = !options.fix_tau && var.tau < 1e-8;
  fit.skipped = data.skipped;
  std::vector<std::string> cov_names = options.covariate_names;
  for (Index l = static_cast<Index>(cov_names.size()); l < q; ++l) cov_names.push_back("z_" + std::to_string(l + 1));
  fit.param_names = layout.parameter_names(meta.row_labels, meta.col_labels, cov_names);

  // sandwich covariance: bread = expected information, meat = sum of outer products of unit scores
  Eigen::MatrixXd bread = Eigen::MatrixXd::Zero(P, P);
  Eigen::MatrixXd meat = Eigen::MatrixXd::Zero(P, P);
  for (Index u = 0; u < N; ++u) {
    const auto& s = terms[static_cast<std::size_t>(u)];
    const double c = inflation(var, data.n(u), w(u));
    bread += s.jacobian.transpose() * ((data.n(u) / c) * s.mu.cwiseInverse()).asDiagonal() * s.jacobian;
    const Eigen::VectorXd score = s.jacobian.transpose() * mean_score(s, data.n(u), c);
    meat += score * score.transpose();
  }
  const Eigen::MatrixXd bread_inv = bread.completeOrthogonalDecomposition().pseudoInverse();
  fit.param_cov = bread_inv * meat * bread_inv;
  fit.param_se = fit.param_cov.diagonal().cwiseMax(0.0).cwiseSqrt();

  fit.pi_hat = TransitionMatrix(population_average(fit.params, data.x, zs));
  const Eigen::MatrixXd G = population_average_jacobian(layout, fit.params, data.x, zs);
  const Eigen::VectorXd pi_var = (G * fit.param_cov * G.transpose()).diagonal();
  fit.pi_se.resize(R, C);
  for (Index i = 0; i < R; ++i) {
    for (Index j = 0; j < C; ++j) fit.pi_se(i, j) = std::sqrt(std::max(0.0, pi_var(i * C + j)));
  }
  return fit;
}

std::vector<Eigen::MatrixXd> bp_predict_cells(const BPFit& fit, std::span<const UnitAggregate> units,
                                              const Eigen::MatrixXd& z) {
  std::vector<Eigen::MatrixXd> out;
  out.reserve(units.size());
  const Index q = fit.params.num_covariates();
  for (std::size_t u = 0; u < units.size(); ++u) {
    const Eigen::VectorXd zu = q > 0 ? Eigen::VectorXd(z.row(static_cast<Index>(u)).transpose()) : Eigen::VectorXd();
    const Eigen::MatrixXd pi = unit_transition(fit.params, zu);
    out.push_back(units[u].x.cast<double>().asDiagonal() * pi);
  }
  return out;
}

}  // namespace ecoinf
