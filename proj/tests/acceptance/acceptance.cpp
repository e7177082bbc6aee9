// Acceptance checks on synthetic ground truth. Prints one PASS/FAIL line per
// criterion and exits non-zero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "ecoinf/brown_payne.hpp"
#include "ecoinf/diagnostics.hpp"
#include "ecoinf/glm.hpp"
#include "ecoinf/goodman.hpp"
#include "ecoinf/king_ols.hpp"
#include "ecoinf/multilevel.hpp"
#include "ecoinf/synth.hpp"

using namespace ecoinf;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) { return (a - b).cwiseAbs().maxCoeff(); }

// ---------------------------------------------------------------------------

Outcome two_station_paradox() {
  const auto start = std::chrono::steady_clock::now();
  const SyntheticPopulation pop = table1_fixture();
  const GoodmanFit fit = fit_goodman(pop.units, pop.meta);
  const double f_yes = fit.pi_raw(0, 1);
  const double m_yes = fit.pi_raw(1, 1);

  std::vector<Eigen::MatrixXd> within;
  for (const IndividualTable& t : pop.tables) within.push_back(within_unit_proportions(t));
  const std::vector<NamedEstimate> est{{"goodman", TransitionMatrix(fit.pi_hat)}};
  const ComparisonReport cmp = compare_estimates(est, TransitionMatrix(pop.truth.expected_pooled), within);
  const bool reversal = std::any_of(cmp.reversals.begin(), cmp.reversals.end(), [](const SignReversal& r) {
    return r.col == 1 && ((r.row_a == 0 && r.row_b == 1) || (r.row_a == 1 && r.row_b == 0));
  });
  // (M, F) yes-shares inside each unit
  const bool within_ok = std::abs(within[0](1, 1) - 0.75) < 1e-12 && std::abs(within[0](0, 1) - 0.6875) < 1e-12 &&
                         std::abs(within[1](1, 1) - 0.50) < 1e-12 && std::abs(within[1](0, 1) - 0.25) < 1e-12;
  const double elapsed = seconds_since(start);
  const bool pass =
      std::abs(m_yes - 0.10) < 1e-10 && std::abs(f_yes - 0.85) < 1e-10 && within_ok && reversal && elapsed < 1.0;
  return {pass, fmt("pi(F,yes)=%.12f pi(M,yes)=%.12f within-unit ok=%d reversal flagged=%d time=%.3fs", f_yes, m_yes,
                    within_ok, reversal, elapsed)};
}

// ---------------------------------------------------------------------------

Outcome unbiasedness() {
  const int reps = 100;
  int ok[3] = {0, 0, 0};
  double worst[3] = {0, 0, 0};
  for (int r = 0; r < reps; ++r) {
    const GeneratorConfig cfg = no_bias_config(3, 3, 600, 1000.0, 1000 + static_cast<std::uint64_t>(r));
    const SyntheticPopulation pop = generate(cfg);
    const Eigen::MatrixXd& truth = pop.truth.expected_pooled;
    const double err[3] = {max_abs_diff(fit_goodman(pop.units, pop.meta).pi_hat, truth),
                           max_abs_diff(fit_king_ols(pop.units, pop.meta).pi_hat.matrix(), truth),
                           max_abs_diff(fit_brown_payne(pop.units, pop.meta).pi_hat.matrix(), truth)};
    for (int m = 0; m < 3; ++m) {
      ok[m] += err[m] < 0.02;
      worst[m] = std::max(worst[m], err[m]);
    }
  }
  const bool pass = std::all_of(ok, ok + 3, [&](int k) { return k >= 95 * reps / 100; });
  return {pass, fmt("reps with max error < 0.02: goodman %d/%d king-ols %d/%d brown-payne %d/%d "
                    "(worst %.4f %.4f %.4f)",
                    ok[0], reps, ok[1], reps, ok[2], reps, worst[0], worst[1], worst[2])};
}

// ---------------------------------------------------------------------------

GeneratorConfig single_cell_bias(double slope, Index units, double size, std::uint64_t seed) {
  GeneratorConfig cfg = no_bias_config(3, 2, units, size, seed);
  cfg.bias.assign(3, Eigen::MatrixXd::Zero(3, 1));
  cfg.bias[0](0, 0) = slope;  // row 0's first column responds to its own share
  return cfg;
}

Outcome bias_monotone() {
  const std::vector<double> grid{0.5, 1.0, 2.0, 4.0};
  const int seeds = 20;
  int steps = 0;
  int increasing = 0;
  std::string example;
  for (int s = 0; s < seeds; ++s) {
    std::vector<double> bias;
    for (double slope : grid) {
      const SyntheticPopulation pop = generate(single_cell_bias(slope, 600, 1000.0, 2000 + static_cast<std::uint64_t>(s)));
      const GoodmanFit fit = fit_goodman(pop.units, pop.meta, {.truncate = false});
      bias.push_back(fit.pi_raw(0, 0) - pop.truth.expected_pooled(0, 0));
    }
    for (std::size_t k = 1; k < bias.size(); ++k) {
      ++steps;
      increasing += bias[k] > bias[k - 1];
    }
    if (s == 0) example = fmt("seed0 bias %.4f %.4f %.4f %.4f", bias[0], bias[1], bias[2], bias[3]);
  }
  return {increasing == steps, fmt("monotone grid steps %d/%d; %s", increasing, steps, example.c_str())};
}

// ---------------------------------------------------------------------------

Outcome diagnostic_size_power() {
  const int reps = 200;
  Index significant = 0;
  Index coefficients = 0;
  int power_hits = 0;
  for (int r = 0; r < reps; ++r) {
    const auto seed = 3000 + static_cast<std::uint64_t>(r);
    const SyntheticPopulation null_pop = generate(no_bias_config(3, 2, 200, 500.0, seed));
    const BiasTestReport null_rep = bias_condition_test(null_pop.tables, nullptr, 0.05);
    significant += static_cast<Index>(std::lround(null_rep.fraction_significant_5pct *
                                                  static_cast<double>(null_rep.num_coefficients)));
    coefficients += null_rep.num_coefficients;

    const SyntheticPopulation biased = generate(single_cell_bias(3.0, 200, 500.0, seed));
    const BiasTestReport rep = bias_condition_test(biased.tables, nullptr, 0.05);
    // row 0 is biased in its own share t_1
    for (const BiasCellTest& cell : rep.cells) {
      if (cell.row == 0) power_hits += cell.p_values(1) < 0.05;
    }
  }
  const double size = static_cast<double>(significant) / static_cast<double>(coefficients);
  const double power = static_cast<double>(power_hits) / reps;
  const bool pass = size >= 0.02 && size <= 0.09 && power >= 0.99;
  return {pass, fmt("null rejection rate %.4f (%lld of %lld coefficients), power at slope 3 %.3f", size,
                    static_cast<long long>(significant), static_cast<long long>(coefficients), power)};
}

// ---------------------------------------------------------------------------

GeneratorConfig strong_association(std::uint64_t seed) {
  GeneratorConfig cfg = no_bias_config(3, 3, 400, 800.0, seed);
  cfg.base_pi = (Eigen::MatrixXd(3, 3) << 0.1, 0.3, 0.6,  //
                 0.6, 0.3, 0.1,                          //
                 0.3, 0.6, 0.1)
                    .finished();
  cfg.concentration = Eigen::VectorXd::Constant(3, 6.0);
  cfg.bias.assign(3, Eigen::MatrixXd::Zero(3, 2));
  for (Index i = 0; i < 3; ++i) cfg.bias[static_cast<std::size_t>(i)](i, 0) = 3.0;
  return cfg;
}

Outcome covariate_rescue() {
  const int reps = 20;
  Eigen::MatrixXd mean_plain = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd mean_cov = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd mean_truth = Eigen::MatrixXd::Zero(3, 3);
  const std::vector<MarginalCovariate> own{{"t_1", {0}}, {"t_2", {1}}, {"t_3", {2}}};
  BPOptions with_cov;
  with_cov.mask = CovariateMask::Constant(3, 3, false);
  with_cov.mask.diagonal().setConstant(true);
  for (int r = 0; r < reps; ++r) {
    const SyntheticPopulation pop = generate(strong_association(4000 + static_cast<std::uint64_t>(r)));
    const CovariateTable z = marginal_covariates(pop.units, own);
    mean_plain += fit_brown_payne(pop.units, pop.meta).pi_hat.matrix() / reps;
    mean_cov += fit_brown_payne(pop.units, pop.meta, z.aligned(pop.units), with_cov).pi_hat.matrix() / reps;
    mean_truth += pop.truth.expected_pooled / reps;
  }
  const double bias_plain = max_abs_diff(mean_plain, mean_truth);
  const double bias_cov = max_abs_diff(mean_cov, mean_truth);
  const double reduction = 1.0 - bias_cov / bias_plain;
  return {reduction >= 0.5, fmt("max-cell bias without covariates %.4f, with own-marginal covariates %.4f "
                                "(reduction %.1f%%)",
                                bias_plain, bias_cov, 100.0 * reduction)};
}

// ---------------------------------------------------------------------------

const std::vector<MarginalCovariate> kAgeShares{{"P45_65", {3, 9}}, {"P65_75", {4, 10}}};

UnitPredictions observed_yes(const SyntheticPopulation& pop) {
  UnitPredictions out;
  const Index N = static_cast<Index>(pop.tables.size());
  const Index R = pop.meta.rows();
  out.cells.resize(N, R);
  for (Index u = 0; u < N; ++u) {
    const IndividualTable& t = pop.tables[static_cast<std::size_t>(u)];
    out.unit_ids.push_back(t.id);
    out.cells.row(u) = t.counts.col(1).cast<double>().transpose();
  }
  out.totals = out.cells.rowwise().sum();
  return out;
}

UnitPredictions as_predictions(const SyntheticPopulation& pop, Eigen::MatrixXd cells) {
  UnitPredictions out;
  for (const UnitAggregate& u : pop.units) out.unit_ids.push_back(u.id);
  out.totals = cells.rowwise().sum();
  out.cells = std::move(cells);
  return out;
}

Outcome weak_association() {
  const int reps = 5;
  const Index R = 12;
  double sd_bp = 0.0;
  double sd_ml = 0.0;
  Eigen::VectorXd cell_bp = Eigen::VectorXd::Zero(R);
  Eigen::VectorXd cell_ml = Eigen::VectorXd::Zero(R);
  for (int r = 0; r < reps; ++r) {
    GeneratorConfig cfg = palermo_like_config();
    cfg.seed = 5000 + static_cast<std::uint64_t>(r);
    const SyntheticPopulation pop = generate(cfg);
    const CovariateTable cov = join_covariates(pop.covariates, marginal_covariates(pop.units, kAgeShares));
    const Eigen::MatrixXd z = cov.aligned(pop.units);

    const BPFit bp = fit_brown_payne(pop.units, pop.meta, z);
    const std::vector<Eigen::MatrixXd> bp_cells = bp_predict_cells(bp, pop.units, z);
    Eigen::MatrixXd bp_yes(static_cast<Index>(pop.units.size()), R);
    for (std::size_t u = 0; u < bp_cells.size(); ++u) bp_yes.row(static_cast<Index>(u)) = bp_cells[u].col(1).transpose();

    MultilevelStructure st;
    st.compute_se = false;
    const MLFit ml = fit_multilevel(cell_observations(pop.tables, pop.meta, 1), cov, st);

    const UnitPredictions obs = observed_yes(pop);
    const ErrorSD e_bp = prediction_error_sd(as_predictions(pop, bp_yes), obs);
    const ErrorSD e_ml = prediction_error_sd(as_predictions(pop, ml_predict_cells(ml, pop.units, cov)), obs);
    sd_bp += e_bp.overall / reps;
    sd_ml += e_ml.overall / reps;
    cell_bp += e_bp.per_cell / reps;
    cell_ml += e_ml.per_cell / reps;
  }
  const Index worse = (cell_bp.array() > cell_ml.array()).count();
  const double rel = std::abs(sd_bp - sd_ml) / sd_ml;
  const bool pass = rel <= 0.10 && worse * 3 >= R;
  return {pass, fmt("total-prediction SD brown-payne %.3f vs multilevel %.3f (%.1f%% apart); "
                    "cells where brown-payne SD is larger: %lld/12",
                    sd_bp, sd_ml, 100.0 * rel, static_cast<long long>(worse))};
}

// ---------------------------------------------------------------------------

// Likelihood on a Palermo-scale dataset with group intercepts and standardized covariates.
struct LikelihoodFixture {
  std::vector<CellObservation> obs;
  Eigen::MatrixXd X;
  Eigen::VectorXd beta0;
};

LikelihoodFixture likelihood_fixture(const SyntheticPopulation& pop, const CovariateTable& cov) {
  LikelihoodFixture f;
  f.obs = cell_observations(pop.tables, pop.meta, 1);
  const Index n = static_cast<Index>(f.obs.size());
  const Index G = pop.meta.rows();
  const Index q = cov.size();
  Eigen::VectorXd mean = cov.values.colwise().mean().transpose();
  Eigen::VectorXd sd(q);
  for (Index l = 0; l < q; ++l) sd(l) = std::sqrt((cov.values.col(l).array() - mean(l)).square().mean());
  f.X = Eigen::MatrixXd::Zero(n, G + q);
  Eigen::VectorXd trials(n);
  Eigen::VectorXd successes(n);
  for (Index k = 0; k < n; ++k) {
    const CellObservation& o = f.obs[static_cast<std::size_t>(k)];
    f.X(k, o.group) = 1.0;
    const Index u = *cov.find(o.unit_id);
    for (Index l = 0; l < q; ++l) f.X(k, G + l) = (cov.values(u, l) - mean(l)) / sd(l);
    trials(k) = static_cast<double>(o.trials);
    successes(k) = static_cast<double>(o.successes);
  }
  f.beta0 = fit_binomial_logistic(f.X, trials, successes).beta;
  return f;
}

Outcome multilevel_recovery() {
  const int reps = 50;
  const double s_station = 0.2311;
  const double s_seat = 0.2547;
  const std::vector<MarginalCovariate> ages{{"P45_75", {3, 4, 9, 10}}, {"P25_45", {1, 2, 7, 8}}};
  int within = 0;
  int station_ok = 0;
  int seat_ok = 0;
  double mean_station = 0.0;
  double mean_seat = 0.0;
  double worst_station = 0.0;
  double worst_seat = 0.0;
  MultilevelStructure st;
  st.compute_se = false;
  for (int r = 0; r < reps; ++r) {
    GeneratorConfig cfg = palermo_like_config();
    cfg.seed = 6000 + static_cast<std::uint64_t>(r);
    const SyntheticPopulation pop = generate(cfg);
    const CovariateTable cov = join_covariates(pop.covariates, marginal_covariates(pop.units, ages));
    const MLFit fit = fit_multilevel(cell_observations(pop.tables, pop.meta, 1), cov, st);
    const double ds = std::abs(fit.sigma_station(0) - s_station);
    const double dt = std::abs(fit.sigma_seat(0) - s_seat);
    within += ds <= 0.05 && dt <= 0.05;
    station_ok += ds <= 0.05;
    seat_ok += dt <= 0.05;
    mean_station += fit.sigma_station(0) / reps;
    mean_seat += fit.sigma_seat(0) / reps;
    worst_station = std::max(worst_station, ds);
    worst_seat = std::max(worst_seat, dt);
  }

  // gradient and quadrature checks on one dataset
  const SyntheticPopulation pop = generate(palermo_like_config());
  const CovariateTable cov = join_covariates(pop.covariates, marginal_covariates(pop.units, ages));
  const LikelihoodFixture f = likelihood_fixture(pop, cov);
  const std::vector<Index> cls(f.obs.size(), 0);
  MultilevelLikelihood lik(f.obs, f.X, cls, 3, 9);
  std::mt19937_64 rng(7);
  std::normal_distribution<double> jitter(0.0, 0.1);
  double worst_grad = 0.0;
  for (int trial = 0; trial < 3; ++trial) {
    Eigen::VectorXd theta(lik.num_params());
    theta.head(f.beta0.size()) = f.beta0;
    theta.tail(2) << s_station, s_seat;
    for (Index k = 0; k < theta.size(); ++k) theta(k) += jitter(rng);
    Eigen::VectorXd g;
    lik.value_and_gradient(theta, g);
    const Eigen::VectorXd fd = numeric_gradient([&](const Eigen::VectorXd& x) { return lik.value(x); }, theta, 1e-5);
    worst_grad = std::max(worst_grad, (g - fd).norm() / fd.norm());
  }
  Eigen::VectorXd theta(lik.num_params());
  theta.head(f.beta0.size()) = f.beta0;
  theta.tail(2) << s_station, s_seat;
  const double ll9 = lik.value(theta);
  lik.set_quadrature_nodes(15);
  const double ll15 = lik.value(theta);
  const double drift = std::abs(ll15 - ll9);

  const bool pass = within * 10 >= reps * 9 && worst_grad < 1e-4 && drift < 1e-4;
  return {pass, fmt("both sigmas within 0.05 in %d/%d reps (station %d, seat %d; mean estimates %.4f %.4f; "
                    "worst |error| %.3f %.3f); gradient rel. error %.2e; 9->15 node drift %.2e (loglik %.2f)",
                    within, reps, station_ok, seat_ok, mean_station, mean_seat, worst_station, worst_seat, worst_grad,
                    drift, ll9)};
}

// ---------------------------------------------------------------------------

Outcome estimator_agreement() {
  const int reps = 20;
  double king_goodman = 0.0;
  double bp_king = 0.0;
  BPOptions fixed;
  fixed.fix_phi = 0.0;
  fixed.fix_tau = 0.0;
  for (int r = 0; r < reps; ++r) {
    const SyntheticPopulation pop = generate(no_bias_config(3, 3, 600, 1000.0, 7000 + static_cast<std::uint64_t>(r)));
    const Eigen::MatrixXd g = fit_goodman(pop.units, pop.meta).pi_hat;
    const Eigen::MatrixXd k = fit_king_ols(pop.units, pop.meta).pi_hat.matrix();
    const Eigen::MatrixXd b = fit_brown_payne(pop.units, pop.meta, {}, fixed).pi_hat.matrix();
    king_goodman = std::max(king_goodman, max_abs_diff(k, g));
    bp_king = std::max(bp_king, max_abs_diff(b, k));
  }
  const bool pass = king_goodman < 0.02 && bp_king < 0.01;
  return {pass, fmt("over %d datasets: max |king-ols - goodman| %.2e, max |brown-payne(phi=tau=0) - king-ols| %.2e",
                    reps, king_goodman, bp_king)};
}

// ---------------------------------------------------------------------------

// Largest |weighted correlation| between a residual column and a non-constant
// design column, and largest |cosine| with the intercept column.
double worst_orthogonality(const SyntheticPopulation& pop, bool weighted) {
  const GoodmanFit fit = fit_goodman(pop.units, pop.meta, {.weighted = weighted, .truncate = false});
  const StackedProportions s = stack_proportions(pop.units);
  const Eigen::MatrixXd X = goodman_design(s.t);
  const Eigen::VectorXd w = weighted ? s.n : Eigen::VectorXd::Ones(s.n.size());
  const auto inner = [&](const Eigen::VectorXd& a, const Eigen::VectorXd& b) { return (w.array() * a.array() * b.array()).sum(); };
  const auto centred = [&](const Eigen::VectorXd& a) {
    return Eigen::VectorXd(a.array() - (w.array() * a.array()).sum() / w.sum());
  };
  double worst = 0.0;
  for (Index j = 0; j < fit.residuals.cols(); ++j) {
    for (Index k = 0; k < X.cols(); ++k) {
      const Eigen::VectorXd x = k > 0 ? centred(X.col(k)) : Eigen::VectorXd(X.col(k));
      const Eigen::VectorXd r = k > 0 ? centred(fit.residuals.col(j)) : Eigen::VectorXd(fit.residuals.col(j));
      const double denom = std::sqrt(inner(x, x) * inner(r, r));
      if (denom > 0) worst = std::max(worst, std::abs(inner(x, r)) / denom);
    }
  }
  return worst;
}

Outcome orthogonality() {
  std::vector<std::pair<std::string, SyntheticPopulation>> data;
  data.emplace_back("no-bias 3x3", generate(no_bias_config(3, 3, 600, 1000.0, 8001)));
  data.emplace_back("no-bias 4x2", generate(no_bias_config(4, 2, 150, 300.0, 8002)));
  data.emplace_back("single-cell bias", generate(single_cell_bias(4.0, 600, 1000.0, 8003)));
  data.emplace_back("strong association", generate(strong_association(8004)));
  data.emplace_back("palermo-like", generate(palermo_like_config()));
  double worst = 0.0;
  for (const auto& [name, pop] : data) {
    worst = std::max({worst, worst_orthogonality(pop, false), worst_orthogonality(pop, true)});
  }
  return {worst < 1e-10, fmt("max |corr(residual, design column)| over %zu datasets, weighted and unweighted: %.2e",
                             data.size(), worst)};
}

// ---------------------------------------------------------------------------

struct GridPoint {
  double phi;
  double tau;
  Count n;
  Eigen::Vector3d t;
};

// Column shares of one unit drawn from the nested Dirichlet-multinomial:
// q ~ Dir(mu * a), p_i ~ Dir(q * b), row i's x_i voters ~ Mult(x_i, p_i).
// Same-row voter pairs then correlate by phi and cross-row pairs by tau.
Eigen::MatrixXd simulated_covariance(const GridPoint& g, const Eigen::VectorXd& mu, const CountVector& x, int draws,
                                     std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Index C = mu.size();
  const double a = g.tau > 0 ? 1.0 / g.tau - 1.0 : 0.0;
  const double rho_b = 1.0 - (1.0 - g.phi) / (1.0 - g.tau);
  const double b = rho_b > 0 ? 1.0 / rho_b - 1.0 : 0.0;
  const auto dirichlet = [&](const Eigen::VectorXd& alpha) {
    Eigen::VectorXd out(alpha.size());
    for (Index j = 0; j < alpha.size(); ++j) out(j) = std::gamma_distribution<double>(alpha(j), 1.0)(rng);
    return Eigen::VectorXd(out / out.sum());
  };
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(C);
  Eigen::MatrixXd sum_sq = Eigen::MatrixXd::Zero(C, C);
  const double n = static_cast<double>(x.sum());
  for (int d = 0; d < draws; ++d) {
    const Eigen::VectorXd q = g.tau > 0 ? dirichlet(mu * a) : mu;
    Eigen::VectorXd y = Eigen::VectorXd::Zero(C);
    for (Index i = 0; i < x.size(); ++i) {
      const Eigen::VectorXd p = rho_b > 0 ? dirichlet(q * b) : q;
      Count left = x(i);
      double rest = 1.0;
      for (Index j = 0; j + 1 < C && left > 0; ++j) {
        const double share = std::clamp(p(j) / rest, 0.0, 1.0);
        const Count k = std::binomial_distribution<Count>(left, share)(rng);
        y(j) += static_cast<double>(k);
        left -= k;
        rest -= p(j);
      }
      y(C - 1) += static_cast<double>(left);
    }
    const Eigen::VectorXd v = y / n;
    sum += v;
    sum_sq += v * v.transpose();
  }
  const Eigen::VectorXd mean = sum / draws;
  return (sum_sq - draws * mean * mean.transpose()) / (draws - 1.0);
}

Outcome covariance_oracle() {
  const Eigen::Vector3d mu(0.5, 0.3, 0.2);
  const std::vector<GridPoint> grid{{0.05, 0.01, 50, {0.5, 0.3, 0.2}},
                                    {0.20, 0.05, 200, {0.2, 0.2, 0.6}},
                                    {0.01, 0.00, 1000, {0.8, 0.1, 0.1}}};
  LinkParams theta;
  theta.gamma.resize(3, 2);
  for (Index i = 0; i < 3; ++i) theta.gamma.row(i) = reference_logits(mu, 0.0).transpose();
  double worst = 0.0;
  std::string parts;
  std::uint64_t seed = 9001;
  for (const GridPoint& g : grid) {
    CountVector x(3);
    for (Index i = 0; i < 3; ++i) x(i) = std::llround(g.t(i) * static_cast<double>(g.n));
    const UnitAggregate unit = make_unit("u", x, (mu * static_cast<double>(g.n)).array().round().cast<Count>());
    const Eigen::MatrixXd analytic = bp_covariance(theta, {g.phi, g.tau}, unit).matrix;
    const Eigen::MatrixXd mc = simulated_covariance(g, mu, x, 1'000'000, seed++);
    const double rel = (mc - analytic).norm() / analytic.norm();
    worst = std::max(worst, rel);
    parts += fmt(" (phi=%.2f tau=%.2f n=%lld): %.3f%%", g.phi, g.tau, static_cast<long long>(g.n), 100.0 * rel);
  }
  return {worst < 0.01, "relative Frobenius error of analytic vs 10^6-draw covariance" + parts};
}

}  // namespace

int main(int argc, char** argv) {
  // optional arguments select criteria by number
  std::vector<int> only;
  for (int a = 1; a < argc; ++a) only.push_back(std::atoi(argv[a]));
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"two-station paradox", two_station_paradox},
      {"unbiasedness without aggregation bias", unbiasedness},
      {"goodman bias monotone in slope", bias_monotone},
      {"bias-condition test size and power", diagnostic_size_power},
      {"covariate rescue under strong association", covariate_rescue},
      {"weak association prediction pattern", weak_association},
      {"multilevel recovery, gradient, quadrature", multilevel_recovery},
      {"estimator agreement without bias", estimator_agreement},
      {"goodman residual orthogonality", orthogonality},
      {"brown-payne covariance vs Monte Carlo", covariance_oracle},
  };
  int failures = 0;
  int number = 0;
  for (const auto& [name, check] : criteria) {
    ++number;
    if (!only.empty() && std::find(only.begin(), only.end(), number) == only.end()) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.pass;
    std::printf("%s criterion %d (%s): %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", number, name, o.detail.c_str(),
                seconds_since(start));
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
