#include "doctest.h"
#include "ecoinf/goodman.hpp"
#include "ecoinf/king_ols.hpp"
#include "ecoinf/synth.hpp"
#include "helpers.hpp"

using namespace ecoinf;

TEST_CASE("least-squares gradient matches finite differences") {
  const SyntheticPopulation pop = generate(no_bias_config(3, 3, 30, 200.0, 4));
  const StackedProportions s = stack_proportions(pop.units);
  Eigen::MatrixXd z(s.t.rows(), 1);
  for (Index u = 0; u < z.rows(); ++u) z(u, 0) = std::sin(static_cast<double>(u));
  const LinkLayout layout(3, 3, 1);
  Eigen::VectorXd theta(layout.size());
  for (Index k = 0; k < theta.size(); ++k) theta(k) = 0.3 * std::cos(1.7 * static_cast<double>(k));
  for (bool weighted : {false, true}) {
    Eigen::VectorXd g;
    king_objective(layout, theta, s, z, weighted, &g);
    const auto f = [&](const Eigen::VectorXd& th) { return king_objective(layout, th, s, z, weighted); };
    const Eigen::VectorXd fd = numeric_gradient(f, theta);
    CHECK((g - fd).norm() / fd.norm() < 1e-7);
    const Eigen::VectorXd wrapped = king_gradient(layout.unpack(theta), pop.units, z, weighted);
    CHECK(test::max_abs(wrapped, g) < 1e-12);
  }
}

TEST_CASE("fit decreases the objective and matches goodman without bias") {
  const SyntheticPopulation pop = generate(no_bias_config(3, 2, 300, 800.0, 6));
  const KingFit fit = fit_king_ols(pop.units, pop.meta);
  CHECK(fit.converged);
  CHECK(fit.objective <= fit.initial_objective);
  for (std::size_t k = 1; k < fit.objective_trace.size(); ++k) {
    CHECK(fit.objective_trace[k] <= fit.objective_trace[k - 1]);
  }
  const GoodmanFit g = fit_goodman(pop.units, pop.meta);
  CHECK(test::max_abs(fit.pi_hat.matrix(), g.pi_hat) < 0.02);
  CHECK(test::max_abs(fit.pi_hat.matrix(), pop.truth.expected_pooled) < 0.03);
}

TEST_CASE("start values are the truncated goodman estimates") {
  const SyntheticPopulation pop = table1_fixture();
  const LinkLayout layout(2, 2, 0);
  const LinkParams start = goodman_start(pop.units, pop.meta, layout);
  CHECK(start.gamma(0, 0) == doctest::Approx(std::log(0.15 / 0.85)));
  CHECK(start.gamma(1, 0) == doctest::Approx(std::log(0.90 / 0.10)));
}

TEST_CASE("mask resolution") {
  CHECK(resolve_mask({}, 3, 2).all());
  CHECK(resolve_mask({}, 3, 2).rows() == 3);
  CovariateMask m = CovariateMask::Constant(2, 2, false);
  m(0, 1) = true;
  CHECK(resolve_mask(m, 2, 2).count() == 1);
}
