#include <random>

#include "doctest.h"
#include "ecoinf/link.hpp"
#include "ecoinf/optimize.hpp"
#include "helpers.hpp"

using namespace ecoinf;

namespace {

LinkParams random_params(const LinkLayout& layout, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> draw(0.0, 0.7);
  Eigen::VectorXd theta(layout.size());
  for (Index k = 0; k < theta.size(); ++k) theta(k) = draw(rng);
  return layout.unpack(theta);
}

}  // namespace

TEST_CASE("softmax with reference category") {
  const Eigen::VectorXd p = softmax_with_reference<double>(test::vec({std::log(2.0), 0.0}));
  CHECK(p(0) == doctest::Approx(0.5));
  CHECK(p(1) == doctest::Approx(0.25));
  CHECK(p(2) == doctest::Approx(0.25));
  const Eigen::VectorXd big = softmax_with_reference<double>(test::vec({800.0}));
  CHECK(big.allFinite());
  CHECK(big(0) == doctest::Approx(1.0));
}

TEST_CASE("reference logits invert the softmax") {
  const Eigen::VectorXd p = test::vec({0.2, 0.5, 0.3});
  const Eigen::VectorXd eta = reference_logits(p, 0.0);
  CHECK(test::max_abs(softmax_with_reference<double>(eta), p) < 1e-14);
}

TEST_CASE("pack and unpack round trip with a mask") {
  CovariateMask mask(3, 2);
  mask << true, false, false, true, true, true;
  const LinkLayout layout(3, 3, mask);
  CHECK(layout.size() == 3 * 2 + 4 * 2);
  CHECK(layout.delta_index(0, 0, 1) == -1);
  const LinkParams p = random_params(layout, 1);
  CHECK(p.delta[1].row(0).isZero());
  CHECK(test::max_abs(layout.pack(p), layout.pack(layout.unpack(layout.pack(p)))) == 0.0);
  const auto names = layout.parameter_names({"a", "b", "c"}, {"x", "y", "z"}, {"z1", "z2"});
  CHECK(names.size() == static_cast<std::size_t>(layout.size()));
}

TEST_CASE("link_mean Jacobian matches finite differences") {
  const LinkLayout layout(3, 3, 2);
  const LinkParams p = random_params(layout, 2);
  const Eigen::VectorXd t = test::vec({0.2, 0.5, 0.3});
  const Eigen::VectorXd z = test::vec({0.4, -1.0});
  Eigen::MatrixXd J;
  const Eigen::VectorXd mu = link_mean(layout, p, t, z, &J);
  CHECK(mu.sum() == doctest::Approx(1.0));
  const Eigen::VectorXd theta = layout.pack(p);
  for (Index j = 0; j < 3; ++j) {
    const auto f = [&](const Eigen::VectorXd& th) { return link_mean(layout, layout.unpack(th), t, z)(j); };
    CHECK(test::max_abs(numeric_gradient(f, theta).transpose(), J.row(j)) < 1e-8);
  }
}

TEST_CASE("population average Jacobian matches finite differences") {
  const LinkLayout layout(2, 3, 1);
  const LinkParams p = random_params(layout, 3);
  Eigen::MatrixXd x(4, 2);
  x << 10, 5, 3, 8, 0, 4, 7, 7;
  Eigen::MatrixXd z(4, 1);
  z << 0.1, 0.5, -0.3, 0.9;
  const Eigen::MatrixXd avg = population_average(p, x, z);
  CHECK(avg.rowwise().sum().isOnes(1e-12));
  const Eigen::MatrixXd J = population_average_jacobian(layout, p, x, z);
  const Eigen::VectorXd theta = layout.pack(p);
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 3; ++j) {
      const auto f = [&](const Eigen::VectorXd& th) { return population_average(layout.unpack(th), x, z)(i, j); };
      CHECK(test::max_abs(numeric_gradient(f, theta).transpose(), J.row(i * 3 + j)) < 1e-8);
    }
  }
}

TEST_CASE("covariate rank check names the problem") {
  Eigen::MatrixXd z(4, 2);
  z << 1, 2, 2, 4, 3, 6, 4, 8;
  CHECK_THROWS_AS(check_covariate_rank(z, {"a", "b"}), EstimationError);
  z.col(1) << 1, 0, 1, 5;
  CHECK_NOTHROW(check_covariate_rank(z, {"a", "b"}));
}

TEST_CASE("bfgs minimizes the Rosenbrock function with a decreasing trace") {
  const Objective f = [](const Eigen::VectorXd& x, Eigen::VectorXd* g) {
    const double a = 1.0 - x(0);
    const double b = x(1) - x(0) * x(0);
    if (g != nullptr) {
      g->resize(2);
      (*g)(0) = -2.0 * a - 400.0 * x(0) * b;
      (*g)(1) = 200.0 * b;
    }
    return a * a + 100.0 * b * b;
  };
  const MinimizeResult r = minimize_bfgs(f, test::vec({-1.2, 1.0}), {2000, 1e-16, 1e-10});
  CHECK(r.converged);
  CHECK(r.x(0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(r.x(1) == doctest::Approx(1.0).epsilon(1e-6));
  for (std::size_t k = 1; k < r.trace.size(); ++k) CHECK(r.trace[k] < r.trace[k - 1]);
}
