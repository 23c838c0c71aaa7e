#include <cmath>

#include <doctest.h>

#include "fixtures.hpp"
#include "oracles.hpp"
#include "uwdl/transport.hpp"

using namespace uwdl;

namespace {

CostMatrix swap_cost(double c) {
  Matrix m(2, 2);
  m << 0, c, c, 0;
  return CostMatrix(m);
}

Vector vec(std::initializer_list<double> xs) {
  Vector v(Eigen::Index(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

SinkhornConfig tight(double eps, double tau = 1.0) {
  SinkhornConfig c;
  c.epsilon = eps;
  c.tau = tau;
  c.tolerance = 1e-13;
  c.max_iters = 200000;
  return c;
}

}  // namespace

TEST_CASE("kl divergence uses the unnormalized convention") {
  CHECK(kl_divergence(vec({1.0, 2.0}), vec({1.0, 2.0})) == doctest::Approx(0.0));
  CHECK(kl_divergence(vec({0.0, 0.0}), vec({1.0, 2.0})) == doctest::Approx(3.0));
  CHECK(kl_divergence(vec({2.0}), vec({1.0})) == doctest::Approx(2.0 * std::log(2.0) - 1.0));
  CHECK(std::isinf(kl_divergence(vec({1.0}), vec({0.0}))));
}

TEST_CASE("balanced 1x1 coupling is forced") {
  const Matrix c = Matrix::Constant(1, 1, 3.0);
  const auto r = solve_balanced(vec({1.0}), vec({1.0}), c, tight(0.1));
  CHECK(r.plan(0, 0) == doctest::Approx(1.0));
  CHECK((r.plan.array() * c.array()).sum() == doctest::Approx(3.0));
}

TEST_CASE("rectangular costs are accepted") {
  std::mt19937_64 rng(5);
  const Vector mu = fixtures::random_probability(rng, 3), nu = fixtures::random_probability(rng, 5);
  const Matrix c = fixtures::random_rows(rng, 3, 5, 0.0, 2.0);
  const auto r = solve_balanced(mu, nu, c, tight(0.1));
  CHECK(std::abs(r.cost - oracles::balanced_ot(mu, nu, c, 0.1)) < 1e-6);
  CHECK_THROWS_AS(solve_balanced(nu, mu, c, tight(0.1)), Error);
  Matrix bad = c;
  bad(0, 0) = -1.0;
  CHECK_THROWS_AS(solve_balanced(mu, nu, bad, tight(0.1)), Error);
}

TEST_CASE("balanced plan on a symmetric problem is swap-symmetric") {
  const auto r = solve_balanced(vec({0.5, 0.5}), vec({0.5, 0.5}), swap_cost(1.0), tight(0.1));
  CHECK(r.converged);
  CHECK(r.plan(0, 0) == doctest::Approx(r.plan(1, 1)).epsilon(1e-12));
  CHECK(r.plan(0, 1) == doctest::Approx(r.plan(1, 0)).epsilon(1e-12));
}

TEST_CASE("balanced objective matches the Newton oracle") {
  const Vector mu = vec({0.7, 0.3}), nu = vec({0.4, 0.6});
  const auto r = solve_balanced(mu, nu, swap_cost(1.0), tight(0.05));
  const double oracle = oracles::balanced_ot(mu, nu, swap_cost(1.0).entries(), 0.05);
  CHECK(std::abs(r.cost - oracle) < 1e-4);
  CHECK(r.plan.rowwise().sum().isApprox(mu, 1e-9));
  CHECK(r.plan.colwise().sum().transpose().isApprox(nu, 1e-9));
}

TEST_CASE("balanced solver rejects unequal masses") {
  CHECK_THROWS_AS(solve_balanced(vec({1.0, 1.0}), vec({1.0, 0.5}), swap_cost(1.0), tight(0.1)), Error);
  CHECK_THROWS_AS(solve_balanced(vec({0.0, 0.0}), vec({0.0, 0.0}), swap_cost(1.0), tight(0.1)), Error);
}

TEST_CASE("non-convergence is flagged, not fatal") {
  SinkhornConfig c = tight(0.01);
  c.max_iters = 2;
  const auto r = solve_balanced(vec({0.9, 0.1}), vec({0.1, 0.9}), swap_cost(1.0), c);
  CHECK_FALSE(r.converged);
  CHECK(r.iterations == 2);
}

TEST_CASE("unbalanced self-transport on one point costs nothing") {
  const auto r = solve_unbalanced(vec({1.0}), vec({1.0}), CostMatrix(Matrix::Zero(1, 1)), tight(1e-3, 5.0));
  CHECK(r.plan(0, 0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(std::abs(r.cost) < 1e-9);
}

TEST_CASE("unbalanced cost approaches the balanced one as tau grows") {
  const Vector mu = vec({0.7, 0.3}), nu = vec({0.4, 0.6});
  const auto bal = solve_balanced(mu, nu, swap_cost(1.0), tight(0.05));
  const double ref = primal_cost(bal.plan, swap_cost(1.0), mu, nu, 0.05, 1.0, TransportMode::unbalanced);
  double prev = 1e300;
  for (double tau : {1e2, 1e4, 1e6}) {
    const auto r = solve_unbalanced(mu, nu, swap_cost(1.0), tight(0.05, tau));
    const double gap = std::abs(r.cost - ref);
    CHECK(gap < prev);
    prev = gap;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("unbalanced objective matches a grid oracle on a sparse 2x2 instance") {
  const Vector mu = vec({1.0, 0.0}), nu = vec({0.0, 0.5});
  Matrix c(2, 2);
  c << 0, 10, 10, 0;
  const auto r = solve_unbalanced(mu, nu, CostMatrix(c), tight(0.01, 0.5));
  const double oracle = oracles::unbalanced_ot_grid(mu, nu, c, 0.01, 0.5);
  CHECK(std::abs(r.cost - oracle) < 1e-3);
}

TEST_CASE("unbalanced with an all-zero side returns the zero plan") {
  const Vector mu = vec({0.0, 0.0}), nu = vec({0.2, 0.3});
  const auto r = solve_unbalanced(mu, nu, swap_cost(1.0), tight(0.1, 2.0));
  CHECK(r.plan.isZero());
  // tau KL(0|nu) = tau * |nu|; eps KL(0|0) = 0.
  CHECK(r.cost == doctest::Approx(2.0 * 0.5));
  CHECK_THROWS_AS(solve_unbalanced(mu, mu, swap_cost(1.0), tight(0.1)), Error);
}

TEST_CASE("primal cost conventions") {
  std::mt19937_64 rng(3);
  const Vector mu = fixtures::random_measure(rng, 3), nu = fixtures::random_measure(rng, 3);
  const CostMatrix c = fixtures::random_grid_cost(rng, 3, 10.0);

  SUBCASE("independent coupling has no entropic term") {
    const Matrix x = mu * nu.transpose();
    const double with_eps = primal_cost(x, c, mu, nu, 0.7, 1.3, TransportMode::unbalanced);
    const double without = primal_cost(x, c, mu, nu, 0.0, 1.3, TransportMode::unbalanced);
    CHECK(with_eps == doctest::Approx(without).epsilon(1e-14));
  }
  SUBCASE("zero plan in balanced mode evaluates to zero") {
    CHECK(primal_cost(Matrix::Zero(3, 3), c, mu, nu, 0.1, 1.0, TransportMode::balanced) == 0.0);
  }
  SUBCASE("random plan matches direct summation") {
    const Matrix x = fixtures::random_rows(rng, 3, 3);
    CHECK(std::abs(primal_cost(x, c, mu, nu, 0.3, 2.0, TransportMode::unbalanced) -
                   oracles::unbalanced_objective(x, c.entries(), mu, nu, 0.3, 2.0)) < 1e-12);
    CHECK(std::abs(primal_cost(x, c, mu, nu, 0.3, 2.0, TransportMode::balanced) -
                   oracles::balanced_objective(x, c.entries(), 0.3)) < 1e-12);
  }
  SUBCASE("mass outside the reference support is infinite") {
    Vector mu0 = mu;
    mu0[0] = 0.0;
    Matrix x = Matrix::Constant(3, 3, 0.1);
    CHECK(std::isinf(primal_cost(x, c, mu0, nu, 0.1, 1.0, TransportMode::unbalanced)));
  }
}

TEST_CASE("balanced residuals never increase after the first iterations") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index d = 2 + Eigen::Index(seed % 5);
    const Vector mu = fixtures::random_probability(rng, d), nu = fixtures::random_probability(rng, d);
    SinkhornConfig c = tight(0.05 + 0.01 * double(seed % 7));
    c.record_residuals = true;
    c.max_iters = 500;
    const auto r = solve_balanced(mu, nu, fixtures::random_grid_cost(rng, std::size_t(d), 1.0), c);
    for (std::size_t t = 5; t < r.residuals.size(); ++t) {
      INFO("seed " << seed << " iteration " << t);
      REQUIRE(r.residuals[t] <= r.residuals[t - 1] + 1e-12);
    }
  }
}

TEST_CASE("transport cost is symmetric in its arguments") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index d = 2 + Eigen::Index(seed % 4);
    const CostMatrix c = fixtures::random_grid_cost(rng, std::size_t(d), 1.0);
    const Vector p = fixtures::random_probability(rng, d), q = fixtures::random_probability(rng, d);
    CHECK(std::abs(solve_balanced(p, q, c, tight(0.1)).cost - solve_balanced(q, p, c, tight(0.1)).cost) < 1e-9);
    const Vector a = fixtures::random_measure(rng, d), b = fixtures::random_measure(rng, d);
    CHECK(std::abs(solve_unbalanced(a, b, c, tight(0.1, 2.0)).cost -
                   solve_unbalanced(b, a, c, tight(0.1, 2.0)).cost) < 1e-9);
  }
}

TEST_CASE("log-domain results agree with plain scaling") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    const Eigen::Index d = 3 + Eigen::Index(seed % 3);
    const CostMatrix c = fixtures::random_grid_cost(rng, std::size_t(d), 1.0);
    const Vector a = fixtures::random_measure(rng, d), b = fixtures::random_measure(rng, d);
    SinkhornConfig plain = tight(0.1, 3.0), logd = plain;
    logd.force_log_domain = true;
    const auto r1 = solve_unbalanced(a, b, c, plain), r2 = solve_unbalanced(a, b, c, logd);
    CHECK_FALSE(r1.log_domain);
    CHECK(r2.log_domain);
    CHECK((r1.plan - r2.plan).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(std::abs(r1.cost - r2.cost) < 1e-8);

    const Vector p = a / a.sum(), q = b / b.sum();
    const auto s1 = solve_balanced(p, q, c, plain), s2 = solve_balanced(p, q, c, logd);
    CHECK((s1.plan - s2.plan).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("tiny epsilon switches to the log domain automatically") {
  const Vector mu = vec({0.7, 0.3}), nu = vec({0.4, 0.6});
  SinkhornConfig c = tight(1e-3);
  c.max_iters = 20000;
  const auto r = solve_balanced(mu, nu, swap_cost(10.0), c);
  CHECK(r.log_domain);
  CHECK(r.plan.allFinite());
  CHECK(r.plan.minCoeff() >= 0.0);
  CHECK(r.plan.rowwise().sum().isApprox(mu, 1e-8));
}

TEST_CASE("plans are nonnegative on random instances") {
  std::mt19937_64 rng(11);
  for (int t = 0; t < 20; ++t) {
    const CostMatrix c = fixtures::random_grid_cost(rng, 4, 10.0);
    const Vector a = fixtures::random_measure(rng, 4), b = fixtures::random_measure(rng, 4);
    CHECK(solve_unbalanced(a, b, c, tight(0.05, 1.0)).plan.minCoeff() >= 0.0);
  }
}

TEST_CASE("config validation") {
  SinkhornConfig c;
  c.epsilon = 0.0;
  CHECK_THROWS_AS(c.validate(TransportMode::balanced), Error);
  c = SinkhornConfig{};
  c.tau = -1.0;
  CHECK_THROWS_AS(c.validate(TransportMode::unbalanced), Error);
  c = SinkhornConfig{};
  c.max_iters = 0;
  CHECK_THROWS_AS(c.validate(TransportMode::balanced), Error);
}
