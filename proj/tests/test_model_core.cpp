#include "emlq/errors.hpp"
#include "emlq/model.hpp"
#include "emlq/scenarios.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace emlq;
using testing::scalar;

TEST_CASE("grid covers [0, 2T] with T on a node") {
  const TimeGrid g = build_time_grid(1.0, 1e-3);
  CHECK(g.steps() == 1000);
  CHECK(g.size() == 2001);
  CHECK(g.node(0) == 0.0);
  CHECK(g.node(g.steps()) == 1.0);
  CHECK(g.node(g.size() - 1) == doctest::Approx(2.0));
}

TEST_CASE("grid rejects bad input") {
  CHECK_THROWS_AS(build_time_grid(0.0, 1e-3), ConfigError);
  CHECK_THROWS_AS(build_time_grid(1.0, -1e-3), ConfigError);
  CHECK_THROWS_AS(build_time_grid(1.0, 0.3), ConfigError);
}

TEST_CASE("piecewise linear evaluation and exact integration") {
  const TimeGrid g = build_time_grid(1.0, 0.1);
  std::vector<Eigen::MatrixXd> v;
  for (int k = 0; k <= g.steps(); ++k) v.push_back(scalar(2.0 * g.node(k) + 1.0));
  const MatrixFunction f = sample_on(g, v);
  CHECK(f.eval(0.25)(0, 0) == doctest::Approx(1.5));
  // int_0.15^0.85 (2t + 1) dt
  CHECK(f.integrate(0.15, 0.85)(0, 0) == doctest::Approx(0.85 * 0.85 - 0.15 * 0.15 + 0.7));
  CHECK_THROWS_AS(f.eval(1.5), RangeError);
}

TEST_CASE("zero extension keeps f(T) and zeros the rest exactly") {
  const TimeGrid g = build_time_grid(1.0, 0.01);
  const MatrixFunction f = zero_extend(MatrixFunction::constant(g, scalar(3.0)), g);
  REQUIRE(f.extended());
  CHECK(f[g.steps()](0, 0) == 3.0);
  for (int k = g.steps() + 1; k < g.size(); ++k) CHECK(f[k](0, 0) == 0.0);
}

TEST_CASE("game validation rejects asymmetric weights and bad shapes") {
  const TimeGrid g = build_time_grid(1.0, 0.01);
  ConstantCoefficients c = scalar_toy(false);
  c.l1 = (Eigen::MatrixXd(2, 2) << 1, 2, 0, 1).finished();
  CHECK_THROWS_AS(make_game(g, c), ConfigError);

  ConstantCoefficients d = scalar_toy(false);
  d.g1 = (Eigen::MatrixXd(2, 2) << 1, 0, 0, 1).finished();
  CHECK_THROWS_AS(make_game(g, d), ConfigError);

  ConstantCoefficients e = scalar_toy(false);
  e.x0 = Eigen::VectorXd::Constant(1, std::nan(""));
  CHECK_THROWS_AS(make_game(g, e), ConfigError);
}

TEST_CASE("game coefficients vanish beyond T") {
  const TimeGrid g = build_time_grid(1.0, 0.01);
  const GameCoefficients c = make_game(g, scalar_toy(false));
  for (int k = g.steps() + 1; k < g.size(); ++k) {
    CHECK(c.a1[k](0, 0) == 0.0);
    CHECK(c.r1[k](0, 0) == 0.0);
    CHECK(c.lbar2[k](0, 0) == 0.0);
  }
}
