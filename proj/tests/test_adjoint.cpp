#include "emlq/adjoint.hpp"
#include "emlq/oracles.hpp"
#include "emlq/riccati.hpp"
#include "emlq/scenarios.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace emlq;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using testing::scalar;

namespace {

// eta1 of the scalar toy (r1 = 0.5, u2 = 1) written out by hand.
oracle::AnticipatedReference eta1_reference(double dt, StarVariant star) {
  const double a1 = -0.5, a2 = -0.12, c1 = 0.4, c2 = 0.3, b1 = -0.4, d1 = 1.0, b2 = 0.5,
               d2 = 0.2, r1 = 0.5;
  auto P = [=](double t) { return oracle::scalar_riccati(a1, c1, 1.0, 1.0, 1.0, t); };
  oracle::AnticipatedSource src;
  src.Z = [](double) { return scalar(1.0); };
  src.P = [=](double t) {
    const double p = P(t), xi = r1 + d1 * p * d1;
    return scalar(-a2 + c2 * p * d1 / xi * b1);
  };
  src.q = [=](double t) {
    const double p = P(t), xi = r1 + d1 * p * d1;
    return Vec::Constant(1, c2 * p * d1 / xi * d1 * p * d2 - c2 * p * d2);
  };
  return oracle::picard_anticipated(
      1.0, dt, 1, [=](double) { return scalar(-a1); },
      [=](double t) { return Vec::Constant(1, -(P(t) * b2 + c1 * P(t) * d2)); }, {src}, star);
}

AdjointSolution eta1_library(double dt, StarVariant star) {
  const TimeGrid g = build_time_grid(1.0, dt);
  const GameCoefficients c = make_game(g, scalar_toy(false));
  const RiccatiSolution r = solve_riccati(c);
  AdjointOptions opt;
  opt.star = star;
  return solve_eta1(c, r.pi1, r.xi1, std::vector<Vec>(g.steps() + 1, Vec::Ones(1)), opt);
}

}  // namespace

TEST_CASE("eta1 against the Picard reference") {
  for (StarVariant star : {StarVariant::Adjoint, StarVariant::Window}) {
    CAPTURE(static_cast<int>(star));
    const double dt = 1e-3;
    const AdjointSolution eta = eta1_library(dt, star);
    const oracle::AnticipatedReference ref = eta1_reference(dt / 4, star);
    REQUIRE(ref.converged);
    double sup = 0.0, size = 0.0;
    for (int k = 0; k <= 1000; ++k) {
      sup = std::max(sup, std::abs(eta.at(k)(0) - ref.eta[4 * k](0)));
      size = std::max(size, std::abs(ref.eta[4 * k](0)));
    }
    CHECK(size > 1e-2);
    CHECK(sup <= 1e-6);
  }
}

TEST_CASE("eta1 scheme is second order") {
  const oracle::AnticipatedReference ref = eta1_reference(1.25e-4, StarVariant::Adjoint);
  double err[2];
  for (int level = 0; level < 2; ++level) {
    const double dt = level == 0 ? 0.02 : 0.01;
    const AdjointSolution eta = eta1_library(dt, StarVariant::Adjoint);
    const int stride = static_cast<int>(std::lround(dt / 1.25e-4));
    err[level] = 0.0;
    for (int k = 0; k * stride < static_cast<int>(ref.eta.size()); ++k)
      err[level] = std::max(err[level], std::abs(eta.at(k)(0) - ref.eta[k * stride](0)));
  }
  CHECK(err[0] / err[1] == doctest::Approx(4.0).epsilon(0.15));
}

TEST_CASE("eta vanishes from T on and has a zero martingale part") {
  const AdjointSolution eta = eta1_library(1e-2, StarVariant::Adjoint);
  const int N = eta.eta.grid().steps();
  for (int k = N; k < eta.eta.grid().size(); ++k) CHECK(eta.at(k)(0) == 0.0);
  for (int k = 0; k < eta.eta.grid().size(); ++k) CHECK(eta.eta_bar[k].norm() == 0.0);
}

TEST_CASE("no anticipated term reduces to a linear ODE") {
  // eta' = -eta + 1, eta(1) = 0  =>  eta(t) = 1 - e^{1-t}.
  const TimeGrid g = build_time_grid(1.0, 1e-3);
  const MatrixFunction eta = solve_anticipated_linear(
      g, std::vector<Mat>(g.steps() + 1, scalar(-1.0)),
      std::vector<Vec>(g.steps() + 1, Vec::Ones(1)), {}, StarVariant::Adjoint);
  for (int k = 0; k <= g.steps(); k += 100)
    CHECK(eta[k](0, 0) == doctest::Approx(1.0 - std::exp(1.0 - g.node(k))).epsilon(1e-6));
}
