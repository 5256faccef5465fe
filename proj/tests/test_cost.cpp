#include "emlq/cost.hpp"
#include "emlq/oracles.hpp"
#include "emlq/riccati.hpp"
#include "emlq/scenarios.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace emlq;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

namespace {

struct Follower {
  GameCoefficients coeffs;
  LinearSdeModel model;
  double closed_form = 0.0;
};

Follower follower(double dt, bool balanced = true) {
  Follower f;
  const TimeGrid g = build_time_grid(1.0, dt);
  f.coeffs = balanced ? make_balanced_game(g, scalar_toy(false)) : make_game(g, scalar_toy(false));
  const RiccatiSolution r = solve_riccati(f.coeffs);
  const std::vector<Vec> u2(g.steps() + 1, Vec::Ones(1));
  const AdjointSolution eta = solve_eta1(f.coeffs, r.pi1, r.xi1, u2);
  f.model = open_loop_model(f.coeffs, follower_law(f.coeffs, r.pi1, r.xi1, eta, u2),
                            open_loop_law(1, u2));
  f.closed_form = follower_closed_form_cost(f.coeffs, r.pi1, eta, r.xi1, u2);
  return f;
}

}  // namespace

TEST_CASE("scheme expectation converges to the closed form at first order") {
  const Follower a = follower(0.01), b = follower(0.005);
  const double ea = oracle::scheme_expected_cost(a.model, 0) - a.closed_form;
  const double eb = oracle::scheme_expected_cost(b.model, 0) - b.closed_form;
  CHECK(std::abs(ea) < 0.05 * std::abs(a.closed_form));
  CHECK(ea / eb == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("closed form needs the balanced memory weight") {
  // With lbar1 = 0 the first (A1) line fails and the gap does not close.
  const Follower a = follower(0.01, false), b = follower(0.005, false);
  const double ea = oracle::scheme_expected_cost(a.model, 0) - a.closed_form;
  const double eb = oracle::scheme_expected_cost(b.model, 0) - b.closed_form;
  CHECK(2.0 * eb - ea > 5e-3);
}

TEST_CASE("Monte Carlo cost against the exact scheme expectation") {
  const Follower f = follower(0.01);
  SimulationOptions opt;
  opt.n_paths = 20000;
  opt.seed = 777;
  const PathEnsemble e = simulate(f.model, opt);
  const CostEstimate j1 = evaluate_cost(e, 1);
  const Agreement ag = compare(oracle::scheme_expected_cost(f.model, 0), 0.0, j1, 4.0);
  CHECK(ag.pass);
  CHECK(j1.n_paths == opt.n_paths);
}

TEST_CASE("cost from stored paths equals the accumulated cost") {
  const Follower f = follower(0.01);
  SimulationOptions opt;
  opt.n_paths = 64;
  opt.store_paths = true;
  const PathEnsemble e = simulate(f.model, opt);
  for (int player : {1, 2}) {
    const CostEstimate a = evaluate_cost(e, player), b = evaluate_cost_from_paths(e, f.coeffs, player, 0);
    CHECK(a.value == doctest::Approx(b.value).epsilon(1e-12));
  }
}

TEST_CASE("trapezoid cost against Simpson on a noise-free path") {
  const Follower f = follower(1e-3);
  SimulationOptions opt;
  opt.n_paths = 1;
  opt.noise_free = true;
  opt.store_paths = true;
  const PathEnsemble e = simulate(f.model, opt);
  const GameCoefficients& c = f.coeffs;
  const int N = c.grid.steps();
  std::vector<double> run(N + 1);
  for (int k = 0; k <= N; ++k) {
    const double x = e.paths[0][k](0), M = e.memories[0][k](0), u = e.control_paths[0][0][k](0);
    run[k] = c.l1[k](0, 0) * x * x + c.lbar1[k](0, 0) * M * M + c.r1[k](0, 0) * u * u;
  }
  const double xT = e.paths[0][N](0);
  const double simpson = oracle::simpson(run, c.grid.dt()) + c.g1(0, 0) * xT * xT;
  CHECK(evaluate_cost(e, 1).value == doctest::Approx(simpson).epsilon(1e-6));
}

TEST_CASE("frozen state cost") {
  // a = c = u = 0: x = x0, M = x0 t, J = l x0^2 T + lbar x0^2 T^3 / 3 + g x0^2.
  ConstantCoefficients z = scalar_toy(false);
  const Mat o = Mat::Zero(1, 1);
  z.a1 = z.a2 = z.c1 = z.c2 = z.b1 = z.d1 = z.b2 = z.d2 = o;
  z.l1 = Mat::Constant(1, 1, 0.7);
  z.lbar1 = Mat::Constant(1, 1, 0.4);
  z.x0 = Vec::Constant(1, 1.5);
  const TimeGrid g = build_time_grid(2.0, 1e-3);
  const GameCoefficients c = make_game(g, z);
  const std::vector<Vec> zero(g.steps() + 1, Vec::Zero(1));
  SimulationOptions opt;
  opt.n_paths = 3;
  const PathEnsemble e = simulate_open_loop(c, zero, zero, opt);
  const CostEstimate j = evaluate_cost(e, 1);
  const double x2 = 2.25;
  CHECK(j.value == doctest::Approx(0.7 * x2 * 2.0 + 0.4 * x2 * 8.0 / 3.0 + x2).epsilon(1e-6));
  CHECK(j.std_error == 0.0);

  z.x0 = Vec::Zero(1);
  const PathEnsemble zero_run = simulate_open_loop(make_game(g, z), zero, zero, opt);
  CHECK(evaluate_cost(zero_run, 1).value == 0.0);
  CHECK(evaluate_cost(zero_run, 2).value == 0.0);
}

TEST_CASE("central difference on a deterministic quadratic") {
  const std::vector<double> base = {1.0, 2.0, 3.0};
  auto run = [&](double eps) {
    PerturbedRun r;
    for (double b : base) r.costs.push_back(b + 3.0 * eps * eps);
    r.digest = {1, 2, 3};
    return r;
  };
  const DirectionalCheck d = central_difference(run, 0.1);
  CHECK(d.derivative == doctest::Approx(0.0));
  CHECK(d.curvature == doctest::Approx(6.0));
  CHECK(d.derivative_ok);
  CHECK(d.curvature_ok);
  CHECK(d.crn_ok);

  auto tilted = [&](double eps) {
    PerturbedRun r = run(eps);
    for (double& v : r.costs) v += eps;
    if (eps > 0) r.digest = {1, 2, 4};
    return r;
  };
  const DirectionalCheck t = central_difference(tilted, 0.1);
  CHECK(t.derivative == doctest::Approx(1.0));
  CHECK_FALSE(t.derivative_ok);
  CHECK_FALSE(t.crn_ok);
}

TEST_CASE("estimate and compare") {
  const CostEstimate e = estimate({1.0, 2.0, 3.0, 4.0}, 0.01, 2);
  CHECK(e.value == doctest::Approx(2.5));
  CHECK(e.std_error == doctest::Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  CostEstimate mc;
  mc.value = 1.1;
  mc.std_error = 0.05;
  Agreement a = compare(1.0, 0.0, mc);
  CHECK(a.pass);
  CHECK(a.combined_se == doctest::Approx(0.05));
  a = compare(1.0, 0.0, mc, 1.8);
  CHECK_FALSE(a.pass);
  CHECK(compare(1.0, 0.04, mc, 1.8).pass);
}
