#include "emlq/advertising.hpp"
#include "emlq/errors.hpp"
#include "emlq/oracles.hpp"
#include "emlq/riccati.hpp"
#include "emlq/scenarios.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <cmath>

using namespace emlq;
using Mat = Eigen::MatrixXd;
using testing::max_abs;
using testing::scalar;

namespace {

double scalar_error(double dt) {
  const TimeGrid g = build_time_grid(10.0, dt);
  const MatrixFunction a = MatrixFunction::constant(g, scalar(-0.4));
  const MatrixFunction c = MatrixFunction::constant(g, scalar(1.0));
  const MatrixFunction l = MatrixFunction::constant(g, scalar(-0.1));
  const MatrixFunction pi = solve_backward_matrix_ode(a, c, l, scalar(1000.0), g);
  double e = 0.0;
  for (int k = 0; k <= g.steps(); ++k)
    e = std::max(e, std::abs(pi[k](0, 0) -
                             oracle::scalar_riccati(-0.4, 1.0, -0.1, 1000.0, 10.0, g.node(k))));
  return e;
}

}  // namespace

TEST_CASE("scalar follower equation against its closed form") {
  CHECK(scalar_error(1e-3) / 7385.86 < 1e-12);
  CHECK(oracle::scalar_riccati(-0.4, 1.0, -0.1, 1000.0, 10.0, 0.0) ==
        doctest::Approx(999.5 * std::exp(2.0) + 0.5).epsilon(1e-14));
}

TEST_CASE("RK4 is fourth order") {
  // A coarse grid so the error stays above round-off.
  const double e1 = scalar_error(0.5), e2 = scalar_error(0.25);
  CHECK(e1 / e2 == doctest::Approx(16.0).epsilon(0.1));
}

TEST_CASE("matrix Lyapunov equation against the matrix exponential") {
  const TimeGrid g = build_time_grid(1.0, 1e-3);
  const Mat a = (Mat(2, 2) << -0.3, 0.4, 0.1, -0.2).finished();
  const Mat c = (Mat(2, 2) << 0.2, 0.0, 0.3, 0.1).finished();
  const Mat l = (Mat(2, 2) << 1.0, 0.2, 0.2, 0.5).finished();
  const Mat gT = (Mat(2, 2) << 2.0, -0.3, -0.3, 1.0).finished();
  const MatrixFunction pi =
      solve_backward_matrix_ode(MatrixFunction::constant(g, a), MatrixFunction::constant(g, c),
                                MatrixFunction::constant(g, l), gT, g);
  for (int k : {0, 250, 700, 1000}) {
    const Mat ref = oracle::lyapunov_expm(a, c, l, gT, 1.0 - g.node(k));
    CHECK(max_abs(pi[k] - ref) < 1e-10);
    CHECK(max_abs(pi[k] - pi[k].transpose()) <= 1e-10 * max_abs(pi[k]));
  }
  CHECK(max_abs(pi[g.steps()] - gT) == 0.0);
  for (int k = g.steps() + 1; k < g.size(); ++k) CHECK(max_abs(pi[k]) == 0.0);
}

TEST_CASE("trivial Lyapunov data stays at the terminal value") {
  const TimeGrid g = build_time_grid(1.0, 0.01);
  const MatrixFunction z = MatrixFunction::constant(g, Mat::Zero(2, 2));
  const MatrixFunction pi = solve_backward_matrix_ode(z, z, z, Mat::Identity(2, 2), g);
  for (int k = 0; k <= g.steps(); ++k) CHECK(max_abs(pi[k] - Mat::Identity(2, 2)) == 0.0);
}

TEST_CASE("advertising Xi values") {
  const AdvertisingScenario s;
  const TimeGrid g = build_time_grid(10.0, 1e-2);
  const GameCoefficients c = build_scenario(s, g);
  RiccatiSolution r = solve_riccati(c);
  const MatrixFunction pb = pi_bar(s, r.pi1);
  const double d1 = s.resolved_d1();
  const BarredCoefficients bar = assemble_barred(c, r.pi1, r.xi1);
  complete_xi2(r, c, bar.dbar);
  const double xi_leader = 0.5 * s.mu_m * std::exp(-s.tau2);
  for (int k = 0; k <= g.steps(); k += 50) {
    CHECK(r.xi1[k](0, 0) == doctest::Approx(pb[k](0, 0) * d1 * d1).epsilon(1e-12));
    CHECK(r.xi2[k](0, 0) == doctest::Approx(xi_leader).epsilon(1e-12));
    CHECK(r.xi3[k](0, 0) == doctest::Approx(xi_leader).epsilon(1e-12));
  }
}

TEST_CASE("assumption report on the advertising data") {
  const AdvertisingScenario s;
  const TimeGrid g = build_time_grid(10.0, 1e-2);
  const GameCoefficients c = build_scenario(s, g);
  const RiccatiSolution r = solve_riccati(c);
  const AssumptionReport rep = check_assumptions(c, r.pi1, r.pi2, r.xi1, 1e-8);
  CHECK(rep.group_ok("A1"));
  CHECK_FALSE(rep.group_ok("A3"));
  const MatrixFunction pb = pi_bar(s, r.pi1);
  const AssumptionLine& a3 = rep.line("A3.1");
  REQUIRE(a3.residual.size() == static_cast<std::size_t>(g.steps() + 1));
  for (int k = 0; k <= g.steps(); ++k) {
    const double expected = std::abs(1.0 - r.pi1[k](0, 0) / pb[k](0, 0));
    CHECK(a3.residual[k] == doctest::Approx(expected).epsilon(1e-10));
    CHECK(a3.residual[k] > 0.0);
  }
}

TEST_CASE("all-zero coefficients fail positivity but have zero residuals") {
  const TimeGrid g = build_time_grid(1.0, 0.1);
  ConstantCoefficients z;
  const Mat o = scalar(0.0);
  z.a1 = z.a2 = z.c1 = z.c2 = z.b1 = z.d1 = z.b2 = z.d2 = o;
  z.l1 = z.l2 = z.lbar1 = z.lbar2 = z.r1 = z.r2 = z.g1 = z.g2 = o;
  z.x0 = Eigen::VectorXd::Zero(1);
  const GameCoefficients c = make_game(g, z);
  const RiccatiSolution r = solve_riccati(c);
  const AssumptionReport rep = check_assumptions(c, r.pi1, r.pi2, r.xi1, 1e-8);
  CHECK_FALSE(rep.xi1_positive);
  CHECK_FALSE(rep.all_ok());
  for (const char* id : {"A1.1", "A1.2", "A2.1", "A2.2", "A2.3"})
    CHECK(rep.line(id).max_residual == 0.0);
}

TEST_CASE("case-2 instance satisfies every assumption") {
  const TimeGrid g = build_time_grid(10.0, 1e-3);
  const GameCoefficients c = make_balanced_game(g, case2_toy());
  const RiccatiSolution r = solve_riccati(c);
  const AssumptionReport rep = check_assumptions(c, r.pi1, r.pi2, r.xi1, 1e-8);
  CHECK(rep.all_ok());
  for (const auto& line : rep.lines) CHECK(line.max_residual <= 1e-8);
}

TEST_CASE("checked inverse refuses singular matrices") {
  Mat inv;
  CHECK_FALSE(checked_inverse((Mat(2, 2) << 1, 2, 2, 4).finished(), &inv));
  REQUIRE(checked_inverse((Mat(2, 2) << 2, 1, 1, 3).finished(), &inv));
  CHECK(inv(0, 0) == doctest::Approx(0.6));
}
