#include "emlq/advertising.hpp"
#include "emlq/config.hpp"
#include "emlq/errors.hpp"
#include "emlq/leader.hpp"
#include "emlq/oracles.hpp"
#include "emlq/riccati.hpp"
#include "emlq/scenarios.hpp"
#include "emlq/simulate.hpp"
#include "helpers.hpp"

#include <doctest.h>

#include <random>

using namespace emlq;
using Mat = Eigen::MatrixXd;
using testing::max_abs;

namespace {

oracle::ScalarGame scalar_game(const ConstantCoefficients& c) {
  return {c.a1(0, 0), c.a2(0, 0), c.b1(0, 0), c.b2(0, 0), c.c1(0, 0),
          c.c2(0, 0), c.d1(0, 0), c.d2(0, 0), c.r1(0, 0)};
}

Mat random_symmetric(std::mt19937_64& rng, int n, double scale) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Mat m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m(i, j) = m(j, i) = scale * u(rng);
  return m;
}

}  // namespace

TEST_CASE("barred and stacked blocks of the scalar toys") {
  for (bool a3 : {false, true}) {
    CAPTURE(a3);
    const TimeGrid g = build_time_grid(1.0, 1e-2);
    const ConstantCoefficients cc = scalar_toy(a3);
    const GameCoefficients c = make_balanced_game(g, cc);
    RiccatiSolution r = solve_riccati(c);
    const BarredCoefficients bar = assemble_barred(c, r.pi1, r.xi1);
    complete_xi2(r, c, bar.dbar);
    const StackedBlocks st = assemble_stacked(bar, r.pi2, r.xi2);
    for (int k = 0; k <= g.steps(); k += 10) {
      const oracle::ScalarBarred b = oracle::scalar_barred(scalar_game(cc), r.pi1[k](0, 0));
      CHECK(bar.abar1[k](0, 0) == doctest::Approx(b.abar1));
      CHECK(bar.abar2[k](0, 0) == doctest::Approx(b.abar2));
      CHECK(bar.bbar[k](0, 0) == doctest::Approx(b.bbar));
      CHECK(bar.cbar1[k](0, 0) == doctest::Approx(b.cbar1));
      CHECK(bar.cbar2[k](0, 0) == doctest::Approx(b.cbar2));
      CHECK(bar.dbar[k](0, 0) == doctest::Approx(b.dbar));
      CHECK(bar.fbar[k](0, 0) == doctest::Approx(b.fbar));
      CHECK(bar.hbar[k](0, 0) == doctest::Approx(b.hbar));
      CHECK(bar.kbar[k](0, 0) == doctest::Approx(b.kbar));
      CHECK(bar.pbar[k](0, 0) == doctest::Approx(b.pbar));
      CHECK(bar.qbar1[k](0, 0) == doctest::Approx(b.qbar1));
      CHECK(bar.qbar2[k](0, 0) == doctest::Approx(b.qbar2));

      const BlockSpec s =
          oracle::scalar_stacked(b, r.pi2[k](0, 0), r.xi2[k](0, 0), r.xi3[k](0, 0));
      const double tol = 1e-10 * (1.0 + r.pi2[k].norm());
      CHECK(max_abs(st.A1[k] - s.A1) < tol);
      CHECK(max_abs(st.A2[k] - s.A2) < tol);
      CHECK(max_abs(st.Abar1[k] - s.Abar1) < tol);
      CHECK(max_abs(st.Abar2[k] - s.Abar2) < tol);
      CHECK(max_abs(st.B[k] - s.B) < tol);
      CHECK(max_abs(st.C[k] - s.C) < tol);
      CHECK(max_abs(st.Cbar[k] - s.Cbar) < tol);
      CHECK(max_abs(st.H[k] - s.H) < tol);
      CHECK(max_abs(st.D[k] - s.D) < tol);
      CHECK(max_abs(st.Dbar[k] - s.Dbar) < tol);
      CHECK(max_abs(st.G1[k] - s.G1) < tol);
      CHECK(max_abs(st.G2[k] - s.G2) < tol);
    }
  }
}

TEST_CASE("(A3) toy has zero G2 and a trivial leader feedback source") {
  const TimeGrid g = build_time_grid(1.0, 1e-2);
  const GameCoefficients c = make_balanced_game(g, scalar_toy(true));
  RiccatiSolution r = solve_riccati(c);
  const BarredCoefficients bar = assemble_barred(c, r.pi1, r.xi1);
  complete_xi2(r, c, bar.dbar);
  const StackedBlocks st = assemble_stacked(bar, r.pi2, r.xi2);
  for (int k = 0; k <= g.steps(); ++k) CHECK(max_abs(st.G2[k]) < 1e-14);
}

TEST_CASE("Omega terms against explicit inverses") {
  const TimeGrid g = build_time_grid(1.0, 0.1);
  const BlockSpec spec = synthetic_blocks();
  const StackedBlocks st = constant_blocks(g, spec);
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Mat G = random_symmetric(rng, 2, 2.0);
    const OmegaNode node = omega_at(st, 3, G, spec.xi3.inverse());
    const oracle::OmegaValues ref = oracle::omega(spec, G);
    CHECK(max_abs(node.omega1 - ref.omega1) < 1e-12);
    CHECK(max_abs(node.omega2 - ref.omega2) < 1e-12);
    CHECK(max_abs(node.omega3 - ref.omega3) < 1e-12);
  }
}

TEST_CASE("resolvent reports near-singular I - Gamma Cbar") {
  const Mat cbar = Mat::Identity(2, 2);
  CHECK_THROWS_AS(resolvent(Mat::Identity(2, 2), cbar, 1e12, 4), ConditioningError);
  double cond = 0.0;
  const Mat R = resolvent(0.5 * Mat::Identity(2, 2), cbar, 1e12, 4, &cond);
  CHECK(max_abs(R - 2.0 * Mat::Identity(2, 2)) < 1e-14);
  CHECK(cond >= 1.0);
}

TEST_CASE("advertising gains against the scalar reduction") {
  RunConfig cfg;
  cfg.scenario = ScenarioKind::Advertising;
  cfg.horizon = 10.0;
  cfg.dt = 1e-2;
  const Problem p = build_problem(cfg);
  REQUIRE(p.has_blocks);
  const AdvertisingScenario& s = cfg.advertising;
  std::mt19937_64 rng(5);
  std::uniform_int_distribution<int> node(0, p.grid.steps());
  for (int trial = 0; trial < 20; ++trial) {
    const int k = node(rng);
    const Mat G = random_symmetric(rng, 2, 50.0), W = random_symmetric(rng, 2, 50.0);
    const GainNode lib = gains_at(p.coeffs, p.riccati, p.blocks, k, G, W);
    const oracle::AdvertisingGains ref = oracle::advertising_gains(
        {s.c1, s.resolved_d1(), s.d2, s.b2(), p.riccati.pi1[k](0, 0), p.riccati.pi2[k](0, 0),
         p.riccati.pi_bar[k](0, 0), p.riccati.xi3[k](0, 0), G, W});
    auto rel = [](const Mat& a, const Mat& b) {
      return max_abs(a - b) / std::max(1.0, max_abs(b));
    };
    CHECK(rel(lib.L1, ref.L1) < 1e-10);
    CHECK(rel(lib.L2, ref.L2) < 1e-10);
    CHECK(rel(lib.L3, ref.L3) < 1e-10);
    CHECK(rel(lib.Lu2, ref.Lu2) < 1e-10);
  }
}
