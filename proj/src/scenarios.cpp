#include "emlq/scenarios.hpp"

#include "emlq/errors.hpp"

#include <sstream>

namespace emlq {

namespace {

using Mat = Eigen::MatrixXd;

Mat scalar(double v) { return Mat::Constant(1, 1, v); }

}  // namespace

MatrixFunction balanced_lbar1(const GameCoefficients& g, const MatrixFunction& pi1,
                              const MatrixFunction& xi1) {
  const int N = g.grid.steps();
  std::vector<Mat> out(N + 1);
  for (int k = 0; k <= N; ++k) {
    Mat inv;
    if (!checked_inverse(xi1[k], &inv)) {
      std::ostringstream msg;
      msg << "lbar1 = auto needs an invertible Xi1; singular at node " << k;
      throw ConditioningError(msg.str());
    }
    const Mat& P = pi1[k];
    const Mat c2 = g.c2[k];
    const Mat v = g.d1[k].transpose() * P * c2;
    out[k] = symmetrize(-c2.transpose() * P * c2 + v.transpose() * inv * v);
  }
  return MatrixFunction(g.grid, std::move(out));
}

GameCoefficients make_balanced_game(const TimeGrid& grid, const ConstantCoefficients& c) {
  CoefficientSet set = to_coefficient_set(grid, c);
  set.lbar1 = MatrixFunction::constant(grid, Mat::Zero(c.a1.rows(), c.a1.cols()));
  const GameCoefficients base = make_game(grid, set);
  const RiccatiSolution ric = solve_riccati(base);
  set.lbar1 = balanced_lbar1(base, ric.pi1, ric.xi1);
  return make_game(grid, set);
}

ConstantCoefficients scalar_toy(bool a3_mode) {
  ConstantCoefficients c;
  const double c1 = 0.4, d1 = 1.0, c2 = 0.3, d2 = 0.2;
  c.a1 = scalar(-0.5);
  c.a2 = scalar(-c1 * c2);
  c.c1 = scalar(c1);
  c.c2 = scalar(c2);
  c.b1 = scalar(-c1 * d1);
  c.d1 = scalar(d1);
  c.b2 = scalar(a3_mode ? -c1 * d2 : 0.5);
  c.d2 = scalar(d2);
  c.l1 = scalar(1.0);
  c.l2 = scalar(0.5);
  c.lbar1 = scalar(0.0);
  c.lbar2 = scalar(0.0);
  c.r1 = scalar(a3_mode ? 0.0 : 0.5);
  c.r2 = scalar(1.0);
  c.g1 = scalar(1.0);
  c.g2 = scalar(0.5);
  c.x0 = Eigen::VectorXd::Constant(1, 1.0);
  return c;
}

ConstantCoefficients case2_toy() {
  ConstantCoefficients c;
  c.a1 = scalar(-0.4);
  c.a2 = scalar(-0.5);
  c.c1 = scalar(1.0);
  c.c2 = scalar(0.5);
  c.b1 = scalar(-1.0);
  c.d1 = scalar(1.0);
  c.b2 = scalar(1.0);
  c.d2 = scalar(0.0);
  c.l1 = scalar(-0.1);
  c.l2 = scalar(0.0);
  c.lbar1 = scalar(0.0);
  c.lbar2 = scalar(0.0);
  c.r1 = scalar(0.0);
  c.r2 = scalar(0.5);
  c.g1 = scalar(1000.0);
  c.g2 = scalar(0.0);
  c.x0 = Eigen::VectorXd::Constant(1, 1.0);
  return c;
}

BlockSpec synthetic_blocks() {
  BlockSpec b;
  b.A1 = (Mat(2, 2) << -0.5, 0.2, 0.0, -0.5).finished();
  b.A2 = Mat::Zero(2, 2);
  b.Abar1 = (Mat(2, 2) << 0.3, 0.1, 0.0, 0.3).finished();
  b.Abar2 = Mat::Zero(2, 2);
  b.B = (Mat(2, 2) << 0.2, -0.1, -0.1, 0.0).finished();
  b.C = (Mat(2, 2) << 0.1, 0.05, 0.1, 0.0).finished();
  b.Cbar = (Mat(2, 2) << 0.05, 0.02, 0.02, 0.0).finished();
  b.H = Mat::Zero(2, 2);
  b.D = (Mat(2, 1) << 0.1, 0.5).finished();
  b.Dbar = Mat::Zero(2, 1);
  b.G1 = Mat::Zero(2, 1);
  b.G2 = (Mat(2, 1) << 0.4, 0.0).finished();
  b.xi3 = Mat::Identity(1, 1);
  return b;
}

StackedBlocks constant_blocks(const TimeGrid& grid, const BlockSpec& s) {
  auto k = [&](const Mat& m) { return zero_extend(MatrixFunction::constant(grid, m), grid); };
  StackedBlocks b;
  b.A1 = k(s.A1);
  b.A2 = k(s.A2);
  b.Abar1 = k(s.Abar1);
  b.Abar2 = k(s.Abar2);
  b.B = k(s.B);
  b.C = k(s.C);
  b.Cbar = k(s.Cbar);
  b.H = k(s.H);
  b.D = k(s.D);
  b.Dbar = k(s.Dbar);
  b.G1 = k(s.G1);
  b.G2 = k(s.G2);
  if (!is_symmetric(s.B, 1e-12) || !is_symmetric(s.Cbar, 1e-12))
    throw ConfigError("blocks: B and Cbar must be symmetric");
  return b;
}

Problem build_problem(const RunConfig& cfg) {
  Problem p;
  p.config = cfg;
  p.grid = build_time_grid(cfg.horizon, cfg.dt);
  const int N = p.grid.steps();
  if (cfg.scenario == ScenarioKind::Blocks) {
    p.blocks = constant_blocks(p.grid, cfg.blocks);
    p.xi3 = zero_extend(MatrixFunction::constant(p.grid, cfg.blocks.xi3), p.grid);
    p.has_blocks = true;
    return p;
  }
  if (cfg.scenario == ScenarioKind::Advertising) {
    p.coeffs = build_scenario(cfg.advertising, p.grid);
    p.u2.assign(N + 1, Eigen::VectorXd::Zero(1));
  } else {
    p.coeffs = cfg.lbar1_auto ? make_balanced_game(p.grid, cfg.raw) : make_game(p.grid, cfg.raw);
    p.u2.assign(N + 1, cfg.u2);
  }
  p.has_game = true;
  p.riccati = solve_riccati(p.coeffs);
  if (cfg.scenario == ScenarioKind::Advertising)
    p.riccati.pi_bar = pi_bar(cfg.advertising, p.riccati.pi1);
  p.assumptions = check_assumptions(p.coeffs, p.riccati.pi1, p.riccati.pi2, p.riccati.xi1,
                                    cfg.assumption_tol);
  try {
    p.barred = assemble_barred(p.coeffs, p.riccati.pi1, p.riccati.xi1);
    complete_xi2(p.riccati, p.coeffs, p.barred.dbar);
    p.blocks = assemble_stacked(p.barred, p.riccati.pi2, p.riccati.xi2);
    p.xi3 = p.riccati.xi3;
    p.has_blocks = true;
  } catch (const ConditioningError& e) {
    p.blocks_error = e.what();
  }
  return p;
}

}  // namespace emlq
