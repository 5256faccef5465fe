#pragma once

#include "emlq/config.hpp"
#include "emlq/leader.hpp"
#include "emlq/model.hpp"
#include "emlq/riccati.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace emlq {

// lbar1(t) that zeroes the third (A1) line for the given Pi1:
// -c2' Pi1 c2 + c2' Pi1 d1 Xi1^{-1} d1' Pi1 c2.
MatrixFunction balanced_lbar1(const GameCoefficients& coeffs, const MatrixFunction& pi1,
                              const MatrixFunction& xi1);

// make_game with lbar1 replaced by balanced_lbar1.
GameCoefficients make_balanced_game(const TimeGrid& grid, const ConstantCoefficients& c);

// Scalar follower toy on T = 1. a3_mode sets r1 = 0 and b2 = -c1 d2 so that
// (A3) holds as well.
ConstantCoefficients scalar_toy(bool a3_mode);

// Scalar instance with r1 = 0, r2 > 0 and Pi2 = 0 that satisfies (A1)-(A3).
ConstantCoefficients case2_toy();

// 2x2 constant blocks with nonzero Gamma/Lambda sources.
BlockSpec synthetic_blocks();

StackedBlocks constant_blocks(const TimeGrid& grid, const BlockSpec& spec);

// Everything the subcommands need, built once from a configuration.
struct Problem {
  RunConfig config;
  TimeGrid grid;
  bool has_game = false;
  GameCoefficients coeffs;
  RiccatiSolution riccati;
  AssumptionReport assumptions;
  bool has_blocks = false;
  std::string blocks_error;  // why the leader blocks could not be formed
  BarredCoefficients barred;
  StackedBlocks blocks;
  MatrixFunction xi3;
  std::vector<Eigen::VectorXd> u2;  // deterministic leader control, [0,T] nodes
};

Problem build_problem(const RunConfig& cfg);

}  // namespace emlq
