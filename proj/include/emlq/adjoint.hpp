#pragma once

#include "emlq/leader.hpp"
#include "emlq/memory.hpp"
#include "emlq/model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace emlq {

// How the anticipated product term of the eta1 equation is discretized.
//   ExactAdjoint:   [c2' Pi1 d1 Xi1^{-1} (b1' eta + d1' Pi1 d2 u2)]*, the star
//                   of the whole product (what the duality argument produces).
//   ProductOfStars: [c2' Pi1 d1]* [Xi1* + reg I]^{-1} [b1' eta + ...]*, the
//                   literal typeset form.
enum class AdjointForm { ExactAdjoint, ProductOfStars };

std::string to_string(AdjointForm f);

struct AdjointOptions {
  StarVariant star = StarVariant::Adjoint;
  AdjointForm form = AdjointForm::ExactAdjoint;
  double reg_scale = 1e-10;
};

// Deterministic reduction of an anticipated backward equation: eta on the
// [0, 2T] nodes (zero from T on) and its identically zero martingale part.
struct AdjointSolution {
  MatrixFunction eta;      // n x 1
  MatrixFunction eta_bar;  // n x 1, zero
  std::string equation;    // "eta1" or "eta2"
  StarVariant star = StarVariant::Adjoint;
  AdjointForm form = AdjointForm::ExactAdjoint;

  Eigen::VectorXd at(int k) const { return eta[k].col(0); }
};

// One anticipated source Z(t) int_window (P eta + q) ds. An empty P means the
// term does not depend on eta.
struct AnticipatedTerm {
  std::vector<Eigen::MatrixXd> Z;  // out x m, per node on [0,T]
  std::vector<Eigen::MatrixXd> P;  // m x n, per node, or empty
  std::vector<Eigen::VectorXd> q;  // m, per node, or empty
};

// eta' = A eta + h + sum_m Z_m int_t^{end(t)} (P_m eta + q_m) ds, eta(T) = 0,
// by one backward implicit-trapezoid sweep. end(t) follows the star variant.
MatrixFunction solve_anticipated_linear(const TimeGrid& grid,
                                       const std::vector<Eigen::MatrixXd>& A,
                                       const std::vector<Eigen::VectorXd>& h,
                                       const std::vector<AnticipatedTerm>& terms,
                                       StarVariant star);

// u2 holds the deterministic leader control on the [0,T] nodes.
AdjointSolution solve_eta1(const GameCoefficients& coeffs, const MatrixFunction& pi1,
                           const MatrixFunction& xi1,
                           const std::vector<Eigen::VectorXd>& u2,
                           const AdjointOptions& options = {});

// xi_path: deterministic input for the follower adjoint xi on the [0,T]
// nodes, or empty for zero. Always uses the product-of-stars form.
AdjointSolution solve_eta2(const GameCoefficients& coeffs,
                           const BarredCoefficients& barred,
                           const MatrixFunction& pi2, const MatrixFunction& xi2,
                           const std::vector<Eigen::VectorXd>& xi_path,
                           const AdjointSolution& eta1,
                           const AdjointOptions& options = {});

}  // namespace emlq
