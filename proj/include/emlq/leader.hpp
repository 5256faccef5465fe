#pragma once

#include "emlq/model.hpp"

#include <Eigen/Dense>

#include <vector>

namespace emlq {

// Leader-side coefficients after the follower's feedback is substituted.
struct BarredCoefficients {
  MatrixFunction abar1, abar2, cbar1, cbar2;  // n x n
  MatrixFunction bbar, dbar;                  // n x k2
  MatrixFunction fbar, hbar, kbar, pbar;      // n x n
  MatrixFunction qbar1, qbar2;                // n x k2
};

// Blocks of the stacked 2n-dimensional forward-backward system.
struct StackedBlocks {
  MatrixFunction A1, A2, Abar1, Abar2, B, C, Cbar, H;  // 2n x 2n
  MatrixFunction D, Dbar, G1, G2;                      // 2n x k2
  int dim() const { return A1.rows(); }
};

struct OmegaTerms {
  MatrixFunction omega1, omega2, omega3;
  std::vector<double> condition;  // condition estimate of I - Gamma Cbar
};

// Omega1..3 at a single node, plus [I - Gamma Cbar]^{-1}.
struct OmegaNode {
  Eigen::MatrixXd omega1, omega2, omega3;
  Eigen::MatrixXd resolvent;  // [I - Gamma Cbar]^{-1}
  double condition = 1.0;
};

// Throws ConditioningError naming the node if Xi1 is singular.
BarredCoefficients assemble_barred(const GameCoefficients& coeffs,
                                   const MatrixFunction& pi1,
                                   const MatrixFunction& xi1);

StackedBlocks assemble_stacked(const BarredCoefficients& barred,
                               const MatrixFunction& pi2,
                               const MatrixFunction& xi2);

// [I - Gamma Cbar]^{-1} by partial-pivot LU; throws ConditioningError when
// the condition estimate exceeds cond_cap.
Eigen::MatrixXd resolvent(const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& cbar,
                          double cond_cap, int node, double* condition = nullptr);

OmegaNode omega_at(const StackedBlocks& blocks, int k,
                   const Eigen::MatrixXd& gamma, const Eigen::MatrixXd& xi3_inv,
                   double cond_cap = 1e12);

OmegaTerms assemble_omegas(const StackedBlocks& blocks, const MatrixFunction& gamma,
                           const MatrixFunction& xi3, double cond_cap = 1e12);

}  // namespace emlq
