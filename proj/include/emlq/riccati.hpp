#pragma once

#include "emlq/model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace emlq {

// -X a - a^T X - c^T X c - l. Pass an empty c to drop the middle term.
Eigen::MatrixXd lyapunov_rhs(const Eigen::MatrixXd& X, const Eigen::MatrixXd& a,
                             const Eigen::MatrixXd& c, const Eigen::MatrixXd& l);

// One classical RK4 step of X' = lyapunov_rhs(X, a(t), c(t), l(t)) from
// t_{k+1} back to t_k. Coefficients at the midpoint are the averages of the
// node values (linear interpolation).
Eigen::MatrixXd rk4_backward_step(const Eigen::MatrixXd& X, double dt,
                                  const Eigen::MatrixXd& a_left,
                                  const Eigen::MatrixXd& a_right,
                                  const Eigen::MatrixXd& c_left,
                                  const Eigen::MatrixXd& c_right,
                                  const Eigen::MatrixXd& l_left,
                                  const Eigen::MatrixXd& l_mid,
                                  const Eigen::MatrixXd& l_right);

// Pi' = -Pi a - a^T Pi - c^T Pi c - l on [0,T], Pi(T) = g, zero on (T,2T].
MatrixFunction solve_backward_matrix_ode(const MatrixFunction& a,
                                         const MatrixFunction& c,
                                         const MatrixFunction& l,
                                         const Eigen::MatrixXd& g,
                                         const TimeGrid& grid);

// Xi1 = r1 + d1^T Pi1 d1, Xi2 = r2 + dbar^T Pi2 dbar, Xi3 = r2.
MatrixFunction assemble_xi(int which, const MatrixFunction& pi,
                           const GameCoefficients& coeffs,
                           const MatrixFunction* dbar = nullptr);

// Smallest eigenvalue of the symmetric part at each node of [0,T].
std::vector<double> min_eigenvalues(const MatrixFunction& f);

struct RiccatiSolution {
  MatrixFunction pi1, pi2;
  MatrixFunction xi1, xi2, xi3;
  std::vector<double> xi1_min_eig, xi2_min_eig;
  // Only set by the advertising scenario: Pi1 shifted by the r1 weight.
  MatrixFunction pi_bar;
};

// Solves Pi1 with (a1, c1, l1, g1) and Pi2 with (a1, c1, l2, g2), and forms
// Xi1 and Xi3. Xi2 needs the leader's dbar; see complete_xi2.
RiccatiSolution solve_riccati(const GameCoefficients& coeffs);
void complete_xi2(RiccatiSolution& sol, const GameCoefficients& coeffs,
                  const MatrixFunction& dbar);

struct AssumptionLine {
  std::string id;       // e.g. "A1.1"
  std::string formula;  // human readable identity
  std::vector<double> residual;  // operator 2-norm per node on [0,T]; inf if
                                 // the line needs an inverse of a singular Xi1
  double max_residual = 0.0;
  bool pass = false;
};

struct AssumptionReport {
  double tol = 1e-8;
  std::vector<AssumptionLine> lines;
  std::vector<double> xi1_min_eig, xi2_min_eig;
  bool xi1_positive = false;
  bool xi2_positive = false;

  const AssumptionLine& line(const std::string& id) const;
  // "A1", "A2" or "A3": every line of the group passes and, for A1/A2, the
  // matching Xi is positive definite at every node.
  bool group_ok(const std::string& group) const;
  bool all_ok() const;
};

// Residuals of the identities in (A1), (A2), (A3). The leader quantities
// cbar2, dbar and Xi2 are formed node by node where Xi1 is invertible.
AssumptionReport check_assumptions(const GameCoefficients& coeffs,
                                   const MatrixFunction& pi1,
                                   const MatrixFunction& pi2,
                                   const MatrixFunction& xi1, double tol = 1e-8);

// Inverse of a symmetric or general square matrix; returns false if the
// matrix is singular relative to its own scale.
bool checked_inverse(const Eigen::MatrixXd& m, Eigen::MatrixXd* inverse,
                     double rel_tol = 1e-12);

double operator_norm(const Eigen::MatrixXd& m);

}  // namespace emlq
