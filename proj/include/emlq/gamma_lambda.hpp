#pragma once

#include "emlq/leader.hpp"
#include "emlq/model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace emlq {

// Window length theta(t) used in the Gamma/Lambda system and the gains.
struct ThetaPolicy {
  enum class Kind { Full, Constant };
  Kind kind = Kind::Full;
  double value = 0.0;  // used by Constant

  static ThetaPolicy full() { return {}; }
  static ThetaPolicy constant(double v) { return {Kind::Constant, v}; }

  // Number of grid steps spanned by the window at node j.
  int steps_at(int j, const TimeGrid& grid) const;
  // Last node of the window [t_j, (t_j + theta) ^ T].
  int window_end(int j, const TimeGrid& grid) const;
  // True if t_j + theta(t_j) <= T, i.e. the Gamma source is switched on.
  bool source_active(int j, const TimeGrid& grid) const;
  std::string label() const;
};

// Throws ConfigError on anything other than "full" or "const:V".
ThetaPolicy parse_theta(const std::string& s);

// Lambda(t_j, s_k) for t_j <= s_k <= window_end(j), stored row by row.
class TriangleField {
 public:
  TriangleField() = default;
  TriangleField(const TimeGrid& grid, int dim, const ThetaPolicy& theta);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return dim_; }
  const ThetaPolicy& theta() const { return theta_; }
  int row_end(int j) const { return row_end_[j]; }
  bool contains(int j, int k) const {
    return j >= 0 && j <= grid_.steps() && k >= j && k <= row_end_[j];
  }

  Eigen::Map<Eigen::MatrixXd> at(int j, int k);
  Eigen::Map<const Eigen::MatrixXd> at(int j, int k) const;

  // Trapezoid integral of Lambda(t_j, s) over the window at t_j.
  Eigen::MatrixXd window_integral(int j) const;
  double max_abs() const;

 private:
  TimeGrid grid_;
  int dim_ = 0;
  ThetaPolicy theta_;
  std::vector<int> row_end_;
  std::vector<std::size_t> offset_;
  std::vector<double> data_;
};

// Lambda(t,s) from its diagonal by integrating -dLambda/dt = Lambda A + A' Lambda
// backward in t for every s.
TriangleField propagate_lambda(const std::vector<Eigen::MatrixXd>& diagonal,
                               const MatrixFunction& A1, const ThetaPolicy& theta);

struct GammaLambdaOptions {
  double tol = 1e-8;
  int max_iter = 200;
  double damping = 0.5;
  ThetaPolicy theta;
  double cond_cap = 1e12;
  int oscillation_window = 5;
};

struct GammaLambdaSolution {
  MatrixFunction gamma;
  TriangleField lambda;
  std::vector<Eigen::MatrixXd> window;  // int Lambda(t_j, s) ds per node
  int iterations = 0;
  double residual = 0.0;  // defect of the returned iterate, scaled
  bool converged = false;
  std::vector<double> trace;  // defect per iteration
  std::vector<double> node_defect;
  std::string diagnostics;
  ThetaPolicy theta;
};

// Integrates Gamma' = -Gamma A1 - A1' Gamma + Lambda(t, t+theta) 1[t+theta <= T]
// backward from Gamma(T) = 0.
MatrixFunction integrate_gamma(const TriangleField& lambda, const MatrixFunction& A1);

// Diagonal update W Omega1 + Omega1' W + W Omega2 W + Omega3 at node j.
Eigen::MatrixXd diagonal_update(const Eigen::MatrixXd& W, const OmegaNode& omega);

// Defect of (Gamma, diagonal) in both defining equations, relative to
// max(1, |Gamma|, |diagonal|). Fills per-node defects if requested.
double gamma_lambda_defect(const StackedBlocks& blocks, const MatrixFunction& xi3,
                           const MatrixFunction& gamma,
                           const std::vector<Eigen::MatrixXd>& diagonal,
                           const ThetaPolicy& theta, double cond_cap,
                           std::vector<double>* node_defect = nullptr);

// Damped fixed-point iteration. Returns converged = false (never throws) when
// the tolerance is not met; conditioning failures propagate as
// ConditioningError with the iteration index.
GammaLambdaSolution solve_gamma_lambda(const StackedBlocks& blocks,
                                       const MatrixFunction& xi3,
                                       const GammaLambdaOptions& options);

// max over checkpoints and paths of |psi - Gamma phi + W phi|.
// phi and psi are indexed [path][node] on the [0,T] nodes.
double relation_defect(const MatrixFunction& gamma,
                       const std::vector<Eigen::MatrixXd>& window,
                       const std::vector<std::vector<Eigen::VectorXd>>& phi,
                       const std::vector<std::vector<Eigen::VectorXd>>& psi,
                       const std::vector<int>& checkpoints);

}  // namespace emlq
