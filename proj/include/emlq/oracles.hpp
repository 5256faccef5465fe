#pragma once

// Reference solutions that share no numerical code with the solvers. Used by
// the unit tests and the acceptance suite only.

#include "emlq/config.hpp"
#include "emlq/memory.hpp"
#include "emlq/simulate.hpp"

#include <Eigen/Dense>

#include <functional>
#include <vector>

namespace emlq::oracle {

// Composite Simpson on equally spaced samples. An odd number of intervals
// ends with a 3/8 panel. Needs at least two intervals.
double simpson(const std::vector<double>& f, double h);

// Pi' = -k Pi - l, Pi(T) = g, with k = 2a + c^2 (scalar Riccati).
double scalar_riccati(double a, double c, double l, double g, double T, double t);

// Pi' = -Pi a - a' Pi - c' Pi c - l, Pi(T) = g, constant coefficients, through
// the matrix exponential of the vectorized generator.
Eigen::MatrixXd lyapunov_expm(const Eigen::MatrixXd& a, const Eigen::MatrixXd& c,
                              const Eigen::MatrixXd& l, const Eigen::MatrixXd& g,
                              double time_to_go);

// e^{A' tau} L e^{A tau}: Lambda(t, s) for constant A with tau = s - t.
Eigen::MatrixXd lambda_flow(const Eigen::MatrixXd& A, const Eigen::MatrixXd& diagonal,
                            double tau);

// Omega terms written out with explicit inverses.
struct OmegaValues {
  Eigen::MatrixXd omega1, omega2, omega3;
};
OmegaValues omega(const BlockSpec& blocks, const Eigen::MatrixXd& gamma);

// Gamma/Lambda for constant blocks with theta(t) = t, by damped Picard
// iteration on Lambda's diagonal. Lambda(t,s) comes from the exact flow and
// Gamma from its variation-of-constants integral, both by trapezoid on a
// grid of step dt.
struct GammaLambdaReference {
  double dt = 0.0;
  std::vector<Eigen::MatrixXd> gamma, diagonal, window;  // per node on [0,T]
  int iterations = 0;
  double change = 0.0;
  bool converged = false;
};
GammaLambdaReference picard_gamma_lambda(const BlockSpec& blocks, double T, double dt,
                                         double damping = 0.5, double tol = 1e-13,
                                         int max_iter = 2000);

// eta' = A eta + h + sum_m Z_m int_t^{end(t)} (P_m eta + q_m) ds, eta(T) = 0,
// solved by Picard iteration over whole paths with an RK4 sweep per pass.
struct AnticipatedSource {
  std::function<Eigen::MatrixXd(double)> Z;
  std::function<Eigen::MatrixXd(double)> P;  // may be empty
  std::function<Eigen::VectorXd(double)> q;  // may be empty
};
struct AnticipatedReference {
  double dt = 0.0;
  std::vector<Eigen::VectorXd> eta;  // per node on [0,T]
  int iterations = 0;
  bool converged = false;
};
AnticipatedReference picard_anticipated(double T, double dt, int n,
                                        const std::function<Eigen::MatrixXd(double)>& A,
                                        const std::function<Eigen::VectorXd(double)>& h,
                                        const std::vector<AnticipatedSource>& terms,
                                        StarVariant star, double tol = 1e-12,
                                        int max_iter = 500);

// Upper end of the star window at time t.
double star_end(StarVariant star, double t, double T);

// int_t^{end(t)} f(s) ds by Simpson with `panels` panels.
Eigen::MatrixXd star_quadrature(const std::function<Eigen::MatrixXd(double)>& f,
                                StarVariant star, double t, double T, int panels = 64);

// y' = F(t) y + Fm(t) M + f(t), M' = y, by RK4 on the pair (y, M).
std::vector<Eigen::VectorXd> memory_ode_rk4(
    const std::function<Eigen::MatrixXd(double)>& F,
    const std::function<Eigen::MatrixXd(double)>& Fm,
    const std::function<Eigen::VectorXd(double)>& f, const Eigen::VectorXd& y0, double T,
    int steps);

// Exact expectation of cost `which` under the Euler / trapezoid scheme of the
// simulator, by propagating E[z z'] for z = (s, M, 1).
double scheme_expected_cost(const LinearSdeModel& model, int which);

// E[s s'] at T for the continuous dynamics, RK4 on the second moment.
Eigen::MatrixXd continuous_second_moment(const LinearSdeModel& model, int substeps = 4);

// Scalar leader-side coefficients after substituting the follower.
struct ScalarBarred {
  double abar1, abar2, cbar1, cbar2, bbar, dbar, fbar, hbar, kbar, pbar, qbar1, qbar2;
};
struct ScalarGame {
  double a1, a2, b1, b2, c1, c2, d1, d2, r1;
};
ScalarBarred scalar_barred(const ScalarGame& g, double pi1);

// Stacked 2x2 blocks of a scalar game, entry by entry.
BlockSpec scalar_stacked(const ScalarBarred& b, double pi2, double xi2, double xi3);

// Gains of the advertising model from its scalar reduction: the resolvent
// through its explicit adjugate, Abar1 = c1 I, and D, G2 as single entries.
struct AdvertisingGainInput {
  double c1, d1, d2, b2;
  double pi1, pi2, pi_bar, xi3;
  Eigen::Matrix2d gamma, window;
};
struct AdvertisingGains {
  Eigen::RowVector2d L1, L2, L3, Lu2;
};
AdvertisingGains advertising_gains(const AdvertisingGainInput& in);

}  // namespace emlq::oracle
