#pragma once

#include "emlq/adjoint.hpp"
#include "emlq/gamma_lambda.hpp"
#include "emlq/leader.hpp"
#include "emlq/memory.hpp"
#include "emlq/model.hpp"
#include "emlq/riccati.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

namespace emlq {

// Leader-game strategy: u1 = L1 M[phi] + (L2 + L3) phi, u2 = Lu2 phi.
struct FeedbackGains {
  MatrixFunction L1, L2, L3;  // k1 x 2n
  MatrixFunction Lu2;         // k2 x 2n
  ThetaPolicy theta;
};

// Follower best response to a deterministic u2:
// u1 = Kx M[x] + Keta eta1 + Keta_bar eta1_bar + Ku u2.
struct FollowerGains {
  MatrixFunction Kx;        // k1 x n
  MatrixFunction Keta;      // k1 x n
  MatrixFunction Keta_bar;  // k1 x n
  MatrixFunction Ku;        // k1 x k2
};

FollowerGains follower_gains(const GameCoefficients& coeffs, const MatrixFunction& pi1,
                             const MatrixFunction& xi1);

struct GainNode {
  Eigen::MatrixXd L1, L2, L3, Lu2;
};

// Strategy gains at node k for given Gamma(t_k) and window integral W(t_k).
GainNode gains_at(const GameCoefficients& coeffs, const RiccatiSolution& riccati,
                  const StackedBlocks& blocks, int k, const Eigen::MatrixXd& gamma,
                  const Eigen::MatrixXd& window, double cond_cap = 1e12);

// Throws ConvergenceError if the Gamma/Lambda solution did not converge.
FeedbackGains synthesize_gains(const GameCoefficients& coeffs,
                               const RiccatiSolution& riccati,
                               const StackedBlocks& blocks,
                               const GammaLambdaSolution& gl, double cond_cap = 1e12);

// u = Ux s + Um M[s] + ff on the [0,T] nodes. Empty Ux/Um/ff mean zero.
struct ControlLaw {
  int dim = 0;
  std::vector<Eigen::MatrixXd> Ux, Um;
  std::vector<Eigen::VectorXd> ff;
};

// Quadratic cost on the block x = s[offset, offset + n) with control `control`.
struct CostSpec {
  int offset = 0;
  int n = 0;
  int control = 0;
  std::vector<Eigen::MatrixXd> l, lbar, r;  // per node on [0,T]
  Eigen::MatrixXd g;
};

// ds = (Fx s + Fm M + f) dt + (Gx s + Gm M + g) dW with scalar W.
struct LinearSdeModel {
  TimeGrid grid;
  int dim = 0;
  std::vector<Eigen::MatrixXd> Fx, Fm, Gx, Gm;
  std::vector<Eigen::VectorXd> f, g;
  Eigen::VectorXd s0;
  std::vector<ControlLaw> controls;
  std::vector<CostSpec> costs;
  MemoryKind memory = MemoryKind::Integral;
};

struct SimulationOptions {
  int n_paths = 1000;
  std::uint64_t seed = 42;
  int threads = 1;
  int checkpoints = 11;
  bool store_paths = false;
  bool noise_free = false;
  // Each step sums this many finer normal draws, so runs at dt and dt/m
  // share one Brownian path when substeps differ by the factor m.
  int noise_substeps = 1;
};

// Per-path seed derived from the master seed and the path index.
std::uint64_t path_seed(std::uint64_t master, std::uint64_t index);

struct PathEnsemble {
  TimeGrid grid;
  int dim = 0;
  int n_paths = 0;
  std::uint64_t seed = 0;
  std::vector<int> checkpoints;  // node indices
  std::vector<int> control_dims;
  // Flattened [path][checkpoint][component].
  std::vector<double> state_at, memory_at;
  std::vector<std::vector<double>> control_at;  // per control
  std::vector<std::vector<double>> cost;        // per cost spec, per path
  std::vector<std::uint64_t> digest;            // hash of the increments
  // Full trajectories when store_paths is set: [path][node].
  std::vector<std::vector<Eigen::VectorXd>> paths, memories;
  std::vector<std::vector<std::vector<Eigen::VectorXd>>> control_paths;  // [control][path][node]

  Eigen::VectorXd state(int path, int checkpoint) const;
  Eigen::VectorXd memory(int path, int checkpoint) const;
  Eigen::VectorXd control(int which, int path, int checkpoint) const;
};

// Euler-Maruyama with trapezoid memory update; path p uses path_seed(seed, p).
PathEnsemble simulate(const LinearSdeModel& model, const SimulationOptions& options);

// Original state equation with the given laws for u1 and u2. Costs for both
// players are attached (cost index i-1 for player i).
LinearSdeModel open_loop_model(const GameCoefficients& coeffs, const ControlLaw& u1,
                               const ControlLaw& u2);

// Deterministic control paths on the [0,T] nodes.
PathEnsemble simulate_open_loop(const GameCoefficients& coeffs,
                                const std::vector<Eigen::VectorXd>& u1,
                                const std::vector<Eigen::VectorXd>& u2,
                                const SimulationOptions& options);

// Follower best response as a law on the plant state, eta1_bar = 0:
// u1 = Kx M[x] + Keta eta1 + Ku u2.
ControlLaw follower_law(const GameCoefficients& coeffs, const MatrixFunction& pi1,
                        const MatrixFunction& xi1, const AdjointSolution& eta1,
                        const std::vector<Eigen::VectorXd>& u2);

// Pure feed-forward law.
ControlLaw open_loop_law(int dim, std::vector<Eigen::VectorXd> values);

// Stacked phi = (xi, xbar) under the synthesized strategy, with
// psi = (Gamma - W) phi and psi_bar recovered from Gamma.
LinearSdeModel closed_loop_model(const GameCoefficients& coeffs,
                                 const StackedBlocks& blocks,
                                 const GammaLambdaSolution& gl,
                                 const FeedbackGains& gains, double cond_cap = 1e12);

PathEnsemble simulate_closed_loop(const GameCoefficients& coeffs,
                                  const StackedBlocks& blocks,
                                  const GammaLambdaSolution& gl,
                                  const FeedbackGains& gains,
                                  const SimulationOptions& options);

// Stacked blocks with every diffusion block (Abar1, Abar2, C, Cbar, Dbar)
// zeroed.
StackedBlocks zero_diffusion(const StackedBlocks& blocks);

// psi from its own backward equation along a deterministic phi path with
// psi_bar = 0, for comparing against the Gamma/Lambda relation.
std::vector<Eigen::VectorXd> psi_backward(const StackedBlocks& blocks,
                                          const std::vector<Eigen::VectorXd>& phi,
                                          const std::vector<Eigen::VectorXd>& u2,
                                          StarVariant star);

}  // namespace emlq
