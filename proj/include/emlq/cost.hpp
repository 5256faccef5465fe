#pragma once

#include "emlq/adjoint.hpp"
#include "emlq/model.hpp"
#include "emlq/simulate.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <vector>

namespace emlq {

struct CostEstimate {
  double value = 0.0;
  double std_error = 0.0;
  int n_paths = 0;
  double dt = 0.0;
  int player = 1;
};

// Mean and standard error of per-path samples.
CostEstimate estimate(const std::vector<double>& samples, double dt, int player);

// J^i from the per-path costs accumulated during simulation.
CostEstimate evaluate_cost(const PathEnsemble& ensemble, int player);

// J^i recomputed from stored trajectories (store_paths) by trapezoid
// quadrature. offset selects the x block inside the simulated state.
CostEstimate evaluate_cost_from_paths(const PathEnsemble& ensemble,
                                      const GameCoefficients& coeffs, int player,
                                      int offset);

// Follower optimal cost for a deterministic u2, with eta1_bar = 0.
double follower_closed_form_cost(const GameCoefficients& coeffs,
                                 const MatrixFunction& pi1, const AdjointSolution& eta1,
                                 const MatrixFunction& xi1,
                                 const std::vector<Eigen::VectorXd>& u2);

// <x0, Pi2(0) x0 + eta2(0)>.
double leader_closed_form_cost(const MatrixFunction& pi2, const AdjointSolution& eta2,
                               const Eigen::VectorXd& x0);

// A closed-form value against a Monte Carlo estimate.
struct Agreement {
  double reference = 0.0;
  double estimate = 0.0;
  double difference = 0.0;
  double combined_se = 0.0;
  double multiple = 3.0;
  bool pass = false;
};

// reference_se is the standard error of the reference (0 for closed forms).
Agreement compare(double reference, double reference_se, const CostEstimate& mc,
                  double multiple = 3.0);

struct DirectionalCheck {
  double epsilon = 0.0;
  double derivative = 0.0;     // [J(+eps) - J(-eps)] / (2 eps)
  double derivative_se = 0.0;  // paired standard error
  double curvature = 0.0;      // [J(+eps) - 2 J(0) + J(-eps)] / eps^2
  double curvature_se = 0.0;
  bool derivative_ok = false;  // |derivative| <= multiple * derivative_se
  bool curvature_ok = false;   // curvature > 0
  bool crn_ok = false;         // all three runs consumed identical increments
};

// Per-path costs and increment digests of one simulation at a perturbation.
struct PerturbedRun {
  std::vector<double> costs;
  std::vector<std::uint64_t> digest;
};

DirectionalCheck central_difference(const std::function<PerturbedRun(double)>& run,
                                    double epsilon, double multiple = 2.0);

struct StationarityReport {
  int player = 1;
  std::uint64_t seed = 0;
  double base_cost = 0.0;
  double base_se = 0.0;
  std::vector<DirectionalCheck> checks;  // direction-major, then epsilon
  bool pass = false;
};

// Perturbs the feed-forward part of player i's law by +-eps v and compares
// costs under common random numbers. Each direction is a path on the
// [0,T] nodes with the dimension of u^i.
StationarityReport stationarity_check(const GameCoefficients& coeffs,
                                      const ControlLaw& u1, const ControlLaw& u2,
                                      const std::vector<std::vector<Eigen::VectorXd>>& directions,
                                      const std::vector<double>& epsilons, int player,
                                      const SimulationOptions& options,
                                      double multiple = 2.0);

}  // namespace emlq
