#pragma once

#include "emlq/gamma_lambda.hpp"
#include "emlq/leader.hpp"
#include "emlq/memory.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <string>
#include <vector>

namespace emlq {

struct CriterionResult {
  int id = 0;
  std::string name;
  bool pass = false;
  std::string detail;   // deterministic summary of the measured values
  double seconds = 0.0;
};

struct AcceptanceOptions {
  std::uint64_t seed = 42;
  int paths = 100000;  // Monte Carlo paths for criteria 6 and 7
  int threads = 1;
  // Scratch directory for the CLI round trips of criteria 5, 9 and 10.
  std::string work_dir = "acceptance_work";
  // Restrict to these ids; empty runs all ten.
  std::vector<int> only;
};

// Seed used by criterion `id`, derived from the master seed so that every
// criterion draws its own stream while the suite takes a single seed.
std::uint64_t criterion_seed(std::uint64_t master, int id);

std::vector<CriterionResult> run_acceptance(const AcceptanceOptions& options);

// "[PASS] 3 duality: ..." without the timing.
std::string format_result(const CriterionResult& r);

// psi - (Gamma - W) phi along a noise-free closed-loop phi started at phi0,
// with the diffusion blocks dropped and u2 = Lu2 phi. psi comes from its own
// backward equation.
struct RelationCheck {
  double defect = 0.0;
  bool converged = false;
  int iterations = 0;
  double gamma_norm = 0.0;  // |Gamma(0)|
};
RelationCheck noise_free_relation(const StackedBlocks& blocks, const MatrixFunction& xi3,
                                  const Eigen::VectorXd& phi0,
                                  const GammaLambdaOptions& options, StarVariant star);

}  // namespace emlq
