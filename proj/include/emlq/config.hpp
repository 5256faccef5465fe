#pragma once

#include "emlq/adjoint.hpp"
#include "emlq/advertising.hpp"
#include "emlq/gamma_lambda.hpp"
#include "emlq/memory.hpp"
#include "emlq/model.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace emlq {

enum class ScenarioKind { Advertising, Raw, Blocks };

std::string to_string(ScenarioKind k);

// Constant stacked blocks given directly, for exercising the Gamma/Lambda
// solver without a game behind it.
struct BlockSpec {
  Eigen::MatrixXd A1, A2, Abar1, Abar2, B, C, Cbar, H;  // dim x dim
  Eigen::MatrixXd D, Dbar, G1, G2;                      // dim x k2
  Eigen::MatrixXd xi3;                                  // k2 x k2
};

struct RunConfig {
  ScenarioKind scenario = ScenarioKind::Advertising;
  double horizon = 10.0;
  double dt = 1e-3;
  int paths = 1000;
  std::uint64_t seed = 42;
  int threads = 1;
  bool noise_free = false;

  GammaLambdaOptions solver;
  AdjointOptions adjoint;
  double assumption_tol = 1e-8;

  AdvertisingScenario advertising;

  // raw scenario
  ConstantCoefficients raw;
  bool lbar1_auto = false;
  Eigen::VectorXd u2;  // constant leader control for the follower problem

  BlockSpec blocks;

  // key -> value text as read, for run records.
  std::map<std::string, std::string> entries;
};

// `key = value` lines, `#` comments. Unknown or repeated keys, bad numbers
// and inconsistent shapes raise ConfigError naming the line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// "1 2; 3 4" (rows split by ';', entries by blanks or commas).
Eigen::MatrixXd parse_matrix(const std::string& text);

// Sorted key/value pairs that describe the run, flags applied.
std::vector<std::pair<std::string, std::string>> describe(const RunConfig& cfg);

}  // namespace emlq
