#pragma once

#include <stdexcept>
#include <string>

namespace emlq {

// Bad user input: grid, coefficients, config files. Maps to CLI exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Incompatible matrix or path shapes passed between modules.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Evaluation outside the sampled time interval.
class RangeError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// NaN or overflow while integrating or simulating.
class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A matrix that must be inverted is singular or too badly conditioned.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative solver stopped without meeting its tolerance. Exit code 3.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace emlq
