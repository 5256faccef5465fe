#pragma once

#include <Eigen/Dense>

#include <vector>

namespace emlq {

// Uniform grid on [0, 2T]. The extension to 2T hosts the anticipated
// (forward-looking) terms; every model quantity is zero on (T, 2T].
class TimeGrid {
 public:
  TimeGrid() = default;
  TimeGrid(double horizon, double dt);

  double horizon() const { return horizon_; }
  double dt() const { return dt_; }
  // Number of steps on [0, T]; node steps() sits exactly at T.
  int steps() const { return steps_; }
  // Number of nodes on [0, 2T].
  int size() const { return 2 * steps_ + 1; }
  double node(int k) const;

  bool operator==(const TimeGrid& other) const {
    return steps_ == other.steps_ && horizon_ == other.horizon_;
  }

 private:
  double horizon_ = 0.0;
  double dt_ = 0.0;
  int steps_ = 0;
};

TimeGrid build_time_grid(double horizon, double dt);

// Matrix valued function sampled on the grid nodes, piecewise linear in
// between. Holds either the [0, T] nodes only or all [0, 2T] nodes.
class MatrixFunction {
 public:
  MatrixFunction() = default;
  // Zero function on [0, 2T].
  MatrixFunction(const TimeGrid& grid, int rows, int cols);
  // Samples must number steps()+1 (domain [0,T]) or size() (domain [0,2T]).
  MatrixFunction(const TimeGrid& grid, std::vector<Eigen::MatrixXd> values);

  static MatrixFunction constant(const TimeGrid& grid,
                                 const Eigen::MatrixXd& value);

  const TimeGrid& grid() const { return grid_; }
  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int size() const { return static_cast<int>(values_.size()); }
  bool empty() const { return values_.empty(); }
  // True when the samples cover [0, 2T].
  bool extended() const { return size() == grid_.size(); }
  double end_time() const;

  const Eigen::MatrixXd& operator[](int k) const { return values_[k]; }
  Eigen::MatrixXd& operator[](int k) { return values_[k]; }
  const std::vector<Eigen::MatrixXd>& values() const { return values_; }

  Eigen::MatrixXd eval(double t) const;
  // Exact integral of the piecewise linear interpolant over [a, b].
  Eigen::MatrixXd integrate(double a, double b) const;

  MatrixFunction transposed() const;
  double max_abs() const;

 private:
  TimeGrid grid_;
  int rows_ = 0;
  int cols_ = 0;
  std::vector<Eigen::MatrixXd> values_;
};

// Returns f on [0,T] and exact zeros strictly beyond T. f(T) is kept.
MatrixFunction zero_extend(const MatrixFunction& f, const TimeGrid& grid);

// f sampled on the [0, T] nodes only.
MatrixFunction sample_on(const TimeGrid& grid,
                         const std::vector<Eigen::MatrixXd>& values);

struct GameCoefficients {
  TimeGrid grid;
  int n = 0;
  int k1 = 0;
  int k2 = 0;
  MatrixFunction a1, a2, c1, c2;  // n x n
  MatrixFunction b1, d1;          // n x k1
  MatrixFunction b2, d2;          // n x k2
  MatrixFunction l1, l2, lbar1, lbar2;  // n x n symmetric
  MatrixFunction r1;              // k1 x k1
  MatrixFunction r2;              // k2 x k2
  Eigen::MatrixXd g1, g2;
  Eigen::VectorXd x0;

  double horizon() const { return grid.horizon(); }
};

// Coefficients on [0,T]; make_game zero-extends and validates them.
struct CoefficientSet {
  MatrixFunction a1, a2, c1, c2, b1, d1, b2, d2, l1, l2, lbar1, lbar2, r1, r2;
  Eigen::MatrixXd g1, g2;
  Eigen::VectorXd x0;
};

// Constant coefficient matrices, the common case for toys and the
// advertising model.
struct ConstantCoefficients {
  Eigen::MatrixXd a1, a2, c1, c2, b1, d1, b2, d2, l1, l2, lbar1, lbar2, r1, r2;
  Eigen::MatrixXd g1, g2;
  Eigen::VectorXd x0;
};

GameCoefficients make_game(const TimeGrid& grid, const CoefficientSet& set);
GameCoefficients make_game(const TimeGrid& grid,
                           const ConstantCoefficients& c);
CoefficientSet to_coefficient_set(const TimeGrid& grid,
                                  const ConstantCoefficients& c);

// Throws ConfigError on asymmetric weights, non-finite samples or nonzero
// l-bar / r samples beyond T.
void validate(const GameCoefficients& g);

bool is_symmetric(const Eigen::MatrixXd& m, double rel_tol);
Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m);

}  // namespace emlq
