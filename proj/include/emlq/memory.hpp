#pragma once

#include "emlq/model.hpp"

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace emlq {

// Which dual of the memory pairing to use for anticipated terms.
//   Window:  int_t^{min(2t,T)} phi(s) ds  (forward window of length t)
//   Adjoint: int_t^T phi(s) ds            (exact adjoint of the running integral)
// Both agree for t >= T/2.
enum class StarVariant { Window, Adjoint };

// Integral: M[x](t) = int_0^t x.  Average: M[x](t) / max(t, dt).
enum class MemoryKind { Integral, Average };

std::string to_string(StarVariant v);
StarVariant parse_star_variant(const std::string& s);

// A vector path on the [0, T] nodes with its cached trapezoid running integral.
class PathSample {
 public:
  PathSample(const TimeGrid& grid, std::vector<Eigen::VectorXd> values);

  const TimeGrid& grid() const { return grid_; }
  int dim() const { return static_cast<int>(values_[0].size()); }
  const std::vector<Eigen::VectorXd>& values() const { return values_; }
  const std::vector<Eigen::VectorXd>& running_integral() const {
    return integral_;
  }

 private:
  TimeGrid grid_;
  std::vector<Eigen::VectorXd> values_;
  std::vector<Eigen::VectorXd> integral_;
};

Eigen::VectorXd memory_integral(const PathSample& x, double t,
                                MemoryKind kind = MemoryKind::Integral);

// Cumulative trapezoid integral of node samples; out[0] = 0.
std::vector<Eigen::VectorXd> cumulative_trapezoid(
    const std::vector<Eigen::VectorXd>& values, double dt);

// Upper node of the star window starting at node k (k <= steps).
int star_end_index(StarVariant v, int k, int steps);

Eigen::MatrixXd star_window(const MatrixFunction& phi, double t);
Eigen::MatrixXd star_adjoint(const MatrixFunction& phi, double t);
Eigen::MatrixXd star(StarVariant v, const MatrixFunction& phi, double t);

// Node samples of the star transform on [0,T], zero-extended to 2T.
// phi must be zero-extended.
MatrixFunction star_transform(const MatrixFunction& phi, StarVariant v);

// |int phi^T M[x] dt - int star_adjoint(phi)^T x dt| (trapezoid on the nodes).
double duality_residual(const MatrixFunction& phi, const PathSample& x);

}  // namespace emlq
