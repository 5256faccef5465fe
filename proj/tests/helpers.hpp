#pragma once

#include "emlq/model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <vector>

namespace testing {

inline Eigen::MatrixXd scalar(double v) { return Eigen::MatrixXd::Constant(1, 1, v); }

inline double max_abs(const Eigen::MatrixXd& m) {
  return m.size() ? m.cwiseAbs().maxCoeff() : 0.0;
}

inline double sup_diff(const emlq::MatrixFunction& a, const emlq::MatrixFunction& b, int last) {
  double e = 0.0;
  for (int k = 0; k <= last; ++k) e = std::max(e, max_abs(a[k] - b[k]));
  return e;
}

}  // namespace testing
