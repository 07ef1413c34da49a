#pragma once

#include <cstdint>

#include <Eigen/Dense>

namespace adapd {

/// Stacked primal-dual triple: x in R^{nN}, y in R^m_+, lambda in R^{nN}.
struct PrimalDualPoint {
  Eigen::VectorXd x;
  Eigen::VectorXd y;
  Eigen::VectorXd lambda;
};

/// Weighted average of iterates 1..K; `horizon` is K.
struct ErgodicPoint {
  PrimalDualPoint point;
  std::int64_t horizon = 0;
};

}  // namespace adapd
