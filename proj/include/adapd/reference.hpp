// High-accuracy reference saddle point used by the error metrics.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>

#include <Eigen/Dense>

#include "adapd/point.hpp"

namespace adapd {

struct ReferenceSolution {
  Eigen::VectorXd x_star;       ///< shared decision, length n
  double phi_star = 0.0;        ///< sum_i phi_i(x_star)
  Eigen::VectorXd y_star;       ///< stacked constraint multipliers, length m
  Eigen::VectorXd lambda_star;  ///< stacked consensus multipliers, length nN

  double tolerance = 0.0;            ///< requested
  double primal_feasibility = 0.0;   ///< max_i ||[g_i(x_star)]_+||
  double stationarity = 0.0;         ///< ||x - P(x - grad_x L)|| at the solution
  double complementarity = 0.0;      ///< max_j |y_j g_j|
  double consensus_residual = 0.0;   ///< ||V^T lambda + r|| left after the least-squares fit
  std::int64_t iterations = 0;
  std::string method;
  /// Hash of the instance, graph and consensus settings it was solved for.
  std::uint64_t key = 0;

  std::size_t num_agents() const {
    return x_star.size() == 0 ? 0 : static_cast<std::size_t>(lambda_star.size() / x_star.size());
  }
  /// (1 kron x_star, y_star, lambda_star).
  PrimalDualPoint saddle_point() const;

  /// Versioned text container, header "ADAPD-REF v1".
  std::string serialize() const;
  static ReferenceSolution deserialize(std::istream& in);
};

}  // namespace adapd
