// Per-agent primal/dual step sizes and their admissibility certificate.

#pragma once

#include <vector>

#include <Eigen/Dense>

#include "adapd/graph.hpp"
#include "adapd/problem.hpp"

namespace adapd {

inline constexpr double kDefaultStepCap = 1e3;

/// Constants the step-size rule depends on, per agent.
struct StepConstants {
  Eigen::VectorXd lipschitz_value;     ///< C_i
  Eigen::VectorXd delta;               ///< delta_i
  Eigen::VectorXd lipschitz_grad;      ///< L_i^f
  Eigen::VectorXd lipschitz_jacobian;  ///< L_i^g
  double dual_bound = 1.0;             ///< B

  static StepConstants from(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                            double dual_bound);
  std::size_t size() const { return static_cast<std::size_t>(delta.size()); }
};

/// Upper limits on (tau_i, sigma_i, gamma_i) before the safety factor:
///   tau   <= 1 / (2 (C_i + delta_i) + L_i^f + B L_i^g)
///   sigma <= 1 / (3 C_i)
///   gamma <= 1 / (3 delta_i)
/// A zero denominator gives +inf.
struct StepLimits {
  double tau;
  double sigma;
  double gamma;
};
StepLimits step_limits(const StepConstants& constants, std::size_t i);

/// Step sizes that always satisfy the limits above scaled by `safety_factor`.
/// The constructor re-checks every inequality and throws std::invalid_argument
/// if one fails.
class StepSizes {
 public:
  StepSizes(Eigen::VectorXd tau, Eigen::VectorXd sigma, Eigen::VectorXd gamma,
            double safety_factor, StepConstants constants);

  std::size_t size() const { return static_cast<std::size_t>(tau_.size()); }
  double tau(std::size_t i) const { return tau_(static_cast<Eigen::Index>(i)); }
  double sigma(std::size_t i) const { return sigma_(static_cast<Eigen::Index>(i)); }
  double gamma(std::size_t i) const { return gamma_(static_cast<Eigen::Index>(i)); }
  const Eigen::VectorXd& tau() const { return tau_; }
  const Eigen::VectorXd& sigma() const { return sigma_; }
  const Eigen::VectorXd& gamma() const { return gamma_; }
  double safety_factor() const { return safety_factor_; }
  const StepConstants& constants() const { return constants_; }
  double dual_bound() const { return constants_.dual_bound; }

 private:
  Eigen::VectorXd tau_;
  Eigen::VectorXd sigma_;
  Eigen::VectorXd gamma_;
  double safety_factor_;
  StepConstants constants_;
};

/// Each step is safety_factor times its limit, clipped at `cap`
/// (which also replaces limits that are infinite).
StepSizes compute_step_sizes(const StepConstants& constants, double safety_factor = 1.0,
                             double cap = kDefaultStepCap);
StepSizes compute_step_sizes(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                             double dual_bound, double safety_factor = 1.0,
                             double cap = kDefaultStepCap);

}  // namespace adapd
