#include "adapd/step_sizes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace adapd {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double inverse_or_inf(double denominator) { return denominator > 0.0 ? 1.0 / denominator : kInf; }

}  // namespace

StepConstants StepConstants::from(const ProblemInstance& instance,
                                  const ConsensusMatrix& consensus, double dual_bound) {
  if (consensus.size() != instance.num_agents()) {
    throw std::invalid_argument("consensus matrix and instance disagree on agent count");
  }
  const auto n = static_cast<Eigen::Index>(instance.num_agents());
  StepConstants c;
  c.lipschitz_value.resize(n);
  c.delta = consensus.delta();
  c.lipschitz_grad.resize(n);
  c.lipschitz_jacobian.resize(n);
  c.dual_bound = dual_bound;
  for (Eigen::Index i = 0; i < n; ++i) {
    const LocalProblem& agent = instance.agent(static_cast<std::size_t>(i));
    c.lipschitz_value(i) = agent.constraint.lipschitz_value();
    c.lipschitz_grad(i) = agent.objective.lipschitz_grad();
    c.lipschitz_jacobian(i) = agent.constraint.lipschitz_jacobian();
  }
  return c;
}

StepLimits step_limits(const StepConstants& c, std::size_t i) {
  const auto k = static_cast<Eigen::Index>(i);
  const double ci = c.lipschitz_value(k);
  const double di = c.delta(k);
  return StepLimits{
      inverse_or_inf(2.0 * (ci + di) + c.lipschitz_grad(k) + c.dual_bound * c.lipschitz_jacobian(k)),
      inverse_or_inf(3.0 * ci),
      inverse_or_inf(3.0 * di),
  };
}

StepSizes::StepSizes(Eigen::VectorXd tau, Eigen::VectorXd sigma, Eigen::VectorXd gamma,
                     double safety_factor, StepConstants constants)
    : tau_(std::move(tau)),
      sigma_(std::move(sigma)),
      gamma_(std::move(gamma)),
      safety_factor_(safety_factor),
      constants_(std::move(constants)) {
  if (!(safety_factor > 0.0 && safety_factor <= 1.0)) {
    throw std::invalid_argument("safety factor must lie in (0, 1]");
  }
  if (!(constants_.dual_bound >= 0.0)) throw std::invalid_argument("dual bound must be >= 0");
  const std::size_t n = constants_.size();
  if (static_cast<std::size_t>(tau_.size()) != n || static_cast<std::size_t>(sigma_.size()) != n ||
      static_cast<std::size_t>(gamma_.size()) != n) {
    throw std::invalid_argument("step sizes and constants disagree on agent count");
  }
  // Relative slack only absorbs the rounding of safety * limit.
  constexpr double kSlack = 1.0 + 1e-12;
  for (std::size_t i = 0; i < n; ++i) {
    const StepLimits lim = step_limits(constants_, i);
    const auto check = [&](double value, double limit, const char* name) {
      if (!(value > 0.0) || !std::isfinite(value)) {
        throw std::invalid_argument(std::string(name) + " must be positive and finite (agent " +
                                    std::to_string(i) + ")");
      }
      if (value > safety_factor_ * limit * kSlack) {
        throw std::invalid_argument(std::string(name) + " violates its admissibility bound (agent " +
                                    std::to_string(i) + ")");
      }
    };
    check(tau_(static_cast<Eigen::Index>(i)), lim.tau, "tau");
    check(sigma_(static_cast<Eigen::Index>(i)), lim.sigma, "sigma");
    check(gamma_(static_cast<Eigen::Index>(i)), lim.gamma, "gamma");
  }
}

StepSizes compute_step_sizes(const StepConstants& constants, double safety_factor, double cap) {
  if (!(constants.dual_bound >= 0.0)) throw std::invalid_argument("dual bound must be >= 0");
  if (!(safety_factor > 0.0 && safety_factor <= 1.0)) {
    throw std::invalid_argument("safety factor must lie in (0, 1]");
  }
  if (!(cap > 0.0) || !std::isfinite(cap)) throw std::invalid_argument("step cap must be positive");
  const auto n = static_cast<Eigen::Index>(constants.size());
  Eigen::VectorXd tau(n), sigma(n), gamma(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const StepLimits lim = step_limits(constants, static_cast<std::size_t>(i));
    tau(i) = std::min(safety_factor * lim.tau, cap);
    sigma(i) = std::min(safety_factor * lim.sigma, cap);
    gamma(i) = std::min(safety_factor * lim.gamma, cap);
  }
  return StepSizes(std::move(tau), std::move(sigma), std::move(gamma), safety_factor, constants);
}

StepSizes compute_step_sizes(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                             double dual_bound, double safety_factor, double cap) {
  if (!(dual_bound >= 0.0)) throw std::invalid_argument("dual bound must be >= 0");
  return compute_step_sizes(StepConstants::from(instance, consensus, dual_bound), safety_factor,
                            cap);
}

}  // namespace adapd
