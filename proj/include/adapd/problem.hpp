// Per-agent problem data: smooth objective f_i, convex constraint block g_i
// and the box indicator rho_i, plus the localization instance generator.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace adapd {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Raised when a Lipschitz-constant estimate cannot be certified.
class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Indicator of a finite box; its proximal map is the coordinatewise clamp.
class BoxIndicator {
 public:
  BoxIndicator(VectorXd lower, VectorXd upper);
  static BoxIndicator uniform(std::size_t dim, double lo, double hi);

  std::size_t dim() const { return static_cast<std::size_t>(lower_.size()); }
  const VectorXd& lower() const { return lower_; }
  const VectorXd& upper() const { return upper_; }

  bool contains(const VectorXd& x, double tol = 0.0) const;
  /// 0 inside the box, +inf outside.
  double value(const VectorXd& x) const;
  /// prox of t * indicator; t only has to be positive and does not matter.
  VectorXd prox(const VectorXd& w) const;
  /// max ||x|| over the box.
  double radius() const;
  /// Same center, half-widths scaled by `factor`.
  BoxIndicator inflated(double factor) const;

  friend bool operator==(const BoxIndicator&, const BoxIndicator&) = default;

 private:
  VectorXd lower_;
  VectorXd upper_;
};

/// Clamp of w to [lower, upper]; rejects lower > upper.
VectorXd prox_box(const VectorXd& w, const VectorXd& lower, const VectorXd& upper);

/// f(x) = 0.5 * curvature * ||x - center||^2, gradient Lipschitz with constant `curvature`.
class SmoothObjective {
 public:
  SmoothObjective(double curvature, VectorXd center);

  std::size_t dim() const { return static_cast<std::size_t>(center_.size()); }
  double curvature() const { return curvature_; }
  const VectorXd& center() const { return center_; }

  double value(const VectorXd& x) const { return 0.5 * curvature_ * (x - center_).squaredNorm(); }
  VectorXd gradient(const VectorXd& x) const { return curvature_ * (x - center_); }
  double lipschitz_grad() const { return curvature_; }

 private:
  double curvature_;
  VectorXd center_;
};

/// One scalar constraint ||A x - b||^2 - eta^2 <= 0.
struct EllipsoidConstraint {
  MatrixXd a;
  VectorXd b;
  double eta = 0.0;

  double value(const VectorXd& x) const { return (a * x - b).squaredNorm() - eta * eta; }
  VectorXd gradient(const VectorXd& x) const { return 2.0 * a.transpose() * (a * x - b); }
};

struct ConstraintConstants {
  double spectral_norm = 0.0;       ///< s_max(A)
  double lipschitz_value = 0.0;     ///< C: Lipschitz constant of g over the box
  double lipschitz_jacobian = 0.0;  ///< L^g: Lipschitz constant of the gradient
};

/// Largest singular value of `a` by power iteration on A^T A.
///
/// Stops at relative change <= rel_tol; throws EstimationError after
/// max_steps. The returned value carries a 1e-6 relative safety margin.
double spectral_norm(const MatrixXd& a, double rel_tol = 1e-8, int max_steps = 10000);

/// Upper bounds for g(x) = ||Ax - b||^2 - eta^2 on `box`:
/// L^g = 2 s^2 and C = 2 s (s r + ||b||) with r the box radius.
ConstraintConstants constraint_constants(const MatrixXd& a, const VectorXd& b,
                                         const BoxIndicator& box);

/// g_i: R^n -> R^{m_i}, one ellipsoid per output.
class ConstraintBlock {
 public:
  /// Constants are estimated over `estimation_box`.
  ConstraintBlock(std::vector<EllipsoidConstraint> rows, const BoxIndicator& estimation_box);

  std::size_t output_dim() const { return rows_.size(); }
  const std::vector<EllipsoidConstraint>& rows() const { return rows_; }
  const std::vector<ConstraintConstants>& row_constants() const { return constants_; }

  VectorXd value(const VectorXd& x) const;
  /// m_i x n.
  MatrixXd jacobian(const VectorXd& x) const;
  /// Jg(x)^T y without forming the Jacobian.
  VectorXd jacobian_transpose_times(const VectorXd& x, const VectorXd& y) const;

  /// C_i, valid for the Euclidean norm of the stacked outputs.
  double lipschitz_value() const { return lipschitz_value_; }
  /// L_i^g, bounds both the operator and Frobenius norm of Jacobian differences.
  double lipschitz_jacobian() const { return lipschitz_jacobian_; }

 private:
  std::vector<EllipsoidConstraint> rows_;
  std::vector<ConstraintConstants> constants_;
  double lipschitz_value_ = 0.0;
  double lipschitz_jacobian_ = 0.0;
};

struct LocalProblem {
  SmoothObjective objective;
  ConstraintBlock constraint;
  BoxIndicator box;

  double phi(const VectorXd& x) const { return objective.value(x) + box.value(x); }
};

struct InstanceMetadata {
  std::string generator = "custom";
  std::uint64_t seed = 0;
  double noise_std = 0.0;
  std::size_t rows_per_agent = 0;
  std::optional<VectorXd> ground_truth;
};

/// Relative inflation of the domain box used when estimating C_i and L_i^g.
inline constexpr double kConstantBoxInflation = 1.1;

class ProblemInstance {
 public:
  ProblemInstance(std::vector<LocalProblem> agents, InstanceMetadata metadata);

  std::size_t dim() const { return dim_; }
  std::size_t num_agents() const { return agents_.size(); }
  const LocalProblem& agent(std::size_t i) const { return agents_.at(i); }
  const std::vector<LocalProblem>& agents() const { return agents_; }
  const InstanceMetadata& metadata() const { return metadata_; }

  /// m = sum of m_i.
  std::size_t constraint_dim() const { return offsets_.back(); }
  std::size_t constraint_offset(std::size_t i) const { return offsets_.at(i); }

  /// Versioned text container, header "ADAPD-INST v1".
  std::string serialize() const;
  static ProblemInstance deserialize(std::istream& in);

  /// FNV-1a of serialize().
  std::uint64_t hash() const;

 private:
  std::vector<LocalProblem> agents_;
  InstanceMetadata metadata_;
  std::size_t dim_;
  std::vector<std::size_t> offsets_;
};

/// Builds a local problem with ellipsoid constraints whose constants are
/// estimated on the box inflated by kConstantBoxInflation.
LocalProblem make_local_problem(SmoothObjective objective, std::vector<EllipsoidConstraint> rows,
                                BoxIndicator box);

/// Sensor-localization family: f_i = 0.5 ||x||^2, g_i = ||A_i x - b_i||^2 - eta_i^2,
/// rho_i = indicator of [-1, 1]^n.
ProblemInstance make_localization_instance(std::size_t n, std::size_t num_agents,
                                           std::size_t rows_per_agent, double noise_std,
                                           std::uint64_t rng_seed);

struct StackedEvaluation {
  double phi = 0.0;  ///< +inf when some block is outside its box
  bool in_domain = true;
  VectorXd g;        ///< concatenated g_i(x_i), length m
};

/// Tolerance for box membership of averaged points.
inline constexpr double kDomainTolerance = 1e-12;

StackedEvaluation eval_stacked(const ProblemInstance& instance, const VectorXd& x_stacked);

/// Block i (length n) of a stacked vector.
inline auto block(const VectorXd& stacked, std::size_t i, std::size_t n) {
  return stacked.segment(static_cast<Eigen::Index>(i * n), static_cast<Eigen::Index>(n));
}
inline auto block(VectorXd& stacked, std::size_t i, std::size_t n) {
  return stacked.segment(static_cast<Eigen::Index>(i * n), static_cast<Eigen::Index>(n));
}

}  // namespace adapd
