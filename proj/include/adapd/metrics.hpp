// Lagrangian evaluation, ergodic error metrics and the explicit
// expected-gap bound for the asynchronous method.

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adapd/graph.hpp"
#include "adapd/point.hpp"
#include "adapd/problem.hpp"
#include "adapd/reference.hpp"
#include "adapd/step_sizes.hpp"

namespace adapd {

/// L(x, y, lambda) = phi(x) + <g(x), y> + <lambda, (V kron I_n) x>.
/// +inf when a block of x leaves its box; throws if y has a negative entry.
double lagrangian(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                  const Eigen::VectorXd& x, const Eigen::VectorXd& y,
                  const Eigen::VectorXd& lambda);
double lagrangian(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                  const PrimalDualPoint& point);

/// sum_i ||[g_i(x_i)]_+||.
double infeasibility(const ProblemInstance& instance, const Eigen::VectorXd& x);
/// ||(V kron I_n) x||_2.
double consensus_violation(const ConsensusMatrix& consensus, const Eigen::VectorXd& x,
                           std::size_t block_dim);

struct MetricsRow {
  std::int64_t k = 0;
  std::int64_t comms = 0;
  double subopt = 0.0;
  double infeas = 0.0;
  double consensus = 0.0;
  double gap = 0.0;
  double wallclock_s = 0.0;
};

/// All metrics at an averaged point. `comms` and `wallclock_s` are left to the caller.
MetricsRow ergodic_metrics(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                             const ErgodicPoint& ergodic, const ReferenceSolution& reference);

/// Like ergodic_metrics but without a reference: subopt and gap are NaN.
MetricsRow reference_free_metrics(const ProblemInstance& instance,
                                  const ConsensusMatrix& consensus, const ErgodicPoint& ergodic);

/// sum_i w_i ||v_i||^2 for consecutive blocks v_i of the given sizes.
double weighted_sq_norm(const Eigen::VectorXd& v, const Eigen::VectorXd& weights,
                        std::span<const std::size_t> block_sizes);

/// Per-agent scalar weights of the block-diagonal matrices
/// T = diag(1/tau_i), S = diag(1/sigma_i), Gamma = diag(1/gamma_i),
/// C = diag(C_i), D = diag(C_i + delta_i), Delta = diag(delta_i).
struct GapBoundInputs {
  Eigen::VectorXd inv_tau;
  Eigen::VectorXd inv_sigma;
  Eigen::VectorXd inv_gamma;
  Eigen::VectorXd c;
  Eigen::VectorXd d;
  Eigen::VectorXd delta;
  PrimalDualPoint initial;
  PrimalDualPoint comparison;
  std::size_t num_agents = 0;
  std::int64_t horizon = 0;

  static GapBoundInputs from(const StepSizes& steps, PrimalDualPoint initial,
                                 PrimalDualPoint comparison, std::int64_t horizon);
};

/// N / (2 (K + N - 1)) * ( ||x0 - x||^2_{T+D} + ||y0 - y||^2_{S+C} + ||l0 - l||^2_{Gamma+Delta}
///                         + (N - 1)/N (L(x0, y, l) - L(x, y0, l0)) ).
double expected_gap_bound(const GapBoundInputs& inputs, const ProblemInstance& instance,
                    const ConsensusMatrix& consensus);

/// L(x_bar, y, l) - L(x, y_bar, l_bar) for averaged point `bar` and comparison `cmp`.
double lagrangian_gap(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                      const PrimalDualPoint& bar, const PrimalDualPoint& cmp);

enum class Metric { kSubopt, kInfeas, kConsensus, kGap };
double metric_value(const MetricsRow& row, Metric metric);

/// Least-squares slope of log(value) against log(k) using rows with k in [k_lo, k_hi].
/// Rows whose metric is not positive are skipped; at least 5 must remain.
/// Rejects constant inputs.
double rate_fit(std::span<const MetricsRow> rows, std::int64_t k_lo, std::int64_t k_hi,
                Metric metric);
double rate_fit(std::span<const double> ks, std::span<const double> values);

inline constexpr const char* kCsvHeader = "k,comms,subopt,infeas,consensus,gap,wallclock_s";

std::string metrics_csv(std::span<const MetricsRow> rows);
/// Parses CSV with the canonical header; errors carry the 1-based line number.
std::vector<MetricsRow> parse_metrics_csv(const std::string& text);

}  // namespace adapd
