// Synchronous primal-dual baseline and the centralized reference solver.

#pragma once

#include <cstdint>
#include <stdexcept>

#include "adapd/graph.hpp"
#include "adapd/problem.hpp"
#include "adapd/reference.hpp"
#include "adapd/solver.hpp"
#include "adapd/step_sizes.hpp"

namespace adapd {

/// Synchronous counterpart of the asynchronous method ("DPDA-S-like"): every
/// round all agents update from round-start values with the single-agent
/// momentum pattern 2g(x^k) - g(x^{k-1}) and 2x^k - x^{k-1}. Each round costs N
/// broadcasts; the ergodic average weights rounds uniformly.
///
/// `options.activation` and `options.previous` are ignored.
RunResult run_sync_baseline(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                            std::int64_t rounds, const StepSizes& steps,
                            const PrimalDualPoint& initial, const RunOptions& options = {});

/// Raised when the reference solve cannot certify its tolerances.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Solves min sum_i phi_i(x) s.t. g_i(x) <= 0 for all i over one shared x, then
/// recovers consensus multipliers lambda* for `consensus`.
///
/// Log-barrier method on the stacked problem (phase I from the box center when
/// needed), then Newton steps on the active-set KKT system. The KKT residuals
/// are re-checked at the end; any residual above `tol` raises ConvergenceError.
/// `max_iters` bounds the total number of Newton steps.
ReferenceSolution solve_centralized(const ProblemInstance& instance,
                                    const ConsensusMatrix& consensus, double tol = 1e-9,
                                    std::int64_t max_iters = 500);

/// B = margin * ||y*||, floored at 1. Requires margin >= 1.
double estimate_dual_bound(const ReferenceSolution& reference, double margin = 2.0);

/// Cache key for a reference: instance hash mixed with the consensus matrix.
std::uint64_t reference_key(const ProblemInstance& instance, const ConsensusMatrix& consensus);

}  // namespace adapd
