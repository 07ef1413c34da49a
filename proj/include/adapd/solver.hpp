// Asynchronous distributed accelerated primal-dual iteration: per-agent
// update steps, random activation, communication accounting and ergodic
// averaging.

#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adapd/graph.hpp"
#include "adapd/metrics.hpp"
#include "adapd/point.hpp"
#include "adapd/problem.hpp"
#include "adapd/reference.hpp"
#include "adapd/step_sizes.hpp"

namespace adapd {

using ConstVectorMap = Eigen::Map<const Eigen::VectorXd>;

/// y+ = max{0, y + 2M sigma (g(x^k) - (2M-1)/(2M) g(x^{k-1}))}.
/// M is the momentum scale: N for the asynchronous method, 1 for synchronous rounds.
Eigen::VectorXd step_dual_y(double sigma, std::size_t momentum, const Eigen::VectorXd& g_cur,
                            const Eigen::VectorXd& g_prev, const Eigen::VectorXd& y);

struct NeighborPrimal {
  std::size_t agent;
  ConstVectorMap x_cur;
  ConstVectorMap x_prev;
};

/// lambda+ = lambda + gamma sum_{j in N_i + {i}} v_ij (2M x_j^k - (2M-1) x_j^{k-1}).
/// `data` must cover exactly agent i and its neighbors; anything else throws std::logic_error.
Eigen::VectorXd step_dual_lambda(double gamma, std::size_t momentum,
                                 const ConsensusMatrix& consensus, std::size_t agent,
                                 std::span<const NeighborPrimal> data,
                                 const Eigen::VectorXd& lambda);

struct NeighborDual {
  std::size_t agent;
  ConstVectorMap lambda;
};

/// x+ = prox_{tau rho_i}(x - tau (grad f_i(x) + Jg_i(x)^T y+ + v_ii lambda_i+ + sum_j v_ij lambda_j)).
/// `neighbor_duals` must cover exactly the neighbors of `agent`.
Eigen::VectorXd step_primal_x(double tau, const Eigen::VectorXd& x, const Eigen::VectorXd& grad_f,
                              const Eigen::MatrixXd& jacobian, const Eigen::VectorXd& y_new,
                              const Eigen::VectorXd& lambda_new,
                              std::span<const NeighborDual> neighbor_duals,
                              const ConsensusMatrix& consensus, std::size_t agent,
                              const BoxIndicator& box);

/// Sums of weighted iterates; finalized weights are 1 for k < K and N for k = K.
class ErgodicAccumulator {
 public:
  ErgodicAccumulator() = default;
  ErgodicAccumulator(std::size_t primal_len, std::size_t dual_len);

  /// Adds iterate k of a run with horizon K; k must advance one at a time from 1.
  void accumulate(const PrimalDualPoint& iterate, std::int64_t k, std::int64_t horizon,
                  std::size_t num_agents);
  /// Requires that iterate K has been accumulated.
  ErgodicPoint finalize() const;

  /// Unit-weight add for open-ended runs.
  void add(const PrimalDualPoint& iterate);
  /// Average as if the horizon were the last added iterate, which gets `terminal_weight`.
  ErgodicPoint snapshot(const PrimalDualPoint& last, double terminal_weight) const;

  std::int64_t count() const { return count_; }
  double total_weight() const { return total_weight_; }
  const PrimalDualPoint& sums() const { return sums_; }

  /// Restores raw state (used by checkpoints).
  void restore(PrimalDualPoint sums, std::int64_t count, double total_weight,
               std::int64_t horizon);
  std::int64_t horizon() const { return horizon_; }

 private:
  void add_weighted(const PrimalDualPoint& iterate, double weight);

  PrimalDualPoint sums_;
  std::int64_t count_ = 0;
  double total_weight_ = 0.0;
  std::int64_t horizon_ = 0;  ///< nonzero once the terminal iterate has been added
};

enum class Activation {
  kUniform,            ///< next awake agent drawn uniformly
  kExponentialClocks,  ///< independent unit-rate exponential clocks; also tracks event times
};

/// Which previous iterate an agent's momentum term refers to.
enum class PreviousIterate {
  /// x^{k-1} of the global sequence: only the agent woken in the previous tick
  /// has x_j^{k-1} != x_j^k.
  kGlobal,
  /// The pair each agent last broadcast; persists until that agent wakes again.
  kLastBroadcast,
};

std::string to_string(Activation a);
Activation activation_from_string(const std::string& s);
std::string to_string(PreviousIterate p);
PreviousIterate previous_iterate_from_string(const std::string& s);

struct AgentState {
  Eigen::VectorXd x_cur;
  Eigen::VectorXd x_prev;
  Eigen::VectorXd y;
  Eigen::VectorXd lambda;
};

/// Stacked state of all agents. Only one agent's blocks change per asynchronous tick.
struct SolverState {
  Eigen::VectorXd x_cur;
  Eigen::VectorXd x_prev;
  Eigen::VectorXd y;
  Eigen::VectorXd lambda;
  Eigen::VectorXd g_cur;   ///< cached g(x_cur)
  Eigen::VectorXd g_prev;  ///< cached g(x_prev)
  /// Tick (0-based) in which each agent last woke; -1 if never.
  std::vector<std::int64_t> last_update;
  std::int64_t iteration = 0;
  std::int64_t communications = 0;
  ErgodicAccumulator ergodic;
  std::mt19937_64 rng;
  Eigen::VectorXd clocks;  ///< next firing time per agent (exponential clocks only)
  double time = 0.0;       ///< simulated time of the latest event

  PrimalDualPoint current() const { return {x_cur, y, lambda}; }
};

struct RunRecord {
  std::vector<MetricsRow> rows;
};

struct RunOptions {
  std::int64_t record_every = 0;  ///< 0 disables recording
  const ReferenceSolution* reference = nullptr;
  bool measure_wallclock = false;  ///< otherwise wallclock_s stays 0 for reproducible output
  Activation activation = Activation::kUniform;
  PreviousIterate previous = PreviousIterate::kLastBroadcast;
  /// Called after every recorded row.
  std::function<void(const MetricsRow&)> on_record;
  /// Called after every asynchronous tick or synchronous round.
  std::function<void(const SolverState&)> on_iteration;
};

struct RunResult {
  SolverState state;
  ErgodicPoint ergodic;
  RunRecord record;
};

/// Default start: x = 0 clamped into each box, y = 0, lambda = 0.
PrimalDualPoint default_initial_point(const ProblemInstance& instance);

/// Single logical writer; deterministic for a fixed seed.
class AsyncSolver {
 public:
  AsyncSolver(const ProblemInstance& instance, const ConsensusMatrix& consensus, StepSizes steps,
              const PrimalDualPoint& initial, std::uint64_t rng_seed,
              Activation activation = Activation::kUniform,
              PreviousIterate previous = PreviousIterate::kLastBroadcast);

  /// Next awake agent; advances the random state.
  std::size_t draw_awake_agent();
  /// One tick: draw an agent, update it, count one broadcast, accumulate.
  std::size_t step();

  const SolverState& state() const { return state_; }
  AgentState agent_state(std::size_t i) const;
  const StepSizes& steps() const { return steps_; }
  std::size_t num_agents() const { return instance_->num_agents(); }
  /// Ergodic average with the current iteration count as horizon.
  ErgodicPoint ergodic() const;

  /// Text checkpoint: iteration, random state, agent states and ergodic sums.
  std::string checkpoint() const;
  /// Replaces the state with a checkpoint taken from a solver on the same instance.
  void restore(const std::string& checkpoint);

 private:
  const ProblemInstance* instance_;
  const ConsensusMatrix* consensus_;
  StepSizes steps_;
  PreviousIterate previous_;
  Activation activation_;
  SolverState state_;
};

/// K asynchronous ticks from `initial`.
RunResult run_async(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                    std::int64_t iterations, const StepSizes& steps,
                    const PrimalDualPoint& initial, std::uint64_t rng_seed,
                    const RunOptions& options = {});

namespace detail {

/// Updates agent i in `next` from values read in `read`. `momentum` is the
/// scale M of the extrapolation; `tick` decides which previous iterate applies
/// under PreviousIterate::kGlobal (pass -1 to always use the stored one).
void update_agent(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                  const StepSizes& steps, std::size_t momentum, std::size_t agent,
                  const SolverState& read, SolverState& next, std::int64_t tick);

/// Records a metrics row for `ergodic`.
MetricsRow record_row(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                      const ErgodicPoint& ergodic, std::int64_t comms,
                      const RunOptions& options, double elapsed_s);

SolverState initial_state(const ProblemInstance& instance, const PrimalDualPoint& initial,
                          std::uint64_t rng_seed);

}  // namespace detail

}  // namespace adapd
