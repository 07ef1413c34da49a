#include "adapd/solver.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include "adapd/io_util.hpp"

namespace adapd {

namespace {

using Eigen::Index;
using Eigen::VectorXd;

Index idx(std::size_t i) { return static_cast<Index>(i); }

ConstVectorMap block_map(const VectorXd& stacked, std::size_t i, std::size_t n) {
  return ConstVectorMap(stacked.data() + i * n, idx(n));
}

double exponential_draw(std::mt19937_64& rng) {
  return std::exponential_distribution<double>(1.0)(rng);
}

}  // namespace

VectorXd step_dual_y(double sigma, std::size_t momentum, const VectorXd& g_cur,
                     const VectorXd& g_prev, const VectorXd& y) {
  if (momentum == 0) throw std::invalid_argument("momentum scale must be >= 1");
  if (g_cur.size() != y.size() || g_prev.size() != y.size()) {
    throw std::invalid_argument("step_dual_y: dimension mismatch");
  }
  const double two_m = 2.0 * static_cast<double>(momentum);
  const VectorXd drift = g_cur - ((two_m - 1.0) / two_m) * g_prev;
  return (y + (two_m * sigma) * drift).cwiseMax(0.0);
}

VectorXd step_dual_lambda(double gamma, std::size_t momentum, const ConsensusMatrix& consensus,
                          std::size_t agent, std::span<const NeighborPrimal> data,
                          const VectorXd& lambda) {
  if (momentum == 0) throw std::invalid_argument("momentum scale must be >= 1");
  const auto& nbrs = consensus.neighbors(agent);
  if (data.size() != nbrs.size() + 1) {
    throw std::logic_error("step_dual_lambda: neighbor data must cover N_i and i exactly");
  }
  std::vector<bool> seen(consensus.size(), false);
  const double two_m = 2.0 * static_cast<double>(momentum);
  VectorXd combo = VectorXd::Zero(lambda.size());
  for (const auto& d : data) {
    const bool allowed =
        d.agent == agent || std::binary_search(nbrs.begin(), nbrs.end(), d.agent);
    if (!allowed || seen.at(d.agent)) {
      throw std::logic_error("step_dual_lambda: unexpected or repeated agent " +
                             std::to_string(d.agent));
    }
    seen[d.agent] = true;
    if (d.x_cur.size() != lambda.size() || d.x_prev.size() != lambda.size()) {
      throw std::invalid_argument("step_dual_lambda: dimension mismatch");
    }
    combo += consensus.v(agent, d.agent) * (two_m * d.x_cur - (two_m - 1.0) * d.x_prev);
  }
  return lambda + gamma * combo;
}

VectorXd step_primal_x(double tau, const VectorXd& x, const VectorXd& grad_f,
                       const Eigen::MatrixXd& jacobian, const VectorXd& y_new,
                       const VectorXd& lambda_new, std::span<const NeighborDual> neighbor_duals,
                       const ConsensusMatrix& consensus, std::size_t agent,
                       const BoxIndicator& box) {
  const auto& nbrs = consensus.neighbors(agent);
  if (neighbor_duals.size() != nbrs.size()) {
    throw std::logic_error("step_primal_x: neighbor duals must cover N_i exactly");
  }
  VectorXd direction = grad_f + consensus.v(agent, agent) * lambda_new;
  if (jacobian.rows() > 0) direction.noalias() += jacobian.transpose() * y_new;
  for (std::size_t k = 0; k < neighbor_duals.size(); ++k) {
    if (neighbor_duals[k].agent != nbrs[k]) {
      throw std::logic_error("step_primal_x: neighbor duals must follow the sorted neighbor list");
    }
    direction += consensus.v(agent, nbrs[k]) * neighbor_duals[k].lambda;
  }
  return box.prox(x - tau * direction);
}

ErgodicAccumulator::ErgodicAccumulator(std::size_t primal_len, std::size_t dual_len) {
  sums_.x = VectorXd::Zero(idx(primal_len));
  sums_.y = VectorXd::Zero(idx(dual_len));
  sums_.lambda = VectorXd::Zero(idx(primal_len));
}

void ErgodicAccumulator::add_weighted(const PrimalDualPoint& it, double weight) {
  if (it.x.size() != sums_.x.size() || it.y.size() != sums_.y.size() ||
      it.lambda.size() != sums_.lambda.size()) {
    throw std::invalid_argument("ergodic accumulator: iterate has wrong shape");
  }
  if (weight == 1.0) {
    sums_.x += it.x;
    sums_.y += it.y;
    sums_.lambda += it.lambda;
  } else {
    sums_.x += weight * it.x;
    sums_.y += weight * it.y;
    sums_.lambda += weight * it.lambda;
  }
  total_weight_ += weight;
  ++count_;
}

void ErgodicAccumulator::accumulate(const PrimalDualPoint& iterate, std::int64_t k,
                                    std::int64_t horizon, std::size_t num_agents) {
  if (k < 1) throw std::invalid_argument("ergodic sum starts at iterate 1");
  if (k > horizon) throw std::invalid_argument("iterate index beyond the horizon");
  if (horizon_ != 0) throw std::logic_error("accumulator already finalized");
  if (k != count_ + 1) throw std::invalid_argument("iterates must be accumulated in order");
  const double weight = k < horizon ? 1.0 : static_cast<double>(num_agents);
  add_weighted(iterate, weight);
  if (k == horizon) horizon_ = horizon;
}

ErgodicPoint ErgodicAccumulator::finalize() const {
  if (horizon_ == 0) throw std::logic_error("terminal iterate not yet accumulated");
  const double inv = 1.0 / total_weight_;
  return ErgodicPoint{{sums_.x * inv, sums_.y * inv, sums_.lambda * inv}, horizon_};
}

void ErgodicAccumulator::add(const PrimalDualPoint& iterate) {
  if (horizon_ != 0) throw std::logic_error("accumulator already finalized");
  add_weighted(iterate, 1.0);
}

ErgodicPoint ErgodicAccumulator::snapshot(const PrimalDualPoint& last,
                                          double terminal_weight) const {
  if (count_ == 0) throw std::logic_error("no iterates accumulated");
  const double extra = terminal_weight - 1.0;
  const double inv = 1.0 / (total_weight_ + extra);
  return ErgodicPoint{{(sums_.x + extra * last.x) * inv, (sums_.y + extra * last.y) * inv,
                       (sums_.lambda + extra * last.lambda) * inv},
                      count_};
}

void ErgodicAccumulator::restore(PrimalDualPoint sums, std::int64_t count, double total_weight,
                                 std::int64_t horizon) {
  sums_ = std::move(sums);
  count_ = count;
  total_weight_ = total_weight;
  horizon_ = horizon;
}

std::string to_string(Activation a) {
  return a == Activation::kUniform ? "uniform" : "exponential";
}

Activation activation_from_string(const std::string& s) {
  if (s == "uniform") return Activation::kUniform;
  if (s == "exponential") return Activation::kExponentialClocks;
  throw std::invalid_argument("unknown activation '" + s + "'");
}

std::string to_string(PreviousIterate p) {
  return p == PreviousIterate::kGlobal ? "global" : "last-broadcast";
}

PreviousIterate previous_iterate_from_string(const std::string& s) {
  if (s == "global") return PreviousIterate::kGlobal;
  if (s == "last-broadcast") return PreviousIterate::kLastBroadcast;
  throw std::invalid_argument("unknown previous-iterate rule '" + s + "'");
}

PrimalDualPoint default_initial_point(const ProblemInstance& instance) {
  const std::size_t n = instance.dim();
  PrimalDualPoint p;
  p.x = VectorXd::Zero(idx(n * instance.num_agents()));
  for (std::size_t i = 0; i < instance.num_agents(); ++i) {
    block(p.x, i, n) = instance.agent(i).box.prox(VectorXd::Zero(idx(n)));
  }
  p.y = VectorXd::Zero(idx(instance.constraint_dim()));
  p.lambda = VectorXd::Zero(p.x.size());
  return p;
}

namespace detail {

SolverState initial_state(const ProblemInstance& instance, const PrimalDualPoint& initial,
                          std::uint64_t rng_seed) {
  const std::size_t n = instance.dim();
  const std::size_t big_n = instance.num_agents();
  if (initial.x.size() != idx(n * big_n) || initial.lambda.size() != idx(n * big_n) ||
      initial.y.size() != idx(instance.constraint_dim())) {
    throw std::invalid_argument("initial point has wrong shape");
  }
  if (initial.y.size() > 0 && initial.y.minCoeff() < 0.0) {
    throw std::invalid_argument("initial constraint multipliers must be nonnegative");
  }
  SolverState s;
  s.x_cur = initial.x;
  s.x_prev = initial.x;
  s.y = initial.y;
  s.lambda = initial.lambda;
  s.g_cur = eval_stacked(instance, initial.x).g;
  s.g_prev = s.g_cur;
  s.last_update.assign(big_n, -1);
  s.ergodic = ErgodicAccumulator(n * big_n, instance.constraint_dim());
  s.rng.seed(rng_seed);
  return s;
}

void update_agent(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                  const StepSizes& steps, std::size_t momentum, std::size_t i,
                  const SolverState& read, SolverState& next, std::int64_t tick) {
  const std::size_t n = instance.dim();
  const LocalProblem& agent = instance.agent(i);
  const Index off = idx(instance.constraint_offset(i));
  const Index mi = idx(agent.constraint.output_dim());

  // Under the global rule only the agent woken in the previous tick carries momentum.
  const auto prev_is_stored = [&](std::size_t j) {
    return tick < 0 || read.last_update[j] == tick - 1;
  };
  const auto& x_prev_src = [&](std::size_t j) -> const VectorXd& {
    return prev_is_stored(j) ? read.x_prev : read.x_cur;
  };

  const VectorXd x_k = block(read.x_cur, i, n);
  const VectorXd g_k = read.g_cur.segment(off, mi);
  const VectorXd g_km1 = prev_is_stored(i) ? VectorXd(read.g_prev.segment(off, mi)) : g_k;
  const VectorXd y_new = step_dual_y(steps.sigma(i), momentum, g_k, g_km1,
                                     read.y.segment(off, mi));

  VectorXd lambda_new = block(read.lambda, i, n);
  if (consensus.active()) {
    std::vector<NeighborPrimal> data;
    data.push_back({i, block_map(read.x_cur, i, n), block_map(x_prev_src(i), i, n)});
    for (std::size_t j : consensus.neighbors(i)) {
      data.push_back({j, block_map(read.x_cur, j, n), block_map(x_prev_src(j), j, n)});
    }
    lambda_new = step_dual_lambda(steps.gamma(i), momentum, consensus, i, data, lambda_new);
  }

  std::vector<NeighborDual> duals;
  for (std::size_t j : consensus.neighbors(i)) duals.push_back({j, block_map(read.lambda, j, n)});
  const VectorXd x_new =
      step_primal_x(steps.tau(i), x_k, agent.objective.gradient(x_k), agent.constraint.jacobian(x_k),
                    y_new, lambda_new, duals, consensus, i, agent.box);

  block(next.x_prev, i, n) = x_k;
  block(next.x_cur, i, n) = x_new;
  next.y.segment(off, mi) = y_new;
  block(next.lambda, i, n) = lambda_new;
  next.g_prev.segment(off, mi) = g_k;
  next.g_cur.segment(off, mi) = agent.constraint.value(x_new);
}

MetricsRow record_row(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                      const ErgodicPoint& ergodic, std::int64_t comms, const RunOptions& options,
                      double elapsed_s) {
  MetricsRow row = options.reference
                       ? ergodic_metrics(instance, consensus, ergodic, *options.reference)
                       : reference_free_metrics(instance, consensus, ergodic);
  row.comms = comms;
  row.wallclock_s = options.measure_wallclock ? elapsed_s : 0.0;
  return row;
}

}  // namespace detail

AsyncSolver::AsyncSolver(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                         StepSizes steps, const PrimalDualPoint& initial, std::uint64_t rng_seed,
                         Activation activation, PreviousIterate previous)
    : instance_(&instance),
      consensus_(&consensus),
      steps_(std::move(steps)),
      previous_(previous),
      activation_(activation),
      state_(detail::initial_state(instance, initial, rng_seed)) {
  if (consensus.size() != instance.num_agents() || steps_.size() != instance.num_agents()) {
    throw std::invalid_argument("instance, consensus matrix and step sizes disagree on N");
  }
  if (activation_ == Activation::kExponentialClocks) {
    state_.clocks.resize(idx(instance.num_agents()));
    for (Index i = 0; i < state_.clocks.size(); ++i) state_.clocks(i) = exponential_draw(state_.rng);
  }
}

std::size_t AsyncSolver::draw_awake_agent() {
  const std::size_t big_n = instance_->num_agents();
  if (activation_ == Activation::kExponentialClocks) {
    Index next = 0;
    state_.time = state_.clocks.minCoeff(&next);
    state_.clocks(next) += exponential_draw(state_.rng);
    return static_cast<std::size_t>(next);
  }
  if (big_n == 1) return 0;
  return std::uniform_int_distribution<std::size_t>(0, big_n - 1)(state_.rng);
}

std::size_t AsyncSolver::step() {
  const std::size_t i = draw_awake_agent();
  const std::int64_t tick = previous_ == PreviousIterate::kGlobal ? state_.iteration : -1;
  // Only agent i's blocks are written, and they are read before being written.
  detail::update_agent(*instance_, *consensus_, steps_, instance_->num_agents(), i, state_, state_,
                       tick);
  state_.last_update[i] = state_.iteration;
  ++state_.iteration;
  ++state_.communications;
  state_.ergodic.add(state_.current());
  return i;
}

AgentState AsyncSolver::agent_state(std::size_t i) const {
  const std::size_t n = instance_->dim();
  const Index off = idx(instance_->constraint_offset(i));
  const Index mi = idx(instance_->agent(i).constraint.output_dim());
  return AgentState{block(state_.x_cur, i, n), block(state_.x_prev, i, n),
                    state_.y.segment(off, mi), block(state_.lambda, i, n)};
}

ErgodicPoint AsyncSolver::ergodic() const {
  return state_.ergodic.snapshot(state_.current(),
                                 static_cast<double>(instance_->num_agents()));
}

std::string AsyncSolver::checkpoint() const {
  std::ostringstream out;
  out << "ADAPD-CKPT v1\n";
  out << "instance " << hex64(instance_->hash()) << '\n';
  out << "activation " << to_string(activation_) << '\n';
  out << "previous " << to_string(previous_) << '\n';
  out << "iteration " << state_.iteration << '\n';
  out << "communications " << state_.communications << '\n';
  out << "time " << format_double(state_.time) << '\n';
  out << "rng " << state_.rng << '\n';
  out << "clocks " << state_.clocks.size() << ' ' << format_vector(state_.clocks) << '\n';
  out << "last_update";
  for (auto t : state_.last_update) out << ' ' << t;
  out << '\n';
  out << "x_cur " << format_vector(state_.x_cur) << '\n';
  out << "x_prev " << format_vector(state_.x_prev) << '\n';
  out << "y " << format_vector(state_.y) << '\n';
  out << "lambda " << format_vector(state_.lambda) << '\n';
  const PrimalDualPoint& sums = state_.ergodic.sums();
  out << "ergodic " << state_.ergodic.count() << ' ' << format_double(state_.ergodic.total_weight())
      << ' ' << state_.ergodic.horizon() << '\n';
  out << "sum_x " << format_vector(sums.x) << '\n';
  out << "sum_y " << format_vector(sums.y) << '\n';
  out << "sum_lambda " << format_vector(sums.lambda) << '\n';
  out << "end\n";
  return out.str();
}

void AsyncSolver::restore(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  if (!std::getline(in, magic) || magic != "ADAPD-CKPT v1") {
    throw std::invalid_argument("checkpoint: missing 'ADAPD-CKPT v1' header");
  }
  TokenReader r(in, "checkpoint");
  r.expect("instance");
  if (r.next() != hex64(instance_->hash())) r.fail("checkpoint belongs to a different instance");
  r.expect("activation");
  if (activation_from_string(r.next()) != activation_) r.fail("activation rule differs");
  r.expect("previous");
  if (previous_iterate_from_string(r.next()) != previous_) r.fail("previous-iterate rule differs");

  const std::size_t nn = instance_->dim() * instance_->num_agents();
  const std::size_t m = instance_->constraint_dim();
  SolverState s = detail::initial_state(*instance_, default_initial_point(*instance_), 0);
  r.expect("iteration");
  s.iteration = static_cast<std::int64_t>(r.next_uint());
  r.expect("communications");
  s.communications = static_cast<std::int64_t>(r.next_uint());
  r.expect("time");
  s.time = r.next_double();
  r.expect("rng");
  if (!(in >> s.rng)) r.fail("bad random state");
  r.expect("clocks");
  s.clocks = r.next_vector(r.next_uint());
  r.expect("last_update");
  for (auto& t : s.last_update) {
    const std::string token = r.next();
    t = std::stoll(token);
  }
  r.expect("x_cur");
  s.x_cur = r.next_vector(nn);
  r.expect("x_prev");
  s.x_prev = r.next_vector(nn);
  r.expect("y");
  s.y = r.next_vector(m);
  r.expect("lambda");
  s.lambda = r.next_vector(nn);
  r.expect("ergodic");
  const auto count = static_cast<std::int64_t>(r.next_uint());
  const double total = r.next_double();
  const auto horizon = static_cast<std::int64_t>(r.next_uint());
  PrimalDualPoint sums;
  r.expect("sum_x");
  sums.x = r.next_vector(nn);
  r.expect("sum_y");
  sums.y = r.next_vector(m);
  r.expect("sum_lambda");
  sums.lambda = r.next_vector(nn);
  r.expect("end");
  s.ergodic.restore(std::move(sums), count, total, horizon);
  s.g_cur = eval_stacked(*instance_, s.x_cur).g;
  s.g_prev = eval_stacked(*instance_, s.x_prev).g;
  state_ = std::move(s);
}

RunResult run_async(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                    std::int64_t iterations, const StepSizes& steps,
                    const PrimalDualPoint& initial, std::uint64_t rng_seed,
                    const RunOptions& options) {
  if (iterations < 1) throw std::invalid_argument("iteration count must be >= 1");
  if (options.record_every < 0) throw std::invalid_argument("record_every must be >= 0");
  AsyncSolver solver(instance, consensus, steps, initial, rng_seed, options.activation,
                     options.previous);
  RunRecord record;
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t k = 1; k <= iterations; ++k) {
    solver.step();
    if (options.on_iteration) options.on_iteration(solver.state());
    const bool due = options.record_every > 0 &&
                     (k % options.record_every == 0 || k == iterations);
    if (due) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      record.rows.push_back(detail::record_row(instance, consensus, solver.ergodic(),
                                               solver.state().communications, options, elapsed));
      if (options.on_record) options.on_record(record.rows.back());
    }
  }
  ErgodicPoint ergodic = solver.ergodic();
  return RunResult{solver.state(), std::move(ergodic), std::move(record)};
}

}  // namespace adapd
