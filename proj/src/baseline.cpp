#include "adapd/baseline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

#include "adapd/io_util.hpp"

namespace adapd {

namespace {

using Eigen::Index;

Index idx(std::size_t i) { return static_cast<Index>(i); }

}  // namespace

RunResult run_sync_baseline(const ProblemInstance& instance, const ConsensusMatrix& consensus,
                            std::int64_t rounds, const StepSizes& steps,
                            const PrimalDualPoint& initial, const RunOptions& options) {
  if (rounds < 1) throw std::invalid_argument("round count must be >= 1");
  if (options.record_every < 0) throw std::invalid_argument("record_every must be >= 0");
  const std::size_t big_n = instance.num_agents();
  if (consensus.size() != big_n || steps.size() != big_n) {
    throw std::invalid_argument("instance, consensus matrix and step sizes disagree on N");
  }
  SolverState state = detail::initial_state(instance, initial, 0);
  RunRecord record;
  const auto start = std::chrono::steady_clock::now();
  for (std::int64_t r = 1; r <= rounds; ++r) {
    const SolverState round_start = state;
    for (std::size_t i = 0; i < big_n; ++i) {
      detail::update_agent(instance, consensus, steps, 1, i, round_start, state, -1);
      state.last_update[i] = r - 1;
    }
    ++state.iteration;
    state.communications += static_cast<std::int64_t>(big_n);
    state.ergodic.add(state.current());
    if (options.on_iteration) options.on_iteration(state);
    const bool due = options.record_every > 0 && (r % options.record_every == 0 || r == rounds);
    if (due) {
      const double elapsed =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      record.rows.push_back(detail::record_row(instance, consensus,
                                               state.ergodic.snapshot(state.current(), 1.0),
                                               state.communications, options, elapsed));
      if (options.on_record) options.on_record(record.rows.back());
    }
  }
  ErgodicPoint ergodic = state.ergodic.snapshot(state.current(), 1.0);
  return RunResult{std::move(state), std::move(ergodic), std::move(record)};
}

namespace {

// min f0(z) s.t. c(z) <= 0, all pieces smooth and convex.
struct ConvexProgram {
  std::size_t dim = 0;
  std::function<double(const VectorXd&)> objective;
  std::function<VectorXd(const VectorXd&)> objective_gradient;
  std::function<MatrixXd(const VectorXd&)> objective_hessian;
  std::function<VectorXd(const VectorXd&)> constraints;
  std::function<MatrixXd(const VectorXd&)> constraint_jacobian;
  /// sum_k w_k Hess c_k(z).
  std::function<MatrixXd(const VectorXd&, const VectorXd&)> weighted_constraint_hessian;
};

struct InteriorPointResult {
  VectorXd z;
  VectorXd mu;
  std::int64_t iterations = 0;
  bool converged = false;
  bool stopped_early = false;
};

// Log-barrier method with damped Newton centering; z0 must be strictly feasible.
// Multipliers are read off the central path as mu_k = 1 / (t (-c_k)).
InteriorPointResult interior_point(const ConvexProgram& prog, VectorXd z, double gap_tol,
                                   std::int64_t max_iters,
                                   const std::function<bool(const VectorXd&)>& stop_early = {}) {
  VectorXd c = prog.constraints(z);
  if (c.size() > 0 && !(c.maxCoeff() < 0.0)) {
    throw std::logic_error("interior point: starting point not strictly feasible");
  }
  const auto num_cons = static_cast<double>(c.size());
  constexpr double kGrowth = 10.0;
  constexpr double kArmijo = 0.01;
  constexpr double kBacktrack = 0.5;
  constexpr double kCentered = 1e-14;

  const auto barrier = [&](const VectorXd& zz, const VectorXd& cc, double t) {
    return t * prog.objective(zz) - (-cc).array().log().sum();
  };

  InteriorPointResult out;
  double t = 1.0;
  while (out.iterations < max_iters) {
    // Centering for the current t.
    while (out.iterations < max_iters) {
      if (stop_early && stop_early(z)) {
        out.stopped_early = true;
        out.z = std::move(z);
        out.mu = (-c).cwiseInverse() / t;
        return out;
      }
      ++out.iterations;
      const VectorXd inv = (-c).cwiseInverse();
      const MatrixXd jac = prog.constraint_jacobian(z);
      const VectorXd grad = t * prog.objective_gradient(z) + jac.transpose() * inv;
      MatrixXd h = t * prog.objective_hessian(z) + prog.weighted_constraint_hessian(z, inv);
      h.noalias() += jac.transpose() * inv.cwiseAbs2().asDiagonal() * jac;
      const Eigen::LDLT<MatrixXd> ldlt(h);
      VectorXd dz = ldlt.solve(-grad);
      if (ldlt.info() != Eigen::Success || !dz.allFinite()) {
        dz = h.completeOrthogonalDecomposition().solve(-grad);
      }
      const double decrement = -grad.dot(dz);
      if (!(decrement > kCentered)) break;

      const double b0 = barrier(z, c, t);
      double s = 1.0;
      VectorXd z_new;
      VectorXd c_new;
      for (int tries = 0;; ++tries) {
        z_new = z + s * dz;
        c_new = prog.constraints(z_new);
        if (c_new.size() == 0 || c_new.maxCoeff() < 0.0) {
          if (barrier(z_new, c_new, t) <= b0 - kArmijo * s * decrement) break;
        }
        s *= kBacktrack;
        if (tries > 80) break;
      }
      if (s * dz.norm() <= 1e-16 * std::max(1.0, z.norm())) break;
      z = std::move(z_new);
      c = std::move(c_new);
    }
    if (num_cons / t <= gap_tol) {
      out.converged = true;
      break;
    }
    t *= kGrowth;
  }
  out.mu = (-c).cwiseInverse() / t;
  out.z = std::move(z);
  return out;
}

// Newton iteration on the KKT system restricted to the constraints that the
// barrier solution marks as active. Minimum-norm steps handle duplicated rows.
struct PolishResult {
  VectorXd z;
  VectorXd mu;
  std::int64_t iterations = 0;
  bool accepted = false;
};

PolishResult polish_active_set(const ConvexProgram& prog, const VectorXd& z0, const VectorXd& mu0,
                               std::int64_t max_iters) {
  const VectorXd c0 = prog.constraints(z0);
  std::vector<Index> active;
  for (Index k = 0; k < c0.size(); ++k) {
    if (mu0(k) > -c0(k)) active.push_back(k);
  }
  const auto na = idx(active.size());
  const Index dim = z0.size();

  const auto kkt_residual = [&](const VectorXd& z, const VectorXd& mu_a) {
    const MatrixXd jac = prog.constraint_jacobian(z);
    const VectorXd c = prog.constraints(z);
    VectorXd r(dim + na);
    r.head(dim) = prog.objective_gradient(z);
    for (Index a = 0; a < na; ++a) {
      r.head(dim) += mu_a(a) * jac.row(active[static_cast<std::size_t>(a)]).transpose();
      r(dim + a) = c(active[static_cast<std::size_t>(a)]);
    }
    return r;
  };

  PolishResult out;
  VectorXd z = z0;
  VectorXd mu_a(na);
  for (Index a = 0; a < na; ++a) mu_a(a) = mu0(active[static_cast<std::size_t>(a)]);
  double norm = kkt_residual(z, mu_a).norm();
  for (; out.iterations < max_iters; ++out.iterations) {
    const VectorXd r = kkt_residual(z, mu_a);
    const MatrixXd jac = prog.constraint_jacobian(z);
    VectorXd full_mu = VectorXd::Zero(c0.size());
    for (Index a = 0; a < na; ++a) full_mu(active[static_cast<std::size_t>(a)]) = mu_a(a);
    MatrixXd kkt = MatrixXd::Zero(dim + na, dim + na);
    kkt.topLeftCorner(dim, dim) =
        prog.objective_hessian(z) + prog.weighted_constraint_hessian(z, full_mu);
    for (Index a = 0; a < na; ++a) {
      const auto row = jac.row(active[static_cast<std::size_t>(a)]);
      kkt.block(0, dim + a, dim, 1) = row.transpose();
      kkt.block(dim + a, 0, 1, dim) = row;
    }
    const VectorXd step = kkt.completeOrthogonalDecomposition().solve(-r);
    const VectorXd z_next = z + step.head(dim);
    const VectorXd mu_next = mu_a + step.tail(na);
    const double next_norm = kkt_residual(z_next, mu_next).norm();
    if (!(next_norm < norm)) break;
    z = z_next;
    mu_a = mu_next;
    norm = next_norm;
  }
  out.z = z;
  out.mu = VectorXd::Zero(c0.size());
  for (Index a = 0; a < na; ++a) out.mu(active[static_cast<std::size_t>(a)]) = mu_a(a);
  const VectorXd c = prog.constraints(z);
  bool ok = na == 0 || mu_a.minCoeff() >= 0.0;
  for (Index k = 0; k < c.size() && ok; ++k) {
    if (out.mu(k) == 0.0 && c(k) > 0.0) ok = false;
  }
  out.accepted = ok;
  return out;
}

struct StackedConstraintData {
  std::vector<const EllipsoidConstraint*> rows;
  std::vector<MatrixXd> gram;  // A^T A per row
  VectorXd lower;
  VectorXd upper;
  double curvature = 0.0;
  VectorXd weighted_center;  // sum_i c_i center_i
};

StackedConstraintData gather(const ProblemInstance& instance) {
  const std::size_t n = instance.dim();
  StackedConstraintData d;
  d.lower = VectorXd::Constant(idx(n), -std::numeric_limits<double>::infinity());
  d.upper = VectorXd::Constant(idx(n), std::numeric_limits<double>::infinity());
  d.weighted_center = VectorXd::Zero(idx(n));
  for (const auto& agent : instance.agents()) {
    d.lower = d.lower.cwiseMax(agent.box.lower());
    d.upper = d.upper.cwiseMin(agent.box.upper());
    d.curvature += agent.objective.curvature();
    d.weighted_center += agent.objective.curvature() * agent.objective.center();
    for (const auto& row : agent.constraint.rows()) {
      d.rows.push_back(&row);
      d.gram.push_back(row.a.transpose() * row.a);
    }
  }
  for (Index c = 0; c < idx(n); ++c) {
    if (!(d.lower(c) < d.upper(c))) {
      throw ConvergenceError("agent boxes have an empty or flat intersection in coordinate " +
                             std::to_string(c));
    }
  }
  return d;
}

// Constraint values for [g rows; x - upper; lower - x], optionally shifted by -s.
VectorXd stacked_constraints(const StackedConstraintData& d, const VectorXd& x, double shift) {
  const Index m = idx(d.rows.size());
  const Index n = x.size();
  VectorXd c(m + 2 * n);
  for (Index j = 0; j < m; ++j) c(j) = d.rows[static_cast<std::size_t>(j)]->value(x) - shift;
  c.segment(m, n) = x - d.upper;
  c.segment(m + n, n) = d.lower - x;
  return c;
}

MatrixXd stacked_jacobian(const StackedConstraintData& d, const VectorXd& x) {
  const Index m = idx(d.rows.size());
  const Index n = x.size();
  MatrixXd jac = MatrixXd::Zero(m + 2 * n, n);
  for (Index j = 0; j < m; ++j) jac.row(j) = d.rows[static_cast<std::size_t>(j)]->gradient(x);
  jac.block(m, 0, n, n).setIdentity();
  jac.block(m + n, 0, n, n) = -MatrixXd::Identity(n, n);
  return jac;
}

MatrixXd stacked_weighted_hessian(const StackedConstraintData& d, const VectorXd& w,
                                  Index n) {
  MatrixXd h = MatrixXd::Zero(n, n);
  for (std::size_t j = 0; j < d.rows.size(); ++j) h += (2.0 * w(idx(j))) * d.gram[j];
  return h;
}

// Finds x strictly inside every constraint by minimizing s s.t. g_j(x) <= s.
VectorXd find_strictly_feasible(const StackedConstraintData& d, double tol,
                                std::int64_t max_iters, std::int64_t& iterations) {
  const Index n = d.lower.size();
  const VectorXd center = 0.5 * (d.lower + d.upper);
  const VectorXd c0 = stacked_constraints(d, center, 0.0);
  const Index m = idx(d.rows.size());
  if (m == 0 || c0.head(m).maxCoeff() < 0.0) return center;

  ConvexProgram prog;
  prog.dim = static_cast<std::size_t>(n + 1);
  prog.objective = [n](const VectorXd& z) { return z(n); };
  prog.objective_gradient = [n](const VectorXd&) {
    VectorXd g = VectorXd::Zero(n + 1);
    g(n) = 1.0;
    return g;
  };
  prog.objective_hessian = [n](const VectorXd&) { return MatrixXd::Zero(n + 1, n + 1); };
  prog.constraints = [&d, n](const VectorXd& z) {
    return stacked_constraints(d, z.head(n), z(n));
  };
  prog.constraint_jacobian = [&d, n, m](const VectorXd& z) {
    MatrixXd jac = MatrixXd::Zero(m + 2 * n, n + 1);
    jac.leftCols(n) = stacked_jacobian(d, z.head(n));
    jac.col(n).head(m).setConstant(-1.0);
    return jac;
  };
  prog.weighted_constraint_hessian = [&d, n](const VectorXd&, const VectorXd& w) {
    MatrixXd h = MatrixXd::Zero(n + 1, n + 1);
    h.topLeftCorner(n, n) = stacked_weighted_hessian(d, w, n);
    return h;
  };

  VectorXd z0(n + 1);
  z0.head(n) = center;
  z0(n) = c0.head(m).maxCoeff() + 1.0;
  const auto result = interior_point(prog, z0, tol * 1e-3, max_iters,
                                     [n](const VectorXd& z) { return z(n) < 0.0; });
  iterations = result.iterations;
  if (!result.stopped_early) {
    std::ostringstream msg;
    msg << "no strictly feasible point found: min over the box of max_j g_j is "
        << format_double(result.z(n));
    throw ConvergenceError(msg.str());
  }
  return result.z.head(n);
}

// Pseudo-inverse of a symmetric matrix via its eigendecomposition.
MatrixXd symmetric_pinv(const MatrixXd& v) {
  const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(v);
  const VectorXd& values = eig.eigenvalues();
  const double cutoff = 1e-10 * std::max(1.0, values.cwiseAbs().maxCoeff());
  VectorXd inv = VectorXd::Zero(values.size());
  for (Index k = 0; k < values.size(); ++k) {
    if (std::abs(values(k)) > cutoff) inv(k) = 1.0 / values(k);
  }
  return eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

std::uint64_t reference_key(const ProblemInstance& instance, const ConsensusMatrix& consensus) {
  std::ostringstream text;
  text << hex64(instance.hash()) << ' ' << format_double(consensus.alpha());
  const MatrixXd& v = consensus.v();
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index j = 0; j < v.cols(); ++j) text << ' ' << format_double(v(i, j));
  }
  return fnv1a64(text.str());
}

ReferenceSolution solve_centralized(const ProblemInstance& instance,
                                    const ConsensusMatrix& consensus, double tol,
                                    std::int64_t max_iters) {
  if (!(tol > 0.0)) throw std::invalid_argument("reference tolerance must be positive");
  if (max_iters < 1) throw std::invalid_argument("reference iteration budget must be >= 1");
  if (consensus.size() != instance.num_agents()) {
    throw std::invalid_argument("consensus matrix size differs from the agent count");
  }
  const std::size_t n = instance.dim();
  const Index nn = idx(n);
  const StackedConstraintData d = gather(instance);
  const Index m = idx(d.rows.size());

  std::int64_t phase1_iters = 0;
  const VectorXd start = find_strictly_feasible(d, tol, max_iters, phase1_iters);

  ConvexProgram prog;
  prog.dim = n;
  prog.objective = [&instance](const VectorXd& x) {
    double total = 0.0;
    for (const auto& agent : instance.agents()) total += agent.objective.value(x);
    return total;
  };
  prog.objective_gradient = [&d](const VectorXd& x) {
    return VectorXd(d.curvature * x - d.weighted_center);
  };
  prog.objective_hessian = [&d, nn](const VectorXd&) {
    return MatrixXd(d.curvature * MatrixXd::Identity(nn, nn));
  };
  prog.constraints = [&d](const VectorXd& x) { return stacked_constraints(d, x, 0.0); };
  prog.constraint_jacobian = [&d](const VectorXd& x) { return stacked_jacobian(d, x); };
  prog.weighted_constraint_hessian = [&d, nn](const VectorXd&, const VectorXd& w) {
    return stacked_weighted_hessian(d, w, nn);
  };

  const auto barrier = interior_point(prog, start, std::min(tol, 1e-10),
                                      std::max<std::int64_t>(1, max_iters - phase1_iters));
  if (!barrier.converged) {
    throw ConvergenceError("interior-point iteration did not converge within " +
                           std::to_string(max_iters) + " Newton steps");
  }
  const PolishResult polished = polish_active_set(prog, barrier.z, barrier.mu, 50);
  const VectorXd& z_final = polished.accepted ? polished.z : barrier.z;
  const VectorXd& mu_final = polished.accepted ? polished.mu : barrier.mu;

  ReferenceSolution ref;
  ref.method = polished.accepted ? "barrier+kkt-polish" : "barrier";
  ref.tolerance = tol;
  ref.iterations = phase1_iters + barrier.iterations + polished.iterations;
  ref.key = reference_key(instance, consensus);
  ref.x_star = z_final;
  ref.y_star = mu_final.head(m);
  const VectorXd box_mult = mu_final.segment(m, nn) - mu_final.segment(m + nn, nn);

  const VectorXd& x = ref.x_star;
  const std::size_t big_n = instance.num_agents();
  ref.phi_star = 0.0;
  ref.primal_feasibility = 0.0;
  ref.complementarity = 0.0;
  MatrixXd residual(nn, idx(big_n));  // column i: grad f_i + Jg_i^T y_i + box share
  VectorXd grad_l = VectorXd::Zero(nn);
  for (std::size_t i = 0; i < big_n; ++i) {
    const LocalProblem& agent = instance.agent(i);
    const Index off = idx(instance.constraint_offset(i));
    const Index mi = idx(agent.constraint.output_dim());
    const VectorXd yi = ref.y_star.segment(off, mi);
    const VectorXd gi = agent.constraint.value(x);
    ref.phi_star += agent.phi(x);
    ref.primal_feasibility = std::max(ref.primal_feasibility, gi.cwiseMax(0.0).norm());
    if (mi > 0) ref.complementarity = std::max(ref.complementarity, yi.cwiseProduct(gi).cwiseAbs().maxCoeff());
    residual.col(idx(i)) = agent.objective.gradient(x) + agent.constraint.jacobian_transpose_times(x, yi);
    grad_l += residual.col(idx(i));
  }
  ref.stationarity = (x - (x - grad_l).cwiseMax(d.lower).cwiseMin(d.upper)).norm();

  // Hand the box normal-cone part to the agents whose own box is active there.
  for (Index c = 0; c < nn; ++c) {
    const double nu = box_mult(c);
    std::vector<std::size_t> owners;
    for (std::size_t i = 0; i < big_n; ++i) {
      const BoxIndicator& box = instance.agent(i).box;
      const double face = nu >= 0.0 ? box.upper()(c) : box.lower()(c);
      const double bound = nu >= 0.0 ? d.upper(c) : d.lower(c);
      if (face == bound) owners.push_back(i);
    }
    for (std::size_t i : owners) residual(c, idx(i)) += nu / static_cast<double>(owners.size());
  }

  ref.lambda_star = VectorXd::Zero(nn * idx(big_n));
  if (consensus.active()) {
    Eigen::Map<MatrixXd> lambda_blocks(ref.lambda_star.data(), nn, idx(big_n));
    lambda_blocks = -residual * symmetric_pinv(consensus.v());
    ref.consensus_residual = (lambda_blocks * consensus.v() + residual).norm();
  } else {
    ref.consensus_residual = residual.norm();
  }

  const double worst = std::max({ref.primal_feasibility, ref.stationarity, ref.complementarity,
                                 ref.consensus_residual});
  if (!(worst <= tol)) {
    std::ostringstream msg;
    msg << "reference solve missed tolerance " << format_double(tol)
        << ": primal_feasibility=" << format_double(ref.primal_feasibility)
        << " stationarity=" << format_double(ref.stationarity)
        << " complementarity=" << format_double(ref.complementarity)
        << " consensus_residual=" << format_double(ref.consensus_residual);
    throw ConvergenceError(msg.str());
  }
  return ref;
}

double estimate_dual_bound(const ReferenceSolution& reference, double margin) {
  if (!(margin >= 1.0)) throw std::invalid_argument("dual bound margin must be >= 1");
  return std::max(1.0, margin * reference.y_star.norm());
}

}  // namespace adapd
