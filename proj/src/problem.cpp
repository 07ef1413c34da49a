#include "adapd/problem.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <random>
#include <sstream>

#include "adapd/io_util.hpp"

namespace adapd {

BoxIndicator::BoxIndicator(VectorXd lower, VectorXd upper)
    : lower_(std::move(lower)), upper_(std::move(upper)) {
  if (lower_.size() != upper_.size()) throw std::invalid_argument("box bounds differ in size");
  if (lower_.size() == 0) throw std::invalid_argument("box must have positive dimension");
  for (Eigen::Index i = 0; i < lower_.size(); ++i) {
    if (!std::isfinite(lower_(i)) || !std::isfinite(upper_(i))) {
      throw std::invalid_argument("box bounds must be finite");
    }
    if (lower_(i) > upper_(i)) throw std::invalid_argument("box lower bound exceeds upper bound");
  }
}

BoxIndicator BoxIndicator::uniform(std::size_t dim, double lo, double hi) {
  const auto n = static_cast<Eigen::Index>(dim);
  return BoxIndicator(VectorXd::Constant(n, lo), VectorXd::Constant(n, hi));
}

bool BoxIndicator::contains(const VectorXd& x, double tol) const {
  if (x.size() != lower_.size()) return false;
  return ((x.array() >= lower_.array() - tol) && (x.array() <= upper_.array() + tol)).all();
}

double BoxIndicator::value(const VectorXd& x) const {
  return contains(x, kDomainTolerance) ? 0.0 : std::numeric_limits<double>::infinity();
}

VectorXd BoxIndicator::prox(const VectorXd& w) const {
  return w.cwiseMax(lower_).cwiseMin(upper_);
}

double BoxIndicator::radius() const {
  return lower_.cwiseAbs().cwiseMax(upper_.cwiseAbs()).norm();
}

BoxIndicator BoxIndicator::inflated(double factor) const {
  const VectorXd center = 0.5 * (lower_ + upper_);
  const VectorXd half = 0.5 * (upper_ - lower_) * factor;
  return BoxIndicator(center - half, center + half);
}

VectorXd prox_box(const VectorXd& w, const VectorXd& lower, const VectorXd& upper) {
  if (w.size() != lower.size() || w.size() != upper.size()) {
    throw std::invalid_argument("prox_box: dimension mismatch");
  }
  if ((lower.array() > upper.array()).any()) {
    throw std::invalid_argument("prox_box: lower bound exceeds upper bound");
  }
  return w.cwiseMax(lower).cwiseMin(upper);
}

SmoothObjective::SmoothObjective(double curvature, VectorXd center)
    : curvature_(curvature), center_(std::move(center)) {
  if (!(curvature >= 0.0)) throw std::invalid_argument("objective curvature must be nonnegative");
}

double spectral_norm(const MatrixXd& a, double rel_tol, int max_steps) {
  if (a.size() == 0) return 0.0;
  VectorXd v = VectorXd::Ones(a.cols()) / std::sqrt(static_cast<double>(a.cols()));
  double estimate = 0.0;
  for (int step = 0; step < max_steps; ++step) {
    const VectorXd w = a.transpose() * (a * v);
    const double rayleigh = v.dot(w);
    const double norm = w.norm();
    if (norm == 0.0) {
      // v is in the null space; only possible from the start for A = 0
      // (or an adversarial A orthogonal to the ones vector).
      if (a.norm() == 0.0) return 0.0;
      throw EstimationError("power iteration started in the null space of A^T A");
    }
    v = w / norm;
    if (step > 0 && std::abs(rayleigh - estimate) <= rel_tol * rayleigh) {
      return std::sqrt(rayleigh) * (1.0 + 1e-6);
    }
    estimate = rayleigh;
  }
  throw EstimationError("power iteration did not converge in " + std::to_string(max_steps) +
                        " steps");
}

ConstraintConstants constraint_constants(const MatrixXd& a, const VectorXd& b,
                                         const BoxIndicator& box) {
  if (a.rows() != b.size()) throw std::invalid_argument("constraint_constants: A and b disagree");
  if (static_cast<std::size_t>(a.cols()) != box.dim()) {
    throw std::invalid_argument("constraint_constants: A and box disagree");
  }
  ConstraintConstants out;
  out.spectral_norm = spectral_norm(a);
  const double s = out.spectral_norm;
  out.lipschitz_jacobian = 2.0 * s * s;
  // ||grad g|| = 2 ||A^T (Ax - b)|| <= 2 s (s r + ||b||) on the box.
  out.lipschitz_value = 2.0 * s * (s * box.radius() + b.norm());
  return out;
}

ConstraintBlock::ConstraintBlock(std::vector<EllipsoidConstraint> rows,
                                 const BoxIndicator& estimation_box)
    : rows_(std::move(rows)) {
  double c2 = 0.0;
  double l2 = 0.0;
  for (const auto& row : rows_) {
    if (static_cast<std::size_t>(row.a.cols()) != estimation_box.dim() ||
        row.a.rows() != row.b.size()) {
      throw std::invalid_argument("ellipsoid constraint has inconsistent dimensions");
    }
    if (!(row.eta >= 0.0)) throw std::invalid_argument("ellipsoid radius must be nonnegative");
    constants_.push_back(constraint_constants(row.a, row.b, estimation_box));
    c2 += constants_.back().lipschitz_value * constants_.back().lipschitz_value;
    l2 += constants_.back().lipschitz_jacobian * constants_.back().lipschitz_jacobian;
  }
  lipschitz_value_ = std::sqrt(c2);
  lipschitz_jacobian_ = std::sqrt(l2);
}

VectorXd ConstraintBlock::value(const VectorXd& x) const {
  VectorXd out(static_cast<Eigen::Index>(rows_.size()));
  for (std::size_t j = 0; j < rows_.size(); ++j) {
    out(static_cast<Eigen::Index>(j)) = rows_[j].value(x);
  }
  return out;
}

MatrixXd ConstraintBlock::jacobian(const VectorXd& x) const {
  MatrixXd out(static_cast<Eigen::Index>(rows_.size()), x.size());
  for (std::size_t j = 0; j < rows_.size(); ++j) {
    out.row(static_cast<Eigen::Index>(j)) = rows_[j].gradient(x).transpose();
  }
  return out;
}

VectorXd ConstraintBlock::jacobian_transpose_times(const VectorXd& x, const VectorXd& y) const {
  VectorXd out = VectorXd::Zero(x.size());
  for (std::size_t j = 0; j < rows_.size(); ++j) {
    const double yj = y(static_cast<Eigen::Index>(j));
    if (yj != 0.0) out += yj * rows_[j].gradient(x);
  }
  return out;
}

LocalProblem make_local_problem(SmoothObjective objective, std::vector<EllipsoidConstraint> rows,
                                BoxIndicator box) {
  if (objective.dim() != box.dim()) throw std::invalid_argument("objective and box disagree");
  ConstraintBlock constraint(std::move(rows), box.inflated(kConstantBoxInflation));
  return LocalProblem{std::move(objective), std::move(constraint), std::move(box)};
}

ProblemInstance::ProblemInstance(std::vector<LocalProblem> agents, InstanceMetadata metadata)
    : agents_(std::move(agents)), metadata_(std::move(metadata)) {
  if (agents_.empty()) throw std::invalid_argument("instance needs at least one agent");
  dim_ = agents_.front().box.dim();
  offsets_.push_back(0);
  for (const auto& agent : agents_) {
    if (agent.box.dim() != dim_ || agent.objective.dim() != dim_) {
      throw std::invalid_argument("all agents must share the primal dimension");
    }
    for (const auto& row : agent.constraint.rows()) {
      if (static_cast<std::size_t>(row.a.cols()) != dim_) {
        throw std::invalid_argument("constraint dimension differs from primal dimension");
      }
    }
    offsets_.push_back(offsets_.back() + agent.constraint.output_dim());
  }
}

std::string ProblemInstance::serialize() const {
  std::ostringstream out;
  out << "ADAPD-INST v1\n";
  out << "generator " << metadata_.generator << '\n';
  out << "dim " << dim_ << '\n';
  out << "agents " << agents_.size() << '\n';
  out << "rows_per_agent " << metadata_.rows_per_agent << '\n';
  out << "noise_std " << format_double(metadata_.noise_std) << '\n';
  out << "seed " << metadata_.seed << '\n';
  if (metadata_.ground_truth) {
    out << "ground_truth 1 " << format_vector(*metadata_.ground_truth) << '\n';
  } else {
    out << "ground_truth 0\n";
  }
  for (std::size_t i = 0; i < agents_.size(); ++i) {
    const LocalProblem& agent = agents_[i];
    out << "agent " << i << '\n';
    out << "objective " << format_double(agent.objective.curvature()) << ' '
        << format_vector(agent.objective.center()) << '\n';
    out << "box_lower " << format_vector(agent.box.lower()) << '\n';
    out << "box_upper " << format_vector(agent.box.upper()) << '\n';
    out << "constraints " << agent.constraint.output_dim() << '\n';
    for (const auto& row : agent.constraint.rows()) {
      out << "ellipsoid " << row.a.rows() << '\n';
      out << "eta " << format_double(row.eta) << '\n';
      out << "b " << format_vector(row.b) << '\n';
      out << "A";
      for (Eigen::Index r = 0; r < row.a.rows(); ++r) {
        for (Eigen::Index c = 0; c < row.a.cols(); ++c) out << ' ' << format_double(row.a(r, c));
      }
      out << '\n';
    }
  }
  out << "end\n";
  return out.str();
}

ProblemInstance ProblemInstance::deserialize(std::istream& in) {
  std::string magic;
  if (!std::getline(in, magic) || magic != "ADAPD-INST v1") {
    throw std::invalid_argument("instance file: missing 'ADAPD-INST v1' header");
  }
  TokenReader r(in, "instance file");
  InstanceMetadata meta;
  r.expect("generator");
  meta.generator = r.next();
  r.expect("dim");
  const std::size_t n = r.next_uint();
  r.expect("agents");
  const std::size_t num_agents = r.next_uint();
  r.expect("rows_per_agent");
  meta.rows_per_agent = r.next_uint();
  r.expect("noise_std");
  meta.noise_std = r.next_double();
  r.expect("seed");
  meta.seed = r.next_uint();
  r.expect("ground_truth");
  if (r.next_uint() == 1) meta.ground_truth = r.next_vector(n);
  if (n == 0 || num_agents == 0) r.fail("dimension and agent count must be positive");

  std::vector<LocalProblem> agents;
  for (std::size_t i = 0; i < num_agents; ++i) {
    r.expect("agent");
    if (r.next_uint() != i) r.fail("agents out of order");
    r.expect("objective");
    const double curvature = r.next_double();
    VectorXd center = r.next_vector(n);
    r.expect("box_lower");
    VectorXd lower = r.next_vector(n);
    r.expect("box_upper");
    VectorXd upper = r.next_vector(n);
    r.expect("constraints");
    const std::size_t m = r.next_uint();
    std::vector<EllipsoidConstraint> rows;
    for (std::size_t j = 0; j < m; ++j) {
      EllipsoidConstraint row;
      r.expect("ellipsoid");
      const auto p = static_cast<Eigen::Index>(r.next_uint());
      r.expect("eta");
      row.eta = r.next_double();
      r.expect("b");
      row.b = r.next_vector(static_cast<std::size_t>(p));
      r.expect("A");
      row.a.resize(p, static_cast<Eigen::Index>(n));
      for (Eigen::Index pr = 0; pr < p; ++pr) {
        for (Eigen::Index c = 0; c < row.a.cols(); ++c) row.a(pr, c) = r.next_double();
      }
      rows.push_back(std::move(row));
    }
    agents.push_back(make_local_problem(SmoothObjective(curvature, std::move(center)),
                                        std::move(rows),
                                        BoxIndicator(std::move(lower), std::move(upper))));
  }
  r.expect("end");
  return ProblemInstance(std::move(agents), std::move(meta));
}

std::uint64_t ProblemInstance::hash() const { return fnv1a64(serialize()); }

ProblemInstance make_localization_instance(std::size_t n, std::size_t num_agents,
                                           std::size_t rows_per_agent, double noise_std,
                                           std::uint64_t rng_seed) {
  if (n == 0 || num_agents == 0 || rows_per_agent == 0) {
    throw std::invalid_argument("dimension, agent count and rows per agent must be positive");
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw std::invalid_argument("noise standard deviation must be nonnegative");
  }
  const auto dim = static_cast<Eigen::Index>(n);
  const auto p = static_cast<Eigen::Index>(rows_per_agent);
  std::mt19937_64 rng(rng_seed);
  std::uniform_real_distribution<double> unit_box(-1.0, 1.0);
  std::uniform_real_distribution<double> radius(1.0, 2.0);
  std::normal_distribution<double> gaussian(0.0, 1.0);

  VectorXd truth(dim);
  for (Eigen::Index c = 0; c < dim; ++c) truth(c) = unit_box(rng);

  std::vector<LocalProblem> agents;
  agents.reserve(num_agents);
  for (std::size_t i = 0; i < num_agents; ++i) {
    EllipsoidConstraint row;
    row.a.resize(p, dim);
    for (Eigen::Index r = 0; r < p; ++r) {
      for (Eigen::Index c = 0; c < dim; ++c) row.a(r, c) = gaussian(rng);
    }
    row.eta = radius(rng);
    row.b = row.a * truth;
    if (noise_std > 0.0) {
      for (Eigen::Index r = 0; r < p; ++r) row.b(r) += noise_std * gaussian(rng);
    }
    std::vector<EllipsoidConstraint> rows;
    rows.push_back(std::move(row));
    agents.push_back(make_local_problem(SmoothObjective(1.0, VectorXd::Zero(dim)), std::move(rows),
                                        BoxIndicator::uniform(n, -1.0, 1.0)));
  }

  InstanceMetadata meta;
  meta.generator = "localization";
  meta.seed = rng_seed;
  meta.noise_std = noise_std;
  meta.rows_per_agent = rows_per_agent;
  meta.ground_truth = truth;
  return ProblemInstance(std::move(agents), std::move(meta));
}

StackedEvaluation eval_stacked(const ProblemInstance& instance, const VectorXd& x_stacked) {
  const std::size_t n = instance.dim();
  if (static_cast<std::size_t>(x_stacked.size()) != n * instance.num_agents()) {
    throw std::invalid_argument("stacked point has wrong length");
  }
  StackedEvaluation out;
  out.g.resize(static_cast<Eigen::Index>(instance.constraint_dim()));
  for (std::size_t i = 0; i < instance.num_agents(); ++i) {
    const LocalProblem& agent = instance.agent(i);
    const VectorXd xi = block(x_stacked, i, n);
    if (!agent.box.contains(xi, kDomainTolerance)) out.in_domain = false;
    out.phi += agent.objective.value(xi);
    out.g.segment(static_cast<Eigen::Index>(instance.constraint_offset(i)),
                  static_cast<Eigen::Index>(agent.constraint.output_dim())) =
        agent.constraint.value(xi);
  }
  if (!out.in_domain) out.phi = std::numeric_limits<double>::infinity();
  return out;
}

}  // namespace adapd
