#include "adapd/graph.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace adapd {

namespace {

Edge normalized(Edge e) {
  if (e.first > e.second) std::swap(e.first, e.second);
  return e;
}

bool is_cycle_edge(std::size_t n, const Edge& e) {
  return e.second == e.first + 1 || (e.first == 0 && e.second == n - 1);
}

}  // namespace

bool is_connected(std::size_t num_agents, const std::vector<Edge>& edges) {
  if (num_agents == 0) return false;
  std::vector<std::vector<std::size_t>> adj(num_agents);
  for (const auto& [a, b] : edges) {
    adj.at(a).push_back(b);
    adj.at(b).push_back(a);
  }
  std::vector<bool> seen(num_agents, false);
  std::vector<std::size_t> stack{0};
  seen[0] = true;
  std::size_t visited = 1;
  while (!stack.empty()) {
    const std::size_t u = stack.back();
    stack.pop_back();
    for (std::size_t v : adj[u]) {
      if (!seen[v]) {
        seen[v] = true;
        ++visited;
        stack.push_back(v);
      }
    }
  }
  return visited == num_agents;
}

NetworkGraph::NetworkGraph(std::size_t num_agents, std::vector<Edge> edges)
    : num_agents_(num_agents), neighbors_(num_agents) {
  if (num_agents == 0) throw std::invalid_argument("graph needs at least one agent");
  for (auto& e : edges) {
    if (e.first >= num_agents || e.second >= num_agents) {
      throw std::invalid_argument("edge endpoint out of range");
    }
    if (e.first == e.second) throw std::invalid_argument("self-loops are not allowed");
    e = normalized(e);
  }
  std::sort(edges.begin(), edges.end());
  if (std::adjacent_find(edges.begin(), edges.end()) != edges.end()) {
    throw std::invalid_argument("duplicate edge");
  }
  if (!is_connected(num_agents, edges)) throw std::invalid_argument("graph is not connected");
  edges_ = std::move(edges);
  for (const auto& [a, b] : edges_) {
    neighbors_[a].push_back(b);
    neighbors_[b].push_back(a);
  }
  for (auto& list : neighbors_) std::sort(list.begin(), list.end());
}

bool NetworkGraph::has_edge(std::size_t i, std::size_t j) const {
  return std::binary_search(edges_.begin(), edges_.end(), normalized({i, j}));
}

std::string NetworkGraph::to_edge_list() const {
  std::ostringstream out;
  out << num_agents_ << ' ' << edges_.size() << '\n';
  for (const auto& [a, b] : edges_) out << a << ' ' << b << '\n';
  return out.str();
}

NetworkGraph NetworkGraph::from_edge_list(std::istream& in) {
  std::size_t n = 0;
  std::size_t m = 0;
  if (!(in >> n >> m)) throw std::invalid_argument("edge list: missing 'N M' header");
  std::vector<Edge> edges;
  edges.reserve(m);
  for (std::size_t k = 0; k < m; ++k) {
    std::size_t a = 0;
    std::size_t b = 0;
    if (!(in >> a >> b)) {
      throw std::invalid_argument("edge list: expected " + std::to_string(m) + " edges, got " +
                                  std::to_string(k));
    }
    edges.emplace_back(a, b);
  }
  return NetworkGraph(n, std::move(edges));
}

NetworkGraph generate_small_world(std::size_t num_agents, std::size_t extra_edges,
                                  std::uint64_t rng_seed) {
  if (num_agents < 3) throw std::invalid_argument("small-world graph needs at least 3 agents");
  std::vector<Edge> candidates;
  for (std::size_t i = 0; i < num_agents; ++i) {
    for (std::size_t j = i + 1; j < num_agents; ++j) {
      if (!is_cycle_edge(num_agents, {i, j})) candidates.emplace_back(i, j);
    }
  }
  if (extra_edges > candidates.size()) {
    throw std::invalid_argument("requested " + std::to_string(extra_edges) +
                                " extra edges but only " + std::to_string(candidates.size()) +
                                " non-cycle pairs exist");
  }

  std::vector<Edge> edges;
  edges.reserve(num_agents + extra_edges);
  for (std::size_t i = 0; i + 1 < num_agents; ++i) edges.emplace_back(i, i + 1);
  edges.emplace_back(0, num_agents - 1);

  // Partial Fisher-Yates: the first extra_edges slots become a uniform sample.
  std::mt19937_64 rng(rng_seed);
  for (std::size_t k = 0; k < extra_edges; ++k) {
    std::uniform_int_distribution<std::size_t> pick(k, candidates.size() - 1);
    std::swap(candidates[k], candidates[pick(rng)]);
    edges.push_back(candidates[k]);
  }
  return NetworkGraph(num_agents, std::move(edges));
}

std::string to_string(MixingRule rule) {
  switch (rule) {
    case MixingRule::kMetropolis:
      return "metropolis";
    case MixingRule::kLaplacian:
      return "laplacian";
  }
  return "unknown";
}

MixingRule mixing_rule_from_string(const std::string& name) {
  if (name == "metropolis") return MixingRule::kMetropolis;
  if (name == "laplacian") return MixingRule::kLaplacian;
  throw std::invalid_argument("unknown mixing rule '" + name + "'");
}

void validate_mixing_matrix(const MixingMatrix& m, const NetworkGraph& graph, double tol) {
  const auto n = static_cast<Eigen::Index>(graph.num_agents());
  if (m.w.rows() != n || m.w.cols() != n) throw std::logic_error("mixing matrix has wrong size");
  for (Eigen::Index i = 0; i < n; ++i) {
    double row_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const double wij = m.w(i, j);
      row_sum += wij;
      if (std::abs(wij - m.w(j, i)) > tol) throw std::logic_error("mixing matrix not symmetric");
      const bool linked = i == j || graph.has_edge(static_cast<std::size_t>(i),
                                                   static_cast<std::size_t>(j));
      if (linked && !(wij > 0.0)) throw std::logic_error("mixing weight must be positive on edges");
      if (!linked && wij != 0.0) throw std::logic_error("mixing weight must vanish off edges");
    }
    if (std::abs(row_sum - 1.0) > tol) throw std::logic_error("mixing matrix row does not sum to 1");
  }
}

MixingMatrix metropolis_weights(const NetworkGraph& graph) {
  const std::size_t n = graph.num_agents();
  MixingMatrix m{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (const auto& [a, b] : graph.edges()) {
    const double w = 1.0 / (1.0 + static_cast<double>(std::max(graph.degree(a), graph.degree(b))));
    m.w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = w;
    m.w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = w;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    double off = 0.0;
    for (std::size_t j : graph.neighbors(i)) off += m.w(ii, static_cast<Eigen::Index>(j));
    m.w(ii, ii) = 1.0 - off;
  }
  return m;
}

MixingMatrix laplacian_weights(const NetworkGraph& graph) {
  const std::size_t n = graph.num_agents();
  std::size_t max_degree = 0;
  for (std::size_t i = 0; i < n; ++i) max_degree = std::max(max_degree, graph.degree(i));
  // lambda_max(L) <= 2 d_max, so this scale keeps the spectrum of W in (-1, 1].
  const double scale = static_cast<double>(max_degree + 1);
  MixingMatrix m{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n))};
  for (const auto& [a, b] : graph.edges()) {
    m.w(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = 1.0 / scale;
    m.w(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = 1.0 / scale;
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    m.w(ii, ii) = 1.0 - static_cast<double>(graph.degree(i)) / scale;
  }
  return m;
}

MixingMatrix mixing_weights(const NetworkGraph& graph, MixingRule rule) {
  return rule == MixingRule::kMetropolis ? metropolis_weights(graph) : laplacian_weights(graph);
}

ConsensusMatrix::ConsensusMatrix(const MixingMatrix& w, double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("consensus scale alpha must be positive");
  }
  const Eigen::Index n = w.w.rows();
  if (n == 0 || w.w.cols() != n) throw std::invalid_argument("mixing matrix must be square");
  active_ = n > 1;
  v_ = alpha * (Eigen::MatrixXd::Identity(n, n) - w.w);
  delta_.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    delta_(i) = 2.0 * alpha * (1.0 - w.w(i, i));
  }
  if (!active_) {
    v_.setZero();
    delta_(0) = std::numeric_limits<double>::epsilon();
  }
  neighbors_.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i != j && v_(i, j) != 0.0) neighbors_[static_cast<std::size_t>(i)].push_back(static_cast<std::size_t>(j));
    }
  }
}

Eigen::VectorXd ConsensusMatrix::apply(const Eigen::VectorXd& stacked, std::size_t block_dim) const {
  const auto n = static_cast<Eigen::Index>(size());
  const auto d = static_cast<Eigen::Index>(block_dim);
  if (stacked.size() != n * d) throw std::invalid_argument("stacked vector has wrong length");
  // Column c of the reshaped matrix holds agent c's block.
  const Eigen::Map<const Eigen::MatrixXd> blocks(stacked.data(), d, n);
  Eigen::VectorXd out(stacked.size());
  Eigen::Map<Eigen::MatrixXd>(out.data(), d, n) = blocks * v_.transpose();
  return out;
}

ConsensusMatrix consensus_matrix(const MixingMatrix& w, double alpha) {
  return ConsensusMatrix(w, alpha);
}

}  // namespace adapd
