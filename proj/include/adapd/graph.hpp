// Communication graphs, mixing matrices and consensus constraint matrices.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace adapd {

using Edge = std::pair<std::size_t, std::size_t>;

/// Connected undirected graph over agents 0..N-1.
///
/// Edges are stored normalized (first < second) and sorted; neighbor lists
/// are sorted. Construction throws std::invalid_argument on self-loops,
/// out-of-range indices, duplicate edges or a disconnected graph.
class NetworkGraph {
 public:
  NetworkGraph(std::size_t num_agents, std::vector<Edge> edges);

  std::size_t num_agents() const { return num_agents_; }
  const std::vector<Edge>& edges() const { return edges_; }
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_.at(i); }
  std::size_t degree(std::size_t i) const { return neighbors_.at(i).size(); }
  bool has_edge(std::size_t i, std::size_t j) const;

  /// Edge-list text: "N M" followed by M lines "i j" (0-based).
  std::string to_edge_list() const;
  static NetworkGraph from_edge_list(std::istream& in);

  friend bool operator==(const NetworkGraph& a, const NetworkGraph& b) {
    return a.num_agents_ == b.num_agents_ && a.edges_ == b.edges_;
  }

 private:
  std::size_t num_agents_;
  std::vector<Edge> edges_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

/// True when every agent is reachable from agent 0.
bool is_connected(std::size_t num_agents, const std::vector<Edge>& edges);

/// N-cycle plus `extra_edges` distinct non-cycle edges drawn uniformly
/// without replacement.
NetworkGraph generate_small_world(std::size_t num_agents, std::size_t extra_edges,
                                  std::uint64_t rng_seed);

enum class MixingRule { kMetropolis, kLaplacian };

std::string to_string(MixingRule rule);
MixingRule mixing_rule_from_string(const std::string& name);

/// Symmetric, nonnegative, row-stochastic W with the graph's sparsity pattern.
struct MixingMatrix {
  Eigen::MatrixXd w;

  std::size_t size() const { return static_cast<std::size_t>(w.rows()); }
};

/// Throws std::logic_error if any invariant fails at tolerance `tol`.
void validate_mixing_matrix(const MixingMatrix& m, const NetworkGraph& graph, double tol = 1e-12);

/// w_ij = 1 / (1 + max(deg_i, deg_j)) on edges, diagonal fills the row to 1.
MixingMatrix metropolis_weights(const NetworkGraph& graph);

/// W = I - L / (d_max + 1), with L the graph Laplacian.
MixingMatrix laplacian_weights(const NetworkGraph& graph);

MixingMatrix mixing_weights(const NetworkGraph& graph, MixingRule rule);

/// V = alpha (I - W) together with the per-row bounds delta_i >= ||V_i:||_1.
///
/// For a single agent V = [0]; delta is floored at machine epsilon and
/// `active()` is false so the solvers skip the lambda update.
class ConsensusMatrix {
 public:
  ConsensusMatrix(const MixingMatrix& w, double alpha);

  double alpha() const { return alpha_; }
  const Eigen::MatrixXd& v() const { return v_; }
  double v(std::size_t i, std::size_t j) const {
    return v_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }
  const Eigen::VectorXd& delta() const { return delta_; }
  double delta(std::size_t i) const { return delta_(static_cast<Eigen::Index>(i)); }
  std::size_t size() const { return static_cast<std::size_t>(v_.rows()); }
  bool active() const { return active_; }
  /// j != i with v_ij != 0.
  const std::vector<std::size_t>& neighbors(std::size_t i) const { return neighbors_.at(i); }

  /// (V kron I_n) applied to a stacked vector of N blocks of size n.
  Eigen::VectorXd apply(const Eigen::VectorXd& stacked, std::size_t block_dim) const;

 private:
  double alpha_;
  Eigen::MatrixXd v_;
  Eigen::VectorXd delta_;
  bool active_;
  std::vector<std::vector<std::size_t>> neighbors_;
};

ConsensusMatrix consensus_matrix(const MixingMatrix& w, double alpha = 1.0);

}  // namespace adapd
