// Small hand-built instances shared by several test files.

#pragma once

#include <cmath>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "adapd/graph.hpp"
#include "adapd/problem.hpp"

namespace fixture {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index k = 0;
  for (double x : v) out(k++) = x;
  return out;
}

inline MatrixXd mat1(double v) { return MatrixXd::Constant(1, 1, v); }

/// 1-D problem with f = 0.5 x^2, constraint (x - 0.9)^2 <= 0.01 and box [-1, 1]
/// on `agents` identical agents. Optimum x* = 0.8 with phi* = 0.32 * agents.
inline adapd::ProblemInstance interval_instance(std::size_t agents = 2) {
  std::vector<adapd::LocalProblem> list;
  for (std::size_t i = 0; i < agents; ++i) {
    list.push_back(adapd::make_local_problem(
        adapd::SmoothObjective(1.0, vec({0.0})),
        {adapd::EllipsoidConstraint{mat1(1.0), vec({0.9}), 0.1}},
        adapd::BoxIndicator::uniform(1, -1.0, 1.0)));
  }
  return adapd::ProblemInstance(std::move(list), {});
}

inline adapd::ConsensusMatrix path_consensus(std::size_t agents) {
  if (agents == 1) {
    return adapd::consensus_matrix(adapd::MixingMatrix{MatrixXd::Identity(1, 1)}, 1.0);
  }
  std::vector<adapd::Edge> edges;
  for (std::size_t i = 0; i + 1 < agents; ++i) edges.emplace_back(i, i + 1);
  return adapd::consensus_matrix(adapd::metropolis_weights(adapd::NetworkGraph(agents, edges)), 1.0);
}

inline adapd::ConsensusMatrix small_world_consensus(std::size_t agents, std::size_t extra,
                                                    std::uint64_t seed) {
  if (agents <= 2) return path_consensus(agents);
  return adapd::consensus_matrix(
      adapd::metropolis_weights(adapd::generate_small_world(agents, extra, seed)), 1.0);
}

inline VectorXd random_in_box(const adapd::BoxIndicator& box, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  VectorXd x(box.lower().size());
  for (Eigen::Index k = 0; k < x.size(); ++k) {
    x(k) = box.lower()(k) + u(rng) * (box.upper()(k) - box.lower()(k));
  }
  return x;
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("adapd_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace fixture
