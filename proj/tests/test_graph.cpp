#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "adapd/graph.hpp"
#include "oracles.hpp"

using namespace adapd;
using Eigen::MatrixXd;
using Eigen::VectorXd;

TEST(SmallWorld, FiftyAgentsWithTwentyFiveExtraEdgesHasSeventyFiveEdges) {
  for (std::uint64_t seed : {1u, 2u, 7u}) {
    const auto g = generate_small_world(50, 25, seed);
    EXPECT_EQ(g.edges().size(), 75u);
  }
}

TEST(SmallWorld, ThreeCycleOnly) {
  const auto g = generate_small_world(3, 0, 11);
  EXPECT_EQ(g.edges().size(), 3u);
  EXPECT_TRUE(g.has_edge(0, 1) && g.has_edge(1, 2) && g.has_edge(0, 2));
}

TEST(SmallWorld, FiveAgentsConnectedByClosure) {
  const auto g = generate_small_world(5, 2, 4);
  EXPECT_EQ(g.edges().size(), 7u);
  EXPECT_TRUE(oracle::connected_by_closure(5, g.edges()));
}

TEST(SmallWorld, ContainsCycleAndDistinctExtras) {
  const auto g = generate_small_world(12, 10, 5);
  for (std::size_t i = 0; i < 12; ++i) EXPECT_TRUE(g.has_edge(i, (i + 1) % 12));
  for (std::size_t k = 1; k < g.edges().size(); ++k) EXPECT_NE(g.edges()[k - 1], g.edges()[k]);
}

TEST(SmallWorld, RejectsBadArguments) {
  EXPECT_THROW(generate_small_world(2, 0, 1), std::invalid_argument);
  // 5 agents: 10 pairs, 5 on the cycle.
  EXPECT_NO_THROW(generate_small_world(5, 5, 1));
  EXPECT_THROW(generate_small_world(5, 6, 1), std::invalid_argument);
}

TEST(SmallWorld, SameSeedSameEdges) {
  EXPECT_EQ(generate_small_world(30, 15, 9), generate_small_world(30, 15, 9));
  EXPECT_FALSE(generate_small_world(30, 15, 9) == generate_small_world(30, 15, 10));
}

TEST(NetworkGraph, RejectsMalformedEdgeSets) {
  EXPECT_THROW(NetworkGraph(3, {{0, 0}, {0, 1}, {1, 2}}), std::invalid_argument);
  EXPECT_THROW(NetworkGraph(3, {{0, 1}, {1, 0}, {1, 2}}), std::invalid_argument);
  EXPECT_THROW(NetworkGraph(3, {{0, 1}, {1, 3}}), std::invalid_argument);
  EXPECT_THROW(NetworkGraph(4, {{0, 1}, {2, 3}}), std::invalid_argument);
}

TEST(NetworkGraph, NeighborListsMatchEdges) {
  const auto g = generate_small_world(10, 6, 3);
  std::size_t total = 0;
  for (std::size_t i = 0; i < g.num_agents(); ++i) {
    const auto& nb = g.neighbors(i);
    EXPECT_TRUE(std::is_sorted(nb.begin(), nb.end()));
    for (std::size_t j : nb) EXPECT_TRUE(g.has_edge(i, j));
    total += nb.size();
  }
  EXPECT_EQ(total, 2 * g.edges().size());
}

TEST(NetworkGraph, EdgeListRoundTrip) {
  const auto g = generate_small_world(8, 4, 2);
  const std::string text = g.to_edge_list();
  EXPECT_EQ(text.substr(0, text.find('\n')), "8 12");
  std::istringstream in(text);
  EXPECT_EQ(NetworkGraph::from_edge_list(in), g);
}

TEST(Metropolis, TwoNodePath) {
  const auto w = metropolis_weights(NetworkGraph(2, {{0, 1}}));
  EXPECT_TRUE(w.w.isApprox(MatrixXd::Constant(2, 2, 0.5), 0.0));
}

TEST(Metropolis, CompleteTriangle) {
  const auto w = metropolis_weights(NetworkGraph(3, {{0, 1}, {1, 2}, {0, 2}}));
  EXPECT_LE((w.w - MatrixXd::Constant(3, 3, 1.0 / 3.0)).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Metropolis, SingleAgentIsIdentity) {
  const auto w = metropolis_weights(NetworkGraph(1, {}));
  EXPECT_EQ(w.w, MatrixXd::Identity(1, 1));
}

TEST(Metropolis, EdgeWeightsFollowDegrees) {
  const auto g = generate_small_world(15, 7, 8);
  const auto w = metropolis_weights(g);
  for (const auto& [i, j] : g.edges()) {
    const double expected = 1.0 / (1.0 + static_cast<double>(std::max(g.degree(i), g.degree(j))));
    EXPECT_DOUBLE_EQ(w.w(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)), expected);
  }
}

class MixingInvariants : public ::testing::TestWithParam<MixingRule> {};

TEST_P(MixingInvariants, SymmetricNonnegativeStochasticWithGraphPattern) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto g = generate_small_world(4 + seed, seed % 4, seed);
    const auto m = mixing_weights(g, GetParam());
    EXPECT_NO_THROW(validate_mixing_matrix(m, g));
    const auto n = static_cast<Eigen::Index>(g.num_agents());
    for (Eigen::Index i = 0; i < n; ++i) {
      EXPECT_NEAR(m.w.row(i).sum(), 1.0, 1e-12);
      for (Eigen::Index j = 0; j < n; ++j) {
        EXPECT_NEAR(m.w(i, j), m.w(j, i), 1e-12);
        const bool linked = i == j || g.has_edge(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
        EXPECT_EQ(m.w(i, j) > 0.0, linked) << i << "," << j;
        EXPECT_GE(m.w(i, j), 0.0);
      }
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Rules, MixingInvariants,
                         ::testing::Values(MixingRule::kMetropolis, MixingRule::kLaplacian),
                         [](const auto& info) {
                           std::string s = to_string(info.param);
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(MixingMatrix, ValidationCatchesBrokenRows) {
  const auto g = generate_small_world(4, 0, 1);
  auto m = metropolis_weights(g);
  m.w(0, 0) += 0.1;
  EXPECT_THROW(validate_mixing_matrix(m, g), std::logic_error);
}

TEST(ConsensusMatrix, TwoNodeExample) {
  const auto cm = consensus_matrix(MixingMatrix{MatrixXd::Constant(2, 2, 0.5)}, 1.0);
  MatrixXd expected(2, 2);
  expected << 0.5, -0.5, -0.5, 0.5;
  EXPECT_EQ(cm.v(), expected);
  EXPECT_DOUBLE_EQ(cm.delta(0), 1.0);
  EXPECT_DOUBLE_EQ(cm.delta(1), 1.0);
  EXPECT_DOUBLE_EQ(cm.v().row(0).cwiseAbs().sum(), cm.delta(0));
}

TEST(ConsensusMatrix, RejectsNonpositiveAlpha) {
  const MixingMatrix w{MatrixXd::Constant(2, 2, 0.5)};
  EXPECT_THROW(consensus_matrix(w, 0.0), std::invalid_argument);
  EXPECT_THROW(consensus_matrix(w, -1.0), std::invalid_argument);
}

TEST(ConsensusMatrix, SingleAgentIsInactive) {
  const auto cm = consensus_matrix(MixingMatrix{MatrixXd::Identity(1, 1)}, 2.0);
  EXPECT_EQ(cm.v()(0, 0), 0.0);
  EXPECT_FALSE(cm.active());
  EXPECT_GT(cm.delta(0), 0.0);
  EXPECT_LE(cm.delta(0), 1e-15);
}

TEST(ConsensusMatrix, RowSumsZeroAndDeltaBoundsRows) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto g = generate_small_world(3 + seed % 9, seed % 3, seed);
    for (double alpha : {0.3, 1.0, 4.0}) {
      for (auto rule : {MixingRule::kMetropolis, MixingRule::kLaplacian}) {
        const auto w = mixing_weights(g, rule);
        const auto cm = consensus_matrix(w, alpha);
        const MatrixXd expected =
            alpha * (MatrixXd::Identity(w.w.rows(), w.w.cols()) - w.w);
        EXPECT_LE((cm.v() - expected).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LE(cm.v().rowwise().sum().cwiseAbs().maxCoeff(), 1e-10);
        for (std::size_t i = 0; i < cm.size(); ++i) {
          EXPECT_LE(cm.v().row(static_cast<Eigen::Index>(i)).cwiseAbs().sum(), cm.delta(i) + 1e-12);
          EXPECT_NEAR(cm.delta(i), 2.0 * alpha * (1.0 - w.w(static_cast<Eigen::Index>(i),
                                                              static_cast<Eigen::Index>(i))),
                      1e-12);
        }
      }
    }
  }
}

TEST(ConsensusMatrix, AnnihilatesConsensusVectors) {
  const auto cm = consensus_matrix(metropolis_weights(generate_small_world(7, 3, 2)), 1.5);
  const VectorXd x0 = VectorXd::LinSpaced(4, -1.0, 2.0);
  const VectorXd stacked = x0.replicate(7, 1);
  EXPECT_LE(cm.apply(stacked, 4).norm(), 1e-12);
  EXPECT_LE((cm.apply(stacked, 4) - oracle::kron_identity(cm.v(), 4) * stacked).norm(), 1e-12);
}

TEST(ConsensusMatrix, NullSpaceIsConsensusSubspace) {
  std::mt19937_64 rng(99);
  std::normal_distribution<double> normal;
  for (std::size_t agents = 2; agents <= 6; ++agents) {
    for (std::uint64_t seed = 1; seed <= 3; ++seed) {
      const std::size_t extra = agents >= 4 ? seed % 2 : 0;
      const NetworkGraph g = agents == 2 ? NetworkGraph(2, {{0, 1}})
                                         : generate_small_world(agents, extra, seed);
      const auto cm = consensus_matrix(metropolis_weights(g), 1.0);
      const std::size_t n = 3;
      const MatrixXd big = oracle::kron_identity(cm.v(), n);
      Eigen::SelfAdjointEigenSolver<MatrixXd> eig(big);
      std::vector<Eigen::Index> null_cols;
      for (Eigen::Index k = 0; k < big.rows(); ++k) {
        if (std::abs(eig.eigenvalues()(k)) < 1e-10) null_cols.push_back(k);
      }
      EXPECT_EQ(null_cols.size(), n);
      for (int trial = 0; trial < 20; ++trial) {
        VectorXd x = VectorXd::Zero(big.rows());
        for (auto k : null_cols) x += normal(rng) * eig.eigenvectors().col(k);
        double spread = 0.0, biggest = 0.0;
        for (std::size_t i = 0; i < agents; ++i) {
          const VectorXd xi = x.segment(static_cast<Eigen::Index>(i * n), static_cast<Eigen::Index>(n));
          biggest = std::max(biggest, xi.norm());
          for (std::size_t j = 0; j < agents; ++j) {
            const VectorXd xj = x.segment(static_cast<Eigen::Index>(j * n), static_cast<Eigen::Index>(n));
            spread = std::max(spread, (xi - xj).norm());
          }
        }
        EXPECT_LE(spread, 1e-8 * (1.0 + biggest));
      }
    }
  }
}

TEST(ConsensusMatrix, NeighborsFollowNonzeroEntries) {
  const auto g = generate_small_world(9, 4, 6);
  const auto cm = consensus_matrix(metropolis_weights(g), 1.0);
  for (std::size_t i = 0; i < 9; ++i) EXPECT_EQ(cm.neighbors(i), g.neighbors(i));
}
