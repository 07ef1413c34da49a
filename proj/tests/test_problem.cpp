#include <gtest/gtest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "adapd/problem.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace adapd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using fixture::vec;

namespace {

double relative_error(const MatrixXd& approx, const MatrixXd& exact) {
  return (approx - exact).norm() / std::max(exact.norm(), 1.0);
}

ProblemInstance random_instance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> dim(1, 8), agents(1, 4), rows(1, 6);
  return make_localization_instance(dim(rng), agents(rng), rows(rng), 0.1, seed);
}

}  // namespace

TEST(ProxBox, ClampsOutsideCoordinates) {
  const VectorXd lo = VectorXd::Constant(3, -1.0), hi = VectorXd::Constant(3, 1.0);
  EXPECT_EQ(prox_box(vec({2.0, -0.5, -3.0}), lo, hi), vec({1.0, -0.5, -1.0}));
  EXPECT_EQ(prox_box(vec({0.3, -0.2, 1.0}), lo, hi), vec({0.3, -0.2, 1.0}));
}

TEST(ProxBox, RejectsInvertedBounds) {
  EXPECT_THROW(prox_box(vec({0.0}), vec({1.0}), vec({0.0})), std::invalid_argument);
  EXPECT_THROW(BoxIndicator(vec({1.0}), vec({0.0})), std::invalid_argument);
}

TEST(ProxBox, IdempotentInsideAndNonexpansive) {
  std::mt19937_64 rng(4);
  std::normal_distribution<double> normal(0.0, 3.0);
  const auto box = BoxIndicator::uniform(5, -1.0, 1.0);
  for (int t = 0; t < 100; ++t) {
    VectorXd w(5), w2(5);
    for (int k = 0; k < 5; ++k) {
      w(k) = normal(rng);
      w2(k) = normal(rng);
    }
    const VectorXd p = box.prox(w);
    EXPECT_TRUE(box.contains(p));
    EXPECT_EQ(box.prox(p), p);
    EXPECT_LE((p - box.prox(w2)).norm(), (w - w2).norm() + 1e-15);
  }
}

TEST(BoxIndicator, ValueAndRadius) {
  const auto box = BoxIndicator::uniform(2, -1.0, 1.0);
  EXPECT_EQ(box.value(vec({0.5, -1.0})), 0.0);
  EXPECT_TRUE(std::isinf(box.value(vec({1.5, 0.0}))));
  EXPECT_NEAR(box.radius(), std::sqrt(2.0), 1e-15);
  const auto big = box.inflated(1.1);
  EXPECT_NEAR(big.upper()(0), 1.1, 1e-15);
  EXPECT_NEAR(big.lower()(1), -1.1, 1e-15);
}

TEST(ConstraintConstants, IdentityMatrix) {
  const auto c = constraint_constants(MatrixXd::Identity(2, 2), VectorXd::Zero(2),
                                      BoxIndicator::uniform(2, -1.0, 1.0));
  EXPECT_NEAR(c.spectral_norm, 1.0, 2e-6);
  EXPECT_NEAR(c.lipschitz_jacobian, 2.0, 1e-5);
  EXPECT_GE(c.lipschitz_value, 2.0 * std::sqrt(2.0));
  EXPECT_LE(c.lipschitz_value, 2.0 * std::sqrt(2.0) * (1.0 + 1e-5));
}

TEST(ConstraintConstants, ZeroMatrix) {
  const auto c = constraint_constants(MatrixXd::Zero(3, 2), vec({1.0, 2.0, 3.0}),
                                      BoxIndicator::uniform(2, -1.0, 1.0));
  EXPECT_EQ(c.lipschitz_value, 0.0);
  EXPECT_EQ(c.lipschitz_jacobian, 0.0);
}

TEST(ConstraintConstants, BoundsSampledRatios) {
  std::mt19937_64 rng(21);
  std::normal_distribution<double> normal;
  MatrixXd a(5, 3);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 3; ++j) a(i, j) = normal(rng);
  VectorXd b(5);
  for (int i = 0; i < 5; ++i) b(i) = normal(rng);
  const auto box = BoxIndicator::uniform(3, -1.0, 1.0);
  const auto c = constraint_constants(a, b, box);
  const EllipsoidConstraint g{a, b, 1.0};
  double worst = 0.0;
  for (int t = 0; t < 10000; ++t) {
    const VectorXd x = fixture::random_in_box(box, rng), x2 = fixture::random_in_box(box, rng);
    worst = std::max(worst, std::abs(g.value(x) - g.value(x2)) / (x - x2).norm());
  }
  EXPECT_GE(c.lipschitz_value, worst);
}

TEST(SpectralNorm, MatchesSingularValues) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal;
  MatrixXd a(7, 4);
  for (int i = 0; i < 7; ++i)
    for (int j = 0; j < 4; ++j) a(i, j) = normal(rng);
  const double exact = Eigen::JacobiSVD<MatrixXd>(a).singularValues()(0);
  const double est = spectral_norm(a);
  EXPECT_GE(est, exact);
  EXPECT_LE(est, exact * (1.0 + 1e-5));
}

TEST(SpectralNorm, ReportsNonconvergence) {
  // Two steps cannot reach a 1e-16 relative change.
  MatrixXd a = MatrixXd::Identity(3, 3);
  a(0, 1) = 0.999;
  EXPECT_THROW(spectral_norm(a, 1e-16, 2), EstimationError);
}

TEST(Localization, RejectsNonpositiveSizes) {
  EXPECT_THROW(make_localization_instance(0, 2, 2, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(make_localization_instance(2, 0, 2, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(make_localization_instance(2, 2, 0, 0.1, 1), std::invalid_argument);
  EXPECT_THROW(make_localization_instance(2, 2, 2, -0.1, 1), std::invalid_argument);
}

TEST(Localization, FullScaleShape) {
  const auto inst = make_localization_instance(100, 50, 50, 0.1, 1);
  EXPECT_EQ(inst.dim(), 100u);
  EXPECT_EQ(inst.num_agents(), 50u);
  EXPECT_EQ(inst.constraint_dim(), 50u);
  for (const auto& a : inst.agents()) {
    EXPECT_EQ(a.constraint.rows().size(), 1u);
    EXPECT_EQ(a.constraint.rows()[0].a.rows(), 50);
    EXPECT_EQ(a.constraint.rows()[0].a.cols(), 100);
    EXPECT_GE(a.constraint.rows()[0].eta, 1.0);
    EXPECT_LE(a.constraint.rows()[0].eta, 2.0);
    EXPECT_EQ(a.objective.lipschitz_grad(), 1.0);
    EXPECT_EQ(a.box, BoxIndicator::uniform(100, -1.0, 1.0));
  }
  EXPECT_EQ(inst.metadata().noise_std, 0.1);
}

TEST(Localization, NoiselessGroundTruthStrictlyFeasible) {
  const auto inst = make_localization_instance(6, 4, 5, 0.0, 12);
  ASSERT_TRUE(inst.metadata().ground_truth.has_value());
  const VectorXd& truth = *inst.metadata().ground_truth;
  EXPECT_LE(truth.cwiseAbs().maxCoeff(), 1.0);
  for (const auto& a : inst.agents()) {
    const double eta = a.constraint.rows()[0].eta;
    EXPECT_NEAR(a.constraint.value(truth)(0), -eta * eta, 1e-12);
  }
}

TEST(Localization, DeterministicUnderSeed) {
  const auto a = make_localization_instance(5, 3, 4, 0.1, 77);
  const auto b = make_localization_instance(5, 3, 4, 0.1, 77);
  EXPECT_EQ(a.serialize(), b.serialize());
  EXPECT_NE(a.hash(), make_localization_instance(5, 3, 4, 0.1, 78).hash());
}

TEST(Localization, SerializationRoundTrip) {
  const auto a = make_localization_instance(3, 2, 2, 0.1, 5);
  const std::string text = a.serialize();
  EXPECT_EQ(text.rfind("ADAPD-INST v1", 0), 0u);
  std::istringstream in(text);
  const auto b = ProblemInstance::deserialize(in);
  EXPECT_EQ(b.serialize(), text);
  EXPECT_EQ(b.hash(), a.hash());
}

TEST(Localization, DeserializeRejectsWrongHeader) {
  std::istringstream in("ADAPD-INST v9\n");
  EXPECT_THROW(ProblemInstance::deserialize(in), std::invalid_argument);
}

TEST(Derivatives, FiniteDifferencesOnRandomInstances) {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto inst = random_instance(seed);
    std::mt19937_64 rng(seed + 1000);
    for (const auto& agent : inst.agents()) {
      for (int t = 0; t < 20; ++t) {
        const VectorXd x = fixture::random_in_box(agent.box, rng);
        const VectorXd fd_f = oracle::fd_gradient(
            [&](const VectorXd& z) { return agent.objective.value(z); }, x);
        EXPECT_LE(relative_error(fd_f, agent.objective.gradient(x)), 1e-5);
        const MatrixXd jac = agent.constraint.jacobian(x);
        MatrixXd fd_jac(jac.rows(), jac.cols());
        for (Eigen::Index r = 0; r < jac.rows(); ++r) {
          fd_jac.row(r) = oracle::fd_gradient(
                              [&](const VectorXd& z) { return agent.constraint.value(z)(r); }, x)
                              .transpose();
        }
        EXPECT_LE(relative_error(fd_jac, jac), 1e-5) << "seed " << seed;
      }
    }
  }
}

TEST(Derivatives, OraclesAgreeWithIndependentFormulas) {
  const auto inst = random_instance(8);
  std::mt19937_64 rng(1);
  for (const auto& agent : inst.agents()) {
    const VectorXd x = fixture::random_in_box(agent.box, rng);
    const VectorXd y = VectorXd::LinSpaced(static_cast<Eigen::Index>(agent.constraint.output_dim()), 0.5, 2.0);
    EXPECT_LE((agent.constraint.value(x) - oracle::constraint_values(agent, x)).norm(), 1e-10);
    EXPECT_LE((agent.constraint.jacobian_transpose_times(x, y) -
               oracle::constraint_jacobian(agent, x).transpose() * y)
                  .norm(),
              1e-10);
  }
}

TEST(LipschitzConstants, SampledRatiosNeverExceedStoredValues) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto inst = make_localization_instance(4, 2, 3, 0.1, seed);
    std::mt19937_64 rng(seed);
    for (const auto& agent : inst.agents()) {
      const double c = agent.constraint.lipschitz_value();
      const double lg = agent.constraint.lipschitz_jacobian();
      const double lf = agent.objective.lipschitz_grad();
      const double rows = std::sqrt(static_cast<double>(agent.constraint.output_dim()));
      for (int t = 0; t < 10000; ++t) {
        const VectorXd x = fixture::random_in_box(agent.box, rng);
        const VectorXd x2 = fixture::random_in_box(agent.box, rng);
        const double d = (x - x2).norm();
        EXPECT_LE((agent.constraint.value(x) - agent.constraint.value(x2)).norm(), c * d);
        EXPECT_LE((agent.constraint.jacobian(x) - agent.constraint.jacobian(x2)).norm(), lg * d * rows);
        EXPECT_LE((agent.objective.gradient(x) - agent.objective.gradient(x2)).norm(), lf * d * (1 + 1e-12));
      }
    }
  }
}

TEST(EvalStacked, ZeroPointOnTwoAgents) {
  const auto inst = make_localization_instance(3, 2, 4, 0.1, 2);
  const auto ev = eval_stacked(inst, VectorXd::Zero(6));
  EXPECT_EQ(ev.phi, 0.0);
  EXPECT_TRUE(ev.in_domain);
  for (std::size_t i = 0; i < 2; ++i) {
    const auto& row = inst.agent(i).constraint.rows()[0];
    EXPECT_NEAR(ev.g(static_cast<Eigen::Index>(i)), row.b.squaredNorm() - row.eta * row.eta, 1e-12);
  }
}

TEST(EvalStacked, MatchesPerAgentSums) {
  const auto inst = make_localization_instance(4, 5, 3, 0.1, 6);
  std::mt19937_64 rng(2);
  for (int t = 0; t < 20; ++t) {
    VectorXd x(20);
    double phi = 0.0;
    VectorXd g(5);
    for (std::size_t i = 0; i < 5; ++i) {
      const VectorXd xi = fixture::random_in_box(inst.agent(i).box, rng);
      block(x, i, 4) = xi;
      phi += oracle::objective(inst.agent(i), xi);
      g(static_cast<Eigen::Index>(i)) = oracle::constraint_values(inst.agent(i), xi)(0);
    }
    const auto ev = eval_stacked(inst, x);
    EXPECT_NEAR(ev.phi, phi, 1e-14 * std::max(1.0, phi));
    EXPECT_LE((ev.g - g).cwiseAbs().maxCoeff(), 1e-14 * std::max(1.0, g.cwiseAbs().maxCoeff()));
  }
}

TEST(EvalStacked, FlagsPointsOutsideTheBox) {
  const auto inst = make_localization_instance(2, 2, 2, 0.1, 3);
  VectorXd x = VectorXd::Zero(4);
  x(3) = 1.5;
  const auto ev = eval_stacked(inst, x);
  EXPECT_FALSE(ev.in_domain);
  EXPECT_TRUE(std::isinf(ev.phi));
  EXPECT_EQ(ev.g.size(), 2);
  EXPECT_THROW(eval_stacked(inst, VectorXd::Zero(3)), std::invalid_argument);
}

TEST(ProblemInstance, RejectsMixedDimensions) {
  std::vector<LocalProblem> agents;
  agents.push_back(make_local_problem(SmoothObjective(1.0, VectorXd::Zero(2)), {},
                                      BoxIndicator::uniform(2, -1, 1)));
  agents.push_back(make_local_problem(SmoothObjective(1.0, VectorXd::Zero(3)), {},
                                      BoxIndicator::uniform(3, -1, 1)));
  EXPECT_THROW(ProblemInstance(std::move(agents), {}), std::invalid_argument);
}

TEST(ProblemInstance, ConstraintOffsetsStackBlocks) {
  const auto inst = make_localization_instance(2, 3, 2, 0.1, 1);
  EXPECT_EQ(inst.constraint_offset(0), 0u);
  EXPECT_EQ(inst.constraint_offset(2), 2u);
  EXPECT_EQ(inst.constraint_dim(), 3u);
}
