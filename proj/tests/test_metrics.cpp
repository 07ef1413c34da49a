#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "adapd/baseline.hpp"
#include "adapd/metrics.hpp"
#include "adapd/solver.hpp"
#include "fixtures.hpp"
#include "oracles.hpp"

using namespace adapd;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using fixture::vec;

namespace {

/// Two 1-D agents with f = 0 and an always-satisfied constraint g = -1.
ProblemInstance flat_pair() {
  std::vector<LocalProblem> agents;
  for (int i = 0; i < 2; ++i) {
    agents.push_back(make_local_problem(SmoothObjective(0.0, vec({0.0})),
                                        {EllipsoidConstraint{fixture::mat1(0.0), vec({0.0}), 1.0}},
                                        BoxIndicator::uniform(1, -1, 1)));
  }
  return ProblemInstance(std::move(agents), {});
}

GapBoundInputs unit_inputs(std::size_t agents, std::int64_t horizon) {
  GapBoundInputs in;
  const auto ones = VectorXd::Ones(static_cast<Eigen::Index>(agents));
  in.inv_tau = ones;
  in.inv_sigma = ones;
  in.inv_gamma = ones;
  in.c = ones;
  in.delta = ones;
  in.d = 2.0 * ones;
  in.num_agents = agents;
  in.horizon = horizon;
  const auto zero = VectorXd::Zero(static_cast<Eigen::Index>(agents));
  in.initial = {zero, zero, zero};
  in.comparison = {zero, zero, zero};
  return in;
}

std::vector<MetricsRow> power_law(double exponent) {
  std::vector<MetricsRow> rows;
  for (int e = 0; e <= 20; ++e) {
    MetricsRow r;
    r.k = static_cast<std::int64_t>(std::llround(std::pow(10.0, 3.0 + e * 0.1)));
    r.subopt = 7.0 * std::pow(static_cast<double>(r.k), exponent);
    rows.push_back(r);
  }
  return rows;
}

}  // namespace

TEST(Lagrangian, ReducesToObjectiveWithZeroMultipliers) {
  const auto inst = make_localization_instance(3, 4, 2, 0.1, 1);
  const auto cm = fixture::small_world_consensus(4, 1, 2);
  std::mt19937_64 rng(1);
  VectorXd x(12);
  for (std::size_t i = 0; i < 4; ++i) block(x, i, 3) = fixture::random_in_box(inst.agent(i).box, rng);
  EXPECT_DOUBLE_EQ(lagrangian(inst, cm, x, VectorXd::Zero(4), VectorXd::Zero(12)),
                   eval_stacked(inst, x).phi);
}

TEST(Lagrangian, ConsensusPointKillsCouplingTerm) {
  const auto inst = make_localization_instance(2, 5, 2, 0.1, 2);
  const auto cm = fixture::small_world_consensus(5, 2, 3);
  const VectorXd x = vec({0.4, -0.3}).replicate(5, 1);
  const VectorXd lambda = VectorXd::LinSpaced(10, -50.0, 50.0);
  EXPECT_NEAR(lagrangian(inst, cm, x, VectorXd::Zero(5), lambda), eval_stacked(inst, x).phi, 1e-12);
}

TEST(Lagrangian, MatchesDenseForm) {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto inst = make_localization_instance(3, 5, 4, 0.1, seed);
    const auto cm = fixture::small_world_consensus(5, 2, seed);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    VectorXd x(15), lambda(15), y(5);
    for (std::size_t i = 0; i < 5; ++i) block(x, i, 3) = fixture::random_in_box(inst.agent(i).box, rng);
    for (int k = 0; k < 15; ++k) lambda(k) = normal(rng);
    for (int k = 0; k < 5; ++k) y(k) = std::abs(normal(rng));
    const double dense = oracle::dense_lagrangian(inst, cm.v(), x, y, lambda);
    EXPECT_NEAR(lagrangian(inst, cm, x, y, lambda), dense, 1e-12 * std::max(1.0, std::abs(dense)));
  }
}

TEST(Lagrangian, OutsideBoxIsInfiniteAndNegativeDualRejected) {
  const auto inst = make_localization_instance(1, 2, 1, 0.1, 1);
  const auto cm = fixture::path_consensus(2);
  EXPECT_TRUE(std::isinf(lagrangian(inst, cm, vec({2.0, 0.0}), vec({0, 0}), vec({0, 0}))));
  EXPECT_THROW(lagrangian(inst, cm, vec({0.0, 0.0}), vec({-1, 0}), vec({0, 0})), std::invalid_argument);
}

TEST(Infeasibility, SumsPositivePartsPerAgent) {
  std::vector<LocalProblem> agents;
  agents.push_back(make_local_problem(
      SmoothObjective(1.0, vec({0.0})),
      {EllipsoidConstraint{fixture::mat1(0.0), vec({0.0}), 1.0},
       EllipsoidConstraint{fixture::mat1(0.0), vec({2.0}), std::sqrt(2.0)}},
      BoxIndicator::uniform(1, -1, 1)));
  const ProblemInstance inst(std::move(agents), {});
  EXPECT_NEAR(infeasibility(inst, vec({0.0})), 2.0, 1e-15);
}

TEST(WeightedNorm, MatchesDenseQuadraticForm) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<std::size_t> blocks(1, 8), size(0, 6);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<std::size_t> sizes(blocks(rng));
    std::size_t total = 0;
    for (auto& s : sizes) total += (s = size(rng));
    if (total > 60) continue;
    VectorXd v(static_cast<Eigen::Index>(total)), w(static_cast<Eigen::Index>(sizes.size()));
    for (Eigen::Index k = 0; k < v.size(); ++k) v(k) = normal(rng);
    for (Eigen::Index k = 0; k < w.size(); ++k) w(k) = std::abs(normal(rng)) + 0.1;
    const double dense = oracle::dense_weighted_sq_norm(v, w, sizes);
    EXPECT_NEAR(weighted_sq_norm(v, w, sizes), dense, 1e-12 * std::max(1.0, dense));
  }
  const std::vector<std::size_t> sizes{2, 2};
  EXPECT_THROW(weighted_sq_norm(VectorXd::Zero(5), VectorXd::Ones(2), sizes), std::invalid_argument);
  EXPECT_THROW(weighted_sq_norm(VectorXd::Zero(4), VectorXd::Ones(3), sizes), std::invalid_argument);
}

TEST(GapBound, HandSetScalarsGiveOnePointFive) {
  const auto inst = flat_pair();
  const auto cm = fixture::path_consensus(2);
  auto in = unit_inputs(2, 1);
  in.initial.x = vec({1.0, 0.0});
  EXPECT_NEAR(expected_gap_bound(in, inst, cm), 1.5, 1e-15);
}

TEST(GapBound, VanishesAtTheComparisonPoint) {
  const auto inst = make_localization_instance(2, 3, 2, 0.1, 4);
  const auto cm = fixture::small_world_consensus(3, 0, 1);
  const auto steps = compute_step_sizes(inst, cm, 1.0);
  PrimalDualPoint p{VectorXd::Constant(6, 0.3), VectorXd::Constant(3, 0.7), VectorXd::Constant(6, -1)};
  EXPECT_EQ(expected_gap_bound(GapBoundInputs::from(steps, p, p, 10), inst, cm), 0.0);
}

TEST(GapBound, SingleAgentDropsTheLagrangianTerm) {
  const auto inst = make_localization_instance(2, 1, 2, 0.1, 6);
  const auto cm = fixture::path_consensus(1);
  const auto steps = compute_step_sizes(inst, cm, 1.0);
  const PrimalDualPoint x0{vec({0.5, -0.5}), vec({1.0}), vec({0.0, 0.0})};
  const PrimalDualPoint cmp{vec({-0.2, 0.1}), vec({0.0}), vec({0.0, 0.0})};
  const std::int64_t horizon = 25;
  const auto in = GapBoundInputs::from(steps, x0, cmp, horizon);
  const double c = steps.constants().lipschitz_value(0), d = steps.constants().delta(0);
  const double dist = (1.0 / steps.tau(0) + c + d) * (x0.x - cmp.x).squaredNorm() +
                      (1.0 / steps.sigma(0) + c) * (x0.y - cmp.y).squaredNorm();
  EXPECT_NEAR(expected_gap_bound(in, inst, cm), dist / (2.0 * horizon), 1e-12);
}

TEST(GapBound, ShrinksLikeOneOverHorizon) {
  const auto inst = make_localization_instance(2, 4, 2, 0.1, 4);
  const auto cm = fixture::small_world_consensus(4, 1, 1);
  const auto steps = compute_step_sizes(inst, cm, 1.0);
  const auto init = default_initial_point(inst);
  PrimalDualPoint cmp{VectorXd::Constant(8, 0.1), VectorXd::Constant(4, 1.0), VectorXd::Zero(8)};
  const double a = expected_gap_bound(GapBoundInputs::from(steps, init, cmp, 10), inst, cm);
  const double b = expected_gap_bound(GapBoundInputs::from(steps, init, cmp, 110), inst, cm);
  EXPECT_NEAR(a / b, (110.0 + 3.0) / (10.0 + 3.0), 1e-12);
}

TEST(Metrics, AtTheReferencePointEverythingVanishes) {
  const auto inst = make_localization_instance(2, 5, 2, 0.1, 1);
  const auto cm = fixture::small_world_consensus(5, 2, 1);
  const auto ref = solve_centralized(inst, cm, 1e-10);
  const auto row = ergodic_metrics(inst, cm, ErgodicPoint{ref.saddle_point(), 1}, ref);
  EXPECT_LE(row.subopt, 1e-10);
  EXPECT_LE(row.infeas, 1e-10);
  EXPECT_LE(row.consensus, 1e-10);
  EXPECT_NEAR(row.gap, 0.0, 1e-9);
}

TEST(Metrics, ReferenceFreeRowsLeaveSuboptUnset) {
  const auto inst = make_localization_instance(2, 3, 2, 0.1, 1);
  const auto cm = fixture::small_world_consensus(3, 0, 1);
  const auto row = reference_free_metrics(inst, cm, ErgodicPoint{default_initial_point(inst), 4});
  EXPECT_TRUE(std::isnan(row.subopt));
  EXPECT_TRUE(std::isnan(row.gap));
  EXPECT_EQ(row.k, 4);
  EXPECT_EQ(row.consensus, 0.0);
}

TEST(Metrics, GapAgainstSaddlePointStaysNonnegative) {
  const auto inst = make_localization_instance(2, 5, 2, 0.1, 1);
  const auto cm = fixture::small_world_consensus(5, 2, 1);
  const double tol = 1e-10;
  const auto ref = solve_centralized(inst, cm, tol);
  const auto steps = compute_step_sizes(inst, cm, estimate_dual_bound(ref));
  RunOptions opt;
  opt.record_every = 25;
  opt.reference = &ref;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto r = run_async(inst, cm, 2000, steps, default_initial_point(inst), seed, opt);
    for (const auto& row : r.record.rows) {
      EXPECT_GE(row.gap, -10 * tol) << "k=" << row.k;
      EXPECT_GE(row.infeas, 0.0);
      EXPECT_GE(row.consensus, 0.0);
    }
  }
}

TEST(Metrics, LongerRunsImproveAllThree) {
  // Regression fixture on the small-preset shape.
  const auto inst = make_localization_instance(20, 10, 10, 0.1, 1);
  const auto cm = fixture::small_world_consensus(10, 5, 2);
  const auto ref = solve_centralized(inst, cm, 1e-9);
  const auto steps = compute_step_sizes(inst, cm, 1.0);
  RunOptions opt;
  opt.record_every = 1000;
  opt.reference = &ref;
  const auto r = run_async(inst, cm, 10000, steps, default_initial_point(inst), 3, opt);
  const auto& early = r.record.rows.front();
  const auto& late = r.record.rows.back();
  ASSERT_EQ(early.k, 1000);
  ASSERT_EQ(late.k, 10000);
  EXPECT_LT(late.subopt, early.subopt);
  EXPECT_LT(late.infeas, early.infeas);
  EXPECT_LT(late.consensus, early.consensus);
}

TEST(RateFit, ExactPowerLaws) {
  const auto inv = power_law(-1.0);
  EXPECT_NEAR(rate_fit(inv, 1000, 100000, Metric::kSubopt), -1.0, 1e-6);
  const auto root = power_law(-0.5);
  EXPECT_NEAR(rate_fit(root, 1000, 100000, Metric::kSubopt), -0.5, 1e-6);
}

TEST(RateFit, RejectsDegenerateInputs) {
  auto rows = power_law(0.0);
  EXPECT_THROW(rate_fit(rows, 1000, 100000, Metric::kSubopt), std::invalid_argument);
  rows = power_law(-1.0);
  EXPECT_THROW(rate_fit(rows, 1000, 1500, Metric::kSubopt), std::invalid_argument);
  for (auto& r : rows) r.infeas = 0.0;
  EXPECT_THROW(rate_fit(rows, 1000, 100000, Metric::kInfeas), std::invalid_argument);
  const std::vector<double> ks{1, 1, 1, 1, 1}, vs{1, 2, 3, 4, 5};
  EXPECT_THROW(rate_fit(ks, vs), std::invalid_argument);
}

TEST(RateFit, SkipsNonpositiveRows) {
  auto rows = power_law(-1.0);
  rows[3].subopt = 0.0;
  rows[7].subopt = -1.0;
  EXPECT_NEAR(rate_fit(rows, 1000, 100000, Metric::kSubopt), -1.0, 1e-6);
}

TEST(Csv, RoundTripIsExact) {
  std::vector<MetricsRow> rows;
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 1; k <= 30; ++k) {
    rows.push_back({k * 10, k * 10, u(rng) / 3.0, u(rng) * 1e-17, u(rng) * 1e9, -u(rng), 0.0});
  }
  const std::string text = metrics_csv(rows);
  EXPECT_EQ(text.substr(0, text.find('\n')), kCsvHeader);
  EXPECT_EQ(metrics_csv(parse_metrics_csv(text)), text);
  const auto back = parse_metrics_csv(text);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(back[i].subopt, rows[i].subopt);
    EXPECT_EQ(back[i].infeas, rows[i].infeas);
    EXPECT_EQ(back[i].consensus, rows[i].consensus);
  }
}

TEST(Csv, ErrorsCarryLineNumbers) {
  const std::string header = std::string(kCsvHeader) + "\n";
  const auto message = [](const std::string& text) {
    try {
      parse_metrics_csv(text);
    } catch (const std::invalid_argument& e) {
      return std::string(e.what());
    }
    return std::string("no error");
  };
  EXPECT_NE(message("k,comms\n").find("line 1"), std::string::npos);
  EXPECT_NE(message(header + "1,1,0,0,0,0,0\n2,2,x,0,0,0,0\n").find("line 3"), std::string::npos);
  EXPECT_NE(message(header + "1,1,0,0,0,0\n").find("line 2"), std::string::npos);
  EXPECT_EQ(message(header), "no error");
}
