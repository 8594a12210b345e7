#include "adplan/dual.hpp"

#include <gtest/gtest.h>

#include <random>

#include "oracles/qp_oracle.hpp"
#include "support/fixtures.hpp"

namespace adplan {
namespace {

using fixtures::contract;

AllocationGraph one_node(double supply, double demand) {
  return AllocationGraph::from_targeting({{"n", {}, supply}}, {contract("c", "TRUE", demand)});
}

TEST(Objective, TargetAllocationIsZero) {
  AllocationGraph g = AllocationGraph::from_targeting(
      {{"a", {{"k", "1"}}, 100}, {"b", {{"k", "2"}}, 50}},
      {contract("wide", "k IN {1, 2}", 60), contract("narrow", "k = 2", 10)});
  FractionalAllocation x{{{"a", "wide"}, 0.4}, {{"b", "wide"}, 0.4}, {{"b", "narrow"}, 0.2}};
  EXPECT_NEAR(dual_objective(g, x, {}), 0.0, 1e-12);
}

TEST(Objective, OverservedSingleEdge) {
  AllocationGraph g = one_node(100, 50);
  EXPECT_DOUBLE_EQ(dual_objective(g, {{{"n", "c"}, 1.0}}, {}), 50.0);
}

TEST(Objective, FullUnderdelivery) {
  AllocationGraph g = one_node(20, 10);
  EXPECT_DOUBLE_EQ(dual_objective(g, {}, {{"c", 10.0}}), 110.0);
}

TEST(Objective, PenaltyOverrideAndViolations) {
  AllocationGraph g = one_node(20, 10);
  DualObjectiveSpec spec;
  spec.penalty["c"] = 3;
  EXPECT_DOUBLE_EQ(dual_objective(g, {}, {{"c", 10.0}}, spec), 40.0);
  EXPECT_THROW(dual_objective(g, {}, {}), error);
  EXPECT_THROW(dual_objective(g, {}, {{"c", -1.0}}), error);
  EXPECT_THROW(dual_objective(g, {{{"n", "c"}, 1.5}}, {}), error);
  EXPECT_THROW(dual_objective(g, {{{"n", "zz"}, 0.1}}, {{"c", 10.0}}), error);
}

TEST(Reconstruct, SingleContractWithPositiveDual) {
  std::vector<DualCandidate> c{{0.5, 1.0}};
  PrimalSlice p = reconstruct_primal(c);
  EXPECT_DOUBLE_EQ(p.beta, 0.0);
  EXPECT_DOUBLE_EQ(p.x[0], 1.0);
}

TEST(Reconstruct, TwoSymmetricContracts) {
  std::vector<DualCandidate> c{{0.5, 0.0}, {0.5, 0.0}};
  PrimalSlice p = reconstruct_primal(c);
  EXPECT_DOUBLE_EQ(p.beta, 0.0);
  EXPECT_EQ(p.x, (std::vector<double>{0.5, 0.5}));
}

TEST(Reconstruct, UnderDemandedImpression) {
  std::vector<DualCandidate> c{{0.3, 0.0}};
  PrimalSlice p = reconstruct_primal(c);
  EXPECT_DOUBLE_EQ(p.beta, 0.0);
  EXPECT_DOUBLE_EQ(p.x[0], 0.3);
}

TEST(Reconstruct, CompetitionRaisesBeta) {
  std::vector<DualCandidate> c{{0.8, 0.5}, {0.6, 0.0}};
  PrimalSlice p = reconstruct_primal(c);
  // 0.8 (1.5 - X) + 0.6 (1 - X) = 1  =>  X = 0.8 / 1.4
  EXPECT_NEAR(p.beta, 0.8 / 1.4, 1e-15);
  EXPECT_NEAR(p.x[0] + p.x[1], 1.0, 1e-15);
}

TEST(Reconstruct, DominatedContractGetsNothing) {
  std::vector<DualCandidate> c{{1.0, 3.0}, {0.5, 0.0}};
  PrimalSlice p = reconstruct_primal(c);
  EXPECT_DOUBLE_EQ(p.beta, 3.0);
  EXPECT_DOUBLE_EQ(p.x[0], 1.0);
  EXPECT_DOUBLE_EQ(p.x[1], 0.0);
}

TEST(Reconstruct, EmptyAndInvalid) {
  EXPECT_TRUE(reconstruct_primal(std::vector<DualCandidate>{}).x.empty());
  EXPECT_THROW(reconstruct_primal(std::vector<DualCandidate>{{0.0, 1.0}}), error);
}

std::vector<DualCandidate> random_candidates(std::mt19937_64& rng) {
  std::vector<DualCandidate> c(std::uniform_int_distribution<int>(1, 8)(rng));
  for (auto& k : c) {
    k.theta = std::uniform_real_distribution<double>(0.01, 1.0)(rng);
    k.alpha = std::bernoulli_distribution(0.3)(rng) ? 0.0 : std::uniform_real_distribution<double>(0, 5)(rng);
  }
  return c;
}

TEST(ReconstructProperty, SupplyAndNonNegativity) {
  std::mt19937_64 rng(31);
  for (int round = 0; round < 5000; ++round) {
    auto c = random_candidates(rng);
    PrimalSlice p = reconstruct_primal(c);
    double total = 0, at_zero = 0;
    for (std::size_t k = 0; k < c.size(); ++k) {
      EXPECT_GE(p.x[k], 0.0);
      total += p.x[k];
      at_zero += c[k].theta * (1 + c[k].alpha);
    }
    EXPECT_LE(total, 1 + 1e-12);
    if (p.beta > 0) { EXPECT_NEAR(total, 1.0, 1e-12); }
    if (at_zero <= 1) { EXPECT_EQ(p.beta, 0.0); }
  }
}

TEST(ReconstructProperty, RaisingOwnDualHelpsSelfNotOthers) {
  std::mt19937_64 rng(32);
  for (int round = 0; round < 5000; ++round) {
    auto c = random_candidates(rng);
    PrimalSlice before = reconstruct_primal(c);
    std::size_t j = rng() % c.size();
    c[j].alpha += std::uniform_real_distribution<double>(0, 2)(rng);
    PrimalSlice after = reconstruct_primal(c);
    EXPECT_GE(after.x[j], before.x[j] - 1e-12);
    for (std::size_t k = 0; k < c.size(); ++k)
      if (k != j) { EXPECT_LE(after.x[k], before.x[k] + 1e-12); }
  }
}

TEST(Solver, ExactlyFeasibleTargetNeedsNoDual) {
  for (double d : {50.0, 100.0}) {
    DualPlan plan = solve_dual_offline(one_node(100, d));
    ASSERT_EQ(plan.entries.size(), 1u);
    EXPECT_DOUBLE_EQ(plan.entries[0].theta, d / 100);
    EXPECT_EQ(plan.entries[0].alpha, 0.0);
  }
}

TEST(Solver, InfeasibleContractIsPricedAtTheCap) {
  AllocationGraph g = AllocationGraph::from_targeting(
      {{"a", {{"k", "1"}}, 10}, {"b", {{"k", "2"}}, 20}, {"c", {{"k", "3"}}, 30}},
      {contract("big", "k IN {1, 2}", 50), contract("small", "k IN {2, 3}", 20)});
  DualPlan plan = solve_dual_offline(g);
  const DualEntry& big = plan.entries.at(0);
  EXPECT_EQ(big.contract_id, "big");
  EXPECT_NEAR(big.alpha, dual_alpha_cap(kDefaultPenalty), 1e-6);

  oracle::QpInstance q{{10, 20, 30}, {50, 20}, {10, 10}, {{true, false}, {true, true}, {false, true}}};
  oracle::QpSolution sol = oracle::solve_qp(q);
  EXPECT_GT(sol.u[0], 1.0);
  EXPECT_NEAR(sol.lambda[0] / 2, big.alpha, 1e-5);
  EXPECT_NEAR(sol.lambda[1] / 2, plan.entries.at(1).alpha, 1e-5);
}

TEST(Solver, ExcludesContractsWithoutSupplyAndRejectsBadInput) {
  AllocationGraph g = AllocationGraph::from_targeting({{"n", {{"k", "1"}}, 10}},
                                                      {contract("c", "TRUE", 5), contract("lost", "k = 2", 5)});
  DualPlan plan = solve_dual_offline(g);
  EXPECT_EQ(plan.entries.size(), 1u);
  EXPECT_EQ(plan.excluded, std::vector<std::string>{"lost"});
  EXPECT_THROW(solve_dual_offline(g, {}, 0.0), error);
  DualObjectiveSpec zero;
  zero.penalty["c"] = 0;
  EXPECT_THROW(solve_dual_offline(g, zero), error);
}

TEST(Solver, NonConvergenceNamesAContract) {
  AllocationGraph g = AllocationGraph::from_targeting(
      {{"a", {{"k", "1"}}, 10}, {"b", {{"k", "2"}}, 10}},
      {contract("x", "k IN {1, 2}", 15), contract("y", "k = 2", 9), contract("z", "k = 1", 9)});
  try {
    solve_dual_offline(g, {}, 1e-12, 1);
    FAIL() << "expected non-convergence";
  } catch (const convergence_error& e) {
    EXPECT_FALSE(e.contract_id().empty());
    EXPECT_GT(e.violation(), 0.0);
  }
}

// Duals from the solver and from an independent QP solve reproduce the same
// primal; the oracle's optimal duals reproduce the oracle's optimal primal.
TEST(SolverProperty, MatchesQuadraticProgramOracle) {
  std::mt19937_64 rng(33);
  for (int round = 0; round < 15; ++round) {
    fixtures::RandomGraphSpec spec;
    spec.oversold_probability = 0.2;
    IndexedGraph g = fixtures::random_indexed_graph(rng, spec);
    oracle::QpInstance q;
    q.supply = g.supply;
    q.demand = g.demand;
    q.penalty = g.penalty;
    q.eligible.assign(g.num_nodes(), std::vector<bool>(g.num_contracts(), false));
    for (std::size_t i = 0; i < g.num_nodes(); ++i)
      for (std::size_t j : g.node_contracts[i]) q.eligible[i][j] = true;
    oracle::QpSolution sol = oracle::solve_qp(q);
    DualSolveResult r = solve_dual_indexed(g, 1e-9);

    std::vector<std::vector<double>> mine(g.num_nodes(), std::vector<double>(g.num_contracts(), 0.0));
    for (std::size_t i = 0; i < g.num_nodes(); ++i) {
      std::vector<DualCandidate> from_oracle, from_solver;
      for (std::size_t j : g.node_contracts[i]) {
        from_oracle.push_back({sol.theta[j], sol.lambda[j] / 2});
        from_solver.push_back({r.theta[j], r.alpha[j]});
      }
      PrimalSlice a = reconstruct_primal(from_oracle), b = reconstruct_primal(from_solver);
      for (std::size_t k = 0; k < g.node_contracts[i].size(); ++k) {
        std::size_t j = g.node_contracts[i][k];
        EXPECT_NEAR(a.x[k], sol.x[i][j], 1e-6) << "round " << round;
        EXPECT_NEAR(b.x[k], sol.x[i][j], 1e-6) << "round " << round;
        mine[i][j] = b.x[k];
      }
    }
    std::vector<double> u(g.num_contracts());
    for (std::size_t j = 0; j < g.num_contracts(); ++j) {
      double delivered = 0;
      for (std::size_t i : g.contract_nodes[j]) delivered += g.supply[i] * mine[i][j];
      u[j] = std::max(0.0, g.demand[j] - delivered);
      double cap = dual_alpha_cap(g.penalty[j]);
      EXPECT_TRUE(delivered >= g.demand[j] * (1 - 1e-6) || r.alpha[j] >= cap - 1e-6) << "round " << round;
    }
    double objective = oracle::qp_objective(q, sol.theta, mine, u);
    EXPECT_NEAR(objective, sol.objective, 1e-5 * std::max(1.0, sol.objective));
  }
}

TEST(Serve, UsesReconstructedProbabilities) {
  DualEntry a{"a", 0.5, 0.0, 10}, b{"b", 0.5, 0.0, 10};
  SplitMix64 rng(5);
  ServeDecision d = serve_dual({&a, &b}, rng, "imp");
  ASSERT_EQ(d.probabilities.size(), 2u);
  EXPECT_DOUBLE_EQ(d.probabilities[0].second, 0.5);
  EXPECT_DOUBLE_EQ(d.probabilities[1].second, 0.5);
  EXPECT_EQ(d.chosen, std::optional<std::string>(d.draw < 0.5 ? "a" : "b"));
  EXPECT_FALSE(serve_dual({}, rng).chosen);
}

}  // namespace
}  // namespace adplan
