#include <gtest/gtest.h>

#include "oracles.hpp"

namespace svp {
namespace {

/// Largest total decision size among SVPs whose recursive worst-case values
/// are zeta-optimal.
std::size_t naive_max_feasible_size(const TabularMdp& mdp, const std::vector<double>& v_star, double zeta) {
  const std::uint64_t top = ActionSet::full(mdp.action_count()).bits();
  std::vector<StateIndex> decision;
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (!mdp.is_terminal(s)) decision.push_back(s);
  }
  std::vector<ActionSet> sets(mdp.state_count(), ActionSet(top));
  std::size_t best = 0;
  std::function<void(std::size_t)> walk = [&](std::size_t i) {
    if (i == decision.size()) {
      const auto v = testing::min_over_sets(mdp, sets, testing::recursive_worst_case_q(mdp, sets));
      for (StateIndex s : decision) {
        if (v[s] < (1.0 - zeta) * v_star[s] - 1e-9) return;
      }
      best = std::max(best, decision_size(mdp, sets));
      return;
    }
    for (std::uint64_t bits = 1; bits <= top; ++bits) {
      sets[decision[i]] = ActionSet(bits);
      walk(i + 1);
    }
  };
  walk(0);
  return best;
}

TEST(Oracle, ChainExtremes) {
  const TabularMdp mdp = build_chain(5, 0, 0.9);
  const OptimalSolution sol = value_iteration(mdp);
  const OracleResult greedy = exhaustive_maximal_svp(mdp, sol.v, 0.0);
  EXPECT_EQ(greedy.total_size, 4u);
  EXPECT_EQ(greedy.best.sets, greedy_sets(mdp, sol.q));
  const OracleResult everything = exhaustive_maximal_svp(mdp, sol.v, 1.0);
  EXPECT_EQ(everything.total_size, 16u);
  EXPECT_NEAR(compute_metrics(mdp, everything.best.sets, sol.v).average_size_decision, 4.0, 1e-12);
}

TEST(Oracle, CyclicChainZetaOneKeepsEverything) {
  const TabularMdp mdp = build_cyclic_chain(5, 0, 0.9);
  const OracleResult result = exhaustive_maximal_svp(mdp, value_iteration(mdp).v, 1.0);
  for (StateIndex s = 0; s < 4; ++s) EXPECT_EQ(result.best.sets[s], ActionSet::full(4));
}

TEST(Oracle, DominatesNearGreedyOnChain) {
  const TabularMdp mdp = build_chain(5, 0, 0.9);
  const OptimalSolution sol = value_iteration(mdp);
  for (double zeta : {0.0, 0.01, 0.05, 0.1, 0.3, 1.0}) {
    const OracleComparison cmp = oracle_compare(mdp, sol.v, zeta);
    ASSERT_TRUE(cmp.near_greedy_converged);
    EXPECT_TRUE(cmp.near_greedy_feasible) << zeta;
    EXPECT_GE(cmp.oracle_size, cmp.near_greedy_size) << zeta;
  }
}

TEST(Oracle, IdenticalOnCyclicChainAtSmallZeta) {
  const TabularMdp mdp = build_cyclic_chain(5, 0, 0.9);
  const OracleComparison cmp = oracle_compare(mdp, value_iteration(mdp).v, 0.05);
  ASSERT_TRUE(cmp.near_greedy_converged);
  EXPECT_TRUE(cmp.identical);
}

TEST(Oracle, SoundAndMaximalOnSmallDags) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TabularMdp mdp = build_random_dag(4, 3, seed, 0.9);
    const auto v_star = testing::recursive_optimal_values(mdp);
    for (double zeta : {0.05, 0.3}) {
      const OracleResult result = exhaustive_maximal_svp(mdp, value_iteration(mdp).v, zeta);
      const auto v = testing::min_over_sets(mdp, result.best.sets,
                                            testing::recursive_worst_case_q(mdp, result.best.sets));
      for (StateIndex s = 0; s < mdp.state_count(); ++s) EXPECT_GE(v[s], (1.0 - zeta) * v_star[s] - 1e-9);
      EXPECT_EQ(result.total_size, naive_max_feasible_size(mdp, v_star, zeta)) << seed << " " << zeta;
    }
  }
}

TEST(Oracle, SameInputSameAnswer) {
  const TabularMdp mdp = build_chain(5, 2, 0.9);
  const OptimalSolution sol = value_iteration(mdp);
  EXPECT_EQ(exhaustive_maximal_svp(mdp, sol.v, 0.1).best.sets, exhaustive_maximal_svp(mdp, sol.v, 0.1).best.sets);
}

TEST(Oracle, GuardExceeded) {
  const TabularMdp mdp = build_frozen_lake("4x4", 0.9);
  EXPECT_THROW(exhaustive_maximal_svp(mdp, value_iteration(mdp).v, 0.1), GuardExceeded);
  OracleOptions tight;
  tight.guard = 10;
  const TabularMdp chain = build_chain(5, 0, 0.9);
  EXPECT_THROW(exhaustive_maximal_svp(chain, value_iteration(chain).v, 0.1, tight), GuardExceeded);
}

}  // namespace
}  // namespace svp
