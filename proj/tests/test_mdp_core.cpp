#include <gtest/gtest.h>

#include "oracles.hpp"

namespace svp {
namespace {

using testing::chain2_fixture;

TEST(TabularMdp, RejectsRowsThatDoNotSumToOne) {
  MdpDraft draft(2, 1, 0.9);
  draft.add_transition(0, 0, 1, 0.5);
  draft.set_terminal(1);
  draft.set_start(0, 1.0);
  EXPECT_THROW(draft.build(), InvalidArgument);
}

TEST(TabularMdp, RejectsStartMassOnTerminal) {
  MdpDraft draft(2, 1, 0.9);
  draft.add_transition(0, 0, 1, 1.0);
  draft.set_terminal(1);
  draft.set_start(0, 0.5);
  draft.set_start(1, 0.5);
  EXPECT_THROW(draft.build(), InvalidArgument);
}

TEST(TabularMdp, RejectsUndiscountedCycles) {
  MdpDraft draft(2, 1, 1.0);
  draft.add_transition(0, 0, 0, 1.0);
  draft.set_terminal(1);
  draft.set_start(0, 1.0);
  EXPECT_THROW(draft.build(), InvalidArgument);
}

TEST(TabularMdp, TerminalsAreAbsorbing) {
  const TabularMdp mdp = build_appendix_c_mdp();
  for (ActionIndex a = 0; a < mdp.action_count(); ++a) {
    EXPECT_EQ(mdp.probability(2, a, 2), 1.0);
    EXPECT_EQ(mdp.reward(2, a), 0.0);
  }
}

TEST(ValueIteration, TwoStateCycleValues) {
  const OptimalSolution sol = value_iteration(build_appendix_c_mdp());
  EXPECT_NEAR(sol.v[0], 0.9, 1e-9);
  EXPECT_NEAR(sol.v[1], 1.0, 1e-9);
  EXPECT_EQ(sol.v[2], 0.0);
  EXPECT_NEAR(sol.q(1, 0), 0.81, 1e-9);
}

TEST(ValueIteration, ZeroRewardChainIsPureDiscounting) {
  const TabularMdp mdp = build_chain_with_rewards(std::vector<std::vector<double>>(4, {0, 0, 0, 0}), 0.9);
  const OptimalSolution sol = value_iteration(mdp);
  EXPECT_NEAR(sol.v[0], 0.729, 1e-9);
  EXPECT_NEAR(sol.v[3], 1.0, 1e-9);
}

TEST(ValueIteration, Chain2Fixture) {
  EXPECT_NEAR(value_iteration(chain2_fixture()).v[0], 1.05, 1e-12);
}

TEST(ValueIteration, MatchesRecursiveValuesOnRandomDags) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TabularMdp mdp = build_random_dag(8, 3, seed, 0.95);
    const OptimalSolution sol = value_iteration(mdp);
    const auto expected = testing::recursive_optimal_values(mdp);
    for (StateIndex s = 0; s < mdp.state_count(); ++s) EXPECT_NEAR(sol.v[s], expected[s], 1e-9);
  }
}

TEST(ValueIteration, RejectsNonPositiveTolerance) {
  EXPECT_THROW(value_iteration(chain2_fixture(), {0.0, 10}), InvalidArgument);
}

TEST(QLearning, Chain2ConstantStep) {
  const TabularMdp mdp = chain2_fixture();
  LearnConfig config;
  config.episodes = 50'000;
  config.schedule = StepSchedule::constant(0.1);
  config.seed = 3;
  const TdResult learned = q_learning(mdp, config);
  EXPECT_LE(sup_distance(learned.q, value_iteration(mdp).q), 0.01);
}

TEST(QLearning, ZeroRewardGivesZeroQ) {
  const TabularMdp mdp = build_chain_with_rewards(std::vector<std::vector<double>>(3, {0, 0, 0, 0}), 0.9);
  MdpSimulator sim(mdp, ValueTable(mdp.state_count(), 0.0));
  LearnConfig config;
  config.episodes = 2'000;
  config.zeta = 0.0;
  const TdResult learned = run_td(sim, mdp.gamma(), CandidateRule::greedy(), config);
  for (double x : learned.q.data()) EXPECT_EQ(x, 0.0);
}

TEST(QLearning, TwoStateCycleRecoversQStar) {
  LearnConfig config;
  config.seed = 11;
  const TdResult learned = q_learning(build_appendix_c_mdp(), config);
  EXPECT_NEAR(learned.q(1, 0), 0.81, 0.01);
}

TEST(QLearning, RejectsStepSizesOutsideUnitInterval) {
  LearnConfig config;
  config.schedule = StepSchedule::constant(1.5);
  EXPECT_THROW(q_learning(chain2_fixture(), config), InvalidArgument);
  config.schedule = StepSchedule::constant(0.0);
  EXPECT_THROW(q_learning(chain2_fixture(), config), InvalidArgument);
}

TEST(PolicyEvaluation, TwoStateCycleCandidate) {
  const TabularMdp mdp = build_appendix_c_mdp();
  const QTable q = svp_policy_evaluation(mdp, {ActionSet::single(1), ActionSet::full(2), ActionSet::full(2)});
  EXPECT_NEAR(q(1, 0), 0.0, 1e-9);
}

TEST(PolicyEvaluation, GreedySingletonsReproduceQStar) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TabularMdp mdp = build_random_mdp(6, 3, seed, 0.9);
    const OptimalSolution sol = value_iteration(mdp);
    std::vector<ActionSet> sets(mdp.state_count(), ActionSet::full(3));
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (mdp.is_terminal(s)) continue;
      ActionIndex best = 0;
      for (ActionIndex a = 1; a < 3; ++a) {
        if (sol.q(s, a) > sol.q(s, best)) best = a;
      }
      sets[s] = ActionSet::single(best);
    }
    EXPECT_LE(sup_distance(svp_policy_evaluation(mdp, sets), sol.q), 2e-9);
  }
}

TEST(PolicyEvaluation, Chain2FullSetTakesWorstAction) {
  const TabularMdp mdp = chain2_fixture();
  const QTable q = svp_policy_evaluation(mdp, {ActionSet::full(4), ActionSet::full(4)});
  EXPECT_NEAR(q.min_over(0, ActionSet::full(4)), 1.00, 1e-12);
}

TEST(PolicyEvaluation, MatchesRecursiveWorstCaseOnDags) {
  Rng rng(5);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const TabularMdp mdp = build_random_dag(7, 3, seed, 0.9);
    const auto sets = with_full_terminals(mdp, testing::random_sets(7, 3, rng));
    const QTable q = svp_policy_evaluation(mdp, sets);
    const auto expected = testing::recursive_worst_case_q(mdp, sets);
    for (StateIndex s = 0; s < 7; ++s) {
      for (ActionIndex a = 0; a < 3; ++a) EXPECT_NEAR(q(s, a), expected[s][a], 1e-9);
    }
  }
}

TEST(PolicyEvaluation, TerminalValueIsExactlyZero) {
  const TabularMdp mdp = build_cyclic_chain(5, 0, 0.9);
  const auto sets = std::vector<ActionSet>(5, ActionSet::full(4));
  const ValueTable v = worst_case_values(mdp, sets, svp_policy_evaluation(mdp, sets));
  EXPECT_EQ(v[4], 0.0);
}

TEST(PolicyEvaluation, RejectsEmptySets) {
  const TabularMdp mdp = chain2_fixture();
  EXPECT_THROW(svp_policy_evaluation(mdp, {ActionSet{}, ActionSet::full(4)}), InvalidArgument);
}

TEST(PolicyEvaluation, ContractionOnRandomDraws) {
  Rng rng(2024);
  for (std::uint64_t draw = 0; draw < 100; ++draw) {
    const double gamma = 0.5 + 0.49 * rng.uniform();
    const TabularMdp mdp = build_random_mdp(2 + rng.index(6), 1 + rng.index(4), draw, gamma);
    const auto sets = with_full_terminals(mdp, testing::random_sets(mdp.state_count(), mdp.action_count(), rng));
    const QTable q1 = testing::random_qtable(mdp.state_count(), mdp.action_count(), rng);
    const QTable q2 = testing::random_qtable(mdp.state_count(), mdp.action_count(), rng);
    const double lhs = sup_distance(worst_case_backup(mdp, sets, q1), worst_case_backup(mdp, sets, q2));
    EXPECT_LE(lhs, gamma * sup_distance(q1, q2) + 1e-12);
    EXPECT_LE(testing::sup_norm_difference(worst_case_backup(mdp, sets, q1),
                                           testing::naive_worst_case_operator(mdp, sets, q1)),
              1e-12);
  }
}

TEST(PolicyEvaluation, RemovingActionsNeverLowersQ) {
  Rng rng(77);
  for (std::uint64_t draw = 0; draw < 50; ++draw) {
    const TabularMdp mdp = build_random_mdp(5, 3, draw, 0.9);
    auto sets = with_full_terminals(mdp, testing::random_sets(5, 3, rng));
    const QTable before = svp_policy_evaluation(mdp, sets);
    const StateIndex s = rng.index(4);
    if (sets[s].size() < 2) continue;
    sets[s].erase(sets[s].members()[rng.index(sets[s].size())]);
    const QTable after = svp_policy_evaluation(mdp, sets);
    for (std::size_t i = 0; i < before.data().size(); ++i) EXPECT_GE(after.data()[i], before.data()[i] - 1e-9);
  }
}

TEST(Dag, Classification) {
  const DagDecomposition chain = dag_decompose(build_chain(5, 0, 0.9));
  ASSERT_TRUE(chain.is_dag);
  EXPECT_EQ(chain.topological_order, (std::vector<StateIndex>{0, 1, 2, 3, 4}));
  EXPECT_FALSE(dag_decompose(build_cyclic_chain(5, 0, 0.9)).is_dag);
  EXPECT_FALSE(dag_decompose(build_appendix_c_mdp()).is_dag);
}

TEST(Dag, OrderRespectsEveryEdge) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const TabularMdp mdp = build_random_dag(9, 3, seed, 0.9);
    const DagDecomposition dag = dag_decompose(mdp);
    ASSERT_TRUE(dag.is_dag);
    std::vector<std::size_t> position(mdp.state_count());
    for (std::size_t i = 0; i < dag.topological_order.size(); ++i) position[dag.topological_order[i]] = i;
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (mdp.is_terminal(s)) continue;
      for (ActionIndex a = 0; a < 3; ++a) {
        for (const Transition& t : mdp.successors(s, a)) EXPECT_LT(position[s], position[t.next]);
      }
    }
  }
}

TEST(MonteCarlo, Chain2FullSet) {
  const TabularMdp mdp = chain2_fixture();
  EXPECT_NEAR(monte_carlo_worst_case(mdp, {ActionSet::full(4), ActionSet::full(4)}, 0, 10), 1.00, 1e-12);
}

TEST(MonteCarlo, OptimalSingletonGivesVStar) {
  const TabularMdp mdp = build_chain(5, 1, 0.9);
  const OptimalSolution sol = value_iteration(mdp);
  const auto sets = greedy_sets(mdp, sol.q);
  EXPECT_NEAR(monte_carlo_worst_case(mdp, sets, 0, 10), sol.v[0], 1e-9);
}

TEST(MonteCarlo, TwoStateCycleDecaysToZero) {
  const TabularMdp mdp = build_appendix_c_mdp();
  const double value =
      monte_carlo_worst_case(mdp, {ActionSet::single(1), ActionSet::full(2), ActionSet::full(2)}, 1, 500);
  EXPECT_LT(std::abs(value), 1e-20);
}

TEST(MonteCarlo, RejectsStochasticMdp) {
  const TabularMdp mdp = build_random_mdp(5, 2, 1, 0.9);
  ASSERT_FALSE(mdp.is_deterministic());
  EXPECT_THROW(monte_carlo_worst_case(mdp, std::vector<ActionSet>(5, ActionSet::full(2)), 0, 10), InvalidArgument);
}

TEST(MdpJson, RoundTripIsExact) {
  for (const TabularMdp& mdp : {build_random_mdp(6, 3, 9, 0.93), build_frozen_lake("4x4", 0.9), chain2_fixture()}) {
    const std::string text = mdp_to_json(mdp).dump();
    EXPECT_TRUE(mdp_from_json(Json::parse(text)) == mdp);
  }
}

TEST(MdpJson, MalformedDocumentIsRejected) {
  EXPECT_THROW(mdp_from_json(Json::parse(R"({"states": ["a"], "gamma": 0.9})")), InvalidArgument);
}

}  // namespace
}  // namespace svp
