#include <gtest/gtest.h>

#include <numeric>

#include "oracles.hpp"

namespace svp {
namespace {

Episode one_step(const std::string& id, StateIndex s, ActionIndex a, double r = 0.0) {
  return {id, {{s, a, r, 2, true}}};
}

/// Episodes at state 0 with the given per-action counts, all in the training split.
TrajectoryDataset counts_dataset(const std::vector<std::size_t>& counts) {
  std::vector<Episode> episodes;
  for (ActionIndex a = 0; a < counts.size(); ++a) {
    for (std::size_t i = 0; i < counts[a]; ++i) {
      episodes.push_back(one_step("a" + std::to_string(a) + "_" + std::to_string(i), 0, a));
    }
  }
  return TrajectoryDataset(3, counts.size(), std::move(episodes), SplitFractions{1.0, 0.0});
}

std::vector<bool> allowed(const ActionSet& set, std::size_t actions) {
  std::vector<bool> out;
  for (ActionIndex a = 0; a < actions; ++a) out.push_back(set.contains(a));
  return out;
}

StochasticPolicy uniform_policy(std::size_t states, std::size_t actions) {
  return StochasticPolicy(states, std::vector<double>(actions, 1.0 / static_cast<double>(actions)));
}

TEST(Ingest, EmptyStream) {
  try {
    ingest_trajectories_text("\n\n", 3, 2);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("no episodes"), std::string::npos);
  }
}

TEST(Ingest, DefaultSplitOfTenEpisodes) {
  std::vector<Episode> episodes;
  for (int i = 0; i < 10; ++i) episodes.push_back(one_step("episode-" + std::to_string(i), 0, 0));
  const TrajectoryDataset data = ingest_trajectories_text(episodes_to_jsonl(episodes), 3, 2);
  EXPECT_EQ(data.size_of(Split::kTrain), 7u);
  EXPECT_EQ(data.size_of(Split::kValidation), 1u);
  EXPECT_EQ(data.size_of(Split::kTest), 2u);
  EXPECT_EQ(data.episodes(), episodes);
}

TEST(Ingest, SplitDependsOnIdsNotOrder) {
  std::vector<Episode> episodes;
  for (int i = 0; i < 20; ++i) episodes.push_back(one_step("id" + std::to_string(i), 0, 0));
  const TrajectoryDataset forward(3, 2, episodes);
  std::reverse(episodes.begin(), episodes.end());
  const TrajectoryDataset backward(3, 2, episodes);
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(forward.split_of(i), backward.split_of(19 - i));
}

TEST(Ingest, Rejections) {
  EXPECT_THROW(TrajectoryDataset(3, 2, {one_step("x", 0, 0), one_step("x", 1, 0)}), InvalidArgument);
  const std::string good = episodes_to_jsonl({one_step("a", 0, 0)});
  try {
    ingest_trajectories_text(good + "{\"id\": \"b\", \"steps\": [{\"s\": 0}]}\n", 3, 2);
    FAIL();
  } catch (const InvalidArgument& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos) << e.what();
  }
  EXPECT_THROW(ingest_trajectories_text(good + "not json\n", 3, 2), InvalidArgument);
  EXPECT_THROW(ingest_trajectories_text(episodes_to_jsonl({one_step("a", 0, 5)}), 3, 2), InvalidArgument);
  EXPECT_THROW(ingest_trajectories_text(episodes_to_jsonl({one_step("a", 7, 0)}), 3, 2), InvalidArgument);
}

TEST(Mask, Examples) {
  EXPECT_EQ(allowed(build_action_mask(counts_dataset({7, 3, 0}), 5)[0], 3), (std::vector<bool>{true, false, false}));
  EXPECT_EQ(allowed(build_action_mask(counts_dataset({2, 1, 0}), 5)[0], 3), (std::vector<bool>{true, false, false}));
  EXPECT_EQ(allowed(build_action_mask(counts_dataset({2, 1, 0}), 1)[0], 3), (std::vector<bool>{true, true, false}));
  EXPECT_EQ(build_action_mask(counts_dataset({2, 1, 0}), 5)[1], ActionSet::full(3));
  EXPECT_THROW(build_action_mask(counts_dataset({1}), 0), InvalidArgument);
}

TEST(Soften, Examples) {
  const std::vector<ActionSet> sets = {ActionSet::single(0), ActionSet::full(4), ActionSet(0b0011)};
  const StochasticPolicy p = soften(sets, 4);
  EXPECT_NEAR(p[0][0], 0.99, 1e-12);
  for (ActionIndex a = 1; a < 4; ++a) EXPECT_NEAR(p[0][a], 0.01 / 3.0, 1e-12);
  for (ActionIndex a = 0; a < 4; ++a) EXPECT_NEAR(p[1][a], 0.25, 1e-12);
  const StochasticPolicy hard = soften(sets, 4, 1.0);
  EXPECT_EQ(hard[2], (std::vector<double>{0.5, 0.5, 0.0, 0.0}));
  EXPECT_THROW(soften(sets, 4, 0.0), InvalidArgument);
}

TEST(Soften, RowsSumToOne) {
  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const auto sets = testing::random_sets(6, 5, rng);
    for (double mass : {0.5, 0.99, 1.0}) {
      for (const auto& row : soften(sets, 5, mass)) {
        EXPECT_NEAR(std::accumulate(row.begin(), row.end(), 0.0), 1.0, 1e-9);
      }
    }
  }
}

TEST(Behavior, Examples) {
  const StochasticPolicy exact = estimate_behavior_policy(counts_dataset({8, 2, 0, 0}), 0.0);
  EXPECT_EQ(exact[0], (std::vector<double>{0.8, 0.2, 0.0, 0.0}));
  for (double p : exact[1]) EXPECT_EQ(p, 0.25);
  const StochasticPolicy smoothed = estimate_behavior_policy(counts_dataset({0, 10}), 0.01);
  EXPECT_NEAR(smoothed[0][0], 0.01 / 10.02, 1e-15);
  EXPECT_NEAR(smoothed[0][1], 10.01 / 10.02, 1e-15);
  const StochasticPolicy masked =
      estimate_behavior_policy(counts_dataset({8, 2, 0}), 0.0, {ActionSet(0b011), ActionSet(0b110), ActionSet(1)});
  EXPECT_EQ(masked[1], (std::vector<double>{0.0, 0.5, 0.5}));
}

TEST(OfflineTraining, AllZeroRewardsGiveZeroWeights) {
  const TabularMdp mdp = build_chain(4, 0, 0.9);
  const MdpSimulator sim(mdp, ValueTable(mdp.state_count(), 0.0));
  const TrajectoryDataset data(4, 4, generate_episodes(sim, uniform_policy(4, 4), 200, 1));
  LearnConfig config;
  config.episodes = 2000;
  const auto mask = build_action_mask(data);
  const TdResult q_learning = offline_q_learning(data, mask, 0.9, config);
  const TdResult near_greedy = offline_near_greedy_train(data, mask, ValueTable(4, 0.0), 0.9, config);
  for (double w : q_learning.q.data()) EXPECT_EQ(w, 0.0);
  for (double w : near_greedy.q.data()) EXPECT_EQ(w, 0.0);
}

TEST(OfflineTraining, MatchesOnlineNearGreedyWithFullCoverage) {
  const TabularMdp mdp = build_chain(5, 0, 0.9);
  const OptimalSolution sol = value_iteration(mdp);
  const MdpSimulator sim(mdp);
  const TrajectoryDataset data(5, 4, generate_episodes(sim, uniform_policy(5, 4), 20'000, 3), SplitFractions{1.0, 0.0});
  LearnConfig config;
  config.zeta = 0.05;
  config.seed = 9;
  const std::vector<ActionSet> mask(5, ActionSet::full(4));
  const TdResult offline = offline_near_greedy_train(data, mask, sol.v, mdp.gamma(), config);
  const TdResult online = near_greedy_td(mdp, sol.v, config);
  EXPECT_LE(sup_distance(offline.q, online.q), 0.05);
  EXPECT_EQ(with_full_terminals(mdp, offline.policy.sets), near_greedy_construct_dag(mdp, sol.v, 0.05).sets);
}

TEST(OfflineTraining, ZetaZeroRecoversGreedyPolicy) {
  const TabularMdp mdp = build_chain(5, 1, 0.9);
  const OptimalSolution sol = value_iteration(mdp);
  const TrajectoryDataset data(5, 4, generate_episodes(MdpSimulator(mdp), uniform_policy(5, 4), 20'000, 4),
                               SplitFractions{1.0, 0.0});
  LearnConfig config;
  config.zeta = 0.0;
  config.seed = 2;
  const TdResult learned = offline_q_learning(data, build_action_mask(data), mdp.gamma(), config);
  const auto greedy = greedy_sets(mdp, sol.q);
  for (StateIndex s = 0; s < 4; ++s) EXPECT_EQ(learned.policy.sets[s], greedy[s]);
}

/// One decision state; action a pays rewards[a] and terminates.
TabularMdp bandit(const std::vector<double>& rewards) {
  MdpDraft draft(2, rewards.size(), 0.9);
  for (ActionIndex a = 0; a < rewards.size(); ++a) {
    draft.add_transition(0, a, 1, 1.0);
    draft.set_reward(0, a, rewards[a]);
  }
  draft.set_terminal(1);
  draft.set_start(0, 1.0);
  return draft.build();
}

TEST(Ope, OnPolicyGivesEmpiricalMeanReturn) {
  const TabularMdp mdp = build_chain(4, 2, 0.9);
  const StochasticPolicy behavior = uniform_policy(4, 4);
  const TrajectoryDataset data(4, 4, generate_episodes(MdpSimulator(mdp), behavior, 500, 5), SplitFractions{1.0, 0.0});
  const QTable model = empirical_policy_q(data, behavior, 0.9);
  const OpeInputs in{&behavior, &behavior, &model, 0.9};
  const EpisodeRefs episodes = data.episodes_in(Split::kTrain);
  double mean = 0.0;
  for (const Episode* e : episodes) {
    double discount = 1.0;
    for (const TrajectoryStep& step : e->steps) {
      mean += discount * step.r;
      discount *= 0.9;
    }
  }
  mean /= static_cast<double>(episodes.size());
  EXPECT_NEAR(ope_dr(episodes, in), mean, 0.01);
  EXPECT_NEAR(ope_wdr(episodes, in), mean, 0.01);
}

TEST(Ope, PerfectModelGivesTrueValue) {
  const TabularMdp mdp = build_random_dag(8, 3, 4, 0.9);
  const StochasticPolicy behavior = uniform_policy(8, 3);
  const StochasticPolicy target = soften(greedy_sets(mdp, value_iteration(mdp).q), 3, 0.9);
  const QTable model = stochastic_policy_evaluation(mdp, target);
  const double truth = exact_policy_value(mdp, target);
  const TrajectoryDataset data(8, 3, generate_episodes(MdpSimulator(mdp), behavior, 4000, 6), SplitFractions{1.0, 0.0});
  const OpeInputs in{&target, &behavior, &model, 0.9};
  EXPECT_NEAR(ope_dr(data.episodes_in(Split::kTrain), in), truth, 0.02);
  EXPECT_NEAR(ope_wdr(data.episodes_in(Split::kTrain), in), truth, 0.02);
}

TEST(Ope, OneStepClosedForm) {
  // Rewards 1 and 3; behaviour 0.5/0.5; target 0.25/0.75; a zero model.
  const StochasticPolicy behavior = {{0.5, 0.5}, {0.5, 0.5}, {0.5, 0.5}};
  const StochasticPolicy target = {{0.25, 0.75}, {0.5, 0.5}, {0.5, 0.5}};
  const QTable model(3, 2);
  const std::vector<Episode> episodes = {one_step("a", 0, 0, 1.0), one_step("b", 0, 1, 3.0)};
  const EpisodeRefs refs = {&episodes[0], &episodes[1]};
  const OpeInputs in{&target, &behavior, &model, 0.9};
  // DR: mean of 0.5 * 1 and 1.5 * 3.
  EXPECT_NEAR(ope_dr(refs, in), (0.5 * 1.0 + 1.5 * 3.0) / 2.0, 1e-12);
  // WDR: weights normalised to 0.25 and 0.75.
  EXPECT_NEAR(ope_wdr(refs, in), 0.25 * 1.0 + 0.75 * 3.0, 1e-12);
  EXPECT_NEAR(0.25 * 1.0 + 0.75 * 3.0, exact_policy_value(bandit({1.0, 3.0}), {{0.25, 0.75}, {0.5, 0.5}}), 1e-12);
}

TEST(Ope, ZeroBehaviourProbabilityIsAnError) {
  const StochasticPolicy behavior = {{1.0, 0.0}, {0.5, 0.5}, {0.5, 0.5}};
  const StochasticPolicy target = uniform_policy(3, 2);
  const QTable model(3, 2);
  const std::vector<Episode> episodes = {one_step("a", 0, 1, 1.0)};
  const OpeInputs in{&target, &behavior, &model, 0.9};
  EXPECT_THROW(ope_dr({&episodes[0]}, in), InvalidArgument);
  EXPECT_THROW(ope_wdr({&episodes[0]}, in), InvalidArgument);
}

TEST(Ope, DrAndWdrAgreeOnPolicy) {
  const TabularMdp mdp = build_frozen_lake("4x4", 0.9);
  const StochasticPolicy behavior = soften(greedy_sets(mdp, value_iteration(mdp).q), 4, 0.97);
  const TrajectoryDataset data(16, 4, generate_episodes(MdpSimulator(mdp), behavior, 3000, 8), SplitFractions{1.0, 0.0});
  const StochasticPolicy target = soften(greedy_sets(mdp, value_iteration(mdp).q), 4, 0.96);
  const QTable model = empirical_policy_q(data, target, 0.9);
  const OpeInputs in{&target, &behavior, &model, 0.9};
  const EpisodeRefs refs = data.episodes_in(Split::kTrain);
  EXPECT_NEAR(ope_dr(refs, in), ope_wdr(refs, in), 0.02);
}

TEST(Bootstrap, ConstantEstimatorAndDeterminism) {
  std::vector<Episode> episodes;
  for (int i = 0; i < 30; ++i) episodes.push_back(one_step("e" + std::to_string(i), 0, i % 2, i));
  EpisodeRefs refs;
  for (const Episode& e : episodes) refs.push_back(&e);
  const BootstrapResult constant = bootstrap_ci([](const EpisodeRefs&) { return 4.0; }, refs, 100, 1);
  EXPECT_EQ(constant.stderr_, 0.0);
  EXPECT_EQ(constant.mean, 4.0);
  const Estimator mean_reward = [](const EpisodeRefs& e) {
    double total = 0.0;
    for (const Episode* episode : e) total += episode->steps[0].r;
    return total / static_cast<double>(e.size());
  };
  const BootstrapResult a = bootstrap_ci(mean_reward, refs, 200, 7);
  const BootstrapResult b = bootstrap_ci(mean_reward, refs, 200, 7);
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.stderr_, b.stderr_);
  EXPECT_GT(a.stderr_, 0.0);
  EXPECT_THROW(bootstrap_ci(mean_reward, {}, 100, 1), InvalidArgument);
  EXPECT_THROW(bootstrap_ci(mean_reward, refs, 1, 1), InvalidArgument);
}

TEST(Bootstrap, DrIntervalCoversTruth) {
  const TabularMdp mdp = build_random_dag(6, 3, 11, 0.9);
  const StochasticPolicy behavior = uniform_policy(6, 3);
  const StochasticPolicy target = soften(greedy_sets(mdp, value_iteration(mdp).q), 3, 0.8);
  const double truth = exact_policy_value(mdp, target);
  int covered = 0;
  for (std::uint64_t trial = 0; trial < 50; ++trial) {
    const TrajectoryDataset data(6, 3, generate_episodes(MdpSimulator(mdp), behavior, 300, 100 + trial),
                                 SplitFractions{1.0, 0.0});
    const QTable model = empirical_policy_q(data, target, 0.9);
    const OpeInputs in{&target, &behavior, &model, 0.9};
    const BootstrapResult ci = bootstrap_ci([&](const EpisodeRefs& e) { return ope_dr(e, in); },
                                            data.episodes_in(Split::kTrain), 200, trial);
    if (ci.covers(truth)) ++covered;
  }
  EXPECT_GE(covered, 45);
}

}  // namespace
}  // namespace svp
