#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "svp/algorithms.hpp"
#include "svp/environments.hpp"
#include "svp/errors.hpp"
#include "svp/io.hpp"
#include "svp/mdp.hpp"
#include "svp/metrics.hpp"
#include "svp/near_greedy.hpp"
#include "svp/policy.hpp"
#include "svp/rng.hpp"
#include "svp/solvers.hpp"
#include "svp/td.hpp"

namespace svp {

// ---------------------------------------------------------------------------
// Trajectories
// ---------------------------------------------------------------------------

struct TrajectoryStep {
  StateIndex s = 0;
  ActionIndex a = 0;
  double r = 0.0;
  StateIndex sp = 0;
  bool done = false;

  friend bool operator==(const TrajectoryStep&, const TrajectoryStep&) = default;
};

struct Episode {
  std::string id;
  std::vector<TrajectoryStep> steps;

  friend bool operator==(const Episode&, const Episode&) = default;
};

enum class Split { kTrain, kValidation, kTest };

inline std::string_view to_string(Split split) {
  switch (split) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "val";
    case Split::kTest: return "test";
  }
  return "unknown";
}

struct SplitFractions {
  double train = 0.7;
  double validation = 0.1;

  void validate() const {
    if (!(train >= 0.0 && validation >= 0.0 && train + validation <= 1.0)) {
      throw InvalidArgument("split fractions must be non-negative and sum to at most 1");
    }
  }
};

using EpisodeRefs = std::vector<const Episode*>;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

class TrajectoryDataset {
 public:
  TrajectoryDataset(std::size_t state_count, std::size_t action_count, std::vector<Episode> episodes,
                    const SplitFractions& fractions = {})
      : state_count_(state_count), action_count_(action_count), episodes_(std::move(episodes)) {
    if (state_count_ == 0 || action_count_ == 0) throw InvalidArgument("dataset needs states and actions");
    if (episodes_.empty()) throw InvalidArgument("no episodes");
    fractions.validate();
    std::set<std::string> ids;
    for (const Episode& episode : episodes_) {
      if (!ids.insert(episode.id).second) throw InvalidArgument("duplicate episode id '" + episode.id + "'");
      validate_episode(episode);
    }
    assign_splits(fractions);
    counts_.assign(state_count_ * action_count_, 0);
    for (std::size_t i = 0; i < episodes_.size(); ++i) {
      if (split_[i] != Split::kTrain) continue;
      for (const TrajectoryStep& step : episodes_[i].steps) ++counts_[step.s * action_count_ + step.a];
    }
  }

  std::size_t state_count() const { return state_count_; }
  std::size_t action_count() const { return action_count_; }
  const std::vector<Episode>& episodes() const { return episodes_; }
  Split split_of(std::size_t episode) const { return split_[episode]; }

  /// Visit count of (s,a) in the training split.
  std::uint64_t count(StateIndex s, ActionIndex a) const { return counts_[s * action_count_ + a]; }

  EpisodeRefs episodes_in(Split split) const {
    EpisodeRefs out;
    for (std::size_t i = 0; i < episodes_.size(); ++i) {
      if (split_[i] == split) out.push_back(&episodes_[i]);
    }
    return out;
  }

  std::size_t size_of(Split split) const {
    return static_cast<std::size_t>(std::count(split_.begin(), split_.end(), split));
  }

 private:
  void validate_episode(const Episode& episode) const {
    if (episode.steps.empty()) throw InvalidArgument("episode '" + episode.id + "' has no steps");
    for (std::size_t t = 0; t < episode.steps.size(); ++t) {
      const TrajectoryStep& step = episode.steps[t];
      if (step.s >= state_count_ || step.sp >= state_count_) {
        throw InvalidArgument("episode '" + episode.id + "' step " + std::to_string(t) +
                              ": state index out of range");
      }
      if (step.a >= action_count_) {
        throw InvalidArgument("episode '" + episode.id + "' step " + std::to_string(t) +
                              ": action index out of range");
      }
      if (!std::isfinite(step.r)) {
        throw InvalidArgument("episode '" + episode.id + "' step " + std::to_string(t) + ": reward is not finite");
      }
      const bool last = t + 1 == episode.steps.size();
      if (step.done != last) {
        throw InvalidArgument("episode '" + episode.id + "' must end with its only done step");
      }
      if (!last && episode.steps[t + 1].s != step.sp) {
        throw InvalidArgument("episode '" + episode.id + "' step " + std::to_string(t + 1) +
                              " does not start where the previous step ended");
      }
    }
  }

  void assign_splits(const SplitFractions& fractions) {
    std::vector<std::size_t> order(episodes_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      const std::uint64_t ha = fnv1a(episodes_[a].id);
      const std::uint64_t hb = fnv1a(episodes_[b].id);
      return ha != hb ? ha < hb : episodes_[a].id < episodes_[b].id;
    });
    const double n = static_cast<double>(episodes_.size());
    const auto n_train = static_cast<std::size_t>(std::lround(fractions.train * n));
    const auto n_val = std::min(episodes_.size() - n_train,
                                static_cast<std::size_t>(std::lround(fractions.validation * n)));
    split_.assign(episodes_.size(), Split::kTest);
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      if (rank < n_train) {
        split_[order[rank]] = Split::kTrain;
      } else if (rank < n_train + n_val) {
        split_[order[rank]] = Split::kValidation;
      }
    }
  }

  std::size_t state_count_;
  std::size_t action_count_;
  std::vector<Episode> episodes_;
  std::vector<Split> split_;
  std::vector<std::uint64_t> counts_;
};

/// Reads one JSON episode per line; blank lines are skipped. Errors carry the
/// 1-based line number.
inline TrajectoryDataset ingest_trajectories(std::istream& in, std::size_t state_count, std::size_t action_count,
                                             const SplitFractions& fractions = {}) {
  std::vector<Episode> episodes;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "line " + std::to_string(line_number) + ": ";
    try {
      const Json doc = Json::parse(line);
      Episode episode;
      episode.id = doc.at("id").get<std::string>();
      for (const Json& step : doc.at("steps")) {
        episode.steps.push_back({step.at("s").get<std::size_t>(), step.at("a").get<std::size_t>(),
                                 step.at("r").get<double>(), step.at("sp").get<std::size_t>(),
                                 step.at("done").get<bool>()});
      }
      if (episode.steps.empty()) throw InvalidArgument("episode has no steps");
      for (const TrajectoryStep& step : episode.steps) {
        if (step.s >= state_count || step.sp >= state_count) throw InvalidArgument("state index out of range");
        if (step.a >= action_count) throw InvalidArgument("action index out of range");
      }
      episodes.push_back(std::move(episode));
    } catch (const nlohmann::json::exception& e) {
      throw InvalidArgument(where + "malformed episode: " + e.what());
    } catch (const InvalidArgument& e) {
      throw InvalidArgument(where + e.what());
    }
  }
  if (episodes.empty()) throw InvalidArgument("no episodes");
  return TrajectoryDataset(state_count, action_count, std::move(episodes), fractions);
}

inline TrajectoryDataset ingest_trajectories_text(const std::string& text, std::size_t state_count,
                                                  std::size_t action_count, const SplitFractions& fractions = {}) {
  std::istringstream in(text);
  return ingest_trajectories(in, state_count, action_count, fractions);
}

inline std::string episodes_to_jsonl(const std::vector<Episode>& episodes) {
  std::string out;
  for (const Episode& episode : episodes) {
    Json steps = Json::array();
    for (const TrajectoryStep& step : episode.steps) {
      steps.push_back({{"s", step.s}, {"a", step.a}, {"r", step.r}, {"sp", step.sp}, {"done", step.done}});
    }
    out += Json{{"id", episode.id}, {"steps", std::move(steps)}}.dump();
    out += '\n';
  }
  return out;
}

// ---------------------------------------------------------------------------
// Behaviour data generation
// ---------------------------------------------------------------------------

using StochasticPolicy = std::vector<std::vector<double>>;

/// Rolls out `behavior` in the simulator. Episodes that hit `max_steps`
/// without terminating raise an error.
inline std::vector<Episode> generate_episodes(const MdpSimulator& sim, const StochasticPolicy& behavior,
                                              std::size_t count, std::uint64_t seed,
                                              std::size_t max_steps = 100'000) {
  if (behavior.size() != sim.state_count()) throw InvalidArgument("behaviour policy has the wrong number of states");
  Rng rng(mix_seed(seed, 0xe9));
  std::vector<Episode> episodes;
  episodes.reserve(count);
  char id[32];
  for (std::size_t i = 0; i < count; ++i) {
    std::snprintf(id, sizeof id, "ep%07zu", i);
    Episode episode{id, {}};
    StateIndex s = sim.reset(rng);
    while (true) {
      if (episode.steps.size() == max_steps) throw std::runtime_error("behaviour episode did not terminate");
      const ActionIndex a = rng.categorical(behavior[s]);
      const StepOutcome out = sim.step(s, a, rng);
      episode.steps.push_back({s, a, out.reward, out.next, out.done});
      if (out.done) break;
      s = out.next;
    }
    episodes.push_back(std::move(episode));
  }
  return episodes;
}

// ---------------------------------------------------------------------------
// Action mask
// ---------------------------------------------------------------------------

/// allowed(s,a) iff the training count reaches `min_count`. Where nothing
/// qualifies, the most frequent actions are kept (all actions at unseen
/// states).
inline std::vector<ActionSet> build_action_mask(const TrajectoryDataset& data, std::uint64_t min_count = 5) {
  if (min_count == 0) throw InvalidArgument("min_count must be at least 1");
  std::vector<ActionSet> mask(data.state_count());
  for (StateIndex s = 0; s < data.state_count(); ++s) {
    std::uint64_t most = 0;
    for (ActionIndex a = 0; a < data.action_count(); ++a) {
      if (data.count(s, a) >= min_count) mask[s].insert(a);
      most = std::max(most, data.count(s, a));
    }
    if (!mask[s].empty()) continue;
    for (ActionIndex a = 0; a < data.action_count(); ++a) {
      if (data.count(s, a) == most) mask[s].insert(a);
    }
  }
  return mask;
}

// ---------------------------------------------------------------------------
// Offline training
// ---------------------------------------------------------------------------

/// TD control by replaying training episodes drawn with replacement. With
/// one-hot state features the linear Q-function is a table, and each
/// squared-TD-error gradient step is the tabular update. `rule` picks the
/// bootstrap target among the masked actions at s'.
inline TdResult offline_td(const TrajectoryDataset& data, const std::vector<ActionSet>& mask, double gamma,
                           const CandidateRule& rule, const LearnConfig& config, std::string source) {
  config.validate();
  const std::size_t S = data.state_count();
  const std::size_t A = data.action_count();
  if (mask.size() != S) throw InvalidArgument("action mask has the wrong number of states");
  const EpisodeRefs train = data.episodes_in(Split::kTrain);
  if (train.empty()) throw InvalidArgument("training split is empty");

  std::vector<bool> terminal(S, false);
  for (const Episode* episode : train) {
    const TrajectoryStep& last = episode->steps.back();
    terminal[last.sp] = true;
  }

  CandidateRule final_rule = rule;
  final_rule.slack = config.membership_slack;
  const auto sets_of = [&](const QTable& q) {
    std::vector<ActionSet> sets(S, ActionSet::full(A));
    for (StateIndex s = 0; s < S; ++s) {
      if (!terminal[s]) sets[s] = final_rule.candidates(q, s, mask[s]);
    }
    return sets;
  };

  Rng rng(mix_seed(config.seed, 0x0ff));
  QTable q(S, A);
  QTable last_checkpoint(S, A);
  std::vector<std::uint64_t> visits(S * A, 0);
  TdResult out{q, {}, {}};
  out.trace.window = config.window;
  out.trace.q_tolerance = config.q_tolerance;
  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    const Episode& replay = *train[rng.index(train.size())];
    for (const TrajectoryStep& step : replay.steps) {
      std::uint64_t& n = visits[step.s * A + step.a];
      td_update(q, step.s, step.a, step.r, step.sp, step.done, gamma, config.schedule.rate(n, episode), rule,
                mask[step.sp]);
      ++n;
    }
    if ((episode + 1) % config.checkpoint_every == 0) {
      out.trace.record(sets_of(q), sup_distance(q, last_checkpoint));
      last_checkpoint = q;
    }
  }
  out.trace.update_converged();
  out.policy.sets = sets_of(q);
  out.policy.zeta = config.zeta;
  out.policy.gamma = gamma;
  out.policy.source = std::move(source);
  out.policy.q = q;
  if (rule.v_star) out.policy.v_star = *rule.v_star;
  out.q = std::move(q);
  return out;
}

inline TdResult offline_q_learning(const TrajectoryDataset& data, const std::vector<ActionSet>& mask, double gamma,
                                   const LearnConfig& config) {
  return offline_td(data, mask, gamma, CandidateRule::greedy(), config, "offline-q-learning");
}

/// Near-greedy offline training; V*(s') < 0 takes the greedy target.
inline TdResult offline_near_greedy_train(const TrajectoryDataset& data, const std::vector<ActionSet>& mask,
                                          const ValueTable& v_star, double gamma, const LearnConfig& config) {
  if (v_star.size() != data.state_count()) throw InvalidArgument("V* has the wrong number of states");
  return offline_td(data, mask, gamma, CandidateRule::near_greedy(v_star, config.zeta), config,
                    "offline-near-greedy");
}

// ---------------------------------------------------------------------------
// Softened and behaviour policies
// ---------------------------------------------------------------------------

/// `recommended_mass` split uniformly inside pi(s), the rest uniformly over
/// the other actions; uniform over all actions when pi(s) is everything.
inline StochasticPolicy soften(const std::vector<ActionSet>& sets, std::size_t action_count,
                               double recommended_mass = 0.99) {
  if (!(recommended_mass > 0.0 && recommended_mass <= 1.0)) {
    throw InvalidArgument("recommended mass must lie in (0, 1]");
  }
  StochasticPolicy policy(sets.size(), std::vector<double>(action_count, 0.0));
  for (StateIndex s = 0; s < sets.size(); ++s) {
    const std::size_t k = sets[s].size();
    if (k == 0) throw InvalidArgument("empty action set at state " + std::to_string(s));
    if (k == action_count) {
      std::fill(policy[s].begin(), policy[s].end(), 1.0 / static_cast<double>(action_count));
      continue;
    }
    for (ActionIndex a = 0; a < action_count; ++a) {
      policy[s][a] = sets[s].contains(a) ? recommended_mass / static_cast<double>(k)
                                         : (1.0 - recommended_mass) / static_cast<double>(action_count - k);
    }
  }
  return policy;
}

/// Training-split frequencies with additive smoothing `lambda` over the
/// allowed actions (all actions when `mask` is empty). Unseen states get the
/// uniform distribution over their allowed actions.
inline StochasticPolicy estimate_behavior_policy(const TrajectoryDataset& data, double lambda = 0.01,
                                                 const std::vector<ActionSet>& mask = {}) {
  if (lambda < 0.0) throw InvalidArgument("smoothing must be non-negative");
  if (data.size_of(Split::kTrain) == 0) throw InvalidArgument("training split is empty");
  const std::size_t A = data.action_count();
  StochasticPolicy policy(data.state_count(), std::vector<double>(A, 0.0));
  for (StateIndex s = 0; s < data.state_count(); ++s) {
    const ActionSet allowed = mask.empty() ? ActionSet::full(A) : mask[s];
    double total = 0.0;
    for (ActionIndex a : allowed.members()) total += static_cast<double>(data.count(s, a)) + lambda;
    for (ActionIndex a : allowed.members()) {
      policy[s][a] = total > 0.0 ? (static_cast<double>(data.count(s, a)) + lambda) / total
                                 : 1.0 / static_cast<double>(allowed.size());
    }
  }
  return policy;
}

// ---------------------------------------------------------------------------
// Model and estimators
// ---------------------------------------------------------------------------

/// Q of `policy` on the maximum-likelihood MDP of the training split. A
/// transition flagged done contributes no future value; unseen (s,a) pairs
/// are valued 0.
inline QTable empirical_policy_q(const TrajectoryDataset& data, const StochasticPolicy& policy, double gamma,
                                 double tolerance = 1e-10, std::size_t max_sweeps = 1'000'000) {
  const std::size_t S = data.state_count();
  const std::size_t A = data.action_count();
  std::vector<double> reward_sum(S * A, 0.0);
  std::vector<std::map<StateIndex, double>> next(S * A);
  for (const Episode* episode : data.episodes_in(Split::kTrain)) {
    for (const TrajectoryStep& step : episode->steps) {
      const std::size_t i = step.s * A + step.a;
      reward_sum[i] += step.r;
      if (!step.done) next[i][step.sp] += 1.0;
    }
  }
  QTable q(S, A);
  for (std::size_t sweep = 0; sweep < max_sweeps; ++sweep) {
    ValueTable v(S, 0.0);
    for (StateIndex s = 0; s < S; ++s) {
      for (ActionIndex a = 0; a < A; ++a) v[s] += policy[s][a] * q(s, a);
    }
    double delta = 0.0;
    for (StateIndex s = 0; s < S; ++s) {
      for (ActionIndex a = 0; a < A; ++a) {
        const auto n = static_cast<double>(data.count(s, a));
        if (n == 0.0) continue;
        double future = 0.0;
        for (const auto& [sp, c] : next[s * A + a]) future += c * v[sp];
        const double updated = (reward_sum[s * A + a] + gamma * future) / n;
        delta = std::max(delta, std::abs(updated - q(s, a)));
        q(s, a) = updated;
      }
    }
    if (delta <= tolerance) return q;
  }
  throw ConvergenceError("empirical model evaluation did not converge");
}

inline ValueTable policy_state_values(const QTable& q, const StochasticPolicy& policy) {
  ValueTable v(q.state_count(), 0.0);
  for (StateIndex s = 0; s < q.state_count(); ++s) {
    for (ActionIndex a = 0; a < q.action_count(); ++a) v[s] += policy[s][a] * q(s, a);
  }
  return v;
}

struct OpeInputs {
  const StochasticPolicy* target = nullptr;
  const StochasticPolicy* behavior = nullptr;
  const QTable* model_q = nullptr;
  double gamma = 1.0;
};

namespace detail {

inline double importance_ratio(const OpeInputs& in, const TrajectoryStep& step) {
  const double b = (*in.behavior)[step.s][step.a];
  if (!(b > 0.0)) {
    throw InvalidArgument("behaviour probability is zero for observed action " + std::to_string(step.a) +
                          " at state " + std::to_string(step.s));
  }
  return (*in.target)[step.s][step.a] / b;
}

inline double model_v(const OpeInputs& in, StateIndex s) {
  double v = 0.0;
  for (ActionIndex a = 0; a < in.model_q->action_count(); ++a) v += (*in.target)[s][a] * (*in.model_q)(s, a);
  return v;
}

}  // namespace detail

/// Doubly robust estimate, per episode by the backward recursion
/// V <- V̂(s_t) + rho_t (r_t + gamma V - Q̂(s_t, a_t)), averaged.
inline double ope_dr(const EpisodeRefs& episodes, const OpeInputs& in) {
  if (episodes.empty()) throw InvalidArgument("no episodes to evaluate");
  double total = 0.0;
  for (const Episode* episode : episodes) {
    double value = 0.0;
    for (auto it = episode->steps.rbegin(); it != episode->steps.rend(); ++it) {
      const double rho = detail::importance_ratio(in, *it);
      value = detail::model_v(in, it->s) + rho * (it->r + in.gamma * value - (*in.model_q)(it->s, it->a));
    }
    total += value;
  }
  return total / static_cast<double>(episodes.size());
}

/// Weighted doubly robust estimate with self-normalised cumulative ratios.
/// Finished episodes keep their last cumulative ratio and contribute nothing.
inline double ope_wdr(const EpisodeRefs& episodes, const OpeInputs& in) {
  if (episodes.empty()) throw InvalidArgument("no episodes to evaluate");
  const std::size_t n = episodes.size();
  std::size_t horizon = 0;
  for (const Episode* episode : episodes) horizon = std::max(horizon, episode->steps.size());
  std::vector<double> cumulative(n, 1.0);
  std::vector<double> previous_weight(n, 1.0 / static_cast<double>(n));
  double estimate = 0.0;
  double discount = 1.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    double normaliser = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (t < episodes[i]->steps.size()) cumulative[i] *= detail::importance_ratio(in, episodes[i]->steps[t]);
      normaliser += cumulative[i];
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double weight = normaliser > 0.0 ? cumulative[i] / normaliser : 0.0;
      if (t < episodes[i]->steps.size()) {
        const TrajectoryStep& step = episodes[i]->steps[t];
        estimate += discount * (weight * step.r - (weight * (*in.model_q)(step.s, step.a) -
                                                   previous_weight[i] * detail::model_v(in, step.s)));
      }
      previous_weight[i] = weight;
    }
    discount *= in.gamma;
  }
  return estimate;
}

/// Episodes whose every action has target probability above `floor`.
inline std::size_t effective_sample_count(const EpisodeRefs& episodes, const StochasticPolicy& target,
                                          double floor = 1e-6) {
  std::size_t count = 0;
  for (const Episode* episode : episodes) {
    const bool usable = std::all_of(episode->steps.begin(), episode->steps.end(),
                                    [&](const TrajectoryStep& step) { return target[step.s][step.a] > floor; });
    if (usable) ++count;
  }
  return count;
}

// ---------------------------------------------------------------------------
// Bootstrap
// ---------------------------------------------------------------------------

using Estimator = std::function<double(const EpisodeRefs&)>;

struct BootstrapResult {
  double estimate = 0.0;  ///< estimator on the full split
  double mean = 0.0;      ///< mean over resamples
  double stderr_ = 0.0;   ///< sample standard deviation over resamples
  std::size_t draws = 0;

  double ci_low() const { return estimate - 1.96 * stderr_; }
  double ci_high() const { return estimate + 1.96 * stderr_; }
  bool covers(double value) const { return value >= ci_low() && value <= ci_high(); }
};

/// Resamples episodes with replacement; draw i uses its own derived seed.
inline BootstrapResult bootstrap_ci(const Estimator& estimator, const EpisodeRefs& episodes, std::size_t draws,
                                    std::uint64_t seed) {
  if (episodes.empty()) throw InvalidArgument("cannot bootstrap an empty split");
  if (draws < 2) throw InvalidArgument("bootstrap needs at least 2 draws");
  BootstrapResult out;
  out.draws = draws;
  out.estimate = estimator(episodes);
  std::vector<double> values(draws);
  EpisodeRefs sample(episodes.size());
  for (std::size_t d = 0; d < draws; ++d) {
    Rng rng(mix_seed(seed, d));
    for (auto& ref : sample) ref = episodes[rng.index(episodes.size())];
    values[d] = estimator(sample);
  }
  double sum = 0.0;
  for (double v : values) sum += v;
  out.mean = sum / static_cast<double>(draws);
  double squares = 0.0;
  for (double v : values) squares += (v - out.mean) * (v - out.mean);
  out.stderr_ = std::sqrt(squares / static_cast<double>(draws - 1));
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline
// ---------------------------------------------------------------------------

struct OfflinePipelineConfig {
  double zeta = 0.05;
  std::size_t behavior_episodes = 30'000;
  std::size_t train_episodes = 200'000;
  StepSchedule schedule = StepSchedule::exponential(0.1, 0.98, 1000);
  std::uint64_t min_count = 5;
  double smoothing = 0.01;
  double recommended_mass = 0.99;
  std::size_t bootstrap_draws = 1000;
  std::uint64_t seed = 0;
};

struct OpeEstimate {
  std::string estimator;
  BootstrapResult bootstrap;
};

struct OfflinePipelineResult {
  SetValuedPolicy policy;
  QTable q_star_estimate;
  std::vector<ActionSet> mask;
  StochasticPolicy target;
  StochasticPolicy behavior;
  std::size_t test_episodes = 0;
  std::size_t effective_episodes = 0;
  std::vector<OpeEstimate> estimates;
};

struct OfflineSvp {
  std::vector<ActionSet> mask;
  /// Offline Q-learning estimate of Q*.
  QTable q_star;
  /// Masked maximum of q_star.
  ValueTable v_star;
  TdResult trained;
};

/// Mask, offline Q-learning for V*, then near-greedy offline training.
inline OfflineSvp train_offline_svp(const TrajectoryDataset& data, double gamma, const OfflinePipelineConfig& config) {
  OfflineSvp out;
  out.mask = build_action_mask(data, config.min_count);
  LearnConfig learn;
  learn.zeta = config.zeta;
  learn.schedule = config.schedule;
  learn.episodes = config.train_episodes;
  learn.seed = mix_seed(config.seed, 1);
  out.q_star = offline_q_learning(data, out.mask, gamma, learn).q;
  out.v_star.assign(data.state_count(), 0.0);
  for (StateIndex s = 0; s < data.state_count(); ++s) out.v_star[s] = out.q_star.max_over(s, out.mask[s]);
  learn.seed = mix_seed(config.seed, 2);
  out.trained = offline_near_greedy_train(data, out.mask, out.v_star, gamma, learn);
  return out;
}

/// Behaviour data from `sim`, offline SVP training, then DR and WDR of the
/// softened SVP on the test split.
inline OfflinePipelineResult run_offline_pipeline(const MdpSimulator& sim, const StochasticPolicy& behavior_truth,
                                                  const OfflinePipelineConfig& config) {
  const TabularMdp& mdp = sim.mdp();
  const TrajectoryDataset data(mdp.state_count(), mdp.action_count(),
                               generate_episodes(sim, behavior_truth, config.behavior_episodes, config.seed));
  OfflineSvp trained = train_offline_svp(data, mdp.gamma(), config);
  OfflinePipelineResult out;
  out.mask = std::move(trained.mask);
  out.policy = std::move(trained.trained.policy);
  out.policy.sets = with_full_terminals(mdp, out.policy.sets);
  out.q_star_estimate = std::move(trained.q_star);

  out.target = soften(out.policy.sets, mdp.action_count(), config.recommended_mass);
  out.behavior = estimate_behavior_policy(data, config.smoothing);
  const QTable model = empirical_policy_q(data, out.target, mdp.gamma());
  const EpisodeRefs test = data.episodes_in(Split::kTest);
  out.test_episodes = test.size();
  out.effective_episodes = effective_sample_count(test, out.target);
  const OpeInputs inputs{&out.target, &out.behavior, &model, mdp.gamma()};
  out.estimates.push_back({"DR", bootstrap_ci([&](const EpisodeRefs& e) { return ope_dr(e, inputs); }, test,
                                              config.bootstrap_draws, mix_seed(config.seed, 3))});
  out.estimates.push_back({"WDR", bootstrap_ci([&](const EpisodeRefs& e) { return ope_wdr(e, inputs); }, test,
                                               config.bootstrap_draws, mix_seed(config.seed, 4))});
  return out;
}

inline Json ope_report_to_json(const OfflinePipelineResult& result) {
  Json rows = Json::array();
  for (const OpeEstimate& e : result.estimates) {
    rows.push_back({{"estimator", e.estimator},
                    {"estimate", e.bootstrap.estimate},
                    {"mean", e.bootstrap.mean},
                    {"stderr", e.bootstrap.stderr_},
                    {"ci_low", e.bootstrap.ci_low()},
                    {"ci_high", e.bootstrap.ci_high()},
                    {"draws", e.bootstrap.draws},
                    {"test_episodes", result.test_episodes},
                    {"effective_episodes", result.effective_episodes}});
  }
  return Json{{"estimates", std::move(rows)}, {"policy", policy_to_json(result.policy)}};
}

// ---------------------------------------------------------------------------
// Synthetic sepsis-like study
// ---------------------------------------------------------------------------

/// Clinician-like behaviour: `mass` spread over the Q*-based zeta-set, the
/// rest over the other actions.
inline StochasticPolicy clinician_behavior(const TabularMdp& mdp, double zeta = 0.05, double mass = 0.8) {
  const OptimalSolution optimal = value_iteration(mdp);
  return soften(qstar_based_svp(mdp, optimal.q, zeta).sets, mdp.action_count(), mass);
}

/// Expected discounted return of a stochastic policy under the start
/// distribution.
inline double exact_policy_value(const TabularMdp& mdp, const StochasticPolicy& policy) {
  const ValueTable v = policy_state_values(stochastic_policy_evaluation(mdp, policy), policy);
  double total = 0.0;
  for (StateIndex s = 0; s < mdp.state_count(); ++s) total += mdp.start_distribution()[s] * v[s];
  return total;
}

struct SepsisStudy {
  OfflinePipelineResult pipeline;
  ValueTable v_star;
  /// Exact worst-case ratio of the learned SVP over states with V* > 0.
  std::optional<double> worst_ratio;
  /// Exact value of the softened SVP on the generating MDP.
  double softened_value = 0.0;
};

inline SepsisStudy run_sepsis_study(const SepsisLikeParams& params, const OfflinePipelineConfig& config) {
  const SepsisLikeEnv env = build_sepsis_like(params);
  const MdpSimulator sim(env.mdp, env.entry_reward);
  SepsisStudy study{run_offline_pipeline(sim, clinician_behavior(env.mdp), config), {}, std::nullopt, 0.0};
  study.v_star = value_iteration(env.mdp).v;
  study.worst_ratio = compute_metrics(env.mdp, study.pipeline.policy.sets, study.v_star).worst_ratio;
  study.softened_value = exact_policy_value(env.mdp, study.pipeline.target);
  return study;
}

inline Json sepsis_study_to_json(const SepsisStudy& study) {
  Json doc = ope_report_to_json(study.pipeline);
  doc["exact_worst_ratio"] = study.worst_ratio ? Json(*study.worst_ratio) : Json(nullptr);
  doc["exact_softened_value"] = study.softened_value;
  for (Json& row : doc["estimates"]) {
    row["covers_exact"] = row["ci_low"].get<double>() <= study.softened_value &&
                          study.softened_value <= row["ci_high"].get<double>();
  }
  return doc;
}

}  // namespace svp
