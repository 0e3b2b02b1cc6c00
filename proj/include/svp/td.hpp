#pragma once

#include <cmath>
#include <concepts>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "svp/convergence.hpp"
#include "svp/errors.hpp"
#include "svp/mdp.hpp"
#include "svp/near_greedy.hpp"
#include "svp/policy.hpp"
#include "svp/rng.hpp"

namespace svp {

/// Per-update step size. Harmonic decays with the (s,a) visit count,
/// exponential decays by `factor` every `every` episodes.
struct StepSchedule {
  enum class Kind { kHarmonic, kExponential, kConstant };

  Kind kind = Kind::kHarmonic;
  double alpha0 = 0.5;
  double decay = 1000.0;
  double factor = 0.95;
  std::size_t every = 1000;

  static StepSchedule harmonic(double alpha0 = 0.5, double decay = 1000.0) {
    return {Kind::kHarmonic, alpha0, decay, 0.95, 1000};
  }
  static StepSchedule exponential(double alpha0, double factor, std::size_t every = 1000) {
    return {Kind::kExponential, alpha0, 1000.0, factor, every};
  }
  static StepSchedule constant(double alpha) { return {Kind::kConstant, alpha, 1000.0, 0.95, 1000}; }

  void validate() const {
    if (!(alpha0 > 0.0 && alpha0 <= 1.0)) throw InvalidArgument("step size must lie in (0, 1]");
    if (kind == Kind::kHarmonic && !(decay > 0.0)) throw InvalidArgument("harmonic decay must be positive");
    if (kind == Kind::kExponential) {
      if (!(factor > 0.0 && factor <= 1.0)) throw InvalidArgument("decay factor must lie in (0, 1]");
      if (every == 0) throw InvalidArgument("decay interval must be positive");
    }
  }

  /// `visits` counts earlier updates of the same (s,a).
  double rate(std::uint64_t visits, std::size_t episode) const {
    switch (kind) {
      case Kind::kHarmonic: return alpha0 / (1.0 + static_cast<double>(visits) / decay);
      case Kind::kExponential:
        return alpha0 * std::pow(factor, static_cast<double>(episode / every));
      case Kind::kConstant: return alpha0;
    }
    return alpha0;
  }
};

struct LearnConfig {
  double zeta = 0.05;
  StepSchedule schedule;
  double epsilon = 0.1;
  std::size_t episodes = 200'000;
  std::uint64_t seed = 0;
  /// Slack for the final set read off the learned Q.
  double membership_slack = 0.0;
  std::size_t max_steps = 1000;
  std::size_t checkpoint_every = 1000;
  std::size_t window = 50;
  double q_tolerance = 1e-3;

  void validate() const {
    if (!(zeta >= 0.0 && zeta <= 1.0)) throw InvalidArgument("zeta must lie in [0, 1]");
    if (!(epsilon >= 0.0 && epsilon <= 1.0)) throw InvalidArgument("epsilon must lie in [0, 1]");
    if (episodes == 0) throw InvalidArgument("episodes must be positive");
    if (max_steps == 0) throw InvalidArgument("max_steps must be positive");
    if (checkpoint_every == 0) throw InvalidArgument("checkpoint interval must be positive");
    if (membership_slack < 0.0) throw InvalidArgument("membership slack must be non-negative");
    schedule.validate();
  }
};

struct StepOutcome {
  double reward = 0.0;
  StateIndex next = 0;
  bool done = false;
};

/// Anything that can start episodes and sample transitions.
template <class Env>
concept EpisodicEnvironment = requires(const Env& env, Rng& rng, StateIndex s, ActionIndex a) {
  { env.state_count() } -> std::convertible_to<std::size_t>;
  { env.action_count() } -> std::convertible_to<std::size_t>;
  { env.is_terminal(s) } -> std::convertible_to<bool>;
  { env.reset(rng) } -> std::convertible_to<StateIndex>;
  { env.step(s, a, rng) } -> std::convertible_to<StepOutcome>;
};

/// Samples a TabularMdp. With `entry_reward` set, the sampled reward is the
/// reward for entering s' instead of the expected r(s,a).
class MdpSimulator {
 public:
  explicit MdpSimulator(const TabularMdp& mdp, std::optional<ValueTable> entry_reward = std::nullopt)
      : mdp_(&mdp), entry_reward_(std::move(entry_reward)) {
    if (entry_reward_ && entry_reward_->size() != mdp.state_count()) {
      throw InvalidArgument("entry reward table has the wrong number of states");
    }
  }

  const TabularMdp& mdp() const { return *mdp_; }
  std::size_t state_count() const { return mdp_->state_count(); }
  std::size_t action_count() const { return mdp_->action_count(); }
  bool is_terminal(StateIndex s) const { return mdp_->is_terminal(s); }

  StateIndex reset(Rng& rng) const { return rng.categorical(mdp_->start_distribution()); }

  StepOutcome step(StateIndex s, ActionIndex a, Rng& rng) const {
    const auto successors = mdp_->successors(s, a);
    StateIndex next = successors.back().next;
    double u = rng.uniform();
    for (const Transition& t : successors) {
      if (u < t.probability) {
        next = t.next;
        break;
      }
      u -= t.probability;
    }
    const double reward = entry_reward_ ? (*entry_reward_)[next] : mdp_->reward(s, a);
    return {reward, next, mdp_->is_terminal(next)};
  }

 private:
  const TabularMdp* mdp_;
  std::optional<ValueTable> entry_reward_;
};

struct TdResult {
  QTable q;
  SetValuedPolicy policy;
  ConvergenceTrace trace;

  bool converged() const { return trace.converged; }
};

/// One TD(0) update toward r + gamma * target(s'), where the target is the
/// worst member of the rule's candidate set at s' (0 when s' is terminal).
inline void td_update(QTable& q, StateIndex s, ActionIndex a, double reward, StateIndex next, bool done,
                      double gamma, double alpha, const CandidateRule& rule, ActionSet allowed_next) {
  const double bootstrap = done ? 0.0 : rule.target(q, next, allowed_next);
  q(s, a) += alpha * (reward + gamma * bootstrap - q(s, a));
}

/// Per-state candidate sets read off `q`; terminals keep the full set.
template <EpisodicEnvironment Env>
std::vector<ActionSet> derive_sets(const Env& env, const QTable& q, const CandidateRule& rule,
                                   const std::vector<ActionSet>& allowed) {
  std::vector<ActionSet> sets(env.state_count(), ActionSet::full(env.action_count()));
  for (StateIndex s = 0; s < env.state_count(); ++s) {
    if (!env.is_terminal(s)) sets[s] = rule.candidates(q, s, allowed[s]);
  }
  return sets;
}

namespace detail {

inline ActionIndex epsilon_greedy(const QTable& q, StateIndex s, ActionSet allowed, double epsilon, Rng& rng) {
  const std::vector<ActionIndex> members = allowed.members();
  if (rng.uniform() < epsilon) return members[rng.index(members.size())];
  const std::vector<ActionIndex> best = argmax_set(q, s, allowed, 0.0).members();
  return best.size() == 1 ? best.front() : best[rng.index(best.size())];
}

}  // namespace detail

/// Online tabular TD control with Q = 0 initialisation and epsilon-greedy
/// behaviour restricted to `allowed` (all actions when empty). The rule
/// decides the bootstrap target; greedy gives Q-learning.
template <EpisodicEnvironment Env>
TdResult run_td(const Env& env, double gamma, const CandidateRule& rule, const LearnConfig& config,
                std::vector<ActionSet> allowed = {}, std::string source = "td") {
  config.validate();
  const std::size_t S = env.state_count();
  const std::size_t A = env.action_count();
  if (allowed.empty()) allowed.assign(S, ActionSet::full(A));
  if (allowed.size() != S) throw InvalidArgument("action mask has the wrong number of states");

  CandidateRule final_rule = rule;
  final_rule.slack = config.membership_slack;

  Rng rng(mix_seed(config.seed, 0x7d));
  QTable q(S, A);
  QTable last_checkpoint(S, A);
  std::vector<std::uint64_t> visits(S * A, 0);
  TdResult out{q, {}, {}};
  out.trace.window = config.window;
  out.trace.q_tolerance = config.q_tolerance;

  for (std::size_t episode = 0; episode < config.episodes; ++episode) {
    StateIndex s = env.reset(rng);
    for (std::size_t t = 0; t < config.max_steps && !env.is_terminal(s); ++t) {
      const ActionIndex a = detail::epsilon_greedy(q, s, allowed[s], config.epsilon, rng);
      const StepOutcome step = env.step(s, a, rng);
      std::uint64_t& n = visits[s * A + a];
      td_update(q, s, a, step.reward, step.next, step.done, gamma, config.schedule.rate(n, episode), rule,
                allowed[step.next]);
      ++n;
      s = step.next;
      if (step.done) break;
    }
    if ((episode + 1) % config.checkpoint_every == 0) {
      out.trace.record(derive_sets(env, q, final_rule, allowed), sup_distance(q, last_checkpoint));
      last_checkpoint = q;
    }
  }
  out.trace.update_converged();
  out.policy.sets = derive_sets(env, q, final_rule, allowed);
  out.policy.zeta = config.zeta;
  out.policy.gamma = gamma;
  out.policy.source = std::move(source);
  out.policy.q = q;
  if (rule.v_star) out.policy.v_star = *rule.v_star;
  out.q = std::move(q);
  return out;
}

inline TdResult q_learning(const TabularMdp& mdp, const LearnConfig& config) {
  return run_td(MdpSimulator(mdp), mdp.gamma(), CandidateRule::greedy(), config, {}, "q-learning");
}

/// Near-greedy TD: bootstraps from the worst action of
/// {a' : Q(s',a') >= (1-zeta) V*(s')}, greedy when that set is empty or
/// V*(s') < 0.
template <EpisodicEnvironment Env>
TdResult near_greedy_td(const Env& env, double gamma, const ValueTable& v_star, const LearnConfig& config,
                        std::vector<ActionSet> allowed = {}) {
  if (v_star.size() != env.state_count()) throw InvalidArgument("V* has the wrong number of states");
  return run_td(env, gamma, CandidateRule::near_greedy(v_star, config.zeta), config, std::move(allowed),
                "near-greedy-td");
}

inline TdResult near_greedy_td(const TabularMdp& mdp, const ValueTable& v_star, const LearnConfig& config) {
  return near_greedy_td(MdpSimulator(mdp), mdp.gamma(), v_star, config);
}

/// Baseline that thresholds against the learner's own max_a Q(s,a).
template <EpisodicEnvironment Env>
TdResult q_based_td(const Env& env, double gamma, const LearnConfig& config, std::vector<ActionSet> allowed = {}) {
  return run_td(env, gamma, CandidateRule::q_based(config.zeta), config, std::move(allowed), "q-based-td");
}

inline TdResult q_based_td(const TabularMdp& mdp, const LearnConfig& config) {
  return q_based_td(MdpSimulator(mdp), mdp.gamma(), config);
}

}  // namespace svp
