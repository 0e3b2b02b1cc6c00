#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "svp/errors.hpp"
#include "svp/mdp.hpp"
#include "svp/policy.hpp"

namespace svp {

struct SolveOptions {
  double tolerance = 1e-10;
  std::size_t max_sweeps = 1'000'000;
};

struct OptimalSolution {
  QTable q;
  ValueTable v;
  std::size_t sweeps = 0;
};

inline ValueTable max_values(const TabularMdp& mdp, const QTable& q) {
  ValueTable v(mdp.state_count(), 0.0);
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    v[s] = mdp.is_terminal(s) ? 0.0 : q.max_over(s);
  }
  return v;
}

/// V(s) = min over pi(s) of Q(s, .); zero at terminals.
inline ValueTable worst_case_values(const TabularMdp& mdp, const std::vector<ActionSet>& sets,
                                    const QTable& q) {
  ValueTable v(mdp.state_count(), 0.0);
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    v[s] = mdp.is_terminal(s) ? 0.0 : q.min_over(s, sets[s]);
  }
  return v;
}

/// One-step lookahead r(s,a) + gamma * E[values(s')].
inline double backup(const TabularMdp& mdp, StateIndex s, ActionIndex a,
                     const ValueTable& values) {
  return mdp.reward(s, a) + mdp.gamma() * mdp.expected_next(s, a, values);
}

/// Q* by synchronous value iteration. The returned table satisfies
/// ||T*Q - Q||_inf <= tolerance.
inline OptimalSolution value_iteration(const TabularMdp& mdp, const SolveOptions& options = {}) {
  if (!(options.tolerance > 0.0)) throw InvalidArgument("tolerance must be positive");
  QTable q(mdp.state_count(), mdp.action_count());
  ValueTable v(mdp.state_count(), 0.0);
  for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (mdp.is_terminal(s)) continue;
      for (ActionIndex a = 0; a < mdp.action_count(); ++a) {
        const double updated = backup(mdp, s, a, v);
        delta = std::max(delta, std::abs(updated - q(s, a)));
        q(s, a) = updated;
      }
    }
    v = max_values(mdp, q);
    if (delta <= options.tolerance) return {std::move(q), std::move(v), sweep};
  }
  throw ConvergenceError("value iteration did not reach tolerance within " +
                         std::to_string(options.max_sweeps) + " sweeps");
}

/// One application of the worst-case evaluation operator:
/// (TQ)(s,a) = r(s,a) + gamma * E[min_{a' in pi(s')} Q(s',a')].
inline QTable worst_case_backup(const TabularMdp& mdp, const std::vector<ActionSet>& sets,
                                const QTable& q) {
  const ValueTable v = worst_case_values(mdp, sets, q);
  QTable out(mdp.state_count(), mdp.action_count());
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex a = 0; a < mdp.action_count(); ++a) out(s, a) = backup(mdp, s, a, v);
  }
  return out;
}

/// Iterative policy evaluation for a set-valued policy: the fixed point of
/// the worst-case operator, reached from Q = 0 until the sweep delta drops
/// below the tolerance.
inline QTable svp_policy_evaluation(const TabularMdp& mdp, const std::vector<ActionSet>& sets,
                                    const SolveOptions& options = {}) {
  validate_policy(mdp, sets);
  QTable q(mdp.state_count(), mdp.action_count());
  for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    QTable next = worst_case_backup(mdp, sets, q);
    const double delta = sup_distance(next, q);
    q = std::move(next);
    if (delta < options.tolerance) return q;
  }
  throw ConvergenceError("set-valued policy evaluation did not converge within " +
                         std::to_string(options.max_sweeps) + " sweeps");
}

inline QTable svp_policy_evaluation(const TabularMdp& mdp, const SetValuedPolicy& policy,
                                    const SolveOptions& options = {}) {
  return svp_policy_evaluation(mdp, policy.sets, options);
}

/// Expected-value evaluation of a stochastic policy probs[s][a].
inline QTable stochastic_policy_evaluation(const TabularMdp& mdp,
                                           const std::vector<std::vector<double>>& probs,
                                           const SolveOptions& options = {}) {
  QTable q(mdp.state_count(), mdp.action_count());
  ValueTable v(mdp.state_count(), 0.0);
  for (std::size_t sweep = 1; sweep <= options.max_sweeps; ++sweep) {
    double delta = 0.0;
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (mdp.is_terminal(s)) continue;
      for (ActionIndex a = 0; a < mdp.action_count(); ++a) {
        const double updated = backup(mdp, s, a, v);
        delta = std::max(delta, std::abs(updated - q(s, a)));
        q(s, a) = updated;
      }
    }
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      double total = 0.0;
      if (!mdp.is_terminal(s)) {
        for (ActionIndex a = 0; a < mdp.action_count(); ++a) total += probs[s][a] * q(s, a);
      }
      v[s] = total;
    }
    if (delta < options.tolerance) return q;
  }
  throw ConvergenceError("stochastic policy evaluation did not converge");
}

/// Discounted return of the rollout from `state` that always takes the
/// lowest-Q^pi action inside pi(s). Deterministic MDPs only; the rollout stops
/// at a terminal or after `horizon` steps.
inline double monte_carlo_worst_case(const TabularMdp& mdp, const std::vector<ActionSet>& sets,
                                     StateIndex state, std::size_t horizon,
                                     const SolveOptions& options = {}) {
  if (!mdp.is_deterministic()) {
    throw InvalidArgument("worst-case rollout requires deterministic transitions");
  }
  const QTable q = svp_policy_evaluation(mdp, sets, options);
  double total = 0.0;
  double discount = 1.0;
  for (std::size_t step = 0; step < horizon && !mdp.is_terminal(state); ++step) {
    ActionIndex chosen = 0;
    double worst = std::numeric_limits<double>::infinity();
    for (ActionIndex a : sets[state].members()) {
      if (q(state, a) < worst) {
        worst = q(state, a);
        chosen = a;
      }
    }
    total += discount * mdp.reward(state, chosen);
    discount *= mdp.gamma();
    state = mdp.successors(state, chosen).front().next;
  }
  return total;
}

}  // namespace svp
