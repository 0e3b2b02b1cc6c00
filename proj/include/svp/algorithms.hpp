#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "svp/convergence.hpp"
#include "svp/dag.hpp"
#include "svp/errors.hpp"
#include "svp/mdp.hpp"
#include "svp/near_greedy.hpp"
#include "svp/policy.hpp"
#include "svp/solvers.hpp"

namespace svp {

namespace detail {

inline void check_zeta(double zeta) {
  if (!(zeta >= 0.0 && zeta <= 1.0)) throw InvalidArgument("zeta must lie in [0, 1]");
}

inline void check_values(const TabularMdp& mdp, const ValueTable& v, const char* name) {
  if (v.size() != mdp.state_count()) {
    throw InvalidArgument(std::string(name) + " has the wrong number of states");
  }
}

inline void check_nonnegative_v_star(const TabularMdp& mdp, const ValueTable& v_star) {
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (v_star[s] < 0.0) {
      throw InvalidArgument("V* is negative at state " + std::to_string(s) + " (" +
                            mdp.state_label(s) + ")");
    }
  }
}

inline void check_nonnegative_rewards(const TabularMdp& mdp) {
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    for (ActionIndex a = 0; a < mdp.action_count(); ++a) {
      if (mdp.reward(s, a) < 0.0) {
        throw InvalidArgument("negative reward at state " + std::to_string(s) + " (" +
                              mdp.state_label(s) + ")");
      }
    }
  }
}

inline SetValuedPolicy make_policy(const TabularMdp& mdp, std::vector<ActionSet> sets, double zeta,
                                   std::string source) {
  SetValuedPolicy policy;
  policy.sets = with_full_terminals(mdp, std::move(sets));
  policy.zeta = zeta;
  policy.gamma = mdp.gamma();
  policy.source = std::move(source);
  return policy;
}

}  // namespace detail

/// Threshold sets {a : Q(s,a) >= (1-zeta) V*(s)} computed from the given Q,
/// with the greedy fallback for empty sets and negative V*.
inline std::vector<ActionSet> near_greedy_sets(const TabularMdp& mdp, const QTable& q,
                                               const ValueTable& v_star, double zeta,
                                               double slack) {
  const CandidateRule rule = CandidateRule::near_greedy(v_star, zeta, slack);
  const ActionSet all = ActionSet::full(mdp.action_count());
  std::vector<ActionSet> sets(mdp.state_count(), all);
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (!mdp.is_terminal(s)) sets[s] = rule.candidates(q, s, all);
  }
  return sets;
}

/// Conservative construction: Q̌(s,a) = r(s,a) + gamma (1-zeta) E[V*(s')] and
/// pi(s) = {a : Q̌(s,a) >= (1-zeta) V*(s)}. The greedy action always passes.
inline SetValuedPolicy conservative_svp(const TabularMdp& mdp, const ValueTable& v_star, double zeta,
                                        double slack = kExactSlack) {
  detail::check_zeta(zeta);
  detail::check_values(mdp, v_star, "V*");
  detail::check_nonnegative_v_star(mdp, v_star);
  detail::check_nonnegative_rewards(mdp);
  std::vector<ActionSet> sets(mdp.state_count());
  QTable lower(mdp.state_count(), mdp.action_count());
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex a = 0; a < mdp.action_count(); ++a) {
      lower(s, a) = mdp.reward(s, a) + mdp.gamma() * (1.0 - zeta) * mdp.expected_next(s, a, v_star);
      if (lower(s, a) >= (1.0 - zeta) * v_star[s] - slack) sets[s].insert(a);
    }
    if (sets[s].empty()) {
      throw std::logic_error("conservative set empty at state " + std::to_string(s) +
                             "; V* is inconsistent with the MDP");
    }
  }
  SetValuedPolicy policy = detail::make_policy(mdp, std::move(sets), zeta, "conservative");
  policy.q = std::move(lower);
  policy.v_star = v_star;
  return policy;
}

/// The unique near-greedy fixed point on a DAG with non-negative rewards,
/// built state by state in reverse topological order: once every successor's
/// worst-case value is known, Q^pi(s, .) is exact and pi(s) is its threshold
/// set. The returned policy carries Q^pi.
inline SetValuedPolicy near_greedy_construct_dag(const TabularMdp& mdp, const ValueTable& v_star,
                                                 double zeta, double slack = kExactSlack) {
  detail::check_zeta(zeta);
  detail::check_values(mdp, v_star, "V*");
  detail::check_nonnegative_rewards(mdp);
  const DagDecomposition dag = dag_decompose(mdp);
  if (!dag.is_dag) throw InvalidArgument("near-greedy construction requires a DAG MDP");

  const ActionSet all = ActionSet::full(mdp.action_count());
  const CandidateRule rule = CandidateRule::near_greedy(v_star, zeta, slack);
  std::vector<ActionSet> sets(mdp.state_count(), all);
  QTable q(mdp.state_count(), mdp.action_count());
  ValueTable v(mdp.state_count(), 0.0);
  for (auto it = dag.topological_order.rbegin(); it != dag.topological_order.rend(); ++it) {
    const StateIndex s = *it;
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex a = 0; a < mdp.action_count(); ++a) q(s, a) = backup(mdp, s, a, v);
    sets[s] = rule.candidates(q, s, all);
    v[s] = q.min_over(s, sets[s]);
  }
  SetValuedPolicy policy = detail::make_policy(mdp, std::move(sets), zeta, "near-greedy-dag");
  policy.q = std::move(q);
  policy.v_star = v_star;
  return policy;
}

struct NearGreedyViOptions {
  std::size_t max_sweeps = 10'000;
  std::size_t window = 50;
  double tolerance = 1e-10;
  double slack = kExactSlack;
};

struct LearnedSvp {
  SetValuedPolicy policy;
  QTable q;
  ConvergenceTrace trace;

  bool converged() const { return trace.converged; }
};

/// Value iteration with the near-greedy set as the improvement step. Each
/// synchronous sweep derives pi_k(s') from the previous sweep's Q and backs up
/// min_{a in pi_k(s')} Q(s', a) (greedy max on the fallback branch).
/// Non-convergence is an outcome recorded in the trace, not an error.
inline LearnedSvp near_greedy_vi(const TabularMdp& mdp, const ValueTable& v_star, double zeta,
                                 const NearGreedyViOptions& options = {}) {
  detail::check_zeta(zeta);
  detail::check_values(mdp, v_star, "V*");
  const CandidateRule rule = CandidateRule::near_greedy(v_star, zeta, options.slack);
  const ActionSet all = ActionSet::full(mdp.action_count());

  LearnedSvp out;
  out.trace.window = options.window;
  out.trace.q_tolerance = options.tolerance;
  QTable q(mdp.state_count(), mdp.action_count());
  std::vector<ActionSet> sets = near_greedy_sets(mdp, q, v_star, zeta, options.slack);
  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    ValueTable targets(mdp.state_count(), 0.0);
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (!mdp.is_terminal(s)) targets[s] = q.min_over(s, sets[s]);
    }
    QTable next(mdp.state_count(), mdp.action_count());
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (mdp.is_terminal(s)) continue;
      for (ActionIndex a = 0; a < mdp.action_count(); ++a) next(s, a) = backup(mdp, s, a, targets);
    }
    const double delta = sup_distance(next, q);
    q = std::move(next);
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (!mdp.is_terminal(s)) sets[s] = rule.candidates(q, s, all);
    }
    out.trace.record(sets, delta);
    if (out.trace.update_converged()) break;
  }
  out.policy = detail::make_policy(mdp, sets, zeta, "near-greedy-vi");
  out.policy.q = q;
  out.policy.v_star = v_star;
  out.q = std::move(q);
  return out;
}

/// Baseline: thresholds Q* directly, assuming an optimal future.
inline SetValuedPolicy qstar_based_svp(const TabularMdp& mdp, const QTable& q_star, double zeta,
                                       double slack = kExactSlack) {
  detail::check_zeta(zeta);
  const ValueTable v_star = max_values(mdp, q_star);
  SetValuedPolicy policy =
      detail::make_policy(mdp, near_greedy_sets(mdp, q_star, v_star, zeta, slack), zeta, "qstar-based");
  policy.q = q_star;
  policy.v_star = v_star;
  return policy;
}

/// Model-based counterpart of the Q-based TD baseline: value iteration whose
/// improvement step thresholds against the learner's own max_a Q(s,a).
inline LearnedSvp q_based_vi(const TabularMdp& mdp, double zeta, const NearGreedyViOptions& options = {}) {
  detail::check_zeta(zeta);
  const CandidateRule rule = CandidateRule::q_based(zeta, options.slack);
  const ActionSet all = ActionSet::full(mdp.action_count());
  LearnedSvp out;
  out.trace.window = options.window;
  out.trace.q_tolerance = options.tolerance;
  QTable q(mdp.state_count(), mdp.action_count());
  std::vector<ActionSet> sets(mdp.state_count(), all);
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (!mdp.is_terminal(s)) sets[s] = rule.candidates(q, s, all);
  }
  for (std::size_t sweep = 0; sweep < options.max_sweeps; ++sweep) {
    ValueTable targets(mdp.state_count(), 0.0);
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (!mdp.is_terminal(s)) targets[s] = q.min_over(s, sets[s]);
    }
    QTable next(mdp.state_count(), mdp.action_count());
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (mdp.is_terminal(s)) continue;
      for (ActionIndex a = 0; a < mdp.action_count(); ++a) next(s, a) = backup(mdp, s, a, targets);
    }
    const double delta = sup_distance(next, q);
    q = std::move(next);
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (!mdp.is_terminal(s)) sets[s] = rule.candidates(q, s, all);
    }
    out.trace.record(sets, delta);
    if (out.trace.update_converged()) break;
  }
  out.policy = detail::make_policy(mdp, sets, zeta, "q-based-vi");
  out.policy.q = q;
  out.q = std::move(q);
  return out;
}

/// Additive baseline: pi(s) = {a : Q*(s,a) >= V*(s) - eps} with
/// eps = zeta (1 - gamma) ||V*||_inf, which bounds V* - V^pi by zeta ||V*||_inf.
inline SetValuedPolicy additive_svp(const TabularMdp& mdp, const QTable& q_star,
                                    const ValueTable& v_star, double zeta,
                                    double slack = kExactSlack) {
  detail::check_zeta(zeta);
  detail::check_values(mdp, v_star, "V*");
  if (!(mdp.gamma() < 1.0)) throw InvalidArgument("additive construction requires gamma < 1");
  double norm = 0.0;
  for (double v : v_star) norm = std::max(norm, std::abs(v));
  const double epsilon = zeta * (1.0 - mdp.gamma()) * norm;
  const ActionSet all = ActionSet::full(mdp.action_count());
  std::vector<ActionSet> sets(mdp.state_count(), all);
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (mdp.is_terminal(s)) continue;
    sets[s] = threshold_set(q_star, s, all, v_star[s] - epsilon, slack);
    if (sets[s].empty()) sets[s] = argmax_set(q_star, s, all, slack);
  }
  SetValuedPolicy policy = detail::make_policy(mdp, std::move(sets), zeta, "additive");
  policy.q = q_star;
  policy.v_star = v_star;
  return policy;
}

// ---------------------------------------------------------------------------
// Fixed-point checks
// ---------------------------------------------------------------------------

struct MembershipViolation {
  enum class Kind {
    kExcludedButQualifies,  ///< a not in pi(s) although Q^pi(s,a) meets the threshold
    kIncludedButFails,      ///< a in pi(s) although Q^pi(s,a) misses the threshold
  };
  StateIndex state;
  ActionIndex action;
  Kind kind;
  double q;
  double threshold;
};

struct FixedPointCheck {
  bool is_fixed_point = false;
  QTable q;
  std::vector<MembershipViolation> violations;
};

/// Evaluates pi and checks near-greedy membership both ways at every
/// non-terminal state: included actions must meet (1-zeta)V*(s) and excluded
/// actions must miss it.
inline FixedPointCheck check_near_greedy_fixed_point(const TabularMdp& mdp, const ValueTable& v_star,
                                                     double zeta, const std::vector<ActionSet>& sets,
                                                     double slack = kExactSlack) {
  FixedPointCheck out;
  out.q = svp_policy_evaluation(mdp, sets);
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (mdp.is_terminal(s)) continue;
    const double threshold = (1.0 - zeta) * v_star[s];
    for (ActionIndex a = 0; a < mdp.action_count(); ++a) {
      const bool meets = out.q(s, a) >= threshold - slack;
      const bool included = sets[s].contains(a);
      if (meets && !included) {
        out.violations.push_back(
            {s, a, MembershipViolation::Kind::kExcludedButQualifies, out.q(s, a), threshold});
      } else if (!meets && included) {
        out.violations.push_back(
            {s, a, MembershipViolation::Kind::kIncludedButFails, out.q(s, a), threshold});
      }
    }
  }
  out.is_fixed_point = out.violations.empty();
  return out;
}

/// Calls `visit(sets)` for every SVP that keeps terminal states at the full
/// set, in mixed-radix order over the non-terminal states.
template <class Visitor>
void for_each_candidate_svp(const TabularMdp& mdp, Visitor&& visit) {
  std::vector<StateIndex> decision;
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (!mdp.is_terminal(s)) decision.push_back(s);
  }
  const std::uint64_t top = ActionSet::full(mdp.action_count()).bits();
  std::vector<ActionSet> sets(mdp.state_count(), ActionSet::full(mdp.action_count()));
  for (StateIndex s : decision) sets[s] = ActionSet(1);
  for (;;) {
    visit(static_cast<const std::vector<ActionSet>&>(sets));
    std::size_t i = 0;
    for (; i < decision.size(); ++i) {
      const StateIndex s = decision[i];
      if (sets[s].bits() < top) {
        sets[s] = ActionSet(sets[s].bits() + 1);
        break;
      }
      sets[s] = ActionSet(1);
    }
    if (i == decision.size()) return;
  }
}

/// Number of candidate SVPs with terminals fixed: (2^|A| - 1)^(#non-terminal).
/// Saturates at `cap + 1`.
inline std::uint64_t candidate_count(const TabularMdp& mdp, std::uint64_t cap) {
  const std::uint64_t per_state = ActionSet::full(mdp.action_count()).bits();
  std::uint64_t total = 1;
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (mdp.is_terminal(s)) continue;
    if (total > (cap + 1) / per_state) return cap + 1;
    total *= per_state;
  }
  return total;
}

struct NonexistenceReport {
  std::uint64_t candidates_examined = 0;
  std::vector<std::vector<ActionSet>> fixed_points;
};

inline constexpr std::uint64_t kDefaultEnumerationGuard = 2'000'000;

/// Enumerates every SVP and reports the exact near-greedy fixed points.
inline NonexistenceReport nonexistence_check(const TabularMdp& mdp, const ValueTable& v_star,
                                             double zeta,
                                             std::uint64_t guard = kDefaultEnumerationGuard,
                                             double slack = kExactSlack) {
  detail::check_zeta(zeta);
  detail::check_values(mdp, v_star, "V*");
  if (candidate_count(mdp, guard) > guard) {
    throw GuardExceeded("SVP enumeration exceeds the guard of " + std::to_string(guard));
  }
  NonexistenceReport report;
  for_each_candidate_svp(mdp, [&](const std::vector<ActionSet>& sets) {
    ++report.candidates_examined;
    if (check_near_greedy_fixed_point(mdp, v_star, zeta, sets, slack).is_fixed_point) {
      report.fixed_points.push_back(sets);
    }
  });
  return report;
}

// ---------------------------------------------------------------------------
// Exponential action space
// ---------------------------------------------------------------------------

struct ExtendedActionReport {
  ValueTable extended_v;
  ValueTable v_star;
  double max_abs_difference = 0.0;
  /// Per state: some singleton subset attains the extended maximum.
  std::vector<bool> singleton_attains_max;
  bool all_singleton = false;
};

inline constexpr std::size_t kExtendedActionGuard = 5;

/// Worst-case value iteration over the extended action space 2^A \ {∅}, where
/// a subset is worth the minimum of its members' backups. Shows the optimum
/// is V* and is always reached by a singleton.
inline ExtendedActionReport exponential_action_space_check(const TabularMdp& mdp,
                                                           double tolerance = 1e-12,
                                                           std::size_t max_sweeps = 1'000'000) {
  if (mdp.action_count() > kExtendedActionGuard) {
    throw GuardExceeded("extended action space limited to " + std::to_string(kExtendedActionGuard) +
                        " base actions");
  }
  const std::uint64_t subsets = ActionSet::full(mdp.action_count()).bits();
  ValueTable v(mdp.state_count(), 0.0);
  bool done = false;
  for (std::size_t sweep = 0; sweep < max_sweeps && !done; ++sweep) {
    ValueTable next(mdp.state_count(), 0.0);
    double delta = 0.0;
    for (StateIndex s = 0; s < mdp.state_count(); ++s) {
      if (mdp.is_terminal(s)) continue;
      double best = -INFINITY;
      for (std::uint64_t bits = 1; bits <= subsets; ++bits) {
        double worst = INFINITY;
        for (ActionIndex a : ActionSet(bits).members()) worst = std::min(worst, backup(mdp, s, a, v));
        best = std::max(best, worst);
      }
      next[s] = best;
      delta = std::max(delta, std::abs(best - v[s]));
    }
    v = std::move(next);
    done = delta <= tolerance;
  }
  if (!done) throw ConvergenceError("extended-action value iteration did not converge");

  ExtendedActionReport report;
  report.v_star = value_iteration(mdp, {tolerance, max_sweeps}).v;
  report.singleton_attains_max.assign(mdp.state_count(), true);
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    report.max_abs_difference = std::max(report.max_abs_difference, std::abs(v[s] - report.v_star[s]));
    if (mdp.is_terminal(s)) continue;
    double best_any = -INFINITY;
    double best_single = -INFINITY;
    for (std::uint64_t bits = 1; bits <= subsets; ++bits) {
      const ActionSet set(bits);
      double worst = INFINITY;
      for (ActionIndex a : set.members()) worst = std::min(worst, backup(mdp, s, a, v));
      best_any = std::max(best_any, worst);
      if (set.size() == 1) best_single = std::max(best_single, worst);
    }
    report.singleton_attains_max[s] = best_single >= best_any;
  }
  report.extended_v = std::move(v);
  report.all_singleton = std::all_of(report.singleton_attains_max.begin(),
                                     report.singleton_attains_max.end(), [](bool b) { return b; });
  return report;
}

}  // namespace svp
