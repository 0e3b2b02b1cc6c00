#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "svp/action_set.hpp"
#include "svp/mdp.hpp"

namespace svp {

/// Membership slack for sets derived from exact solvers.
inline constexpr double kExactSlack = 1e-9;

/// Actions whose value is within `slack` of the row maximum, restricted to
/// `allowed`.
inline ActionSet argmax_set(const QTable& q, StateIndex s, ActionSet allowed, double slack) {
  double best = -INFINITY;
  for (ActionIndex a : allowed.members()) best = std::max(best, q(s, a));
  ActionSet out;
  for (ActionIndex a : allowed.members()) {
    if (q(s, a) >= best - slack) out.insert(a);
  }
  return out;
}

inline ActionSet threshold_set(const QTable& q, StateIndex s, ActionSet allowed, double threshold,
                               double slack) {
  ActionSet out;
  for (ActionIndex a : allowed.members()) {
    if (q(s, a) >= threshold - slack) out.insert(a);
  }
  return out;
}

/// How a learner turns Q(s', .) into the set whose worst member is the TD
/// target. Every rule falls back to the greedy argmax set when its candidate
/// set is empty, so the result is always a valid action set.
struct CandidateRule {
  enum class Kind { kGreedy, kNearGreedy, kQBased };

  Kind kind = Kind::kGreedy;
  const ValueTable* v_star = nullptr;
  double zeta = 0.0;
  double slack = 0.0;

  static CandidateRule greedy(double slack = 0.0) { return {Kind::kGreedy, nullptr, 0.0, slack}; }
  /// {a : Q(s,a) >= (1 - zeta) V*(s)}; greedy when V*(s) < 0 or the set is empty.
  static CandidateRule near_greedy(const ValueTable& v_star, double zeta, double slack = 0.0) {
    return {Kind::kNearGreedy, &v_star, zeta, slack};
  }
  /// {a : Q(s,a) >= (1 - zeta) max_a' Q(s,a')}.
  static CandidateRule q_based(double zeta, double slack = 0.0) {
    return {Kind::kQBased, nullptr, zeta, slack};
  }

  ActionSet candidates(const QTable& q, StateIndex s, ActionSet allowed) const {
    switch (kind) {
      case Kind::kGreedy: break;
      case Kind::kNearGreedy: {
        const double v = (*v_star)[s];
        if (v < 0.0) break;
        const ActionSet set = threshold_set(q, s, allowed, (1.0 - zeta) * v, slack);
        if (!set.empty()) return set;
        break;
      }
      case Kind::kQBased: {
        double best = -INFINITY;
        for (ActionIndex a : allowed.members()) best = std::max(best, q(s, a));
        const ActionSet set = threshold_set(q, s, allowed, (1.0 - zeta) * best, slack);
        if (!set.empty()) return set;
        break;
      }
    }
    return argmax_set(q, s, allowed, slack);
  }

  /// min over the candidate set; equals max_a Q(s,a) on the greedy branch.
  double target(const QTable& q, StateIndex s, ActionSet allowed) const {
    return q.min_over(s, candidates(q, s, allowed));
  }
};

}  // namespace svp
