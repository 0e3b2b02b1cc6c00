#pragma once

#include <algorithm>
#include <optional>
#include <vector>

#include "svp/mdp.hpp"
#include "svp/policy.hpp"
#include "svp/solvers.hpp"

namespace svp {

struct SvpMetrics {
  /// Mean |pi(s)| over all states; terminals count with their full set.
  double average_size = 0.0;
  /// Mean |pi(s)| over non-terminal states.
  double average_size_decision = 0.0;
  /// min V^pi(s)/V*(s) over states with V*(s) > 0; empty when no such state.
  std::optional<double> worst_ratio;
  /// Per state; empty where V*(s) <= 0, 1 at terminals.
  std::vector<std::optional<double>> state_ratio;
  ValueTable v_pi;

  std::optional<double> worst_deviation() const {
    if (!worst_ratio) return std::nullopt;
    return 1.0 - *worst_ratio;
  }
};

inline SvpMetrics compute_metrics(const TabularMdp& mdp, const std::vector<ActionSet>& sets,
                                  const ValueTable& v_star, const SolveOptions& options = {}) {
  validate_policy(mdp, sets);
  if (v_star.size() != mdp.state_count()) throw InvalidArgument("V* has the wrong number of states");
  SvpMetrics m;
  const QTable q_pi = svp_policy_evaluation(mdp, sets, options);
  m.v_pi = worst_case_values(mdp, sets, q_pi);
  std::size_t decision_states = 0;
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (!mdp.is_terminal(s)) ++decision_states;
  }
  m.average_size = static_cast<double>(total_size(sets)) / static_cast<double>(mdp.state_count());
  m.average_size_decision =
      decision_states == 0 ? 0.0
                           : static_cast<double>(decision_size(mdp, sets)) / static_cast<double>(decision_states);
  m.state_ratio.assign(mdp.state_count(), std::nullopt);
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (mdp.is_terminal(s)) {
      m.state_ratio[s] = 1.0;
      continue;
    }
    if (v_star[s] <= 0.0) continue;
    const double ratio = m.v_pi[s] / v_star[s];
    m.state_ratio[s] = ratio;
    m.worst_ratio = m.worst_ratio ? std::min(*m.worst_ratio, ratio) : ratio;
  }
  return m;
}

inline SvpMetrics compute_metrics(const TabularMdp& mdp, const SetValuedPolicy& policy, const ValueTable& v_star,
                                  const SolveOptions& options = {}) {
  return compute_metrics(mdp, policy.sets, v_star, options);
}

/// V^pi(s) >= (1-zeta) V*(s) - slack at every state.
inline bool is_zeta_optimal(const ValueTable& v_pi, const ValueTable& v_star, double zeta, double slack = 1e-9) {
  for (std::size_t s = 0; s < v_star.size(); ++s) {
    if (v_pi[s] < (1.0 - zeta) * v_star[s] - slack) return false;
  }
  return true;
}

}  // namespace svp
