#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svp/action_set.hpp"
#include "svp/errors.hpp"
#include "svp/mdp.hpp"

namespace svp {

/// Maps every state to a non-empty subset of actions. Terminal states carry
/// the full action set.
struct SetValuedPolicy {
  std::vector<ActionSet> sets;
  double zeta = 0.0;
  double gamma = 0.0;
  std::string source;
  std::optional<QTable> q;
  std::optional<ValueTable> v_star;

  std::size_t state_count() const { return sets.size(); }
  ActionSet operator[](StateIndex s) const { return sets[s]; }

  friend bool operator==(const SetValuedPolicy&, const SetValuedPolicy&) = default;
};

/// Throws unless `sets` is a valid SVP for `mdp`.
inline void validate_policy(const TabularMdp& mdp, const std::vector<ActionSet>& sets) {
  if (sets.size() != mdp.state_count()) {
    throw InvalidArgument("policy covers " + std::to_string(sets.size()) + " states, MDP has " +
                          std::to_string(mdp.state_count()));
  }
  const ActionSet full = ActionSet::full(mdp.action_count());
  for (StateIndex s = 0; s < sets.size(); ++s) {
    if (sets[s].empty()) throw InvalidArgument("empty action set at state " + std::to_string(s));
    if (!sets[s].is_subset_of(full)) {
      throw InvalidArgument("action set at state " + std::to_string(s) + " names unknown actions");
    }
  }
}

/// Sets with every terminal state forced to the full action set.
inline std::vector<ActionSet> with_full_terminals(const TabularMdp& mdp, std::vector<ActionSet> sets) {
  for (StateIndex s : mdp.terminal_states()) sets[s] = ActionSet::full(mdp.action_count());
  return sets;
}

/// Greedy (argmax) sets with ties kept within `slack`.
inline std::vector<ActionSet> greedy_sets(const TabularMdp& mdp, const QTable& q, double slack = 1e-9) {
  std::vector<ActionSet> sets(mdp.state_count());
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (mdp.is_terminal(s)) {
      sets[s] = ActionSet::full(mdp.action_count());
      continue;
    }
    const double best = q.max_over(s);
    for (ActionIndex a = 0; a < mdp.action_count(); ++a) {
      if (q(s, a) >= best - slack) sets[s].insert(a);
    }
  }
  return sets;
}

inline std::size_t total_size(const std::vector<ActionSet>& sets) {
  std::size_t total = 0;
  for (ActionSet set : sets) total += set.size();
  return total;
}

/// Total size over non-terminal states only.
inline std::size_t decision_size(const TabularMdp& mdp, const std::vector<ActionSet>& sets) {
  std::size_t total = 0;
  for (StateIndex s = 0; s < sets.size(); ++s) {
    if (!mdp.is_terminal(s)) total += sets[s].size();
  }
  return total;
}

}  // namespace svp
