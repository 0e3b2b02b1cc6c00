#pragma once

#include <algorithm>
#include <queue>
#include <vector>

#include "svp/mdp.hpp"

namespace svp {

struct DagDecomposition {
  bool is_dag = false;
  /// Non-terminal states in topological order followed by the terminals.
  /// Empty when the graph has a cycle.
  std::vector<StateIndex> topological_order;
  /// Longest number of steps from any state to a terminal (0 when cyclic).
  std::size_t depth = 0;
};

/// Cycle detection and topological sort over positive-probability edges.
/// Terminal self-loops are not edges. Ties in Kahn's algorithm resolve to the
/// smallest state index, so chains come out as s1, s2, ...
inline DagDecomposition dag_decompose(const TabularMdp& mdp) {
  const std::size_t n = mdp.state_count();
  std::vector<std::vector<StateIndex>> out(n);
  std::vector<std::size_t> indegree(n, 0);
  for (StateIndex s = 0; s < n; ++s) {
    if (mdp.is_terminal(s)) continue;
    std::vector<bool> seen(n, false);
    for (ActionIndex a = 0; a < mdp.action_count(); ++a) {
      for (const Transition& t : mdp.successors(s, a)) {
        if (seen[t.next]) continue;
        seen[t.next] = true;
        out[s].push_back(t.next);
        ++indegree[t.next];
      }
    }
  }

  std::priority_queue<StateIndex, std::vector<StateIndex>, std::greater<>> ready;
  for (StateIndex s = 0; s < n; ++s) {
    if (indegree[s] == 0 && !mdp.is_terminal(s)) ready.push(s);
  }
  DagDecomposition result;
  std::vector<StateIndex> order;
  std::size_t released = 0;
  while (!ready.empty()) {
    const StateIndex s = ready.top();
    ready.pop();
    order.push_back(s);
    ++released;
    for (StateIndex next : out[s]) {
      if (--indegree[next] == 0 && !mdp.is_terminal(next)) ready.push(next);
    }
  }
  const std::size_t non_terminal = n - mdp.terminal_states().size();
  if (released != non_terminal) return result;  // a cycle blocked some state

  result.is_dag = true;
  for (StateIndex s : mdp.terminal_states()) order.push_back(s);

  std::vector<std::size_t> height(n, 0);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    for (StateIndex next : out[*it]) height[*it] = std::max(height[*it], height[next] + 1);
  }
  result.depth = n == 0 ? 0 : *std::max_element(height.begin(), height.end());
  result.topological_order = std::move(order);
  return result;
}

}  // namespace svp
