#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "svp/algorithms.hpp"
#include "svp/errors.hpp"
#include "svp/mdp.hpp"
#include "svp/metrics.hpp"
#include "svp/policy.hpp"
#include "svp/solvers.hpp"

namespace svp {

struct OracleResult {
  SetValuedPolicy best;
  /// Total set size over non-terminal states.
  std::size_t total_size = 0;
  /// mu^T V^pi of the returned SVP.
  double start_value = 0.0;
  std::uint64_t feasible_count = 0;
  std::uint64_t examined = 0;
  std::uint64_t search_space_size = 0;
};

struct OracleOptions {
  std::uint64_t guard = kDefaultEnumerationGuard;
  double feasibility_slack = 1e-9;
  double tie_tolerance = 1e-12;
  SolveOptions evaluation;
};

namespace detail {

inline bool lexicographically_less(const std::vector<ActionSet>& lhs, const std::vector<ActionSet>& rhs) {
  return std::lexicographical_compare(lhs.begin(), lhs.end(), rhs.begin(), rhs.end(),
                                      [](ActionSet a, ActionSet b) { return a.bits() < b.bits(); });
}

}  // namespace detail

/// Maximal-size zeta-optimal SVP by exhaustive search. Candidates are visited
/// one total-size level at a time, largest first; the first level holding a
/// feasible candidate decides, with ties broken by larger mu^T V^pi and then
/// by the lexicographically smallest membership vector.
inline OracleResult exhaustive_maximal_svp(const TabularMdp& mdp, const ValueTable& v_star, double zeta,
                                           const OracleOptions& options = {}) {
  detail::check_zeta(zeta);
  detail::check_values(mdp, v_star, "V*");
  const std::uint64_t space = candidate_count(mdp, options.guard);
  if (space > options.guard) {
    throw GuardExceeded("oracle search space exceeds the guard of " + std::to_string(options.guard));
  }

  const std::size_t A = mdp.action_count();
  const std::uint64_t top = ActionSet::full(A).bits();
  std::vector<std::vector<ActionSet>> by_size(A + 1);
  for (std::uint64_t bits = 1; bits <= top; ++bits) {
    const ActionSet set(bits);
    by_size[set.size()].push_back(set);
  }
  std::vector<StateIndex> decision;
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (!mdp.is_terminal(s)) decision.push_back(s);
  }

  OracleResult result;
  result.search_space_size = space;
  std::vector<ActionSet> sets(mdp.state_count(), ActionSet::full(A));
  bool found = false;

  const auto consider = [&]() {
    ++result.examined;
    const QTable q = svp_policy_evaluation(mdp, sets, options.evaluation);
    const ValueTable v = worst_case_values(mdp, sets, q);
    if (!is_zeta_optimal(v, v_star, zeta, options.feasibility_slack)) return;
    ++result.feasible_count;
    double start_value = 0.0;
    for (StateIndex s = 0; s < mdp.state_count(); ++s) start_value += mdp.start_distribution()[s] * v[s];
    const bool better = !found || start_value > result.start_value + options.tie_tolerance ||
                        (start_value >= result.start_value - options.tie_tolerance &&
                         detail::lexicographically_less(sets, result.best.sets));
    if (!better) return;
    found = true;
    result.start_value = start_value;
    result.best.sets = sets;
    result.best.q = q;
  };

  // Assigns sizes to decision[i..] summing to `remaining`, then every set of
  // those sizes.
  std::function<void(std::size_t, std::size_t)> enumerate = [&](std::size_t i, std::size_t remaining) {
    const std::size_t left = decision.size() - i;
    if (left == 0) {
      if (remaining == 0) consider();
      return;
    }
    if (remaining < left || remaining > left * A) return;
    for (std::size_t k = 1; k <= A; ++k) {
      for (ActionSet set : by_size[k]) {
        sets[decision[i]] = set;
        enumerate(i + 1, remaining - k);
      }
    }
  };

  for (std::size_t level = decision.size() * A; level >= decision.size() && !found; --level) {
    enumerate(0, level);
    if (found) result.total_size = level;
    if (level == 0) break;
  }
  if (!found) throw std::logic_error("oracle found no feasible SVP; the greedy policy is always feasible");
  result.best.zeta = zeta;
  result.best.gamma = mdp.gamma();
  result.best.source = "oracle";
  result.best.v_star = v_star;
  return result;
}

struct OracleComparison {
  double zeta = 0.0;
  bool near_greedy_converged = false;
  std::size_t near_greedy_size = 0;
  std::size_t oracle_size = 0;
  std::optional<double> near_greedy_ratio;
  std::optional<double> oracle_ratio;
  bool near_greedy_feasible = false;
  bool identical = false;
  SetValuedPolicy near_greedy;
  OracleResult oracle;
};

/// Near-greedy VI against the exhaustive oracle at one zeta.
inline OracleComparison oracle_compare(const TabularMdp& mdp, const ValueTable& v_star, double zeta,
                                       const OracleOptions& options = {},
                                       const NearGreedyViOptions& vi_options = {}) {
  OracleComparison out;
  out.zeta = zeta;
  out.oracle = exhaustive_maximal_svp(mdp, v_star, zeta, options);
  const LearnedSvp ng = near_greedy_vi(mdp, v_star, zeta, vi_options);
  out.near_greedy = ng.policy;
  out.near_greedy_converged = ng.converged();
  out.near_greedy_size = decision_size(mdp, ng.policy.sets);
  out.oracle_size = out.oracle.total_size;
  const SvpMetrics ng_metrics = compute_metrics(mdp, ng.policy.sets, v_star, options.evaluation);
  const SvpMetrics oracle_metrics = compute_metrics(mdp, out.oracle.best.sets, v_star, options.evaluation);
  out.near_greedy_ratio = ng_metrics.worst_ratio;
  out.oracle_ratio = oracle_metrics.worst_ratio;
  out.near_greedy_feasible = is_zeta_optimal(ng_metrics.v_pi, v_star, zeta, options.feasibility_slack);
  out.identical = ng.policy.sets == out.oracle.best.sets;
  return out;
}

}  // namespace svp
