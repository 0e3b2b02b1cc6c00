#pragma once

#include <optional>
#include <string>
#include <vector>

#include "svp/algorithms.hpp"
#include "svp/convergence.hpp"
#include "svp/errors.hpp"
#include "svp/mdp.hpp"
#include "svp/policy.hpp"
#include "svp/solvers.hpp"

namespace svp {

/// Model-based constructions selectable by name.
inline const std::vector<std::string>& construction_names() {
  static const std::vector<std::string> names = {"near-greedy-vi", "near-greedy-dag", "conservative",
                                                 "qstar-based",    "q-based-vi",      "additive"};
  return names;
}

struct Construction {
  SetValuedPolicy policy;
  /// Present for iterative constructions.
  std::optional<ConvergenceTrace> trace;

  bool converged() const { return !trace || trace->converged; }
};

inline Construction construct_svp(const TabularMdp& mdp, const OptimalSolution& optimal, const std::string& algo,
                                  double zeta, const NearGreedyViOptions& options = {}) {
  if (algo == "near-greedy-vi") {
    LearnedSvp learned = near_greedy_vi(mdp, optimal.v, zeta, options);
    return {std::move(learned.policy), std::move(learned.trace)};
  }
  if (algo == "q-based-vi") {
    LearnedSvp learned = q_based_vi(mdp, zeta, options);
    return {std::move(learned.policy), std::move(learned.trace)};
  }
  if (algo == "near-greedy-dag") return {near_greedy_construct_dag(mdp, optimal.v, zeta), std::nullopt};
  if (algo == "conservative") return {conservative_svp(mdp, optimal.v, zeta), std::nullopt};
  if (algo == "qstar-based") return {qstar_based_svp(mdp, optimal.q, zeta), std::nullopt};
  if (algo == "additive") return {additive_svp(mdp, optimal.q, optimal.v, zeta), std::nullopt};
  std::string known;
  for (const std::string& name : construction_names()) known += (known.empty() ? "" : ", ") + name;
  throw InvalidArgument("unknown algorithm '" + algo + "' (expected one of: " + known + ")");
}

}  // namespace svp
