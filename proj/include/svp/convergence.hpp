#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include "svp/action_set.hpp"

namespace svp {

/// Checkpointed history of a learner: the SVP derived at each checkpoint and
/// the sup-norm change of Q since the previous checkpoint.
struct ConvergenceTrace {
  std::vector<std::vector<ActionSet>> snapshots;
  std::vector<double> q_deltas;
  std::size_t window = 50;
  double q_tolerance = 0.0;
  bool converged = false;

  void record(std::vector<ActionSet> sets, double q_delta) {
    snapshots.push_back(std::move(sets));
    q_deltas.push_back(q_delta);
  }

  /// True when the last `window` snapshots are identical.
  bool stable() const {
    if (window == 0 || snapshots.size() < window) return false;
    const auto& last = snapshots.back();
    for (std::size_t i = snapshots.size() - window; i < snapshots.size(); ++i) {
      if (snapshots[i] != last) return false;
    }
    return true;
  }

  /// Re-derives `converged`: stable sets and a final Q delta within tolerance.
  bool update_converged() {
    converged = stable() && !q_deltas.empty() && q_deltas.back() <= q_tolerance;
    return converged;
  }

  /// Number of checkpoints in the final window whose SVP differs from the one
  /// before it.
  std::size_t changes_in_window() const {
    std::size_t changes = 0;
    const std::size_t begin = snapshots.size() > window ? snapshots.size() - window : 1;
    for (std::size_t i = std::max<std::size_t>(begin, 1); i < snapshots.size(); ++i) {
      if (snapshots[i] != snapshots[i - 1]) ++changes;
    }
    return changes;
  }

  std::string summary() const {
    std::string out = converged ? "converged" : "not converged";
    out += " after " + std::to_string(snapshots.size()) + " checkpoints; ";
    out += std::to_string(changes_in_window()) + " membership changes in the last " +
           std::to_string(window) + " checkpoints";
    if (!q_deltas.empty()) out += "; final Q delta " + std::to_string(q_deltas.back());
    return out;
  }
};

}  // namespace svp
