#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "svp/action_set.hpp"
#include "svp/errors.hpp"

namespace svp {

using StateIndex = std::size_t;
using ActionIndex = std::size_t;
using ValueTable = std::vector<double>;

inline constexpr double kProbabilityTolerance = 1e-9;

struct Transition {
  StateIndex next;
  double probability;
};

/// Action values indexed by (state, action), row-major.
class QTable {
 public:
  QTable() = default;
  QTable(std::size_t state_count, std::size_t action_count, double fill = 0.0)
      : state_count_(state_count), action_count_(action_count),
        values_(state_count * action_count, fill) {}

  double& operator()(StateIndex s, ActionIndex a) { return values_[s * action_count_ + a]; }
  double operator()(StateIndex s, ActionIndex a) const { return values_[s * action_count_ + a]; }

  std::span<const double> row(StateIndex s) const {
    return {values_.data() + s * action_count_, action_count_};
  }
  std::span<double> row(StateIndex s) { return {values_.data() + s * action_count_, action_count_}; }

  std::size_t state_count() const { return state_count_; }
  std::size_t action_count() const { return action_count_; }
  const std::vector<double>& data() const { return values_; }

  double max_over(StateIndex s) const {
    double best = -INFINITY;
    for (double v : row(s)) best = std::max(best, v);
    return best;
  }

  /// Maximum over the actions in `set`; -inf for an empty set.
  double max_over(StateIndex s, ActionSet set) const {
    double best = -INFINITY;
    for (ActionIndex a : set.members()) best = std::max(best, (*this)(s, a));
    return best;
  }

  /// Minimum over the actions in `set`; +inf for an empty set.
  double min_over(StateIndex s, ActionSet set) const {
    double worst = INFINITY;
    for (ActionIndex a : set.members()) worst = std::min(worst, (*this)(s, a));
    return worst;
  }

  friend bool operator==(const QTable&, const QTable&) = default;

 private:
  std::size_t state_count_ = 0;
  std::size_t action_count_ = 0;
  std::vector<double> values_;
};

/// Sup-norm distance between two tables of equal shape.
inline double sup_distance(const QTable& lhs, const QTable& rhs) {
  double out = 0.0;
  for (std::size_t i = 0; i < lhs.data().size(); ++i) {
    out = std::max(out, std::abs(lhs.data()[i] - rhs.data()[i]));
  }
  return out;
}

/// Finite MDP with dense transition storage P[s][a][s'] and expected rewards
/// r[s][a]. Terminal states are absorbing with zero reward; a bonus for
/// reaching a terminal belongs on the transition that enters it.
///
/// Instances are immutable once constructed; the constructor validates every
/// invariant and caches a sparse successor list per (s, a).
class TabularMdp {
 public:
  TabularMdp(std::size_t state_count, std::size_t action_count, double gamma,
             std::vector<double> transition, std::vector<double> reward,
             std::vector<bool> terminal, std::vector<double> start,
             std::vector<std::string> state_labels = {},
             std::vector<std::string> action_labels = {})
      : state_count_(state_count), action_count_(action_count), gamma_(gamma),
        transition_(std::move(transition)), reward_(std::move(reward)),
        terminal_(std::move(terminal)), start_(std::move(start)),
        state_labels_(std::move(state_labels)), action_labels_(std::move(action_labels)) {
    validate_and_index();
  }

  std::size_t state_count() const { return state_count_; }
  std::size_t action_count() const { return action_count_; }
  double gamma() const { return gamma_; }

  double probability(StateIndex s, ActionIndex a, StateIndex next) const {
    return transition_[(s * action_count_ + a) * state_count_ + next];
  }
  std::span<const Transition> successors(StateIndex s, ActionIndex a) const {
    return sparse_[s * action_count_ + a];
  }
  double reward(StateIndex s, ActionIndex a) const { return reward_[s * action_count_ + a]; }
  bool is_terminal(StateIndex s) const { return terminal_[s]; }
  const std::vector<double>& start_distribution() const { return start_; }

  std::vector<StateIndex> terminal_states() const {
    std::vector<StateIndex> out;
    for (StateIndex s = 0; s < state_count_; ++s) {
      if (terminal_[s]) out.push_back(s);
    }
    return out;
  }

  const std::string& state_label(StateIndex s) const { return state_labels_[s]; }
  const std::string& action_label(ActionIndex a) const { return action_labels_[a]; }
  const std::vector<std::string>& state_labels() const { return state_labels_; }
  const std::vector<std::string>& action_labels() const { return action_labels_; }

  /// Expected value of `values` at the successor of (s, a).
  double expected_next(StateIndex s, ActionIndex a, std::span<const double> values) const {
    double total = 0.0;
    for (const Transition& t : successors(s, a)) total += t.probability * values[t.next];
    return total;
  }

  bool has_negative_reward() const {
    for (double r : reward_) {
      if (r < 0.0) return true;
    }
    return false;
  }

  /// True when every (s, a) has a single successor with probability one.
  bool is_deterministic() const {
    for (const auto& list : sparse_) {
      if (list.size() != 1) return false;
    }
    return true;
  }

  double max_abs_reward() const {
    double out = 0.0;
    for (double r : reward_) out = std::max(out, std::abs(r));
    return out;
  }

  friend bool operator==(const TabularMdp& lhs, const TabularMdp& rhs) {
    return lhs.state_count_ == rhs.state_count_ && lhs.action_count_ == rhs.action_count_ &&
           lhs.gamma_ == rhs.gamma_ && lhs.transition_ == rhs.transition_ &&
           lhs.reward_ == rhs.reward_ && lhs.terminal_ == rhs.terminal_ &&
           lhs.start_ == rhs.start_ && lhs.state_labels_ == rhs.state_labels_ &&
           lhs.action_labels_ == rhs.action_labels_;
  }

 private:
  void validate_and_index() {
    if (state_count_ == 0) throw InvalidArgument("MDP needs at least one state");
    if (action_count_ == 0) throw InvalidArgument("MDP needs at least one action");
    if (action_count_ > kMaxActions) {
      throw InvalidArgument("MDP supports at most 64 actions");
    }
    if (!(gamma_ >= 0.0 && gamma_ <= 1.0)) throw InvalidArgument("gamma must lie in [0, 1]");
    const std::size_t pairs = state_count_ * action_count_;
    if (transition_.size() != pairs * state_count_ || reward_.size() != pairs ||
        terminal_.size() != state_count_ || start_.size() != state_count_) {
      throw InvalidArgument("MDP table dimensions do not match state/action counts");
    }
    if (state_labels_.empty()) {
      for (StateIndex s = 0; s < state_count_; ++s) state_labels_.push_back("s" + std::to_string(s));
    }
    if (action_labels_.empty()) {
      for (ActionIndex a = 0; a < action_count_; ++a) action_labels_.push_back("a" + std::to_string(a));
    }
    if (state_labels_.size() != state_count_ || action_labels_.size() != action_count_) {
      throw InvalidArgument("label count does not match state/action counts");
    }

    for (StateIndex s = 0; s < state_count_; ++s) {
      for (ActionIndex a = 0; a < action_count_; ++a) {
        const std::size_t base = (s * action_count_ + a) * state_count_;
        if (terminal_[s]) {
          if (reward_[s * action_count_ + a] != 0.0) {
            throw InvalidArgument("terminal state " + std::to_string(s) + " has non-zero reward");
          }
          for (StateIndex n = 0; n < state_count_; ++n) transition_[base + n] = n == s ? 1.0 : 0.0;
          continue;
        }
        if (!std::isfinite(reward_[s * action_count_ + a])) {
          throw InvalidArgument("non-finite reward at state " + std::to_string(s));
        }
        double total = 0.0;
        for (StateIndex n = 0; n < state_count_; ++n) {
          const double p = transition_[base + n];
          if (!(p >= 0.0 && p <= 1.0)) {
            throw InvalidArgument("transition probability outside [0,1] at state " +
                                  std::to_string(s));
          }
          total += p;
        }
        if (std::abs(total - 1.0) > kProbabilityTolerance) {
          throw InvalidArgument("transition row (" + std::to_string(s) + ", " + std::to_string(a) +
                                ") sums to " + std::to_string(total));
        }
      }
    }

    double mass = 0.0;
    for (StateIndex s = 0; s < state_count_; ++s) {
      if (start_[s] < 0.0) throw InvalidArgument("negative start probability");
      if (terminal_[s] && start_[s] > 0.0) {
        throw InvalidArgument("start distribution places mass on terminal state " +
                              std::to_string(s));
      }
      mass += start_[s];
    }
    if (std::abs(mass - 1.0) > kProbabilityTolerance) {
      throw InvalidArgument("start distribution sums to " + std::to_string(mass));
    }

    sparse_.assign(pairs, {});
    for (std::size_t sa = 0; sa < pairs; ++sa) {
      for (StateIndex n = 0; n < state_count_; ++n) {
        const double p = transition_[sa * state_count_ + n];
        if (p > 0.0) sparse_[sa].push_back({n, p});
      }
    }

    if (gamma_ == 1.0 && has_reachable_cycle()) {
      throw InvalidArgument("gamma = 1 requires the reachable transition graph to be acyclic");
    }
  }

  // Iterative DFS colouring over positive-probability edges between
  // non-terminal states, starting from the support of the start distribution.
  bool has_reachable_cycle() const {
    enum : unsigned char { kWhite, kGrey, kBlack };
    std::vector<unsigned char> colour(state_count_, kWhite);
    struct Frame {
      StateIndex state;
      std::size_t edge;
    };
    std::vector<std::vector<StateIndex>> out(state_count_);
    for (StateIndex s = 0; s < state_count_; ++s) {
      if (terminal_[s]) continue;
      for (ActionIndex a = 0; a < action_count_; ++a) {
        for (const Transition& t : successors(s, a)) out[s].push_back(t.next);
      }
    }
    for (StateIndex root = 0; root < state_count_; ++root) {
      if (start_[root] <= 0.0 || colour[root] != kWhite) continue;
      std::vector<Frame> stack{{root, 0}};
      colour[root] = kGrey;
      while (!stack.empty()) {
        Frame& top = stack.back();
        if (top.edge == out[top.state].size()) {
          colour[top.state] = kBlack;
          stack.pop_back();
          continue;
        }
        const StateIndex next = out[top.state][top.edge++];
        if (terminal_[next]) continue;
        if (colour[next] == kGrey) return true;
        if (colour[next] == kWhite) {
          colour[next] = kGrey;
          stack.push_back({next, 0});
        }
      }
    }
    return false;
  }

  std::size_t state_count_;
  std::size_t action_count_;
  double gamma_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  std::vector<bool> terminal_;
  std::vector<double> start_;
  std::vector<std::string> state_labels_;
  std::vector<std::string> action_labels_;
  std::vector<std::vector<Transition>> sparse_;
};

/// Mutable scratch representation used by the environment builders and the
/// JSON reader. `build()` hands the tables to a validated TabularMdp.
class MdpDraft {
 public:
  MdpDraft(std::size_t state_count, std::size_t action_count, double gamma)
      : state_count_(state_count), action_count_(action_count), gamma_(gamma),
        transition_(state_count * action_count * state_count, 0.0),
        reward_(state_count * action_count, 0.0), terminal_(state_count, false),
        start_(state_count, 0.0) {}

  void add_transition(StateIndex s, ActionIndex a, StateIndex next, double p) {
    check(s, a);
    if (next >= state_count_) throw InvalidArgument("next state index out of range");
    transition_[(s * action_count_ + a) * state_count_ + next] += p;
  }
  void set_reward(StateIndex s, ActionIndex a, double r) {
    check(s, a);
    reward_[s * action_count_ + a] = r;
  }
  void set_terminal(StateIndex s, bool value = true) {
    check(s, 0);
    terminal_[s] = value;
  }
  void set_start(StateIndex s, double p) {
    check(s, 0);
    start_[s] = p;
  }
  void set_state_labels(std::vector<std::string> labels) { state_labels_ = std::move(labels); }
  void set_action_labels(std::vector<std::string> labels) { action_labels_ = std::move(labels); }

  std::size_t state_count() const { return state_count_; }
  std::size_t action_count() const { return action_count_; }

  TabularMdp build() const {
    return TabularMdp(state_count_, action_count_, gamma_, transition_, reward_, terminal_, start_,
                      state_labels_, action_labels_);
  }

 private:
  void check(StateIndex s, ActionIndex a) const {
    if (s >= state_count_) throw InvalidArgument("state index out of range");
    if (a >= action_count_) throw InvalidArgument("action index out of range");
  }

  std::size_t state_count_;
  std::size_t action_count_;
  double gamma_;
  std::vector<double> transition_;
  std::vector<double> reward_;
  std::vector<bool> terminal_;
  std::vector<double> start_;
  std::vector<std::string> state_labels_;
  std::vector<std::string> action_labels_;
};

}  // namespace svp
