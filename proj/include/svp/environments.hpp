#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "svp/errors.hpp"
#include "svp/mdp.hpp"
#include "svp/rng.hpp"

namespace svp {

/// Intermediate reward levels for Chain-k and CyclicChain-k.
inline constexpr std::array<double, 6> kChainRewardLevels = {0.0, 0.01, 0.02, 0.03, 0.04, 0.05};
inline constexpr double kTerminalBonus = 1.0;

/// Per-state action rewards for a chain: 4 distinct values drawn from the six
/// reward levels. With `shared` one draw is reused by every state.
inline std::vector<std::vector<double>> draw_chain_rewards(std::size_t decision_states,
                                                           std::uint64_t seed, bool shared) {
  Rng rng(seed);
  std::vector<std::vector<double>> out;
  std::vector<double> draw;
  for (std::size_t i = 0; i < decision_states; ++i) {
    if (i == 0 || !shared) {
      std::vector<double> levels(kChainRewardLevels.begin(), kChainRewardLevels.end());
      rng.shuffle(levels);
      draw.assign(levels.begin(), levels.begin() + 4);
    }
    out.push_back(draw);
  }
  return out;
}

/// Chain of `rewards.size() + 1` states: every action at s_i moves to s_{i+1}
/// and earns rewards[i][a]; entering the terminal adds +1.
inline TabularMdp build_chain_with_rewards(const std::vector<std::vector<double>>& rewards,
                                           double gamma) {
  const std::size_t k = rewards.size() + 1;
  if (rewards.empty()) throw InvalidArgument("chain needs at least one decision state");
  const std::size_t actions = rewards.front().size();
  MdpDraft draft(k, actions, gamma);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < k; ++i) labels.push_back("s" + std::to_string(i + 1));
  std::vector<std::string> action_labels;
  for (std::size_t a = 0; a < actions; ++a) action_labels.push_back("a" + std::to_string(a + 1));
  for (StateIndex s = 0; s + 1 < k; ++s) {
    if (rewards[s].size() != actions) throw InvalidArgument("ragged chain reward table");
    for (ActionIndex a = 0; a < actions; ++a) {
      draft.add_transition(s, a, s + 1, 1.0);
      draft.set_reward(s, a, rewards[s][a] + (s + 2 == k ? kTerminalBonus : 0.0));
    }
  }
  draft.set_terminal(k - 1);
  draft.set_start(0, 1.0);
  draft.set_state_labels(std::move(labels));
  draft.set_action_labels(std::move(action_labels));
  return draft.build();
}

inline TabularMdp build_chain(std::size_t k, std::uint64_t reward_seed, double gamma,
                              bool shared_rewards = false) {
  if (k < 2) throw InvalidArgument("chain length k must be at least 2");
  return build_chain_with_rewards(draw_chain_rewards(k - 1, reward_seed, shared_rewards), gamma);
}

/// Like Chain-k, but actions 0 and 1 step left (self-loop at s_1) and actions
/// 2 and 3 step right. The reward draw matches build_chain for the same seed.
inline TabularMdp build_cyclic_chain(std::size_t k, std::uint64_t reward_seed, double gamma,
                                     bool shared_rewards = false) {
  if (k < 2) throw InvalidArgument("cyclic chain length k must be at least 2");
  if (!(gamma < 1.0)) throw InvalidArgument("cyclic chain requires gamma < 1");
  const auto rewards = draw_chain_rewards(k - 1, reward_seed, shared_rewards);
  MdpDraft draft(k, 4, gamma);
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < k; ++i) labels.push_back("s" + std::to_string(i + 1));
  for (StateIndex s = 0; s + 1 < k; ++s) {
    for (ActionIndex a = 0; a < 4; ++a) {
      const bool left = a < 2;
      const StateIndex next = left ? (s == 0 ? 0 : s - 1) : s + 1;
      draft.add_transition(s, a, next, 1.0);
      draft.set_reward(s, a, rewards[s][a] + (next == k - 1 ? kTerminalBonus : 0.0));
    }
  }
  draft.set_terminal(k - 1);
  draft.set_start(0, 1.0);
  draft.set_state_labels(std::move(labels));
  draft.set_action_labels({"L1", "L2", "R1", "R2"});
  return draft.build();
}

inline constexpr std::array<std::string_view, 4> kFrozenLake4x4 = {"SFFF", "FHFH", "FFFH", "HFFG"};
inline constexpr std::array<std::string_view, 8> kFrozenLake8x8 = {
    "SFFFFFFF", "FFFFFFFF", "FFFHFFFF", "FFFFFHFF",
    "FFFHFFFF", "FHHFFFHF", "FHFFHFHF", "FFFHFFFG"};

/// Perturbation reward per action in (left, down, right, up) order.
inline std::array<double, 4> default_lake_perturbation(std::string_view map_name) {
  if (map_name == "4x4") return {0.01, 0.02, 0.03, 0.04};
  if (map_name == "8x8") return {0.001, 0.002, 0.003, 0.004};
  throw InvalidArgument("unknown FrozenLake map '" + std::string(map_name) + "'");
}

inline std::vector<std::string> lake_layout(std::string_view map_name) {
  if (map_name == "4x4") return {kFrozenLake4x4.begin(), kFrozenLake4x4.end()};
  if (map_name == "8x8") return {kFrozenLake8x8.begin(), kFrozenLake8x8.end()};
  throw InvalidArgument("unknown FrozenLake map '" + std::string(map_name) + "'");
}

/// Deterministic FrozenLake on an arbitrary square layout. One state per tile
/// (row-major); holes and the goal are terminal. Every action from a
/// non-terminal tile earns its perturbation reward, reaching G adds +1, and
/// off-grid moves stay in place.
inline TabularMdp build_frozen_lake_layout(const std::vector<std::string>& layout, double gamma,
                                           const std::array<double, 4>& perturbation) {
  const std::size_t rows = layout.size();
  if (rows == 0) throw InvalidArgument("empty FrozenLake layout");
  const std::size_t cols = layout.front().size();
  MdpDraft draft(rows * cols, 4, gamma);
  std::vector<std::string> labels;
  bool has_start = false;
  for (std::size_t r = 0; r < rows; ++r) {
    if (layout[r].size() != cols) throw InvalidArgument("ragged FrozenLake layout");
    for (std::size_t c = 0; c < cols; ++c) {
      const char tile = layout[r][c];
      if (std::string_view("SFHG").find(tile) == std::string_view::npos) {
        throw InvalidArgument(std::string("unknown FrozenLake tile '") + tile + "'");
      }
      labels.push_back(std::to_string(r) + "," + std::to_string(c) + ":" + tile);
      const StateIndex s = r * cols + c;
      if (tile == 'H' || tile == 'G') draft.set_terminal(s);
      if (tile == 'S') {
        draft.set_start(s, 1.0);
        has_start = true;
      }
    }
  }
  if (!has_start) throw InvalidArgument("FrozenLake layout has no start tile");
  // left, down, right, up
  constexpr std::array<int, 4> kRowStep = {0, 1, 0, -1};
  constexpr std::array<int, 4> kColStep = {-1, 0, 1, 0};
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const char tile = layout[r][c];
      if (tile == 'H' || tile == 'G') continue;
      const StateIndex s = r * cols + c;
      for (ActionIndex a = 0; a < 4; ++a) {
        const long nr = static_cast<long>(r) + kRowStep[a];
        const long nc = static_cast<long>(c) + kColStep[a];
        const bool inside = nr >= 0 && nc >= 0 && nr < static_cast<long>(rows) &&
                            nc < static_cast<long>(cols);
        const StateIndex next = inside ? static_cast<StateIndex>(nr) * cols + static_cast<StateIndex>(nc) : s;
        draft.add_transition(s, a, next, 1.0);
        const bool goal = layout[next / cols][next % cols] == 'G';
        draft.set_reward(s, a, perturbation[a] + (goal ? kTerminalBonus : 0.0));
      }
    }
  }
  draft.set_state_labels(std::move(labels));
  draft.set_action_labels({"left", "down", "right", "up"});
  return draft.build();
}

inline TabularMdp build_frozen_lake(std::string_view map_name, double gamma) {
  return build_frozen_lake_layout(lake_layout(map_name), gamma, default_lake_perturbation(map_name));
}

/// Three-state MDP {s1, s2, T} with actions {L, R} that has no near-greedy
/// fixed point at gamma = 0.9, zeta = 0.2.
inline TabularMdp build_appendix_c_mdp(double gamma = 0.9) {
  MdpDraft draft(3, 2, gamma);
  constexpr StateIndex s1 = 0, s2 = 1, terminal = 2;
  constexpr ActionIndex left = 0, right = 1;
  draft.add_transition(s1, right, s2, 1.0);
  draft.add_transition(s1, left, terminal, 1.0);
  draft.add_transition(s2, right, terminal, 1.0);
  draft.set_reward(s2, right, 1.0);
  draft.add_transition(s2, left, s1, 1.0);
  draft.set_terminal(terminal);
  draft.set_start(s1, 1.0);
  draft.set_state_labels({"s1", "s2", "T"});
  draft.set_action_labels({"L", "R"});
  return draft.build();
}

/// Layered random DAG: state i only moves to states j > i, the last state is
/// terminal, rewards are uniform in [0, 1) and each (s, a) has one or two
/// successors.
inline TabularMdp build_random_dag(std::size_t state_count, std::size_t action_count,
                                   std::uint64_t seed, double gamma) {
  if (state_count < 2 || action_count < 1) {
    throw InvalidArgument("random DAG needs at least 2 states and 1 action");
  }
  Rng rng(seed);
  MdpDraft draft(state_count, action_count, gamma);
  const StateIndex terminal = state_count - 1;
  for (StateIndex s = 0; s < terminal; ++s) {
    for (ActionIndex a = 0; a < action_count; ++a) {
      const std::size_t later = state_count - 1 - s;
      const StateIndex first = s + 1 + rng.index(later);
      const StateIndex second = s + 1 + rng.index(later);
      if (first == second || rng.bernoulli(0.5)) {
        draft.add_transition(s, a, first, 1.0);
      } else {
        const double p = 0.1 + 0.8 * rng.uniform();
        draft.add_transition(s, a, first, p);
        draft.add_transition(s, a, second, 1.0 - p);
      }
      draft.set_reward(s, a, rng.uniform());
    }
  }
  draft.set_terminal(terminal);
  draft.set_start(0, 1.0);
  return draft.build();
}

/// Random MDP that may contain cycles: each (s, a) has one to three successors
/// anywhere in the state space, rewards uniform in [0, 1), last state terminal.
inline TabularMdp build_random_mdp(std::size_t state_count, std::size_t action_count,
                                   std::uint64_t seed, double gamma) {
  if (state_count < 2 || action_count < 1) {
    throw InvalidArgument("random MDP needs at least 2 states and 1 action");
  }
  if (!(gamma < 1.0)) throw InvalidArgument("random cyclic MDP requires gamma < 1");
  Rng rng(seed);
  MdpDraft draft(state_count, action_count, gamma);
  const StateIndex terminal = state_count - 1;
  for (StateIndex s = 0; s < terminal; ++s) {
    for (ActionIndex a = 0; a < action_count; ++a) {
      const std::size_t fanout = 1 + rng.index(3);
      std::vector<double> weights(fanout);
      double total = 0.0;
      for (double& w : weights) total += (w = 0.05 + rng.uniform());
      for (std::size_t i = 0; i < fanout; ++i) {
        draft.add_transition(s, a, rng.index(state_count), weights[i] / total);
      }
      draft.set_reward(s, a, rng.uniform());
    }
    draft.set_start(s, 1.0 / static_cast<double>(terminal));
  }
  draft.set_terminal(terminal);
  return draft.build();
}

/// Parameters of the synthetic sepsis-like MDP. A state is a health level
/// (0 sickest) at a decision step of a fixed-length stay; two terminals,
/// death and discharge, pay -scale / +scale on entry. Intermediate rewards
/// are zero.
struct SepsisLikeParams {
  std::size_t levels = 6;
  std::size_t horizon = 5;
  std::size_t actions = 5;
  double reward_scale = 100.0;
  double gamma = 0.99;
};

/// The MDP stores expected rewards; `entry_reward[s']` is the reward actually
/// paid when a sampled transition lands in s'.
struct SepsisLikeEnv {
  TabularMdp mdp;
  ValueTable entry_reward;
  StateIndex death;
  StateIndex discharge;
  std::size_t levels;
  std::size_t horizon;

  StateIndex state(std::size_t level, std::size_t step) const { return step * levels + level; }
};

/// Each level has an appropriate intensity (sicker levels need more).
/// Effectiveness falls off with the distance to it and is nearly flat for
/// direct neighbours, so near-equivalent actions exist. Mismatched intensity
/// raises mortality at every level; the sickest level is dangerous under any
/// treatment. Improving past the top level means discharge. At the last step
/// survivors above level 0 are discharged and the rest die. The step index
/// makes the MDP acyclic.
inline SepsisLikeEnv build_sepsis_like(const SepsisLikeParams& params = {}) {
  const std::size_t levels = params.levels;
  const std::size_t horizon = params.horizon;
  const std::size_t actions = params.actions;
  if (levels < 3 || actions < 2 || horizon < 1) {
    throw InvalidArgument("sepsis-like MDP needs at least 3 levels, 2 actions and 1 step");
  }
  const StateIndex death = levels * horizon;
  const StateIndex discharge = death + 1;
  ValueTable entry(discharge + 1, 0.0);
  entry[death] = -params.reward_scale;
  entry[discharge] = params.reward_scale;
  const auto at = [&](std::size_t level, std::size_t step) -> StateIndex {
    if (step == horizon) return level == 0 ? death : discharge;
    return step * levels + level;
  };

  MdpDraft draft(discharge + 1, actions, params.gamma);
  constexpr std::array<double, 5> kEffect = {1.0, 0.98, 0.5, 0.25, 0.1};
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t h = 0; h < levels; ++h) {
      const StateIndex s = at(h, t);
      const double sickness = 1.0 - static_cast<double>(h) / static_cast<double>(levels - 1);
      const double ideal = sickness * static_cast<double>(actions - 1);
      for (ActionIndex a = 0; a < actions; ++a) {
        const auto distance = static_cast<std::size_t>(std::lround(std::abs(static_cast<double>(a) - ideal)));
        const double e = kEffect[std::min(distance, kEffect.size() - 1)];
        double p_up = 0.55 * e;
        double p_down = 0.05 + 0.35 * (1.0 - e);
        double p_die = 0.2 * (1.0 - e);
        if (h == 0) {
          p_up = 0.45 * e;
          p_die = 0.7 - 0.2 * e;
          p_down = 0.0;
        } else if (h == 1) {
          p_die += 0.01;
        }
        const double p_stay = 1.0 - p_up - p_down - p_die;
        const StateIndex up = h + 1 == levels ? discharge : at(h + 1, t + 1);
        draft.add_transition(s, a, up, p_up);
        if (p_down > 0.0) draft.add_transition(s, a, at(h - 1, t + 1), p_down);
        draft.add_transition(s, a, death, p_die);
        draft.add_transition(s, a, at(h, t + 1), p_stay);
        double reward = 0.0;
        for (const auto& [next, p] : std::initializer_list<std::pair<StateIndex, double>>{
                 {up, p_up}, {h == 0 ? death : at(h - 1, t + 1), p_down}, {death, p_die}, {at(h, t + 1), p_stay}}) {
          reward += p * entry[next];
        }
        draft.set_reward(s, a, reward);
      }
    }
  }
  draft.set_terminal(death);
  draft.set_terminal(discharge);
  for (std::size_t h = 0; h < levels; ++h) draft.set_start(at(h, 0), 1.0 / static_cast<double>(levels));
  std::vector<std::string> labels;
  for (std::size_t t = 0; t < horizon; ++t) {
    for (std::size_t h = 0; h < levels; ++h) labels.push_back("h" + std::to_string(h) + "t" + std::to_string(t));
  }
  labels.push_back("death");
  labels.push_back("discharge");
  draft.set_state_labels(std::move(labels));
  std::vector<std::string> action_labels;
  for (ActionIndex a = 0; a < actions; ++a) action_labels.push_back("dose" + std::to_string(a));
  draft.set_action_labels(std::move(action_labels));
  return {draft.build(), std::move(entry), death, discharge, levels, horizon};
}

enum class EnvKind { kChain, kCyclicChain, kFrozenLake, kAppendixC, kRandomDag, kSepsisLike, kFile };

inline std::string_view to_string(EnvKind kind) {
  switch (kind) {
    case EnvKind::kChain: return "chain";
    case EnvKind::kCyclicChain: return "cyclic_chain";
    case EnvKind::kFrozenLake: return "frozen_lake";
    case EnvKind::kAppendixC: return "appendix_c";
    case EnvKind::kRandomDag: return "random_dag";
    case EnvKind::kSepsisLike: return "sepsis_like";
    case EnvKind::kFile: return "file";
  }
  return "unknown";
}

/// Accepts both snake_case and kebab-case spellings ("cyclic-chain").
inline EnvKind parse_env_kind(std::string name) {
  for (char& c : name) {
    if (c == '-') c = '_';
  }
  for (EnvKind kind : {EnvKind::kChain, EnvKind::kCyclicChain, EnvKind::kFrozenLake,
                       EnvKind::kAppendixC, EnvKind::kRandomDag, EnvKind::kSepsisLike,
                       EnvKind::kFile}) {
    if (to_string(kind) == name) return kind;
  }
  if (name == "lake") return EnvKind::kFrozenLake;
  throw InvalidArgument("unknown environment kind '" + name + "'");
}

/// Declarative environment description shared by the CLI and the service.
struct EnvSpec {
  EnvKind kind = EnvKind::kChain;
  std::size_t k = 5;
  std::string map = "4x4";
  std::optional<std::uint64_t> seed;
  double gamma = 0.9;
  std::size_t states = 6;
  std::size_t actions = 3;
  bool shared_rewards = false;
  /// Reward for (left, down, right, up); empty means the map default.
  std::vector<double> perturbation;
  std::string path;

  friend bool operator==(const EnvSpec&, const EnvSpec&) = default;
};

inline void validate_env_spec(const EnvSpec& spec) {
  const bool seeded = spec.kind == EnvKind::kChain || spec.kind == EnvKind::kCyclicChain ||
                      spec.kind == EnvKind::kRandomDag;
  if (seeded && !spec.seed) {
    throw InvalidArgument(std::string(to_string(spec.kind)) + " requires a reward seed");
  }
  if (!(spec.gamma >= 0.0 && spec.gamma <= 1.0)) throw InvalidArgument("gamma must lie in [0, 1]");
  if ((spec.kind == EnvKind::kChain || spec.kind == EnvKind::kCyclicChain) && spec.k < 2) {
    throw InvalidArgument("chain length k must be at least 2");
  }
  if (spec.kind == EnvKind::kFrozenLake && spec.map != "4x4" && spec.map != "8x8") {
    throw InvalidArgument("unknown FrozenLake map '" + spec.map + "'");
  }
  if (!spec.perturbation.empty() && spec.perturbation.size() != 4) {
    throw InvalidArgument("FrozenLake perturbation needs exactly 4 values");
  }
}

/// Builds every kind except kFile (which needs the JSON reader, see io.hpp).
inline TabularMdp build_environment(const EnvSpec& spec) {
  validate_env_spec(spec);
  switch (spec.kind) {
    case EnvKind::kChain: return build_chain(spec.k, *spec.seed, spec.gamma, spec.shared_rewards);
    case EnvKind::kCyclicChain:
      return build_cyclic_chain(spec.k, *spec.seed, spec.gamma, spec.shared_rewards);
    case EnvKind::kFrozenLake: {
      std::array<double, 4> perturbation = default_lake_perturbation(spec.map);
      if (!spec.perturbation.empty()) {
        std::copy(spec.perturbation.begin(), spec.perturbation.end(), perturbation.begin());
      }
      return build_frozen_lake_layout(lake_layout(spec.map), spec.gamma, perturbation);
    }
    case EnvKind::kAppendixC: return build_appendix_c_mdp(spec.gamma);
    case EnvKind::kRandomDag: return build_random_dag(spec.states, spec.actions, *spec.seed, spec.gamma);
    case EnvKind::kSepsisLike: {
      SepsisLikeParams params;
      params.gamma = spec.gamma;
      return build_sepsis_like(params).mdp;
    }
    case EnvKind::kFile: break;
  }
  throw InvalidArgument("file environments are loaded through load_environment()");
}

}  // namespace svp
