#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "svp/construct.hpp"
#include "svp/environments.hpp"
#include "svp/errors.hpp"
#include "svp/io.hpp"
#include "svp/mdp.hpp"
#include "svp/policy.hpp"
#include "svp/rng.hpp"
#include "svp/solvers.hpp"
#include "svp/td.hpp"

namespace svp {

/// Error carrying an HTTP status code.
class ServiceError : public std::runtime_error {
 public:
  ServiceError(int status, const std::string& message) : std::runtime_error(message), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct HistoryEntry {
  StateIndex state;
  ActionSet offered;
  ActionIndex action;
  double reward;
  StateIndex next;
  bool off_menu;
};

inline constexpr std::size_t kSessionStepLimit = 10'000;

/// One rollout of an SVP. Not thread-safe on its own; SessionStore
/// serialises access per session.
class Session {
 public:
  Session(std::string id, EnvSpec spec, TabularMdp mdp, std::string algo, double zeta, std::uint64_t seed,
          bool allow_off_menu)
      : id_(std::move(id)),
        spec_(std::move(spec)),
        mdp_(std::move(mdp)),
        algo_(std::move(algo)),
        zeta_(zeta),
        seed_(seed),
        allow_off_menu_(allow_off_menu),
        optimal_(value_iteration(mdp_)) {
    try {
      Construction built = construct_svp(mdp_, optimal_, algo_, zeta_);
      if (!built.converged()) {
        throw ServiceError(422, algo_ + " did not converge on this environment: " + built.trace->summary());
      }
      policy_ = std::move(built.policy);
      q_pi_ = svp_policy_evaluation(mdp_, policy_.sets);
    } catch (const ServiceError&) {
      throw;
    } catch (const std::exception& e) {
      throw ServiceError(422, algo_ + " cannot be solved on this environment: " + e.what());
    }
    start();
  }

  const std::string& id() const { return id_; }
  const TabularMdp& mdp() const { return mdp_; }
  const SetValuedPolicy& policy() const { return policy_; }
  const QTable& q_pi() const { return q_pi_; }
  const OptimalSolution& optimal() const { return optimal_; }
  StateIndex state() const { return state_; }
  StateIndex start_state() const { return start_state_; }
  bool done() const { return done_; }
  double discounted_return() const { return return_; }
  const std::vector<HistoryEntry>& history() const { return history_; }
  ActionSet offered() const { return policy_.sets[state_]; }

  Json act(ActionIndex action, bool off_menu) {
    if (done_) throw ServiceError(410, "session " + id_ + " has finished; reset it to play again");
    if (action >= mdp_.action_count()) throw ServiceError(400, "action " + std::to_string(action) + " does not exist");
    const bool offered_action = offered().contains(action);
    if (!offered_action && !(off_menu && allow_off_menu_)) {
      throw ServiceError(409, "action " + std::to_string(action) + " is not in the offered set");
    }
    const StepOutcome out = MdpSimulator(mdp_).step(state_, action, rng_);
    history_.push_back({state_, offered(), action, out.reward, out.next, !offered_action});
    return_ += discount_ * out.reward;
    discount_ *= mdp_.gamma();
    state_ = out.next;
    done_ = out.done || history_.size() >= kSessionStepLimit;
    return observation();
  }

  Json reset() {
    ++resets_;
    start();
    return observation();
  }

  Json observation() const {
    Json offered_actions = Json::array();
    for (ActionIndex a = 0; a < mdp_.action_count(); ++a) {
      offered_actions.push_back({{"action", a},
                                 {"label", mdp_.action_label(a)},
                                 {"offered", offered().contains(a)},
                                 {"q_pi", q_pi_(state_, a)},
                                 {"q_star", optimal_.q(state_, a)}});
    }
    const double v_star = optimal_.v[state_];
    Json out = {{"session_id", id_},
                {"state", state_},
                {"state_label", mdp_.state_label(state_)},
                {"step", history_.size()},
                {"done", done_},
                {"actions", std::move(offered_actions)},
                {"offered", offered().members()},
                {"v_star", v_star},
                {"v_pi", q_pi_.min_over(state_, offered())},
                {"floor", (1.0 - zeta_) * v_star},
                {"guarantee", (1.0 - zeta_) * optimal_.v[start_state_]},
                {"return", return_},
                {"zeta", zeta_},
                {"allow_off_menu", allow_off_menu_}};
    if (!history_.empty()) out["last_reward"] = history_.back().reward;
    return out;
  }

  Json describe() const {
    Json history = Json::array();
    for (const HistoryEntry& h : history_) {
      history.push_back({{"state", h.state},
                         {"offered", h.offered.members()},
                         {"action", h.action},
                         {"reward", h.reward},
                         {"next", h.next},
                         {"off_menu", h.off_menu}});
    }
    Json out = observation();
    out["env"] = env_spec_to_json(spec_);
    out["algo"] = algo_;
    out["seed"] = seed_;
    out["resets"] = resets_;
    out["start_state"] = start_state_;
    out["history"] = std::move(history);
    out["state_labels"] = mdp_.state_labels();
    return out;
  }

 private:
  void start() {
    rng_ = Rng(mix_seed(seed_, resets_));
    state_ = rng_.categorical(mdp_.start_distribution());
    start_state_ = state_;
    done_ = mdp_.is_terminal(state_);
    return_ = 0.0;
    discount_ = 1.0;
    history_.clear();
  }

  std::string id_;
  EnvSpec spec_;
  TabularMdp mdp_;
  std::string algo_;
  double zeta_;
  std::uint64_t seed_;
  bool allow_off_menu_;
  OptimalSolution optimal_;
  SetValuedPolicy policy_;
  QTable q_pi_;
  Rng rng_{0};
  std::uint64_t resets_ = 0;
  StateIndex state_ = 0;
  StateIndex start_state_ = 0;
  bool done_ = false;
  double return_ = 0.0;
  double discount_ = 1.0;
  std::vector<HistoryEntry> history_;
};

/// Thread-safe session registry. Lookups share the store lock; work on one
/// session holds that session's own mutex.
class SessionStore {
 public:
  /// Request: {"env": EnvSpec, "zeta": z, "algo": name, "seed": n,
  /// "allow_off_menu": bool}.
  Json create(const Json& request) {
    EnvSpec spec;
    double zeta = 0.05;
    std::string algo = "near-greedy-vi";
    std::uint64_t seed = 0;
    bool allow_off_menu = false;
    TabularMdp mdp = parse_request(request, spec, zeta, algo, seed, allow_off_menu);
    std::string id;
    {
      std::unique_lock lock(mutex_);
      id = "s" + std::to_string(++counter_);
    }
    auto entry = std::make_shared<Entry>(
        Session(id, std::move(spec), std::move(mdp), std::move(algo), zeta, seed, allow_off_menu));
    Json observation = entry->session.observation();
    std::unique_lock lock(mutex_);
    sessions_.emplace(id, std::move(entry));
    return observation;
  }

  Json describe(const std::string& id) const {
    auto entry = find(id);
    std::lock_guard guard(entry->mutex);
    return entry->session.describe();
  }

  /// Request: {"action": a, "off_menu": bool}.
  Json act(const std::string& id, const Json& request) {
    auto entry = find(id);
    ActionIndex action = 0;
    bool off_menu = false;
    try {
      action = request.at("action").get<ActionIndex>();
      off_menu = request.value("off_menu", false);
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError(400, std::string("malformed act request: ") + e.what());
    }
    std::lock_guard guard(entry->mutex);
    return entry->session.act(action, off_menu);
  }

  Json reset(const std::string& id) {
    auto entry = find(id);
    std::lock_guard guard(entry->mutex);
    return entry->session.reset();
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return sessions_.size();
  }

 private:
  struct Entry {
    explicit Entry(Session s) : session(std::move(s)) {}
    std::mutex mutex;
    Session session;
  };

  std::shared_ptr<Entry> find(const std::string& id) const {
    std::shared_lock lock(mutex_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw ServiceError(404, "unknown session '" + id + "'");
    return it->second;
  }

  static TabularMdp parse_request(const Json& request, EnvSpec& spec, double& zeta, std::string& algo,
                                  std::uint64_t& seed, bool& allow_off_menu) {
    try {
      if (!request.is_object()) throw InvalidArgument("request body must be a JSON object");
      seed = request.value("seed", seed);
      Json env = request.at("env");
      if (env.is_object() && !env.contains("seed")) env["seed"] = seed;
      spec = env_spec_from_json(env);
      if (spec.kind == EnvKind::kFile) throw InvalidArgument("file environments are not served");
      zeta = request.value("zeta", zeta);
      if (!(zeta >= 0.0 && zeta <= 1.0)) throw InvalidArgument("zeta must lie in [0, 1]");
      algo = request.value("algo", algo);
      allow_off_menu = request.value("allow_off_menu", allow_off_menu);
      bool known = false;
      for (const std::string& name : construction_names()) known = known || name == algo;
      if (!known) throw InvalidArgument("unknown algorithm '" + algo + "'");
      return build_environment(spec);
    } catch (const nlohmann::json::exception& e) {
      throw ServiceError(400, std::string("malformed session request: ") + e.what());
    } catch (const InvalidArgument& e) {
      throw ServiceError(400, e.what());
    }
  }

  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::uint64_t counter_ = 0;
};

/// Environment presets offered to clients.
inline Json environment_catalog() {
  Json envs = Json::array();
  envs.push_back({{"kind", "chain"}, {"k", 5}, {"seed", 0}, {"gamma", 0.9}});
  envs.push_back({{"kind", "cyclic_chain"}, {"k", 5}, {"seed", 0}, {"gamma", 0.9}});
  envs.push_back({{"kind", "frozen_lake"}, {"map", "4x4"}, {"gamma", 0.9}});
  envs.push_back({{"kind", "frozen_lake"}, {"map", "8x8"}, {"gamma", 0.9}});
  envs.push_back({{"kind", "appendix_c"}, {"gamma", 0.9}});
  Json algos = Json::array();
  for (const std::string& name : construction_names()) algos.push_back(name);
  return Json{{"envs", std::move(envs)}, {"algos", std::move(algos)}};
}

}  // namespace svp
