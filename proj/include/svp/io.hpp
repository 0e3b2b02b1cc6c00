#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "svp/environments.hpp"
#include "svp/errors.hpp"
#include "svp/mdp.hpp"
#include "svp/policy.hpp"

namespace svp {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// MDP documents
// ---------------------------------------------------------------------------

inline Json mdp_to_json(const TabularMdp& mdp) {
  Json doc;
  doc["states"] = mdp.state_labels();
  doc["actions"] = mdp.action_labels();
  doc["gamma"] = mdp.gamma();
  doc["terminal"] = mdp.terminal_states();
  doc["start"] = mdp.start_distribution();
  Json transitions = Json::array();
  Json rewards = Json::array();
  for (StateIndex s = 0; s < mdp.state_count(); ++s) {
    if (mdp.is_terminal(s)) continue;
    for (ActionIndex a = 0; a < mdp.action_count(); ++a) {
      Json next = Json::array();
      for (const Transition& t : mdp.successors(s, a)) {
        next.push_back({{"sp", t.next}, {"p", t.probability}});
      }
      transitions.push_back({{"s", s}, {"a", a}, {"next", std::move(next)}});
      rewards.push_back({{"s", s}, {"a", a}, {"r", mdp.reward(s, a)}});
    }
  }
  doc["transitions"] = std::move(transitions);
  doc["rewards"] = std::move(rewards);
  return doc;
}

/// Parses the MDP document. Terminal rows may be omitted; they are made
/// absorbing. Structural problems raise InvalidArgument.
inline TabularMdp mdp_from_json(const Json& doc) {
  try {
    const auto states = doc.at("states").get<std::vector<std::string>>();
    const auto actions = doc.at("actions").get<std::vector<std::string>>();
    MdpDraft draft(states.size(), actions.size(), doc.at("gamma").get<double>());
    for (const auto& s : doc.at("terminal")) draft.set_terminal(s.get<std::size_t>());
    const auto start = doc.at("start").get<std::vector<double>>();
    if (start.size() != states.size()) throw InvalidArgument("start vector length mismatch");
    for (std::size_t s = 0; s < start.size(); ++s) draft.set_start(s, start[s]);
    for (const auto& row : doc.at("transitions")) {
      const auto s = row.at("s").get<std::size_t>();
      const auto a = row.at("a").get<std::size_t>();
      for (const auto& next : row.at("next")) {
        draft.add_transition(s, a, next.at("sp").get<std::size_t>(), next.at("p").get<double>());
      }
    }
    if (doc.contains("rewards")) {
      for (const auto& row : doc.at("rewards")) {
        draft.set_reward(row.at("s").get<std::size_t>(), row.at("a").get<std::size_t>(),
                         row.at("r").get<double>());
      }
    }
    draft.set_state_labels(states);
    draft.set_action_labels(actions);
    return draft.build();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed MDP document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Policy documents
// ---------------------------------------------------------------------------

inline Json policy_to_json(const SetValuedPolicy& policy) {
  Json doc;
  doc["zeta"] = policy.zeta;
  doc["gamma"] = policy.gamma;
  doc["source"] = policy.source;
  Json sets = Json::object();
  for (StateIndex s = 0; s < policy.sets.size(); ++s) {
    sets[std::to_string(s)] = policy.sets[s].members();
  }
  doc["sets"] = std::move(sets);
  if (policy.q) {
    Json rows = Json::array();
    for (StateIndex s = 0; s < policy.q->state_count(); ++s) {
      const auto row = policy.q->row(s);
      rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    doc["q"] = std::move(rows);
  }
  if (policy.v_star) doc["v_star"] = *policy.v_star;
  return doc;
}

inline SetValuedPolicy policy_from_json(const Json& doc) {
  try {
    SetValuedPolicy policy;
    policy.zeta = doc.value("zeta", 0.0);
    policy.gamma = doc.value("gamma", 0.0);
    policy.source = doc.value("source", std::string{});
    const Json& sets = doc.at("sets");
    policy.sets.assign(sets.size(), ActionSet{});
    for (const auto& [key, members] : sets.items()) {
      const std::size_t s = std::stoul(key);
      if (s >= policy.sets.size()) throw InvalidArgument("policy state key out of range: " + key);
      for (const auto& a : members) {
        const auto action = a.get<std::size_t>();
        if (action >= kMaxActions) throw InvalidArgument("policy action index out of range");
        policy.sets[s].insert(action);
      }
    }
    if (doc.contains("q")) {
      const auto rows = doc.at("q").get<std::vector<std::vector<double>>>();
      QTable q(rows.size(), rows.empty() ? 0 : rows.front().size());
      for (std::size_t s = 0; s < rows.size(); ++s) {
        for (std::size_t a = 0; a < rows[s].size(); ++a) q(s, a) = rows[s][a];
      }
      policy.q = std::move(q);
    }
    if (doc.contains("v_star")) policy.v_star = doc.at("v_star").get<ValueTable>();
    return policy;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed policy document: ") + e.what());
  } catch (const std::logic_error& e) {
    throw InvalidArgument(std::string("malformed policy document: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Environment specs
// ---------------------------------------------------------------------------

inline Json env_spec_to_json(const EnvSpec& spec) {
  Json doc;
  doc["kind"] = std::string(to_string(spec.kind));
  switch (spec.kind) {
    case EnvKind::kChain:
    case EnvKind::kCyclicChain:
      doc["k"] = spec.k;
      if (spec.shared_rewards) doc["shared_rewards"] = true;
      break;
    case EnvKind::kFrozenLake:
      doc["map"] = spec.map;
      if (!spec.perturbation.empty()) doc["perturbation"] = spec.perturbation;
      break;
    case EnvKind::kRandomDag:
      doc["states"] = spec.states;
      doc["actions"] = spec.actions;
      break;
    case EnvKind::kFile: doc["path"] = spec.path; break;
    default: break;
  }
  if (spec.seed) doc["seed"] = *spec.seed;
  doc["gamma"] = spec.gamma;
  return doc;
}

inline EnvSpec env_spec_from_json(const Json& doc) {
  try {
    EnvSpec spec;
    spec.kind = parse_env_kind(doc.at("kind").get<std::string>());
    spec.k = doc.value("k", spec.k);
    spec.map = doc.value("map", spec.map);
    if (doc.contains("seed") && !doc.at("seed").is_null()) spec.seed = doc.at("seed").get<std::uint64_t>();
    spec.gamma = doc.value("gamma", spec.gamma);
    spec.states = doc.value("states", spec.states);
    spec.actions = doc.value("actions", spec.actions);
    spec.shared_rewards = doc.value("shared_rewards", false);
    if (doc.contains("perturbation")) spec.perturbation = doc.at("perturbation").get<std::vector<double>>();
    spec.path = doc.value("path", std::string{});
    validate_env_spec(spec);
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("malformed environment spec: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Files
// ---------------------------------------------------------------------------

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "' for reading");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path + "' for writing");
  out << text;
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

inline Json parse_json_text(const std::string& text, const std::string& what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument(what + " is not valid JSON: " + e.what());
  }
}

inline TabularMdp load_mdp_file(const std::string& path) {
  return mdp_from_json(parse_json_text(read_text_file(path), path));
}

inline void save_mdp_file(const TabularMdp& mdp, const std::string& path) {
  write_text_file(path, mdp_to_json(mdp).dump(2) + "\n");
}

/// build_environment plus the file kind.
inline TabularMdp load_environment(const EnvSpec& spec) {
  if (spec.kind == EnvKind::kFile) return load_mdp_file(spec.path);
  return build_environment(spec);
}

}  // namespace svp
