#pragma once

#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "svp/construct.hpp"
#include "svp/environments.hpp"
#include "svp/errors.hpp"
#include "svp/experiments.hpp"
#include "svp/io.hpp"
#include "svp/metrics.hpp"
#include "svp/offline.hpp"
#include "svp/oracle.hpp"
#include "svp/rollout_http.hpp"
#include "svp/solvers.hpp"
#include "svp/td.hpp"

namespace svp {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitRuntime = 2;

namespace cli {

struct EnvOptions {
  std::string kind = "chain";
  std::string file;
  std::size_t k = 5;
  std::string map = "4x4";
  std::uint64_t seed = 0;
  double gamma = 0.9;
  std::size_t states = 6;
  std::size_t actions = 3;
  CLI::Option* seed_option = nullptr;
  CLI::Option* file_option = nullptr;

  EnvSpec spec() const {
    EnvSpec spec;
    if (file_option->count() > 0) {
      spec.kind = EnvKind::kFile;
      spec.path = file;
    } else {
      spec.kind = parse_env_kind(kind);
    }
    spec.k = k;
    spec.map = map;
    spec.gamma = gamma;
    spec.states = states;
    spec.actions = actions;
    if (seed_option->count() > 0) spec.seed = seed;
    validate_env_spec(spec);
    return spec;
  }

  /// File MDPs keep their own discount.
  TabularMdp mdp() const {
    const EnvSpec env = spec();
    if (env.kind != EnvKind::kFile) return build_environment(env);
    return load_mdp_file(env.path);
  }
};

inline void add_env_options(CLI::App& app, EnvOptions& env, bool seed_required) {
  app.add_option("--env", env.kind, "environment: chain, cyclic-chain, frozen-lake, appendix-c, random-dag, sepsis-like")
      ->capture_default_str();
  env.file_option = app.add_option("--env-file", env.file, "MDP JSON file (overrides --env)");
  app.add_option("--k", env.k, "chain length")->capture_default_str();
  app.add_option("--map", env.map, "FrozenLake map: 4x4 or 8x8")->capture_default_str();
  app.add_option("--gamma", env.gamma, "discount factor")->capture_default_str();
  app.add_option("--states", env.states, "random-dag state count")->capture_default_str();
  app.add_option("--actions", env.actions, "random-dag action count")->capture_default_str();
  env.seed_option = app.add_option("--seed", env.seed, "seed for rewards and sampling");
  if (seed_required) env.seed_option->required();
}

struct OutputOptions {
  std::string out;
  std::string format = "json";
};

inline void add_output_options(CLI::App& app, OutputOptions& output, const std::string& default_format) {
  output.format = default_format;
  app.add_option("--out", output.out, "output path (standard output when omitted)");
  app.add_option("--format", output.format, "csv or json")
      ->check(CLI::IsMember({"csv", "json"}))
      ->capture_default_str();
}

inline void emit(const OutputOptions& output, const std::string& text, std::ostream& out) {
  if (output.out.empty()) {
    out << text;
  } else {
    write_text_file(output.out, text);
  }
}

inline void require_json(const OutputOptions& output, const std::string& command) {
  if (output.format != "json") throw CLI::ValidationError("--format", command + " only writes json");
}

inline std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::logic_error&) {
      throw CLI::ValidationError(flag, "'" + item + "' is not a number");
    }
  }
  if (values.empty()) throw CLI::ValidationError(flag, "list is empty");
  return values;
}

inline Json optional_json(const std::optional<double>& value) { return value ? Json(*value) : Json(nullptr); }

inline Json metrics_to_json(const SvpMetrics& metrics) {
  Json ratios = Json::array();
  for (const auto& r : metrics.state_ratio) ratios.push_back(optional_json(r));
  return Json{{"avg_size", metrics.average_size},
              {"avg_size_decision", metrics.average_size_decision},
              {"worst_ratio", optional_json(metrics.worst_ratio)},
              {"worst_deviation", optional_json(metrics.worst_deviation())},
              {"state_ratio", std::move(ratios)},
              {"v_pi", metrics.v_pi}};
}

inline Json oracle_comparison_to_json(const OracleComparison& c) {
  return Json{{"zeta", c.zeta},
              {"near_greedy_converged", c.near_greedy_converged},
              {"near_greedy_size", c.near_greedy_size},
              {"oracle_size", c.oracle_size},
              {"near_greedy_ratio", optional_json(c.near_greedy_ratio)},
              {"oracle_ratio", optional_json(c.oracle_ratio)},
              {"near_greedy_feasible", c.near_greedy_feasible},
              {"identical", c.identical},
              {"oracle_feasible_count", c.oracle.feasible_count},
              {"oracle_examined", c.oracle.examined},
              {"search_space_size", c.oracle.search_space_size},
              {"near_greedy", policy_to_json(c.near_greedy)},
              {"oracle", policy_to_json(c.oracle.best)}};
}

}  // namespace cli

/// Runs one CLI invocation. Results go to `out` (or --out files), diagnostics
/// to `err`.
inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  using cli::EnvOptions;
  using cli::OutputOptions;
  CLI::App app{"Near-optimal set-valued policies for tabular MDPs", "svp"};
  app.require_subcommand(1);

  double zeta = 0.05;
  std::string zetas_text;
  std::string gammas_text;
  std::size_t episodes = 200'000;

  // solve
  EnvOptions solve_env;
  OutputOptions solve_out;
  std::string solve_algo = "near-greedy-vi";
  CLI::App* solve = app.add_subcommand("solve", "value iteration or a model-based SVP construction");
  cli::add_env_options(*solve, solve_env, false);
  cli::add_output_options(*solve, solve_out, "json");
  solve->add_option("--zeta", zeta, "sub-optimality margin")->capture_default_str();
  solve->add_option("--algo", solve_algo, "value-iteration or a construction name")->capture_default_str();

  // learn
  EnvOptions learn_env;
  OutputOptions learn_out;
  std::string learn_algo = "near-greedy-td";
  std::string data_path;
  double alpha = 0.5;
  double epsilon = 0.1;
  CLI::App* learn = app.add_subcommand("learn", "TD learning of an SVP (online or from trajectories)");
  cli::add_env_options(*learn, learn_env, true);
  cli::add_output_options(*learn, learn_out, "json");
  learn->add_option("--zeta", zeta, "sub-optimality margin")->capture_default_str();
  learn->add_option("--algo", learn_algo, "near-greedy-td, q-based-td, q-learning or offline")
      ->check(CLI::IsMember({"near-greedy-td", "q-based-td", "q-learning", "offline"}))
      ->capture_default_str();
  learn->add_option("--episodes", episodes, "training episodes")->capture_default_str();
  learn->add_option("--alpha", alpha, "initial step size")->capture_default_str();
  learn->add_option("--epsilon", epsilon, "exploration rate")->capture_default_str();
  learn->add_option("--data", data_path, "trajectory JSONL for --algo offline");

  // oracle
  EnvOptions oracle_env;
  OutputOptions oracle_out;
  CLI::App* oracle = app.add_subcommand("oracle", "exhaustive maximal SVP against near-greedy VI");
  cli::add_env_options(*oracle, oracle_env, false);
  cli::add_output_options(*oracle, oracle_out, "json");
  oracle->add_option("--zeta", zeta, "sub-optimality margin")->capture_default_str();
  oracle->add_option("--zetas", zetas_text, "comma-separated margins (overrides --zeta)");

  // grid
  EnvOptions grid_env;
  OutputOptions grid_out;
  std::size_t workers = 1;
  CLI::App* grid = app.add_subcommand("grid", "near-greedy VI convergence over a (gamma, zeta) grid");
  cli::add_env_options(*grid, grid_env, false);
  cli::add_output_options(*grid, grid_out, "csv");
  grid->add_option("--gammas", gammas_text, "comma-separated discounts")->required();
  grid->add_option("--zetas", zetas_text, "comma-separated margins")->required();
  grid->add_option("--workers", workers, "worker threads")->capture_default_str()->check(CLI::PositiveNumber);

  // compare
  EnvOptions compare_env;
  OutputOptions compare_out;
  CLI::App* compare = app.add_subcommand("compare", "baseline comparison across margins");
  cli::add_env_options(*compare, compare_env, false);
  cli::add_output_options(*compare, compare_out, "csv");
  compare->add_option("--zetas", zetas_text, "comma-separated margins")->required();

  // evaluate
  EnvOptions evaluate_env;
  OutputOptions evaluate_out;
  std::string policy_path;
  CLI::App* evaluate = app.add_subcommand("evaluate", "worst-case evaluation and metrics of a policy file");
  cli::add_env_options(*evaluate, evaluate_env, false);
  cli::add_output_options(*evaluate, evaluate_out, "json");
  evaluate->add_option("--policy", policy_path, "policy JSON")->required();

  // ope
  OutputOptions ope_out;
  std::uint64_t ope_seed = 0;
  std::size_t behavior_episodes = 30'000;
  std::size_t draws = 1000;
  std::string trajectories_path;
  double ope_gamma = 0.99;
  CLI::App* ope = app.add_subcommand("ope", "offline training and DR/WDR evaluation on the sepsis-like simulator");
  cli::add_output_options(*ope, ope_out, "json");
  ope->add_option("--seed", ope_seed, "seed")->required();
  ope->add_option("--zeta", zeta, "sub-optimality margin")->capture_default_str();
  ope->add_option("--gamma", ope_gamma, "discount factor")->capture_default_str();
  ope->add_option("--episodes", episodes, "replayed training episodes")->capture_default_str();
  ope->add_option("--behavior-episodes", behavior_episodes, "logged behaviour episodes")->capture_default_str();
  ope->add_option("--draws", draws, "bootstrap draws")->capture_default_str();
  ope->add_option("--trajectories-out", trajectories_path, "also write the behaviour episodes as JSONL");

  // rollout-serve
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string static_dir;
  CLI::App* serve = app.add_subcommand("rollout-serve", "serve the session API over HTTP");
  serve->add_option("--host", host, "bind address")->capture_default_str();
  serve->add_option("--port", port, "port")->capture_default_str();
  serve->add_option("--static", static_dir, "directory served at /");

  const auto usage = [&](const CLI::Error& e) {
    const CLI::App* context = &app;
    for (CLI::App* sub : app.get_subcommands()) context = sub;
    err << "error: " << e.what() << "\n\n" << context->help();
    return kExitUsage;
  };

  std::vector<std::string> args;
  for (int i = argc - 1; i > 0; --i) args.emplace_back(argv[i]);
  try {
    app.parse(std::move(args));
  } catch (const CLI::CallForHelp&) {
    const CLI::App* context = &app;
    for (CLI::App* sub : app.get_subcommands()) context = sub;
    out << context->help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    return usage(e);
  }

  try {
    if (solve->parsed()) {
      cli::require_json(solve_out, "solve");
      const TabularMdp mdp = solve_env.mdp();
      const OptimalSolution optimal = value_iteration(mdp);
      Json doc;
      if (solve_algo == "value-iteration") {
        const SetValuedPolicy greedy{greedy_sets(mdp, optimal.q), 0.0, mdp.gamma(), "value-iteration", optimal.q,
                                     optimal.v};
        doc = policy_to_json(greedy);
        doc["converged"] = true;
      } else {
        Construction built = construct_svp(mdp, optimal, solve_algo, zeta);
        built.policy.v_star = optimal.v;
        doc = policy_to_json(built.policy);
        doc["converged"] = built.converged();
        if (built.trace) {
          doc["trace"] = built.trace->summary();
          if (!built.converged()) err << "warning: " << built.trace->summary() << "\n";
        }
      }
      cli::emit(solve_out, doc.dump(2) + "\n", out);
    } else if (learn->parsed()) {
      cli::require_json(learn_out, "learn");
      const TabularMdp mdp = learn_env.mdp();
      LearnConfig config;
      config.zeta = zeta;
      config.episodes = episodes;
      config.seed = learn_env.seed;
      config.epsilon = epsilon;
      config.schedule = StepSchedule::harmonic(alpha);
      config.validate();
      TdResult result;
      if (learn_algo == "offline") {
        if (data_path.empty()) throw CLI::RequiredError("--data");
        const TrajectoryDataset data =
            ingest_trajectories_text(read_text_file(data_path), mdp.state_count(), mdp.action_count());
        OfflinePipelineConfig offline;
        offline.zeta = zeta;
        offline.train_episodes = episodes;
        offline.seed = learn_env.seed;
        OfflineSvp trained = train_offline_svp(data, mdp.gamma(), offline);
        result = std::move(trained.trained);
      } else if (learn_algo == "near-greedy-td") {
        result = near_greedy_td(mdp, value_iteration(mdp).v, config);
      } else if (learn_algo == "q-based-td") {
        result = q_based_td(mdp, config);
      } else {
        result = q_learning(mdp, config);
      }
      Json doc = policy_to_json(result.policy);
      doc["converged"] = result.converged();
      doc["trace"] = result.trace.summary();
      cli::emit(learn_out, doc.dump(2) + "\n", out);
    } else if (oracle->parsed()) {
      cli::require_json(oracle_out, "oracle");
      const TabularMdp mdp = oracle_env.mdp();
      const OptimalSolution optimal = value_iteration(mdp);
      const std::vector<double> zetas = zetas_text.empty() ? std::vector<double>{zeta}
                                                           : cli::parse_list(zetas_text, "--zetas");
      Json rows = Json::array();
      for (double z : zetas) rows.push_back(cli::oracle_comparison_to_json(oracle_compare(mdp, optimal.v, z)));
      cli::emit(oracle_out, rows.dump(2) + "\n", out);
    } else if (grid->parsed()) {
      const std::vector<double> gammas = cli::parse_list(gammas_text, "--gammas");
      const std::vector<double> zetas = cli::parse_list(zetas_text, "--zetas");
      const GridResult result = run_convergence_grid(grid_env.spec(), gammas, zetas, {}, workers);
      cli::emit(grid_out, render_report(result, parse_report_format(grid_out.format)), out);
    } else if (compare->parsed()) {
      const std::vector<double> zetas = cli::parse_list(zetas_text, "--zetas");
      const auto rows = run_baseline_comparison(compare_env.mdp(), zetas);
      cli::emit(compare_out, render_report(rows, parse_report_format(compare_out.format)), out);
    } else if (evaluate->parsed()) {
      cli::require_json(evaluate_out, "evaluate");
      const TabularMdp mdp = evaluate_env.mdp();
      const SetValuedPolicy policy = policy_from_json(parse_json_text(read_text_file(policy_path), policy_path));
      validate_policy(mdp, policy.sets);
      const OptimalSolution optimal = value_iteration(mdp);
      const SvpMetrics metrics = compute_metrics(mdp, policy.sets, optimal.v);
      Json doc = cli::metrics_to_json(metrics);
      doc["zeta"] = policy.zeta;
      doc["zeta_optimal"] = is_zeta_optimal(metrics.v_pi, optimal.v, policy.zeta);
      doc["v_star"] = optimal.v;
      cli::emit(evaluate_out, doc.dump(2) + "\n", out);
    } else if (ope->parsed()) {
      cli::require_json(ope_out, "ope");
      SepsisLikeParams params;
      params.gamma = ope_gamma;
      OfflinePipelineConfig config;
      config.zeta = zeta;
      config.train_episodes = episodes;
      config.behavior_episodes = behavior_episodes;
      config.bootstrap_draws = draws;
      config.seed = ope_seed;
      if (!trajectories_path.empty()) {
        const SepsisLikeEnv env = build_sepsis_like(params);
        const MdpSimulator sim(env.mdp, env.entry_reward);
        write_text_file(trajectories_path, episodes_to_jsonl(generate_episodes(
                                               sim, clinician_behavior(env.mdp), behavior_episodes, ope_seed)));
      }
      cli::emit(ope_out, sepsis_study_to_json(run_sepsis_study(params, config)).dump(2) + "\n", out);
    } else if (serve->parsed()) {
      SessionStore store;
      httplib::Server server;
      install_rollout_routes(server, store, static_dir);
      err << "serving on http://" << host << ":" << port << "\n";
      if (!server.listen(host, port)) throw std::runtime_error("cannot listen on " + host + ":" + std::to_string(port));
    }
  } catch (const CLI::Error& e) {
    return usage(e);
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}

}  // namespace svp
