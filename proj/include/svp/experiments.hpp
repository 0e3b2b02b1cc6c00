#pragma once

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "svp/algorithms.hpp"
#include "svp/environments.hpp"
#include "svp/errors.hpp"
#include "svp/io.hpp"
#include "svp/metrics.hpp"
#include "svp/solvers.hpp"
#include "svp/td.hpp"

namespace svp {

/// Runs body(i) for i in [0, n) on up to `workers` threads. Each index writes
/// its own slot, so results do not depend on scheduling.
template <class Body>
void parallel_for(std::size_t n, std::size_t workers, Body&& body) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> threads;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    threads.emplace_back([&, w] {
      try {
        for (std::size_t i = next++; i < n; i = next++) body(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (std::thread& t : threads) t.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

inline std::size_t default_workers() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---------------------------------------------------------------------------
// Convergence grid
// ---------------------------------------------------------------------------

struct GridCell {
  double gamma = 0.0;
  double zeta = 0.0;
  bool converged = false;
  double average_size = 0.0;
  double average_size_decision = 0.0;
  std::size_t sweeps = 0;
  std::optional<std::string> error;
};

struct GridResult {
  std::vector<double> gammas;
  std::vector<double> zetas;
  /// Row-major by (gamma index, zeta index).
  std::vector<GridCell> cells;

  const GridCell& at(std::size_t gamma_index, std::size_t zeta_index) const {
    return cells[gamma_index * zetas.size() + zeta_index];
  }
};

/// Near-greedy VI on every (gamma, zeta) cell. A cell that throws is kept
/// with its error message and the rest of the grid still runs.
inline GridResult run_convergence_grid(const EnvSpec& spec, const std::vector<double>& gammas,
                                       const std::vector<double>& zetas, const NearGreedyViOptions& options = {},
                                       std::size_t workers = 1) {
  if (gammas.empty() || zetas.empty()) throw InvalidArgument("grid axes must be non-empty");
  GridResult result{gammas, zetas, std::vector<GridCell>(gammas.size() * zetas.size())};
  parallel_for(result.cells.size(), workers, [&](std::size_t i) {
    GridCell& cell = result.cells[i];
    cell.gamma = gammas[i / zetas.size()];
    cell.zeta = zetas[i % zetas.size()];
    try {
      EnvSpec cell_spec = spec;
      cell_spec.gamma = cell.gamma;
      const TabularMdp mdp = load_environment(cell_spec);
      const OptimalSolution optimal = value_iteration(mdp);
      const LearnedSvp learned = near_greedy_vi(mdp, optimal.v, cell.zeta, options);
      cell.converged = learned.converged();
      cell.sweeps = learned.trace.snapshots.size();
      cell.average_size = static_cast<double>(total_size(learned.policy.sets)) / static_cast<double>(mdp.state_count());
      const std::size_t decision = mdp.state_count() - mdp.terminal_states().size();
      cell.average_size_decision =
          decision == 0 ? 0.0 : static_cast<double>(decision_size(mdp, learned.policy.sets)) / static_cast<double>(decision);
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Baseline comparison
// ---------------------------------------------------------------------------

struct BaselineRow {
  double zeta = 0.0;
  std::string method;
  /// Set for iterative methods only.
  std::optional<bool> converged;
  double average_size = 0.0;
  double average_size_decision = 0.0;
  std::optional<double> worst_ratio;
  std::optional<std::string> error;
};

struct BaselineOptions {
  NearGreedyViOptions vi;
  /// Learn the Q-based baseline by TD instead of its model-based analogue.
  std::optional<LearnConfig> q_based_td;
};

inline const std::vector<std::string>& baseline_methods() {
  static const std::vector<std::string> methods = {"near-greedy", "conservative", "qstar-based", "q-based",
                                                   "additive"};
  return methods;
}

/// Average sizes and worst-case ratios of every construction at each zeta.
inline std::vector<BaselineRow> run_baseline_comparison(const TabularMdp& mdp, const std::vector<double>& zetas,
                                                        const BaselineOptions& options = {}) {
  if (zetas.empty()) throw InvalidArgument("zeta list must be non-empty");
  const OptimalSolution optimal = value_iteration(mdp);
  std::vector<BaselineRow> rows;
  for (double zeta : zetas) {
    for (const std::string& method : baseline_methods()) {
      BaselineRow row;
      row.zeta = zeta;
      row.method = method;
      try {
        std::vector<ActionSet> sets;
        if (method == "near-greedy") {
          const LearnedSvp learned = near_greedy_vi(mdp, optimal.v, zeta, options.vi);
          row.converged = learned.converged();
          sets = learned.policy.sets;
        } else if (method == "conservative") {
          sets = conservative_svp(mdp, optimal.v, zeta).sets;
        } else if (method == "qstar-based") {
          sets = qstar_based_svp(mdp, optimal.q, zeta).sets;
        } else if (method == "q-based") {
          if (options.q_based_td) {
            LearnConfig config = *options.q_based_td;
            config.zeta = zeta;
            const TdResult learned = q_based_td(mdp, config);
            row.converged = learned.converged();
            sets = with_full_terminals(mdp, learned.policy.sets);
          } else {
            const LearnedSvp learned = q_based_vi(mdp, zeta, options.vi);
            row.converged = learned.converged();
            sets = learned.policy.sets;
          }
        } else {
          sets = additive_svp(mdp, optimal.q, optimal.v, zeta).sets;
        }
        const SvpMetrics metrics = compute_metrics(mdp, sets, optimal.v);
        row.average_size = metrics.average_size;
        row.average_size_decision = metrics.average_size_decision;
        row.worst_ratio = metrics.worst_ratio;
      } catch (const std::exception& e) {
        row.error = e.what();
      }
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

enum class ReportFormat { kCsv, kJson };

inline ReportFormat parse_report_format(std::string_view text) {
  if (text == "csv") return ReportFormat::kCsv;
  if (text == "json") return ReportFormat::kJson;
  throw InvalidArgument("unknown report format '" + std::string(text) + "' (expected csv or json)");
}

inline std::string csv_number(double value) {
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.6f", value);
  return buffer;
}

inline std::string csv_field(const std::optional<double>& value) { return value ? csv_number(*value) : ""; }

inline std::string csv_text(const std::string& text) {
  if (text.find_first_of(",\"\n") == std::string::npos) return text;
  std::string out = "\"";
  for (char c : text) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

inline std::string grid_to_csv(const GridResult& grid) {
  std::string out = "gamma,zeta,converged,avg_size,avg_size_decision,sweeps,error\n";
  for (const GridCell& cell : grid.cells) {
    out += csv_number(cell.gamma) + "," + csv_number(cell.zeta) + "," + (cell.converged ? "true" : "false") + "," +
           csv_number(cell.average_size) + "," + csv_number(cell.average_size_decision) + "," +
           std::to_string(cell.sweeps) + "," + csv_text(cell.error.value_or("")) + "\n";
  }
  return out;
}

inline Json grid_to_json(const GridResult& grid) {
  Json cells = Json::array();
  for (const GridCell& cell : grid.cells) {
    Json row = {{"gamma", cell.gamma},
                {"zeta", cell.zeta},
                {"converged", cell.converged},
                {"avg_size", cell.average_size},
                {"avg_size_decision", cell.average_size_decision},
                {"sweeps", cell.sweeps}};
    row["error"] = cell.error ? Json(*cell.error) : Json(nullptr);
    cells.push_back(std::move(row));
  }
  return Json{{"gammas", grid.gammas}, {"zetas", grid.zetas}, {"cells", std::move(cells)}};
}

inline std::string baselines_to_csv(const std::vector<BaselineRow>& rows) {
  std::string out = "zeta,method,converged,avg_size,avg_size_decision,worst_ratio,error\n";
  for (const BaselineRow& row : rows) {
    const std::string converged = row.converged ? (*row.converged ? "true" : "false") : "";
    out += csv_number(row.zeta) + "," + row.method + "," + converged + "," + csv_number(row.average_size) + "," +
           csv_number(row.average_size_decision) + "," + csv_field(row.worst_ratio) + "," +
           csv_text(row.error.value_or("")) + "\n";
  }
  return out;
}

inline Json baselines_to_json(const std::vector<BaselineRow>& rows) {
  Json out = Json::array();
  for (const BaselineRow& row : rows) {
    Json item = {{"zeta", row.zeta}, {"method", row.method}};
    item["converged"] = row.converged ? Json(*row.converged) : Json(nullptr);
    item["avg_size"] = row.average_size;
    item["avg_size_decision"] = row.average_size_decision;
    item["worst_ratio"] = row.worst_ratio ? Json(*row.worst_ratio) : Json(nullptr);
    item["error"] = row.error ? Json(*row.error) : Json(nullptr);
    out.push_back(std::move(item));
  }
  return out;
}

inline std::string render_report(const GridResult& grid, ReportFormat format) {
  return format == ReportFormat::kCsv ? grid_to_csv(grid) : grid_to_json(grid).dump(2) + "\n";
}

inline std::string render_report(const std::vector<BaselineRow>& rows, ReportFormat format) {
  return format == ReportFormat::kCsv ? baselines_to_csv(rows) : baselines_to_json(rows).dump(2) + "\n";
}

template <class Result>
void emit_report(const Result& result, const std::string& path, std::string_view format) {
  write_text_file(path, render_report(result, parse_report_format(format)));
}

}  // namespace svp
