#pragma once

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "carma/io.hpp"
#include "carma/oracle.hpp"
#include "carma/sim.hpp"
#include "carma/strategy.hpp"

namespace carma::cli {

namespace detail {

using io::detail::fmt6;

inline std::filesystem::path resolve_out(const std::filesystem::path& path) {
  if (path.is_absolute()) return path;
  if (const char* dir = std::getenv("CARMA_OUT_DIR"); dir != nullptr && *dir != '\0')
    return std::filesystem::path(dir) / path;
  return path;
}

inline sim::SimOptions sim_options(const std::optional<double>& epsilon,
                                   const std::string& budget_mode,
                                   const std::string& baseline_mode) {
  sim::SimOptions opts;
  opts.epsilon = epsilon;
  if (!budget_mode.empty())
    opts.budget_mode = io::budget_mode_from(budget_mode, "--budget-mode");
  if (!baseline_mode.empty())
    opts.baseline_mode = io::baseline_mode_from(baseline_mode, "--baseline-mode");
  return opts;
}

// Mean per-period performance of the period-by-period optimal assignment
// (chosen on the phase profiles, realized under congestion).
inline std::optional<double> optimal_throughput(const Scenario& scenario, Time horizon) {
  try {
    std::vector<double> per_app(scenario.applications.size(), 0.0);
    std::vector<int> active(scenario.applications.size(), 0);
    for (Time t = 0; t < horizon; ++t) {
      const auto matrix = oracle::valuation_matrix(scenario, t);
      const auto best = oracle::brute_force_optimal(matrix, scenario.resources);
      std::vector<std::size_t> holders(scenario.resources.size(), 0);
      for (AppIdx i = 0; i < per_app.size(); ++i)
        if (best.assignment.held[i] && scenario.applications[i].active_at(t))
          ++holders[best.assignment.held[i]->entries().front().resource];
      for (AppIdx i = 0; i < per_app.size(); ++i) {
        if (!scenario.applications[i].active_at(t)) continue;
        ++active[i];
        if (best.assignment.held[i]) {
          const ResIdx j = best.assignment.held[i]->entries().front().resource;
          per_app[i] += valuation::congested_value(scenario, i, t, j, holders[j]);
        }
      }
    }
    double total = 0.0;
    for (AppIdx i = 0; i < per_app.size(); ++i)
      if (active[i] > 0) total += per_app[i] / active[i];
    return total;
  } catch (const oracle::too_large&) {
    return std::nullopt;
  }
}

inline int run_command(const std::string& scenario_path, Time horizon,
                       const std::optional<double>& epsilon, std::uint64_t seed,
                       const std::string& budget_mode, const std::string& baseline_mode,
                       std::string out, const std::string& format) {
  const Scenario scenario = io::load_scenario(scenario_path);
  if (horizon < 0) horizon = scenario.last_finish();
  const io::TraceFormat fmt =
      format == "document" ? io::TraceFormat::document : io::TraceFormat::table;
  if (out.empty()) {
    out = std::filesystem::path(scenario_path).stem().string();
    out += fmt == io::TraceFormat::document ? ".trace.json" : ".trace.tsv";
  }
  const auto trace =
      sim::run(scenario, horizon, seed, sim_options(epsilon, budget_mode, baseline_mode));
  const auto path = resolve_out(out);
  io::write_trace(trace, scenario, path, fmt);
  std::cout << "wrote " << path.string() << " (" << trace.periods.size() << " periods)\n";
  return 0;
}

inline int compare_command(const std::string& scenario_path, Time horizon,
                           const std::optional<double>& epsilon, std::uint64_t seed,
                           const std::string& budget_mode, const std::string& baseline_mode,
                           bool budget_sweep, double sweep_max, int sweep_steps) {
  const Scenario scenario = io::load_scenario(scenario_path);
  if (horizon < 0) horizon = scenario.last_finish();
  const sim::SimOptions opts = sim_options(epsilon, budget_mode, baseline_mode);

  sim::Baselines baselines;
  baselines.shared = oracle::shared_baseline(scenario, horizon);
  if (scenario.private_resource) baselines.solo = oracle::solo_baseline(scenario, horizon);
  bool have_static = true;
  try {
    baselines.static_schedule = oracle::static_schedule_baseline(scenario, horizon);
  } catch (const oracle::too_large&) {
    have_static = false;  // too many applications to enumerate
  }

  if (budget_sweep) {
    std::cout << "normalized_budget\tthroughput\tnormalized_throughput\n";
    double shared_total = 0.0;
    for (double m : baselines.shared.mean) shared_total += m;
    for (int k = 0; k <= sweep_steps; ++k) {
      const double mult = sweep_max * k / sweep_steps;
      Scenario scaled = scenario;
      for (ApplicationAgent& a : scaled.applications)
        if (a.budget) a.budget = *a.budget * mult;
      const auto trace = sim::run(scaled, horizon, seed, opts);
      const auto report = sim::metrics(trace, baselines, scaled);
      std::cout << fmt6(mult) << '\t' << fmt6(report.throughput) << '\t'
                << fmt6(shared_total > 0 ? report.throughput / shared_total : 0.0) << '\n';
    }
    return 0;
  }

  const auto trace = sim::run(scenario, horizon, seed, opts);
  const auto report = sim::metrics(trace, baselines, scenario);

  std::cout << "scheme\tthroughput\tnormalized\timprovement_pct\n";
  const auto row = [&](const char* name, double thr) {
    std::cout << name << '\t' << fmt6(thr) << '\t' << fmt6(thr / report.shared_throughput)
              << '\t' << fmt6((thr / report.shared_throughput - 1.0) * 100.0) << '\n';
  };
  row("carma", report.throughput);
  if (have_static) row("static", report.static_throughput);
  if (scenario.private_resource) row("solo", report.solo_throughput);
  row("shared", report.shared_throughput);
  if (const auto opt = optimal_throughput(scenario, horizon)) row("optimal", *opt);
  std::cout << "carma_gain_vs_shared\t" << fmt6(report.total_gain) << '\n';
  if (have_static)
    std::cout << "static_gain_vs_shared\t" << fmt6(report.static_gain) << '\n';
  std::cout << "mean_rounds_per_auction\t" << fmt6(report.mean_rounds) << '\n';
  std::cout << "auctioneer_revenue\t" << fmt6(report.revenue) << '\n';
  std::cout << "converged_at_period\t"
            << (report.converged_at ? std::to_string(*report.converged_at) : "never") << '\n';
  return 0;
}

inline int verify_command(int n, int m, std::vector<double> values, double grid,
                          std::int64_t samples, std::uint64_t seed, int tol_steps,
                          const std::string& scenario_path, std::vector<double> multipliers) {
  bool all_pass = true;
  const auto report = [&all_pass](bool pass, const std::string& line) {
    std::cout << (pass ? "PASS " : "FAIL ") << line << '\n';
    all_pass &= pass;
  };

  for (double v : values) {
    const auto curve = strategy::best_response_search(n, m, v, grid, samples, seed);
    const double target = strategy::equilibrium_bid(n, m, v);
    const double err = std::abs(curve.argmax_bid - target);
    const bool pass = err <= tol_steps * grid + 1e-12;
    report(pass, "best-response n=" + std::to_string(n) + " m=" + std::to_string(m) +
                     " v=" + fmt6(v) + ": argmax " + fmt6(curve.argmax_bid) + " vs equilibrium " +
                     fmt6(target));
  }

  if (!scenario_path.empty()) {
    const Scenario scenario = io::load_scenario(scenario_path);
    const double eps = scenario.effective_epsilon();
    const double k = static_cast<double>(scenario.resources.size());
    for (double mult : multipliers) {
      double worst = 0.0;
      double mean = 0.0;
      for (AppIdx i = 0; i < scenario.applications.size(); ++i) {
        const double delta = strategy::truthfulness_probe(scenario, i, mult);
        worst = std::max(worst, delta);
        mean += delta / scenario.applications.size();
      }
      const bool pass = mean <= eps * k + 1e-12 && worst <= 5 * eps + 1e-12;
      report(pass, "truthfulness x" + fmt6(mult) + ": mean delta " + fmt6(mean) +
                       ", max delta " + fmt6(worst));
    }
  }
  return all_pass ? 0 : 1;
}

inline int oracle_command(const std::string& scenario_path, Time t) {
  const Scenario scenario = io::load_scenario(scenario_path);
  const auto matrix = oracle::valuation_matrix(scenario, t);
  const auto best = oracle::brute_force_optimal(matrix, scenario.resources);
  for (AppIdx i = 0; i < scenario.applications.size(); ++i) {
    std::cout << scenario.applications[i].id << '\t';
    if (best.assignment.held[i]) {
      const ResIdx j = best.assignment.held[i]->entries().front().resource;
      std::cout << scenario.resources[j].id << '\t' << fmt6(matrix[i][j]) << '\n';
    } else {
      std::cout << "-\t0\n";
    }
  }
  std::cout << "total\t" << fmt6(best.total) << '\n';
  return 0;
}

}  // namespace detail

/// Entry point shared by the binary and the tests; returns the exit code.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{"carma: auction-based resource contention simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  Time horizon = -1;
  std::optional<double> epsilon;
  std::uint64_t seed = 0;
  std::string budget_mode, baseline_mode;
  std::string out, format = "table";

  CLI::App* run = app.add_subcommand("run", "simulate a scenario and write its trace");
  run->add_option("--scenario", scenario_path, "scenario file")->required();
  run->add_option("--horizon", horizon, "periods to simulate (default: scenario length)");
  run->add_option("--epsilon", epsilon, "bid increment override");
  run->add_option("--seed", seed, "random seed recorded in the trace");
  run->add_option("--budget-mode", budget_mode, "literal|inclusive")
      ->check(CLI::IsMember({"literal", "inclusive"}));
  run->add_option("--baseline-mode", baseline_mode, "zero|mean")
      ->check(CLI::IsMember({"zero", "mean"}));
  run->add_option("--out", out, "output path (default: <scenario>.trace.<ext>)");
  run->add_option("--format", format, "table|document")
      ->check(CLI::IsMember({"table", "document"}));

  bool budget_sweep = false;
  double sweep_max = 1.5;
  int sweep_steps = 15;
  CLI::App* compare = app.add_subcommand("compare", "run carma and every baseline");
  compare->add_option("--scenario", scenario_path, "scenario file")->required();
  compare->add_option("--horizon", horizon, "periods to simulate");
  compare->add_option("--epsilon", epsilon, "bid increment override");
  compare->add_option("--seed", seed, "random seed");
  compare->add_option("--budget-mode", budget_mode, "literal|inclusive")
      ->check(CLI::IsMember({"literal", "inclusive"}));
  compare->add_option("--baseline-mode", baseline_mode, "zero|mean")
      ->check(CLI::IsMember({"zero", "mean"}));
  compare->add_flag("--budget-sweep", budget_sweep,
                    "sweep budgets and report throughput per normalized budget");
  compare->add_option("--sweep-max", sweep_max, "largest budget multiplier");
  compare->add_option("--sweep-steps", sweep_steps, "number of sweep intervals");

  int n = 2, m = 1, tol_steps = 2;
  std::vector<double> values{0.3, 0.8};
  std::vector<double> multipliers{0.5, 2.0};
  double grid = 0.01;
  std::int64_t samples = 100000;
  std::uint64_t verify_seed = 1;
  std::string verify_scenario;
  CLI::App* verify = app.add_subcommand("verify", "equilibrium and truthfulness checks");
  verify->add_option("--n", n, "number of bidders");
  verify->add_option("--m", m, "slots on the contested resource");
  verify->add_option("--v", values, "valuations to sweep");
  verify->add_option("--grid", grid, "bid grid step");
  verify->add_option("--samples", samples, "Monte Carlo samples");
  verify->add_option("--seed", verify_seed, "Monte Carlo seed");
  verify->add_option("--tol-steps", tol_steps, "allowed argmax error, in grid steps");
  verify->add_option("--scenario", verify_scenario, "scenario for truthfulness probes");
  verify->add_option("--multiplier", multipliers, "bid scaling factors to probe");

  Time oracle_t = 0;
  CLI::App* oracle_cmd = app.add_subcommand("oracle", "brute-force optimal assignment");
  oracle_cmd->add_option("--scenario", scenario_path, "scenario file")->required();
  oracle_cmd->add_option("--t", oracle_t, "time to evaluate");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*run)
      return detail::run_command(scenario_path, horizon, epsilon, seed, budget_mode,
                                 baseline_mode, out, format);
    if (*compare)
      return detail::compare_command(scenario_path, horizon, epsilon, seed, budget_mode,
                                     baseline_mode, budget_sweep, sweep_max, sweep_steps);
    if (*verify)
      return detail::verify_command(n, m, values, grid, samples, verify_seed, tol_steps,
                                    verify_scenario, multipliers);
    if (*oracle_cmd) return detail::oracle_command(scenario_path, oracle_t);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

inline int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv;
  argv.push_back("carma");
  for (const std::string& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace carma::cli
