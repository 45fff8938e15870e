#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <vector>

#include "carma/model.hpp"
#include "carma/valuation.hpp"

namespace carma::oracle {

struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct too_large : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// app x resource utility table read from the phase profiles at time `t`.
/// Applications not active at `t` contribute all-zero rows.
inline std::vector<std::vector<double>> valuation_matrix(const Scenario& scenario, Time t) {
  std::vector<std::vector<double>> m(scenario.applications.size(),
                                     std::vector<double>(scenario.resources.size(), 0.0));
  for (AppIdx i = 0; i < scenario.applications.size(); ++i)
    for (ResIdx j = 0; j < scenario.resources.size(); ++j)
      m[i][j] = valuation::phase_valuation(scenario.applications[i], t, j).value_or(0.0);
  return m;
}

inline double assignment_value(const std::vector<std::vector<double>>& valuations,
                               const Assignment& assignment) {
  double total = 0.0;
  for (AppIdx i = 0; i < assignment.held.size(); ++i) {
    if (!assignment.held[i]) continue;
    for (const ResourceVector::Entry& e : assignment.held[i]->entries())
      total += e.quantity * valuations[i][e.resource];
  }
  return total;
}

struct OptimalResult {
  Assignment assignment;
  double total = 0.0;
};

/// Exhaustive search over every capacity-respecting single-resource
/// assignment (leaving an application unassigned is allowed). Ties are broken
/// lexicographically by application index, resources before unassigned.
inline OptimalResult brute_force_optimal(const std::vector<std::vector<double>>& valuations,
                                         const std::vector<ResourceKind>& resources) {
  const std::size_t n_apps = valuations.size();
  const std::size_t n_res = resources.size();
  if (n_res == 0) throw std::invalid_argument("brute_force_optimal: no resources");
  if (std::pow(static_cast<double>(n_res), static_cast<double>(n_apps)) > 1e7)
    throw too_large("brute_force_optimal: instance too large to enumerate");

  std::vector<int> free(n_res);
  for (ResIdx j = 0; j < n_res; ++j) free[j] = resources[j].slots;

  std::vector<std::optional<ResIdx>> choice(n_apps), best_choice(n_apps);
  double best = -1.0;
  bool found = false;

  const auto recurse = [&](auto&& self, AppIdx i, double total) -> void {
    if (i == n_apps) {
      if (!found || total > best) {
        found = true;
        best = total;
        best_choice = choice;
      }
      return;
    }
    for (ResIdx j = 0; j < n_res; ++j) {
      if (free[j] == 0) continue;
      --free[j];
      choice[i] = j;
      self(self, i + 1, total + valuations[i][j]);
      ++free[j];
    }
    choice[i] = std::nullopt;
    self(self, i + 1, total);
  };
  recurse(recurse, 0, 0.0);

  OptimalResult out;
  out.total = found ? best : 0.0;
  out.assignment.held.assign(n_apps, std::nullopt);
  out.assignment.payments.assign(n_apps, 0.0);
  for (AppIdx i = 0; i < n_apps; ++i)
    if (best_choice[i]) out.assignment.held[i] = ResourceVector::single(*best_choice[i]);
  return out;
}

/// Per-app performance over time for one allocation scheme.
struct BaselineTrace {
  std::vector<std::vector<double>> per_period;  // [period][app]
  std::vector<double> mean;                     // per app, over its active periods
};

namespace detail {

inline BaselineTrace trace_for(const Scenario& scenario, Time horizon,
                               const std::vector<std::optional<ResIdx>>& held) {
  const std::size_t n = scenario.applications.size();
  BaselineTrace out;
  out.per_period.assign(static_cast<std::size_t>(horizon), std::vector<double>(n, 0.0));
  out.mean.assign(n, 0.0);
  std::vector<int> active_periods(n, 0);
  for (Time t = 0; t < horizon; ++t) {
    std::vector<std::size_t> holders(scenario.resources.size(), 0);
    for (AppIdx i = 0; i < n; ++i)
      if (held[i] && scenario.applications[i].active_at(t)) ++holders[*held[i]];
    for (AppIdx i = 0; i < n; ++i) {
      const ApplicationAgent& a = scenario.applications[i];
      if (!a.active_at(t)) continue;
      ++active_periods[i];
      if (!held[i]) continue;
      const double v = valuation::congested_value(scenario, i, t, *held[i], holders[*held[i]]);
      out.per_period[static_cast<std::size_t>(t)][i] = v;
      out.mean[i] += v;
    }
  }
  for (AppIdx i = 0; i < n; ++i)
    if (active_periods[i] > 0) out.mean[i] /= active_periods[i];
  return out;
}

inline Time effective_horizon(const Scenario& scenario, Time horizon) {
  return horizon > 0 ? horizon : scenario.last_finish();
}

}  // namespace detail

/// Everyone runs on the designated shared configuration.
inline BaselineTrace shared_baseline(const Scenario& scenario, Time horizon = 0) {
  if (!scenario.shared_resource)
    throw config_error("shared_baseline: scenario designates no shared resource");
  std::vector<std::optional<ResIdx>> held(scenario.applications.size(),
                                          *scenario.shared_resource);
  return detail::trace_for(scenario, detail::effective_horizon(scenario, horizon), held);
}

/// Everyone runs on the designated private (equal-partition) configuration.
inline BaselineTrace solo_baseline(const Scenario& scenario, Time horizon = 0) {
  if (!scenario.private_resource)
    throw config_error("solo_baseline: scenario designates no private resource");
  std::vector<std::optional<ResIdx>> held(scenario.applications.size(),
                                          *scenario.private_resource);
  return detail::trace_for(scenario, detail::effective_horizon(scenario, horizon), held);
}

/// Solves the assignment once with the t=0 valuations and holds it fixed.
inline BaselineTrace static_schedule_baseline(const Scenario& scenario, Time horizon = 0) {
  const OptimalResult at0 = brute_force_optimal(valuation_matrix(scenario, 0),
                                                scenario.resources);
  std::vector<std::optional<ResIdx>> held(scenario.applications.size());
  for (AppIdx i = 0; i < scenario.applications.size(); ++i)
    if (at0.assignment.held[i])
      held[i] = at0.assignment.held[i]->entries().front().resource;
  return detail::trace_for(scenario, detail::effective_horizon(scenario, horizon), held);
}

}  // namespace carma::oracle
