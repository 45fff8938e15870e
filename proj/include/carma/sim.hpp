#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "carma/auction.hpp"
#include "carma/budget.hpp"
#include "carma/model.hpp"
#include "carma/oracle.hpp"
#include "carma/valuation.hpp"

namespace carma::sim {

struct PeriodRecord {
  Time t = 0;
  bool auctioned = true;  // false when an incremental step carried the assignment
  int rounds_used = 0;
  std::vector<Bid> bids;
  AuctionState state;
  Assignment assignment;
  std::vector<AppStatus> statuses;
  std::vector<double> total_bids;
  std::vector<double> realized;  // value actually experienced this period
  std::vector<double> payoffs;   // realized - payment

  friend bool operator==(const PeriodRecord&, const PeriodRecord&) = default;
};

enum class EventKind { arrival, departure, phase_change };

struct Event {
  Time t = 0;
  EventKind kind = EventKind::arrival;
  AppIdx app = 0;
  friend bool operator==(const Event&, const Event&) = default;
};

struct GameTrace {
  std::uint64_t seed = 0;
  std::vector<PeriodRecord> periods;
  std::vector<Event> events;
  friend bool operator==(const GameTrace&, const GameTrace&) = default;
};

struct SimOptions {
  std::optional<double> epsilon;           // overrides the scenario value
  std::optional<BudgetMode> budget_mode;   // likewise
  std::optional<BaselineMode> baseline_mode;
  valuation::DiscountPolicy discount = valuation::DiscountPolicy::adaptive();
  int max_rounds = 0;
  bool incremental = false;  // re-auction only on arrival/departure/phase events
  auction::BidScaler scaler; // deviation probes
};

/// Mutable state of the repeated game; owned by a single sequential driver.
struct World {
  const Scenario* scenario = nullptr;
  SimOptions options;
  valuation::BeliefBook beliefs;
  std::vector<double> spends;
  std::vector<Event> events;
  std::optional<PeriodRecord> previous;

  double epsilon() const { return options.epsilon.value_or(scenario->effective_epsilon()); }
  BudgetMode budget_mode() const {
    return options.budget_mode.value_or(scenario->auction.budget_mode);
  }
  BaselineMode baseline_mode() const {
    return options.baseline_mode.value_or(scenario->auction.baseline_mode);
  }
};

inline World make_world(const Scenario& scenario, SimOptions options = {}) {
  World w;
  w.scenario = &scenario;
  w.options = std::move(options);
  w.beliefs = valuation::make_belief_book(scenario);
  w.spends.assign(scenario.applications.size(), 0.0);
  return w;
}

namespace detail {

inline std::vector<Event> events_at(const Scenario& scenario, Time t) {
  std::vector<Event> out;
  for (AppIdx i = 0; i < scenario.applications.size(); ++i) {
    const ApplicationAgent& a = scenario.applications[i];
    if (a.phases.empty()) continue;
    if (a.arrival() == t) out.push_back({t, EventKind::arrival, i});
    if (a.finish() == t) out.push_back({t, EventKind::departure, i});
    for (std::size_t p = 1; p < a.phases.size(); ++p)
      if (a.phases[p].start == t) out.push_back({t, EventKind::phase_change, i});
  }
  return out;
}

}  // namespace detail

/// Advances the world by one period: applies due events, refreshes beliefs,
/// runs the auction with budget planning, records observations (winners see
/// the realized value, quitters and losers see zero) and returns the record.
inline PeriodRecord step(World& world, Time t) {
  const Scenario& scenario = *world.scenario;
  const std::size_t n = scenario.applications.size();

  const std::vector<Event> due = detail::events_at(scenario, t);
  world.events.insert(world.events.end(), due.begin(), due.end());

  PeriodRecord rec;
  rec.t = t;
  rec.statuses.assign(n, {});
  rec.total_bids.assign(n, 0.0);
  rec.realized.assign(n, 0.0);
  rec.payoffs.assign(n, 0.0);
  rec.assignment.held.assign(n, std::nullopt);
  rec.assignment.payments.assign(n, 0.0);

  const bool carry = world.options.incremental && due.empty() && world.previous.has_value();
  if (carry) {
    rec.auctioned = false;
    rec.state = world.previous->state;
    rec.assignment.held = world.previous->assignment.held;
    rec.statuses = world.previous->statuses;
  } else {
    const valuation::BeliefSource beliefs(scenario, world.beliefs, world.options.discount,
                                          world.baseline_mode());
    const valuation::PhaseProfileSource profile(scenario, world.baseline_mode());
    const auction::Planner planner =
        budget::make_planner(scenario, t, world.spends, profile, world.budget_mode());
    auction::AuctionResult res =
        auction::run_auction(scenario, t, beliefs, world.epsilon(), world.options.max_rounds,
                             planner, world.options.scaler);

    rec.rounds_used = res.rounds_used;
    rec.bids = std::move(res.bids);
    rec.state = std::move(res.state);
    rec.assignment = std::move(res.assignment);
    rec.statuses = std::move(res.statuses);
    rec.total_bids = std::move(res.total_bids);
    for (AppIdx i = 0; i < n; ++i) world.spends[i] += rec.assignment.payments[i];

    // Failed participants carry a zero observation for the bundle they chased.
    for (const auction::QuitRecord& q : res.quits)
      if (q.target != npos)
        valuation::observe(world.beliefs, q.app, ResourceVector::single(q.target), t, 0.0);
    for (const auction::QuitRecord& q : res.starved)
      if (q.target != npos)
        valuation::observe(world.beliefs, q.app, ResourceVector::single(q.target), t, 0.0);
  }

  for (AppIdx i = 0; i < n; ++i) {
    if (!rec.assignment.held[i]) continue;
    const ResIdx res = rec.assignment.held[i]->entries().front().resource;
    const std::size_t holders = rec.state.winners[res].size();
    rec.realized[i] = valuation::congested_value(scenario, i, t, res, holders);
    rec.payoffs[i] = rec.realized[i] - rec.assignment.payments[i];
    valuation::observe(world.beliefs, i, *rec.assignment.held[i], t, rec.realized[i]);
  }

  world.previous = rec;
  return rec;
}

/// Runs the repeated game for `horizon` periods (or until every application
/// has departed). Deterministic for a given (scenario, seed, horizon).
inline GameTrace run(const Scenario& scenario, Time horizon, std::uint64_t seed,
                     SimOptions options = {}) {
  if (const auto violations = validate_scenario(scenario); !violations.empty())
    throw std::invalid_argument("sim::run: invalid scenario: " + violations.front().entity +
                                ": " + violations.front().message);
  World world = make_world(scenario, std::move(options));
  GameTrace trace;
  trace.seed = seed;
  const Time stop = std::min<Time>(horizon, scenario.last_finish());
  for (Time t = 0; t < stop; ++t) trace.periods.push_back(step(world, t));
  trace.events = std::move(world.events);
  return trace;
}

/// Earliest period from which assignments are frozen and every application's
/// payoff varies by less than `tol` through the end of the trace; requires at
/// least `window` periods of evidence.
inline std::optional<std::size_t> detect_convergence(const GameTrace& trace, std::size_t window,
                                                     double tol) {
  if (window < 1) throw std::invalid_argument("detect_convergence: window must be >= 1");
  const auto& periods = trace.periods;
  if (periods.empty() || periods.size() < window) return std::nullopt;

  const std::size_t n = periods.back().payoffs.size();
  std::vector<double> lo = periods.back().payoffs;
  std::vector<double> hi = periods.back().payoffs;
  std::size_t start = periods.size() - 1;
  for (std::size_t q = periods.size() - 1; q-- > 0;) {
    if (periods[q].assignment.held != periods[start].assignment.held) break;
    bool ok = true;
    for (std::size_t i = 0; i < n && ok; ++i) {
      const double v = periods[q].payoffs[i];
      const double new_lo = std::min(lo[i], v);
      const double new_hi = std::max(hi[i], v);
      if (new_hi - new_lo >= tol) ok = false;
    }
    if (!ok) break;
    for (std::size_t i = 0; i < n; ++i) {
      lo[i] = std::min(lo[i], periods[q].payoffs[i]);
      hi[i] = std::max(hi[i], periods[q].payoffs[i]);
    }
    start = q;
  }
  if (periods.size() - start >= window) return start;
  return std::nullopt;
}

struct Baselines {
  oracle::BaselineTrace shared;
  oracle::BaselineTrace solo;
  oracle::BaselineTrace static_schedule;
};

struct MetricsReport {
  std::vector<double> per_app_perf;  // mean realized value per active period
  double throughput = 0.0;           // sum of per-app performance
  double shared_throughput = 0.0;
  double solo_throughput = 0.0;
  double static_throughput = 0.0;
  double normalized_throughput = 0.0;  // vs shared
  std::vector<double> per_app_improvement_pct;
  double improvement_vs_shared_pct = 0.0;
  double improvement_vs_static_pct = 0.0;
  double total_gain = 0.0;   // sum over periods of realized - shared
  double static_gain = 0.0;  // same for the static schedule
  double mean_rounds = 0.0;
  double revenue = 0.0;
  std::optional<std::size_t> converged_at;
};

inline MetricsReport metrics(const GameTrace& trace, const Baselines& baselines,
                             const Scenario& scenario, std::size_t window = 3,
                             double tol = 1e-9) {
  const std::size_t n = scenario.applications.size();
  if (baselines.shared.mean.size() != n)
    throw oracle::config_error("metrics: shared baseline missing or mis-sized");
  const auto mean_of = [n](const oracle::BaselineTrace& b, AppIdx i) {
    return b.mean.size() == n ? b.mean[i] : 0.0;
  };

  MetricsReport r;
  r.per_app_perf.assign(n, 0.0);
  std::vector<int> active(n, 0);
  int auctioned = 0;
  for (const PeriodRecord& p : trace.periods) {
    for (AppIdx i = 0; i < n; ++i) {
      if (!scenario.applications[i].active_at(p.t)) continue;
      ++active[i];
      r.per_app_perf[i] += p.realized[i];
      const std::size_t tt = static_cast<std::size_t>(p.t);
      if (tt < baselines.shared.per_period.size())
        r.total_gain += p.realized[i] - baselines.shared.per_period[tt][i];
      if (tt < baselines.static_schedule.per_period.size() &&
          tt < baselines.shared.per_period.size())
        r.static_gain += baselines.static_schedule.per_period[tt][i] -
                         baselines.shared.per_period[tt][i];
    }
    r.revenue += p.assignment.revenue;
    if (p.auctioned) {
      r.mean_rounds += p.rounds_used;
      ++auctioned;
    }
  }
  for (AppIdx i = 0; i < n; ++i) {
    if (active[i] > 0) r.per_app_perf[i] /= active[i];
    r.throughput += r.per_app_perf[i];
    r.shared_throughput += baselines.shared.mean[i];
    r.solo_throughput += mean_of(baselines.solo, i);
    r.static_throughput += mean_of(baselines.static_schedule, i);
  }
  if (auctioned > 0) r.mean_rounds /= auctioned;
  if (r.shared_throughput == 0.0)
    throw oracle::config_error("metrics: shared baseline throughput is zero");
  r.normalized_throughput = r.throughput / r.shared_throughput;
  r.improvement_vs_shared_pct = (r.normalized_throughput - 1.0) * 100.0;
  if (r.static_throughput > 0.0)
    r.improvement_vs_static_pct = (r.throughput / r.static_throughput - 1.0) * 100.0;
  r.per_app_improvement_pct.assign(n, 0.0);
  for (AppIdx i = 0; i < n; ++i) {
    const double base = baselines.shared.mean[i];
    if (base > 0.0) r.per_app_improvement_pct[i] = (r.per_app_perf[i] / base - 1.0) * 100.0;
  }
  r.converged_at = detect_convergence(trace, window, tol);
  return r;
}

}  // namespace carma::sim
