#pragma once

#include <map>
#include <vector>

#include "carma/auction.hpp"
#include "carma/model.hpp"
#include "carma/valuation.hpp"

namespace carma::budget {

using auction::PlanDecision;

/// Estimated bid for every future phase of `app`, computed by re-running the
/// bottleneck/partial-bid steps against the frozen auction state with that
/// phase's valuations. `valuations` is normally the phase profile.
inline std::map<Time, double> estimate_future_bids(const Scenario& scenario, AppIdx app,
                                                   Time now,
                                                   const valuation::ValuationSource& valuations,
                                                   const AuctionState& frozen) {
  if (app >= scenario.applications.size())
    throw std::invalid_argument("estimate_future_bids: unknown application");
  const double epsilon =
      frozen.epsilon > 0.0 ? frozen.epsilon : scenario.effective_epsilon();

  ResourceVector current;
  if (auto held = frozen.holding_of(app)) current = ResourceVector::single(*held);

  std::map<Time, double> estimates;
  for (const Phase& phase : scenario.applications[app].phases) {
    if (phase.start <= now) continue;
    const auction::Bottlenecks b =
        auction::find_bottlenecks(app, phase.start, frozen, scenario.resources, valuations,
                                  current);
    estimates[phase.start] = auction::detail::bid_amount(
        b, auction::entry_price(frozen, scenario.resources, b.first.resource), epsilon);
  }
  return estimates;
}

/// Participation decision against the budget F_i.
///
/// literal:   participate iff F_i >= past_spend + sum(future estimates); the
///            current bid is excluded, which can overspend within a phase.
/// inclusive: participate iff F_i >= past_spend + current_bid + sum(future
///            estimates) — equivalently, the remaining planned investment
///            I(t) = F_i - past_spend - future covers the current bid.
///
/// A quit decision is the caller's cue to record a zero-valuation observation
/// for the round.
inline PlanDecision plan(const ApplicationAgent& app, Time /*t*/, double current_bid,
                         const std::map<Time, double>& estimates, double past_spend,
                         BudgetMode mode) {
  if (!app.budget) return PlanDecision::participate;
  double future = 0.0;
  for (const auto& [when, bid] : estimates) future += bid;
  const double committed =
      mode == BudgetMode::literal ? past_spend + future : past_spend + current_bid + future;
  return *app.budget >= committed ? PlanDecision::participate : PlanDecision::quit;
}

/// Planner hook for run_auction, re-planning before each partial bid.
inline auction::Planner make_planner(const Scenario& scenario, Time now,
                                     const std::vector<double>& spends,
                                     const valuation::ValuationSource& future_valuations,
                                     BudgetMode mode) {
  return [&scenario, now, &spends, &future_valuations, mode](
             AppIdx app, double tentative_total, const AuctionState& state) {
    const ApplicationAgent& agent = scenario.applications[app];
    if (!agent.budget) return PlanDecision::participate;
    const auto estimates = estimate_future_bids(scenario, app, now, future_valuations, state);
    return plan(agent, now, tentative_total, estimates, spends[app], mode);
  };
}

}  // namespace carma::budget
