#pragma once

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "carma/model.hpp"
#include "carma/valuation.hpp"

namespace carma::auction {

using valuation::ValuationSource;

struct SurplusAt {
  ResIdx resource = npos;
  double surplus = 0.0;
};

struct Bottlenecks {
  SurplusAt first;
  SurplusAt second;  // resource == npos in single-resource scenarios
};

/// What a new bid on `res` must overcome: nothing while slots remain free,
/// the minimum standing winning bid once the resource is fully subscribed.
/// Bidding decisions use this; the posted price stays the maximum winning bid.
inline double entry_price(const AuctionState& state, const std::vector<ResourceKind>& resources,
                          ResIdx res) {
  if (state.winners[res].size() < static_cast<std::size_t>(resources[res].slots)) return 0.0;
  return state.min_bids[res];
}

namespace detail {

template <typename SkipFn>
Bottlenecks find_bottlenecks_if(AppIdx app, Time t, const AuctionState& state,
                                const std::vector<ResourceKind>& resources,
                                const ValuationSource& beliefs, const ResourceVector& current,
                                SkipFn&& skip) {
  Bottlenecks out;
  for (ResIdx j = 0; j < state.prices.size(); ++j) {
    if (skip(j)) continue;
    const double s = valuation::differential_valuation(app, t, current, j, beliefs) -
                     entry_price(state, resources, j);
    // Ties go to the lowest resource index: strict comparisons, ascending scan.
    if (out.first.resource == npos || s > out.first.surplus) {
      out.second = out.first;
      out.first = {j, s};
    } else if (out.second.resource == npos || s > out.second.surplus) {
      out.second = {j, s};
    }
  }
  return out;
}

}  // namespace detail

/// The two most profitable resources for `app` at current entry prices.
/// `current` is the bundle the surpluses are measured against (empty for a
/// bidder without a standing assignment).
inline Bottlenecks find_bottlenecks(AppIdx app, Time t, const AuctionState& state,
                                    const std::vector<ResourceKind>& resources,
                                    const ValuationSource& beliefs,
                                    const ResourceVector& current = {}) {
  if (state.prices.empty()) throw std::invalid_argument("find_bottlenecks: no resources");
  if (resources.size() != state.prices.size())
    throw std::invalid_argument("find_bottlenecks: resource table size mismatch");
  return detail::find_bottlenecks_if(app, t, state, resources, beliefs, current,
                                     [](ResIdx) { return false; });
}

/// Bid increment for the first bottleneck: surplus gap plus price plus epsilon.
inline double partial_bid(double first_surplus, double second_surplus, double price_first,
                          double epsilon) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("partial_bid: epsilon must be > 0");
  if (first_surplus < second_surplus)
    throw std::invalid_argument("partial_bid: first surplus must dominate the second");
  return first_surplus - second_surplus + price_first + epsilon;
}

namespace detail {

// partial_bid measured against the outside option: the reference surplus is
// at least 0 (staying out is free), which caps the payment at the bidder's
// own marginal value + epsilon even when every surplus is negative.
inline double bid_amount(const Bottlenecks& b, double price_first, double epsilon) {
  const double outside = std::max(b.second.surplus, 0.0);
  return std::max(0.0, b.first.surplus - outside + price_first + epsilon);
}

}  // namespace detail

struct SettleResult {
  AuctionState state;
  std::vector<AppIdx> displaced;  // previous winners pushed out this round
};

/// One auctioneer pass: for each resource with new bids, keep the up-to-slots
/// highest of (standing winners, new bidders), then refresh price (max winning
/// bid) and minimum winning bid. A new bid ties never displace a standing
/// winner; ties among peers go to the lowest application index.
inline SettleResult settle_round(const AuctionState& state, const std::vector<Bid>& bids,
                                 const std::vector<ResourceKind>& resources,
                                 const std::vector<bool>& can_bid) {
  SettleResult out{state, {}};
  std::map<ResIdx, std::vector<const Bid*>> by_resource;
  for (const Bid& b : bids) {
    if (b.resource >= resources.size())
      throw std::invalid_argument("settle_round: bid targets an unknown resource");
    if (b.bidder >= can_bid.size() || !can_bid[b.bidder])
      throw std::invalid_argument("settle_round: bid from an inactive application");
    if (!(b.amount >= 0.0) || !std::isfinite(b.amount))
      throw std::invalid_argument("settle_round: bid amount must be finite and >= 0");
    by_resource[b.resource].push_back(&b);
  }

  for (const auto& [res, res_bids] : by_resource) {
    struct Candidate {
      AppIdx app;
      double bid;
      bool standing;
    };
    std::vector<Candidate> pool;
    for (const WinnerEntry& w : state.winners[res]) pool.push_back({w.app, w.bid, true});
    for (const Bid* b : res_bids) pool.push_back({b->bidder, b->amount, false});

    std::sort(pool.begin(), pool.end(), [](const Candidate& a, const Candidate& b) {
      if (a.bid != b.bid) return a.bid > b.bid;
      if (a.standing != b.standing) return a.standing;
      return a.app < b.app;
    });

    const std::size_t keep = std::min<std::size_t>(pool.size(), resources[res].slots);
    std::vector<WinnerEntry> winners;
    for (std::size_t k = 0; k < keep; ++k) winners.push_back({pool[k].app, pool[k].bid});
    std::sort(winners.begin(), winners.end(),
              [](const WinnerEntry& a, const WinnerEntry& b) { return a.app < b.app; });

    for (const WinnerEntry& old : state.winners[res]) {
      const bool kept = std::any_of(winners.begin(), winners.end(),
                                    [&old](const WinnerEntry& w) { return w.app == old.app; });
      if (!kept) out.displaced.push_back(old.app);
    }

    double price = 0.0;
    double min_bid = 0.0;
    if (!winners.empty()) {
      price = min_bid = winners.front().bid;
      for (const WinnerEntry& w : winners) {
        price = std::max(price, w.bid);
        min_bid = std::min(min_bid, w.bid);
      }
    }
    out.state.winners[res] = std::move(winners);
    out.state.prices[res] = std::max(state.prices[res], price);
    out.state.min_bids[res] = min_bid;
  }
  return out;
}

enum class PlanDecision { participate, quit };

/// Budget planning hook, consulted before each partial bid with the total the
/// application would have committed if the bid is submitted.
using Planner = std::function<PlanDecision(AppIdx app, double tentative_total_bid,
                                           const AuctionState& state)>;

/// Bid transformation hook for deviation probes; identity when absent.
using BidScaler = std::function<double(AppIdx app, double amount)>;

struct QuitRecord {
  AppIdx app = 0;
  ResIdx target = npos;  // resource the application was pursuing
};

struct AuctionResult {
  Assignment assignment;
  AuctionState state;
  int rounds_used = 0;
  std::vector<Bid> bids;            // every submitted partial bid, in order
  std::vector<QuitRecord> quits;    // budget-planning exits
  std::vector<QuitRecord> starved;  // left unassigned with no attainable resource
  std::vector<double> total_bids;   // per app: sum of latest partial bid per resource
  std::vector<AppStatus> statuses;  // per app
};

struct no_convergence : std::runtime_error {
  no_convergence(AuctionState partial, int rounds)
      : std::runtime_error("auction did not settle within the round limit"),
        state(std::move(partial)),
        rounds_used(rounds) {}
  AuctionState state;
  int rounds_used;
};

inline int default_max_rounds(std::size_t n_apps, std::size_t n_resources) {
  return 1000 + 200 * static_cast<int>(n_apps * n_resources);
}

/// Runs the parallel auction at time `t` until every active application is a
/// standing winner, has quit, or cannot attain any resource. Payments are the
/// standing winning bids; displaced winners are refunded and re-enter.
inline AuctionResult run_auction(const Scenario& scenario, Time t, const ValuationSource& beliefs,
                                 double epsilon, int max_rounds = 0,
                                 const Planner& planner = {}, const BidScaler& scaler = {}) {
  if (!(epsilon > 0.0)) throw std::invalid_argument("run_auction: epsilon must be > 0");
  const std::size_t n_apps = scenario.applications.size();
  const std::size_t n_res = scenario.resources.size();
  if (max_rounds <= 0) max_rounds = default_max_rounds(n_apps, n_res);

  AuctionResult result;
  result.state = AuctionState::initial(n_res, epsilon);
  result.total_bids.assign(n_apps, 0.0);

  std::vector<bool> active(n_apps);
  for (AppIdx i = 0; i < n_apps; ++i) active[i] = scenario.applications[i].active_at(t);

  std::vector<std::optional<ResIdx>> standing(n_apps);
  std::vector<bool> quit(n_apps, false);
  std::vector<std::map<ResIdx, double>> partials(n_apps);
  std::vector<ResIdx> last_target(n_apps, npos);

  // Snapshot of a resource's auction-visible state. A bid that leaves its
  // target's snapshot unchanged can never succeed until the resource moves,
  // so the bidder sets it aside; honest bids always move their target.
  struct ResSig {
    double price;
    double min_bid;
    std::vector<WinnerEntry> winners;
    bool operator==(const ResSig&) const = default;
  };
  const auto sig_of = [](const AuctionState& s, ResIdx j) {
    return ResSig{s.prices[j], s.min_bids[j], s.winners[j]};
  };
  std::vector<std::map<ResIdx, ResSig>> failed(n_apps);

  for (;;) {
    std::vector<AppIdx> bidders;
    for (AppIdx i = 0; i < n_apps; ++i)
      if (active[i] && !quit[i] && !standing[i]) bidders.push_back(i);
    if (bidders.empty()) break;

    if (result.state.round >= max_rounds)
      throw no_convergence(result.state, result.state.round);

    std::vector<Bid> round_bids;
    const int round_no = result.state.round + 1;
    for (AppIdx app : bidders) {
      auto& failures = failed[app];
      const auto skip = [&](ResIdx j) {
        auto it = failures.find(j);
        if (it == failures.end()) return false;
        if (it->second == sig_of(result.state, j)) return true;
        failures.erase(it);  // resource moved since the failure
        return false;
      };
      const Bottlenecks b = detail::find_bottlenecks_if(
          app, t, result.state, scenario.resources, beliefs, ResourceVector{}, skip);
      if (b.first.resource == npos) continue;  // everything set aside for now
      last_target[app] = b.first.resource;

      double amount = detail::bid_amount(
          b, entry_price(result.state, scenario.resources, b.first.resource), epsilon);
      if (scaler) amount = std::max(0.0, scaler(app, amount));

      double tentative = amount;
      for (const auto& [res, val] : partials[app])
        if (res != b.first.resource) tentative += val;
      if (planner && planner(app, tentative, result.state) == PlanDecision::quit) {
        quit[app] = true;
        result.quits.push_back({app, b.first.resource});
        continue;
      }

      partials[app][b.first.resource] = amount;
      round_bids.push_back({app, b.first.resource, amount, round_no});
    }

    if (round_bids.empty()) {
      for (AppIdx app : bidders)
        if (!quit[app]) result.starved.push_back({app, last_target[app]});
      break;
    }

    std::vector<ResSig> before(n_res);
    for (ResIdx j = 0; j < n_res; ++j) before[j] = sig_of(result.state, j);

    result.state.round = round_no;
    SettleResult settled = settle_round(result.state, round_bids, scenario.resources, active);
    result.state = std::move(settled.state);

    for (const Bid& b : round_bids) {
      if (before[b.resource] == sig_of(result.state, b.resource))
        failed[b.bidder][b.resource] = before[b.resource];
    }
    for (AppIdx app : settled.displaced) standing[app].reset();
    for (ResIdx j = 0; j < n_res; ++j)
      for (const WinnerEntry& w : result.state.winners[j]) standing[w.app] = j;

    result.bids.insert(result.bids.end(), round_bids.begin(), round_bids.end());
  }

  result.rounds_used = result.state.round;
  result.assignment.held.assign(n_apps, std::nullopt);
  result.assignment.payments.assign(n_apps, 0.0);
  result.statuses.assign(n_apps, {});
  for (AppIdx i = 0; i < n_apps; ++i) {
    for (const auto& [res, val] : partials[i]) result.total_bids[i] += val;
    if (quit[i]) {
      result.statuses[i].kind = HoldingKind::quit;
    } else if (standing[i]) {
      const ResIdx j = *standing[i];
      double paid = 0.0;
      for (const WinnerEntry& w : result.state.winners[j])
        if (w.app == i) paid = w.bid;
      result.assignment.held[i] = ResourceVector::single(j);
      result.assignment.payments[i] = paid;
      result.assignment.revenue += paid;
      result.statuses[i] = {HoldingKind::assigned, ResourceVector::single(j)};
    }
  }
  return result;
}

}  // namespace carma::auction
