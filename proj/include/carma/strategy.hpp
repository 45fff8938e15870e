#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "carma/auction.hpp"
#include "carma/model.hpp"
#include "carma/valuation.hpp"

namespace carma::strategy {

/// Equilibrium bid for a single resource with m slots contested by n
/// risk-neutral bidders with uniform [0,1] valuations: (n-m)/(n-m+1) * v.
inline double equilibrium_bid(int n, int m, double v) {
  if (m < 1 || n <= m) throw std::invalid_argument("equilibrium_bid: requires n > m >= 1");
  if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("equilibrium_bid: v must lie in [0,1]");
  const double k = static_cast<double>(n - m);
  return k / (k + 1.0) * v;
}

struct BestResponseCurve {
  std::vector<double> bids;      // grid over [0, v]
  std::vector<double> utility;   // Monte Carlo mean payoff at each bid
  std::vector<double> std_error; // standard error of each mean
  double argmax_bid = 0.0;
  double argmax_utility = 0.0;
};

/// Monte Carlo sweep of player 1's expected payoff over a bid grid. The n-m
/// rivals contending for the marginal slot draw valuations i.i.d. uniform
/// [0,1] and bid the equilibrium shade; player 1 takes a slot when it outbids
/// all of them, earning v - b. Common random numbers across the grid;
/// deterministic for a given seed.
inline BestResponseCurve best_response_search(int n, int m, double v, double grid_step,
                                              std::int64_t samples, std::uint64_t seed) {
  if (m < 1 || n <= m) throw std::invalid_argument("best_response_search: requires n > m >= 1");
  if (!(v >= 0.0 && v <= 1.0))
    throw std::invalid_argument("best_response_search: v must lie in [0,1]");
  if (!(grid_step > 0.0)) throw std::invalid_argument("best_response_search: grid_step must be > 0");
  if (samples < 10000)
    throw std::invalid_argument("best_response_search: at least 1e4 samples required");

  const int rivals = n - m;
  const double shade = static_cast<double>(rivals) / (rivals + 1.0);

  BestResponseCurve out;
  for (double b = 0.0; b <= v + 1e-12; b += grid_step) out.bids.push_back(b);
  const std::size_t grid = out.bids.size();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);

  // first_win[k] counts samples whose lowest winning grid bid is bids[k];
  // a sample is won at bid k iff its first winning index is <= k.
  std::vector<std::int64_t> first_win(grid + 1, 0);
  for (std::int64_t s = 0; s < samples; ++s) {
    double top_rival = 0.0;
    for (int r = 0; r < rivals; ++r) top_rival = std::max(top_rival, shade * uniform(rng));
    const auto it = std::upper_bound(out.bids.begin(), out.bids.end(), top_rival);
    ++first_win[static_cast<std::size_t>(it - out.bids.begin())];
  }
  std::vector<std::int64_t> wins(grid, 0);
  std::int64_t running = 0;
  for (std::size_t k = 0; k < grid; ++k) {
    running += first_win[k];
    wins[k] = running;
  }

  out.utility.resize(grid);
  out.std_error.resize(grid);
  for (std::size_t k = 0; k < grid; ++k) {
    const double p = static_cast<double>(wins[k]) / static_cast<double>(samples);
    const double payoff = v - out.bids[k];
    out.utility[k] = payoff * p;
    out.std_error[k] = std::abs(payoff) * std::sqrt(p * (1.0 - p) / static_cast<double>(samples));
    if (k == 0 || out.utility[k] > out.argmax_utility) {
      out.argmax_utility = out.utility[k];
      out.argmax_bid = out.bids[k];
    }
  }
  return out;
}

/// Paired deviation probe: the same auction once with truthful bidding and
/// once with `app`'s partial bids scaled by `multiplier`; returns the mean
/// change in app's realized utility (value of winnings minus payment).
/// Deterministic scenarios make every trial identical.
inline double truthfulness_probe(const Scenario& scenario, AppIdx app, double multiplier,
                                 int trials = 1, std::uint64_t seed = 0) {
  if (!(multiplier > 0.0)) throw std::invalid_argument("truthfulness_probe: multiplier must be > 0");
  if (trials < 1) throw std::invalid_argument("truthfulness_probe: trials must be >= 1");
  (void)seed;  // shipped scenarios are deterministic

  const valuation::PhaseProfileSource truth(scenario);
  const double epsilon = scenario.effective_epsilon();
  const Time t = 0;

  const auto utility = [&](const auction::AuctionResult& r, AppIdx i) {
    if (!r.assignment.held[i]) return 0.0;
    return truth.value(i, t, *r.assignment.held[i]) - r.assignment.payments[i];
  };

  double sum = 0.0;
  for (int trial = 0; trial < trials; ++trial) {
    const auto honest = auction::run_auction(scenario, t, truth, epsilon);
    const auction::BidScaler scale = [app, multiplier](AppIdx i, double amount) {
      return i == app ? amount * multiplier : amount;
    };
    const auto deviant = auction::run_auction(scenario, t, truth, epsilon, 0, {}, scale);
    sum += utility(deviant, app) - utility(honest, app);
  }
  return sum / trials;
}

}  // namespace carma::strategy
