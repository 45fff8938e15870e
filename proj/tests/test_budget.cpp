#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "carma/budget.hpp"
#include "carma/io.hpp"
#include "carma/sim.hpp"

using namespace carma;
using namespace carma::budget;

namespace {

constexpr double kEps = 0.001;

Scenario hmmer_mcf() {
  return io::load_scenario(std::string(CARMA_SCENARIO_DIR) + "/hmmer_mcf.json");
}

ApplicationAgent with_budget(double f) {
  ApplicationAgent a;
  a.id = "app";
  a.budget = f;
  a.phases = {{0, 1, {1.0}}};
  return a;
}

}  // namespace

TEST_CASE("estimate_future_bids: last phase yields an empty mapping") {
  const Scenario s = hmmer_mcf();
  const valuation::PhaseProfileSource profile(s);
  const AuctionState frozen = AuctionState::initial(2, kEps);
  CHECK(estimate_future_bids(s, 0, 1, profile, frozen).empty());
}

TEST_CASE("estimate_future_bids: phase-2 surplus gap at frozen zero prices") {
  const Scenario s = hmmer_mcf();
  const valuation::PhaseProfileSource profile(s);
  const AuctionState frozen = AuctionState::initial(2, kEps);

  // app1's next phase values the large cache at 1.206 against 1.0 private.
  const auto estimates = estimate_future_bids(s, 0, 0, profile, frozen);
  REQUIRE(estimates.size() == 1);
  CHECK(estimates.begin()->first == 1);
  CHECK(estimates.begin()->second == Catch::Approx(0.206 + kEps).margin(1e-9));

  // app2's second phase gap: 1.3684 - 1.0.
  const auto estimates2 = estimate_future_bids(s, 1, 0, profile, frozen);
  REQUIRE(estimates2.size() == 1);
  CHECK(estimates2.begin()->second == Catch::Approx(0.3684 + kEps).margin(1e-9));
}

TEST_CASE("estimate_future_bids uses the frozen state") {
  const Scenario s = hmmer_mcf();
  const valuation::PhaseProfileSource profile(s);
  AuctionState frozen = AuctionState::initial(2, kEps);
  // The large cache (one slot) is already held at 0.5: entering costs 0.5.
  frozen.winners[0] = {{0, 0.5}};
  frozen.prices[0] = 0.5;
  frozen.min_bids[0] = 0.5;
  const auto estimates = estimate_future_bids(s, 1, 0, profile, frozen);
  // app2 phase-2 surpluses: large 1.3684-0.5 = 0.8684, small 1.0; the small
  // level becomes the bottleneck and its gap is 1.0 - 0.8684.
  CHECK(estimates.at(1) == Catch::Approx(1.0 - 0.8684 + kEps).margin(1e-9));
}

TEST_CASE("plan: unlimited and empty budgets") {
  ApplicationAgent unlimited;
  unlimited.id = "u";
  unlimited.phases = {{0, 1, {1.0}}};
  CHECK(plan(unlimited, 0, 1e9, {}, 1e9, BudgetMode::inclusive) == PlanDecision::participate);

  const ApplicationAgent broke = with_budget(0.0);
  CHECK(plan(broke, 0, 0.2, {}, 0.0, BudgetMode::inclusive) == PlanDecision::quit);
  CHECK(plan(broke, 0, 0.0, {}, 0.0, BudgetMode::inclusive) == PlanDecision::participate);
}

TEST_CASE("plan: literal excludes the current bid, inclusive counts it") {
  const ApplicationAgent a = with_budget(0.5);
  const std::map<Time, double> future = {{1, 0.2}};
  // F=0.5, past 0.2, future 0.2, current 0.2.
  CHECK(plan(a, 0, 0.2, future, 0.2, BudgetMode::literal) == PlanDecision::participate);
  CHECK(plan(a, 0, 0.2, future, 0.2, BudgetMode::inclusive) == PlanDecision::quit);
}

TEST_CASE("plan: modes agree whenever the current bid is zero") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> money(0.0, 2.0);
  for (int trial = 0; trial < 500; ++trial) {
    const ApplicationAgent a = with_budget(money(rng));
    const std::map<Time, double> future = {{1, money(rng)}, {2, money(rng)}};
    const double past = money(rng);
    CHECK(plan(a, 0, 0.0, future, past, BudgetMode::literal) ==
          plan(a, 0, 0.0, future, past, BudgetMode::inclusive));
  }
}

TEST_CASE("a quit leaves a zero-valuation sample in the history") {
  // One resource, one slot, two identical apps; the poorer one must quit once
  // its budget cannot cover the standing price.
  Scenario s;
  s.resources = {{"r1", "r1", 1}};
  ApplicationAgent rich;
  rich.id = "rich";
  rich.phases = {{0, 4, {1.0}}};
  ApplicationAgent poor;
  poor.id = "poor";
  poor.budget = 0.05;
  poor.phases = {{0, 4, {0.9}}};
  s.applications = {rich, poor};
  s.auction.epsilon = kEps;
  s.auction.budget_mode = BudgetMode::inclusive;

  sim::World world = sim::make_world(s);
  const sim::PeriodRecord rec = sim::step(world, 0);
  CHECK(rec.statuses[1].kind == HoldingKind::quit);

  const auto& history = world.beliefs[1].at(ResourceVector::single(0));
  REQUIRE(history.size() == 1);
  CHECK(history.back() == Sample{0, 0.0});
}

TEST_CASE("inclusive mode never spends past the budget") {
  const Scenario base =
      io::load_scenario(std::string(CARMA_SCENARIO_DIR) + "/budget_sweep_16.json");
  for (double mult : {0.2, 0.5, 0.9}) {
    Scenario s = base;
    for (ApplicationAgent& a : s.applications)
      if (a.budget) a.budget = *a.budget * mult;
    const auto trace = sim::run(s, s.last_finish(), 0);
    std::vector<double> spend(s.applications.size(), 0.0);
    for (const auto& p : trace.periods)
      for (AppIdx i = 0; i < spend.size(); ++i) spend[i] += p.assignment.payments[i];
    for (AppIdx i = 0; i < spend.size(); ++i) CHECK(spend[i] <= *s.applications[i].budget + 1e-12);
  }
}
