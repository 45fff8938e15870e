#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "carma/io.hpp"
#include "carma/model.hpp"

using namespace carma;

namespace {

Scenario matrix_m() { return io::load_scenario(std::string(CARMA_SCENARIO_DIR) + "/matrix_m.json"); }

}  // namespace

TEST_CASE("ResourceVector equality is order-independent") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ResourceVector::Entry> entries;
    const int n = 1 + static_cast<int>(rng() % 4);
    for (int k = 0; k < n; ++k)
      entries.push_back({static_cast<ResIdx>(rng() % 6), 1 + static_cast<int>(rng() % 3)});
    std::vector<ResourceVector::Entry> shuffled = entries;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    CHECK(ResourceVector(entries) == ResourceVector(shuffled));
  }
}

TEST_CASE("ResourceVector merges duplicates and rejects nonpositive quantities") {
  const ResourceVector v({{2, 1}, {2, 2}});
  CHECK(v.quantity(2) == 3);
  CHECK_THROWS_AS(ResourceVector({{0, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(ResourceVector({{0, -1}}), std::invalid_argument);
}

TEST_CASE("ResourceVector component edits") {
  const ResourceVector v = ResourceVector::single(1);
  CHECK(v.holds(1));
  CHECK_FALSE(v.with(1, 0).holds(1));
  CHECK(v.replacing(1, 3) == ResourceVector::single(3));
  CHECK(v.replacing(2, 3) == v);  // nothing to replace
  CHECK(ResourceVector{}.empty());
}

TEST_CASE("matrix M scenario is valid") {
  CHECK(validate_scenario(matrix_m()).empty());
}

TEST_CASE("validate_scenario flags slot and phase violations") {
  Scenario s = matrix_m();
  s.resources[0].slots = 0;
  auto violations = validate_scenario(s);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].entity == "resource r1");
  CHECK(violations[0].message == "slots >= 1");

  s = matrix_m();
  s.applications[2].phases[0].end = s.applications[2].phases[0].start;
  violations = validate_scenario(s);
  REQUIRE(violations.size() == 1);
  CHECK(violations[0].message == "phase start < end");
}

TEST_CASE("validate_scenario flags duplicates, budgets and curves") {
  Scenario s = matrix_m();
  s.resources[1].id = "r1";
  CHECK_FALSE(validate_scenario(s).empty());

  s = matrix_m();
  s.applications[0].budget = 1.0;
  s.applications[0].spend = 2.0;
  CHECK_FALSE(validate_scenario(s).empty());

  s = matrix_m();
  s.congestion_curves.assign(s.resources.size(), {});
  s.congestion_curves[0] = {1.0, 0.5};  // r1 has a single slot
  CHECK_FALSE(validate_scenario(s).empty());

  s = matrix_m();
  s.auction.epsilon = 0.0;
  CHECK_FALSE(validate_scenario(s).empty());
}

TEST_CASE("Assignment revenue equals the sum of its payments") {
  Assignment a;
  a.held = {ResourceVector::single(0), std::nullopt, ResourceVector::single(1)};
  a.payments = {0.25, 0.0, 1.5};
  for (double p : a.payments) a.revenue += p;
  double sum = 0.0;
  for (double p : a.payments) sum += p;
  CHECK(a.revenue == sum);
}
