#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "carma/io.hpp"
#include "carma/strategy.hpp"

using namespace carma;
using namespace carma::strategy;

namespace {

Scenario matrix_m() { return io::load_scenario(std::string(CARMA_SCENARIO_DIR) + "/matrix_m.json"); }

// Closed-form expected payoff for the marginal-slot competition:
// ((n-m+1)/(n-m) * b)^(n-m) * (v - b), valid while the win probability is
// interior. Kept independent of the implementation under test.
double closed_form_utility(int n, int m, double v, double b) {
  const double k = n - m;
  return std::pow((k + 1.0) / k * b, k) * (v - b);
}

}  // namespace

TEST_CASE("equilibrium_bid worked values") {
  CHECK(equilibrium_bid(2, 1, 1.0) == 0.5);
  CHECK(equilibrium_bid(11, 1, 0.6) == Catch::Approx(10.0 / 11.0 * 0.6));
  CHECK(equilibrium_bid(5, 2, 0.0) == 0.0);
  CHECK_THROWS_AS(equilibrium_bid(2, 2, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(equilibrium_bid(1, 2, 0.5), std::invalid_argument);
  CHECK_THROWS_AS(equilibrium_bid(3, 1, 1.5), std::invalid_argument);
}

TEST_CASE("equilibrium_bid monotonicity and shading") {
  for (int m = 1; m <= 3; ++m) {
    double prev_in_n = 0.0;
    for (int n = m + 1; n <= 40; ++n) {
      const double b = equilibrium_bid(n, m, 0.7);
      CHECK(b >= prev_in_n);  // non-decreasing in n
      CHECK(b < 0.7);         // strict shading
      prev_in_n = b;
    }
  }
  double prev_in_v = -1.0;
  for (double v = 0.0; v <= 1.0; v += 0.05) {
    const double b = equilibrium_bid(4, 2, v);
    CHECK(b >= prev_in_v);
    prev_in_v = b;
  }
  // Tends to the true value as n grows.
  CHECK(equilibrium_bid(1000, 1, 0.7) >= 0.999 * 0.7);
}

TEST_CASE("best_response_search peaks at the equilibrium bid") {
  const auto curve = best_response_search(2, 1, 1.0, 0.01, 100000, 7);
  CHECK(std::abs(curve.argmax_bid - 0.5) <= 0.02);

  const auto curve52 = best_response_search(5, 2, 0.8, 0.01, 100000, 7);
  CHECK(std::abs(curve52.argmax_bid - 0.6) <= 0.02);
}

TEST_CASE("best_response_search matches the closed form on the interior") {
  const int n = 5, m = 2;
  const double v = 0.8;
  const std::int64_t samples = 100000;
  const auto curve = best_response_search(n, m, v, 0.01, samples, 11);
  const double interior = equilibrium_bid(n, m, v);
  for (std::size_t k = 0; k < curve.bids.size(); ++k) {
    if (curve.bids[k] > interior) break;
    const double expected = closed_form_utility(n, m, v, curve.bids[k]);
    // Known-variance floor: near p = 0 the empirical standard error collapses.
    const double p = std::pow((n - m + 1.0) / (n - m) * curve.bids[k], n - m);
    const double se_cf = (v - curve.bids[k]) * std::sqrt(p * (1.0 - p) / samples);
    const double tol = 3.0 * std::max(curve.std_error[k], se_cf) + 1e-12;
    CHECK(std::abs(curve.utility[k] - expected) <= tol);
  }
}

TEST_CASE("best_response_search degenerate and error cases") {
  const auto flat = best_response_search(3, 1, 0.0, 0.01, 10000, 1);
  REQUIRE(flat.bids.size() == 1);
  CHECK(flat.utility[0] == 0.0);
  CHECK(flat.argmax_bid == 0.0);

  CHECK_THROWS_AS(best_response_search(2, 2, 0.5, 0.01, 10000, 1), std::invalid_argument);
  CHECK_THROWS_AS(best_response_search(2, 1, 0.5, 0.0, 10000, 1), std::invalid_argument);
  CHECK_THROWS_AS(best_response_search(2, 1, 0.5, 0.01, 100, 1), std::invalid_argument);
}

TEST_CASE("best_response_search is deterministic for a seed") {
  const auto a = best_response_search(4, 1, 0.6, 0.01, 20000, 99);
  const auto b = best_response_search(4, 1, 0.6, 0.01, 20000, 99);
  CHECK(a.utility == b.utility);
  CHECK(a.argmax_bid == b.argmax_bid);
}

TEST_CASE("truthfulness probe: identity multiplier changes nothing") {
  CHECK(truthfulness_probe(matrix_m(), 2, 1.0) == 0.0);
}

TEST_CASE("truthfulness probe: shading away the winning bid loses r1") {
  // App3 bids 0.4+eps truthfully and wins r1; at multiplier 0.4 its bid falls
  // under the others and it ends on a lower-value resource.
  const double delta = truthfulness_probe(matrix_m(), 2, 0.4);
  CHECK(delta <= 0.0);
  CHECK(delta < -1e-6);
}

TEST_CASE("truthfulness probe: overbidding overpays") {
  const double delta = truthfulness_probe(matrix_m(), 2, 2.0);
  CHECK(delta <= 1e-12);
  CHECK_THROWS_AS(truthfulness_probe(matrix_m(), 2, 0.0), std::invalid_argument);
}
