#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "carma/io.hpp"
#include "carma/sim.hpp"

using namespace carma;
using namespace carma::io;

namespace {

const std::string kScenarioDir = CARMA_SCENARIO_DIR;

std::filesystem::path temp_file(const char* name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("load matrix_m: apps, resources, slots") {
  const Scenario s = load_scenario(kScenarioDir + "/matrix_m.json");
  REQUIRE(s.applications.size() == 5);
  REQUIRE(s.resources.size() == 5);
  const std::vector<int> slots = {1, 2, 4, 8, 16};
  for (ResIdx j = 0; j < 5; ++j) CHECK(s.resources[j].slots == slots[j]);
  CHECK(s.effective_epsilon() == 0.001);
}

TEST_CASE("load hmmer_mcf: two apps, two phases each") {
  const Scenario s = load_scenario(kScenarioDir + "/hmmer_mcf.json");
  REQUIRE(s.applications.size() == 2);
  for (const ApplicationAgent& a : s.applications) CHECK(a.phases.size() == 2);
  CHECK(s.applications[0].phases[1].start == 1);
  CHECK(s.last_finish() == 2);
}

TEST_CASE("unknown fields are parse errors that name the field") {
  const json doc = {{"resources", json::array()},
                    {"applications", json::array()},
                    {"surprise", 1}};
  try {
    scenario_from_json(doc);
    FAIL("expected parse_error");
  } catch (const parse_error& e) {
    CHECK(std::string(e.what()).find("surprise") != std::string::npos);
  }
}

TEST_CASE("missing valuations and unknown resources are parse errors") {
  json doc;
  doc["resources"] = {{{"id", "a"}, {"slots", 1}}, {{"id", "b"}, {"slots", 1}}};
  doc["applications"] = {
      {{"id", "x"}, {"phases", {{{"periods", 1}, {"valuations", {{"a", 1.0}}}}}}}};
  CHECK_THROWS_WITH(scenario_from_json(doc),
                    Catch::Matchers::ContainsSubstring("missing value for resource 'b'"));

  doc["applications"][0]["phases"][0]["valuations"] = {{"a", 1.0}, {"zz", 2.0}};
  CHECK_THROWS_WITH(scenario_from_json(doc), Catch::Matchers::ContainsSubstring("zz"));
}

TEST_CASE("invalid scenarios are rejected at load with violations listed") {
  const auto path = temp_file("carma_bad_scenario.json");
  {
    std::ofstream out(path);
    out << R"({"resources": [{"id": "a", "slots": 0}],
               "applications": [{"id": "x", "phases": [{"periods": 1, "valuations": {"a": 1.0}}]}]})";
  }
  try {
    load_scenario(path);
    FAIL("expected scenario_invalid");
  } catch (const scenario_invalid& e) {
    REQUIRE(e.violations.size() == 1);
    CHECK(e.violations[0].message == "slots >= 1");
  }
  std::filesystem::remove(path);
}

TEST_CASE("malformed JSON reports the position") {
  const auto path = temp_file("carma_malformed.json");
  {
    std::ofstream out(path);
    out << "{ not json";
  }
  CHECK_THROWS_AS(load_scenario(path), parse_error);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(load_scenario(temp_file("carma_does_not_exist.json")), parse_error);
}

TEST_CASE("every bundled scenario round-trips through save/load") {
  for (const char* name :
       {"matrix_m.json", "hmmer_mcf.json", "xeon_phi.json", "budget_sweep_16.json"}) {
    const Scenario original = load_scenario(kScenarioDir + "/" + name);
    const auto path = temp_file("carma_roundtrip.json");
    save_scenario(original, path);
    const Scenario reloaded = load_scenario(path);
    CHECK(reloaded == original);
    std::filesystem::remove(path);
  }
}

TEST_CASE("trace document format round-trips to an equal trace") {
  const Scenario s = load_scenario(kScenarioDir + "/hmmer_mcf.json");
  const sim::GameTrace trace = sim::run(s, 2, 42);
  const sim::GameTrace back = trace_from_json(trace_to_json(trace, s), s);
  CHECK(back == trace);
}

TEST_CASE("traces with quit statuses round-trip through the document format") {
  Scenario s = load_scenario(kScenarioDir + "/budget_sweep_16.json");
  for (ApplicationAgent& a : s.applications)
    if (a.budget) a.budget = *a.budget * 0.3;  // force quits mid-horizon
  const sim::GameTrace trace = sim::run(s, s.last_finish(), 3);
  bool any_quit = false;
  for (const auto& p : trace.periods)
    for (const AppStatus& st : p.statuses) any_quit |= st.kind == HoldingKind::quit;
  REQUIRE(any_quit);
  CHECK(trace_from_json(trace_to_json(trace, s), s) == trace);
}

TEST_CASE("trace table: one row per period and application") {
  const Scenario s = load_scenario(kScenarioDir + "/matrix_m.json");
  const sim::GameTrace trace = sim::run(s, 3, 0);
  const std::string table = trace_table(trace, s);

  std::size_t rows = 0;
  for (char c : table) rows += c == '\n';
  CHECK(rows == 1 + 3 * s.applications.size());  // header + apps x periods

  // Identical runs must serialize byte-identically.
  const sim::GameTrace again = sim::run(s, 3, 0);
  CHECK(trace_table(again, s) == table);
}

TEST_CASE("empty trace renders a header-only table") {
  const Scenario s = load_scenario(kScenarioDir + "/matrix_m.json");
  const sim::GameTrace empty = sim::run(s, 0, 0);
  const std::string table = trace_table(empty, s);
  CHECK(table == "period\tapp\tresource\tbid\tprice\tpayment\tpayoff\tconverged\n");
}

TEST_CASE("write_trace lands on disk atomically named") {
  const Scenario s = load_scenario(kScenarioDir + "/hmmer_mcf.json");
  const sim::GameTrace trace = sim::run(s, 2, 0);
  const auto path = temp_file("carma_trace_out.tsv");
  write_trace(trace, s, path, TraceFormat::table);
  CHECK(std::filesystem::exists(path));
  CHECK_FALSE(std::filesystem::exists(path.string() + ".tmp"));
  std::filesystem::remove(path);

  const auto doc_path = temp_file("carma_trace_out.json");
  write_trace(trace, s, doc_path, TraceFormat::document);
  std::ifstream in(doc_path);
  json parsed;
  in >> parsed;
  CHECK(parsed.contains("periods"));
  std::filesystem::remove(doc_path);
}
