#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "carma/model.hpp"
#include "carma/sim.hpp"

namespace carma::io {

using nlohmann::json;

struct parse_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct scenario_invalid : std::runtime_error {
  scenario_invalid(std::string what, std::vector<Violation> v)
      : std::runtime_error(std::move(what)), violations(std::move(v)) {}
  std::vector<Violation> violations;
};

namespace detail {

inline void reject_unknown_keys(const json& obj, const std::string& where,
                                std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    bool known = false;
    for (const char* k : allowed)
      if (key == k) known = true;
    if (!known) throw parse_error(where + ": unknown field '" + key + "'");
  }
}

inline const json& require(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) throw parse_error(where + ": missing field '" + key + "'");
  return obj.at(key);
}

inline std::string get_string(const json& v, const std::string& where) {
  if (!v.is_string()) throw parse_error(where + ": expected a string");
  return v.get<std::string>();
}

inline double get_number(const json& v, const std::string& where) {
  if (!v.is_number()) throw parse_error(where + ": expected a number");
  return v.get<double>();
}

inline std::int64_t get_integer(const json& v, const std::string& where) {
  if (!v.is_number_integer()) throw parse_error(where + ": expected an integer");
  return v.get<std::int64_t>();
}

// Numeric output is printed with 6 significant digits.
inline std::string fmt6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

inline void write_atomic(const std::filesystem::path& path, const std::string& contents) {
  namespace fs = std::filesystem;
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << contents;
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  fs::rename(tmp, path);
}

}  // namespace detail

inline BudgetMode budget_mode_from(const std::string& s, const std::string& where) {
  if (s == "literal") return BudgetMode::literal;
  if (s == "inclusive") return BudgetMode::inclusive;
  throw parse_error(where + ": expected 'literal' or 'inclusive'");
}

inline BaselineMode baseline_mode_from(const std::string& s, const std::string& where) {
  if (s == "zero") return BaselineMode::zero;
  if (s == "mean") return BaselineMode::mean;
  throw parse_error(where + ": expected 'zero' or 'mean'");
}

inline const char* to_string(BudgetMode m) {
  return m == BudgetMode::literal ? "literal" : "inclusive";
}
inline const char* to_string(BaselineMode m) { return m == BaselineMode::zero ? "zero" : "mean"; }

inline Scenario scenario_from_json(const json& doc) {
  using detail::get_integer;
  using detail::get_number;
  using detail::get_string;
  using detail::reject_unknown_keys;
  using detail::require;

  if (!doc.is_object()) throw parse_error("scenario: expected a JSON object");
  reject_unknown_keys(doc, "scenario",
                      {"resources", "applications", "auction", "congestion_curves",
                       "shared_resource", "private_resource"});

  Scenario s;
  const json& resources = require(doc, "scenario", "resources");
  if (!resources.is_array()) throw parse_error("resources: expected an array");
  for (std::size_t j = 0; j < resources.size(); ++j) {
    const std::string where = "resources[" + std::to_string(j) + "]";
    const json& r = resources[j];
    if (!r.is_object()) throw parse_error(where + ": expected an object");
    reject_unknown_keys(r, where, {"id", "label", "slots"});
    ResourceKind kind;
    kind.id = get_string(require(r, where, "id"), where + ".id");
    kind.label = r.contains("label") ? get_string(r.at("label"), where + ".label") : kind.id;
    kind.slots = static_cast<int>(get_integer(require(r, where, "slots"), where + ".slots"));
    s.resources.push_back(std::move(kind));
  }

  const json& applications = require(doc, "scenario", "applications");
  if (!applications.is_array()) throw parse_error("applications: expected an array");
  for (std::size_t i = 0; i < applications.size(); ++i) {
    const std::string where = "applications[" + std::to_string(i) + "]";
    const json& a = applications[i];
    if (!a.is_object()) throw parse_error(where + ": expected an object");
    reject_unknown_keys(a, where, {"id", "budget", "phases"});
    ApplicationAgent agent;
    agent.id = get_string(require(a, where, "id"), where + ".id");
    if (a.contains("budget")) agent.budget = get_number(a.at("budget"), where + ".budget");
    const json& phases = require(a, where, "phases");
    if (!phases.is_array() || phases.empty())
      throw parse_error(where + ".phases: expected a non-empty array");
    Time cursor = 0;
    for (std::size_t p = 0; p < phases.size(); ++p) {
      const std::string pw = where + ".phases[" + std::to_string(p) + "]";
      const json& ph = phases[p];
      if (!ph.is_object()) throw parse_error(pw + ": expected an object");
      reject_unknown_keys(ph, pw, {"periods", "valuations"});
      Phase phase;
      phase.start = cursor;
      phase.end = cursor + get_integer(require(ph, pw, "periods"), pw + ".periods");
      cursor = phase.end;
      const json& vals = require(ph, pw, "valuations");
      if (!vals.is_object()) throw parse_error(pw + ".valuations: expected an object");
      phase.valuations.assign(s.resources.size(), 0.0);
      std::vector<bool> seen(s.resources.size(), false);
      for (const auto& [key, value] : vals.items()) {
        const auto idx = s.resource_index(key);
        if (!idx) throw parse_error(pw + ".valuations: unknown resource '" + key + "'");
        phase.valuations[*idx] = get_number(value, pw + ".valuations." + key);
        seen[*idx] = true;
      }
      for (ResIdx j = 0; j < seen.size(); ++j)
        if (!seen[j])
          throw parse_error(pw + ".valuations: missing value for resource '" +
                            s.resources[j].id + "'");
      agent.phases.push_back(std::move(phase));
    }
    s.applications.push_back(std::move(agent));
  }

  if (doc.contains("auction")) {
    const json& a = doc.at("auction");
    if (!a.is_object()) throw parse_error("auction: expected an object");
    reject_unknown_keys(a, "auction", {"epsilon", "budget_mode", "baseline_mode"});
    if (a.contains("epsilon")) s.auction.epsilon = get_number(a.at("epsilon"), "auction.epsilon");
    if (a.contains("budget_mode"))
      s.auction.budget_mode =
          budget_mode_from(get_string(a.at("budget_mode"), "auction.budget_mode"),
                           "auction.budget_mode");
    if (a.contains("baseline_mode"))
      s.auction.baseline_mode =
          baseline_mode_from(get_string(a.at("baseline_mode"), "auction.baseline_mode"),
                             "auction.baseline_mode");
  }

  if (doc.contains("congestion_curves")) {
    const json& curves = doc.at("congestion_curves");
    if (!curves.is_object()) throw parse_error("congestion_curves: expected an object");
    s.congestion_curves.assign(s.resources.size(), {});
    for (const auto& [key, value] : curves.items()) {
      const std::string where = "congestion_curves." + key;
      const auto idx = s.resource_index(key);
      if (!idx) throw parse_error(where + ": unknown resource");
      if (!value.is_array()) throw parse_error(where + ": expected an array");
      for (const json& v : value)
        s.congestion_curves[*idx].push_back(detail::get_number(v, where));
    }
  }

  const auto resolve = [&s](const json& doc_, const char* key) -> std::optional<ResIdx> {
    if (!doc_.contains(key)) return std::nullopt;
    const std::string id = get_string(doc_.at(key), key);
    const auto idx = s.resource_index(id);
    if (!idx) throw parse_error(std::string(key) + ": unknown resource '" + id + "'");
    return idx;
  };
  s.shared_resource = resolve(doc, "shared_resource");
  s.private_resource = resolve(doc, "private_resource");
  return s;
}

inline json scenario_to_json(const Scenario& s) {
  json doc;
  doc["resources"] = json::array();
  for (const ResourceKind& r : s.resources)
    doc["resources"].push_back({{"id", r.id}, {"label", r.label}, {"slots", r.slots}});
  doc["applications"] = json::array();
  for (const ApplicationAgent& a : s.applications) {
    json app{{"id", a.id}};
    if (a.budget) app["budget"] = *a.budget;
    app["phases"] = json::array();
    for (const Phase& p : a.phases) {
      json vals = json::object();
      for (ResIdx j = 0; j < p.valuations.size(); ++j)
        vals[s.resources[j].id] = p.valuations[j];
      app["phases"].push_back({{"periods", p.end - p.start}, {"valuations", std::move(vals)}});
    }
    doc["applications"].push_back(std::move(app));
  }
  json auction = json::object();
  if (s.auction.epsilon) auction["epsilon"] = *s.auction.epsilon;
  auction["budget_mode"] = to_string(s.auction.budget_mode);
  auction["baseline_mode"] = to_string(s.auction.baseline_mode);
  doc["auction"] = std::move(auction);
  bool any_curve = false;
  for (const auto& c : s.congestion_curves) any_curve |= !c.empty();
  if (any_curve) {
    json curves = json::object();
    for (ResIdx j = 0; j < s.congestion_curves.size(); ++j)
      if (!s.congestion_curves[j].empty()) curves[s.resources[j].id] = s.congestion_curves[j];
    doc["congestion_curves"] = std::move(curves);
  }
  if (s.shared_resource) doc["shared_resource"] = s.resources[*s.shared_resource].id;
  if (s.private_resource) doc["private_resource"] = s.resources[*s.private_resource].id;
  return doc;
}

/// Parses and validates a scenario file.
inline Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw parse_error("cannot open scenario file: " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw parse_error(path.string() + ": " + e.what());
  }
  Scenario s = scenario_from_json(doc);
  if (auto violations = validate_scenario(s); !violations.empty()) {
    std::ostringstream msg;
    msg << path.string() << ": invalid scenario:";
    for (const Violation& v : violations) msg << "\n  " << v.entity << ": " << v.message;
    throw scenario_invalid(msg.str(), std::move(violations));
  }
  return s;
}

inline void save_scenario(const Scenario& s, const std::filesystem::path& path) {
  detail::write_atomic(path, scenario_to_json(s).dump(2) + "\n");
}

// ---- trace serialization ----

inline json trace_to_json(const sim::GameTrace& trace, const Scenario& scenario) {
  const auto res_id = [&scenario](ResIdx j) { return scenario.resources[j].id; };
  const auto app_id = [&scenario](AppIdx i) { return scenario.applications[i].id; };

  json doc;
  doc["seed"] = trace.seed;
  doc["periods"] = json::array();
  for (const sim::PeriodRecord& p : trace.periods) {
    json period;
    period["t"] = p.t;
    period["auctioned"] = p.auctioned;
    period["rounds"] = p.rounds_used;
    period["bids"] = json::array();
    for (const Bid& b : p.bids)
      period["bids"].push_back({{"app", app_id(b.bidder)},
                                {"resource", res_id(b.resource)},
                                {"amount", b.amount},
                                {"round", b.round}});
    json state;
    state["epsilon"] = p.state.epsilon;
    state["round"] = p.state.round;
    state["prices"] = p.state.prices;
    state["min_bids"] = p.state.min_bids;
    state["winners"] = json::array();
    for (ResIdx j = 0; j < p.state.winners.size(); ++j) {
      json ws = json::array();
      for (const WinnerEntry& w : p.state.winners[j])
        ws.push_back({{"app", app_id(w.app)}, {"bid", w.bid}});
      state["winners"].push_back(std::move(ws));
    }
    period["state"] = std::move(state);

    json held = json::array();
    for (const auto& h : p.assignment.held) {
      if (!h) {
        held.push_back(nullptr);
      } else {
        json bundle = json::array();
        for (const ResourceVector::Entry& e : h->entries())
          bundle.push_back({{"resource", res_id(e.resource)}, {"quantity", e.quantity}});
        held.push_back(std::move(bundle));
      }
    }
    period["assignment"] = {{"held", std::move(held)},
                            {"payments", p.assignment.payments},
                            {"revenue", p.assignment.revenue}};
    json statuses = json::array();
    for (const AppStatus& st : p.statuses)
      statuses.push_back(st.kind == HoldingKind::quit
                             ? "quit"
                             : (st.kind == HoldingKind::assigned ? "assigned" : "unassigned"));
    period["statuses"] = std::move(statuses);
    period["total_bids"] = p.total_bids;
    period["realized"] = p.realized;
    period["payoffs"] = p.payoffs;
    doc["periods"].push_back(std::move(period));
  }
  doc["events"] = json::array();
  for (const sim::Event& e : trace.events) {
    const char* kind = e.kind == sim::EventKind::arrival
                           ? "arrival"
                           : (e.kind == sim::EventKind::departure ? "departure" : "phase_change");
    doc["events"].push_back({{"t", e.t}, {"kind", kind}, {"app", app_id(e.app)}});
  }
  return doc;
}

inline sim::GameTrace trace_from_json(const json& doc, const Scenario& scenario) {
  using detail::get_integer;
  using detail::get_number;
  using detail::get_string;
  const auto res_idx = [&scenario](const std::string& id, const std::string& where) {
    const auto idx = scenario.resource_index(id);
    if (!idx) throw parse_error(where + ": unknown resource '" + id + "'");
    return *idx;
  };
  const auto app_idx = [&scenario](const std::string& id, const std::string& where) {
    const auto idx = scenario.application_index(id);
    if (!idx) throw parse_error(where + ": unknown application '" + id + "'");
    return *idx;
  };

  sim::GameTrace trace;
  trace.seed = doc.at("seed").get<std::uint64_t>();
  for (const json& period : doc.at("periods")) {
    sim::PeriodRecord p;
    p.t = get_integer(period.at("t"), "period.t");
    p.auctioned = period.at("auctioned").get<bool>();
    p.rounds_used = static_cast<int>(get_integer(period.at("rounds"), "period.rounds"));
    for (const json& b : period.at("bids"))
      p.bids.push_back({app_idx(get_string(b.at("app"), "bid.app"), "bid.app"),
                        res_idx(get_string(b.at("resource"), "bid.resource"), "bid.resource"),
                        get_number(b.at("amount"), "bid.amount"),
                        static_cast<int>(get_integer(b.at("round"), "bid.round"))});
    const json& state = period.at("state");
    p.state.epsilon = get_number(state.at("epsilon"), "state.epsilon");
    p.state.round = static_cast<int>(get_integer(state.at("round"), "state.round"));
    p.state.prices = state.at("prices").get<std::vector<double>>();
    p.state.min_bids = state.at("min_bids").get<std::vector<double>>();
    for (const json& ws : state.at("winners")) {
      std::vector<WinnerEntry> entries;
      for (const json& w : ws)
        entries.push_back({app_idx(get_string(w.at("app"), "winner.app"), "winner.app"),
                           get_number(w.at("bid"), "winner.bid")});
      p.state.winners.push_back(std::move(entries));
    }
    const json& assignment = period.at("assignment");
    for (const json& h : assignment.at("held")) {
      if (h.is_null()) {
        p.assignment.held.emplace_back(std::nullopt);
      } else {
        std::vector<ResourceVector::Entry> entries;
        for (const json& e : h)
          entries.push_back(
              {res_idx(get_string(e.at("resource"), "held.resource"), "held.resource"),
               static_cast<int>(get_integer(e.at("quantity"), "held.quantity"))});
        p.assignment.held.emplace_back(ResourceVector(std::move(entries)));
      }
    }
    p.assignment.payments = assignment.at("payments").get<std::vector<double>>();
    p.assignment.revenue = get_number(assignment.at("revenue"), "assignment.revenue");
    for (const json& st : period.at("statuses")) {
      const std::string kind = get_string(st, "status");
      AppStatus status;
      if (kind == "quit") status.kind = HoldingKind::quit;
      else if (kind == "assigned") status.kind = HoldingKind::assigned;
      else if (kind != "unassigned") throw parse_error("status: unknown kind '" + kind + "'");
      p.statuses.push_back(status);
    }
    for (AppIdx i = 0; i < p.statuses.size() && i < p.assignment.held.size(); ++i)
      if (p.statuses[i].kind == HoldingKind::assigned && p.assignment.held[i])
        p.statuses[i].holding = *p.assignment.held[i];
    p.total_bids = period.at("total_bids").get<std::vector<double>>();
    p.realized = period.at("realized").get<std::vector<double>>();
    p.payoffs = period.at("payoffs").get<std::vector<double>>();
    trace.periods.push_back(std::move(p));
  }
  for (const json& e : doc.at("events")) {
    sim::Event event;
    event.t = get_integer(e.at("t"), "event.t");
    const std::string kind = get_string(e.at("kind"), "event.kind");
    if (kind == "arrival") event.kind = sim::EventKind::arrival;
    else if (kind == "departure") event.kind = sim::EventKind::departure;
    else if (kind == "phase_change") event.kind = sim::EventKind::phase_change;
    else throw parse_error("event.kind: unknown kind '" + kind + "'");
    event.app = app_idx(get_string(e.at("app"), "event.app"), "event.app");
    trace.events.push_back(event);
  }
  return trace;
}

/// One row per (period, application); numbers carry 6 significant digits.
inline std::string trace_table(const sim::GameTrace& trace, const Scenario& scenario) {
  using detail::fmt6;
  const auto converged = sim::detect_convergence(trace, 3, 1e-9);
  std::ostringstream out;
  out << "period\tapp\tresource\tbid\tprice\tpayment\tpayoff\tconverged\n";
  for (const sim::PeriodRecord& p : trace.periods) {
    const bool flag = converged && static_cast<std::size_t>(p.t) >= *converged;
    for (AppIdx i = 0; i < scenario.applications.size(); ++i) {
      std::string res = "-";
      double price = 0.0;
      if (p.assignment.held[i]) {
        const ResIdx j = p.assignment.held[i]->entries().front().resource;
        res = scenario.resources[j].id;
        price = p.state.prices[j];
      }
      out << p.t << '\t' << scenario.applications[i].id << '\t' << res << '\t'
          << fmt6(p.total_bids[i]) << '\t' << fmt6(price) << '\t'
          << fmt6(p.assignment.payments[i]) << '\t' << fmt6(p.payoffs[i]) << '\t'
          << (flag ? 1 : 0) << '\n';
    }
  }
  return out.str();
}

enum class TraceFormat { table, document };

inline void write_trace(const sim::GameTrace& trace, const Scenario& scenario,
                        const std::filesystem::path& path, TraceFormat format) {
  if (format == TraceFormat::table)
    detail::write_atomic(path, trace_table(trace, scenario));
  else
    detail::write_atomic(path, trace_to_json(trace, scenario).dump(2) + "\n");
}

}  // namespace carma::io
