#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace carma {

// Discrete simulation time, in auction periods.
using Time = std::int64_t;

// Indices into Scenario::resources / Scenario::applications (file order).
using ResIdx = std::size_t;
using AppIdx = std::size_t;

inline constexpr std::size_t npos = static_cast<std::size_t>(-1);

/// A shareable resource: `slots` is the number of concurrent holders it admits.
struct ResourceKind {
  std::string id;
  std::string label;
  int slots = 1;

  friend bool operator==(const ResourceKind&, const ResourceKind&) = default;
};

/// Sparse bundle of held resources, canonically ordered by resource index so
/// equality is structural. Every shipped scenario holds at most one entry,
/// but multi-entry bundles are supported.
class ResourceVector {
 public:
  struct Entry {
    ResIdx resource = 0;
    int quantity = 0;
    friend bool operator==(const Entry&, const Entry&) = default;
    friend auto operator<=>(const Entry&, const Entry&) = default;
  };

  ResourceVector() = default;

  static ResourceVector single(ResIdx res) { return ResourceVector({{res, 1}}); }

  explicit ResourceVector(std::initializer_list<Entry> entries)
      : ResourceVector(std::vector<Entry>(entries)) {}

  explicit ResourceVector(std::vector<Entry> entries) {
    for (const Entry& e : entries) add(e.resource, e.quantity);
  }

  bool empty() const { return entries_.empty(); }
  const std::vector<Entry>& entries() const { return entries_; }

  int quantity(ResIdx res) const {
    for (const Entry& e : entries_)
      if (e.resource == res) return e.quantity;
    return 0;
  }

  bool holds(ResIdx res) const { return quantity(res) > 0; }

  /// Copy with the component for `res` set to `qty` (qty 0 removes it).
  ResourceVector with(ResIdx res, int qty) const {
    ResourceVector out = *this;
    out.remove(res);
    if (qty != 0) out.add(res, qty);
    return out;
  }

  /// Copy with the `from` component's quantity moved onto `to`.
  ResourceVector replacing(ResIdx from, ResIdx to) const {
    if (from == to || !holds(from)) return *this;
    const int q = quantity(from);
    return with(from, 0).with(to, quantity(to) + q);
  }

  friend bool operator==(const ResourceVector&, const ResourceVector&) = default;
  friend auto operator<=>(const ResourceVector&, const ResourceVector&) = default;

 private:
  void add(ResIdx res, int qty) {
    if (qty <= 0) throw std::invalid_argument("ResourceVector: quantity must be positive");
    for (Entry& e : entries_) {
      if (e.resource == res) {
        e.quantity += qty;
        return;
      }
    }
    entries_.push_back({res, qty});
    std::sort(entries_.begin(), entries_.end());
  }

  void remove(ResIdx res) {
    std::erase_if(entries_, [res](const Entry& e) { return e.resource == res; });
  }

  std::vector<Entry> entries_;
};

/// One execution phase: utility per resource over [start, end).
struct Phase {
  Time start = 0;
  Time end = 0;
  std::vector<double> valuations;  // indexed by ResIdx

  friend bool operator==(const Phase&, const Phase&) = default;
};

enum class HoldingKind { unassigned, assigned, quit };

struct AppStatus {
  HoldingKind kind = HoldingKind::unassigned;
  ResourceVector holding;  // meaningful only when kind == assigned

  friend bool operator==(const AppStatus&, const AppStatus&) = default;
};

struct ApplicationAgent {
  std::string id;
  std::optional<double> budget;  // nullopt = unlimited (F_i)
  std::vector<Phase> phases;
  double spend = 0.0;  // cumulative payments
  AppStatus status;

  Time arrival() const { return phases.empty() ? 0 : phases.front().start; }
  Time finish() const { return phases.empty() ? 0 : phases.back().end; }
  bool active_at(Time t) const { return !phases.empty() && t >= arrival() && t < finish(); }

  const Phase* phase_at(Time t) const {
    for (const Phase& p : phases)
      if (t >= p.start && t < p.end) return &p;
    return nullptr;
  }

  friend bool operator==(const ApplicationAgent&, const ApplicationAgent&) = default;
};

struct Sample {
  Time t = 0;
  double value = 0.0;
  friend bool operator==(const Sample&, const Sample&) = default;
};

/// Time series of observed valuations for one (application, bundle) pair.
/// Sample times are strictly increasing multiples of the auction period.
struct ValuationHistory {
  Time period = 1;  // T
  std::vector<Sample> samples;

  bool empty() const { return samples.empty(); }
  std::size_t size() const { return samples.size(); }
  const Sample& back() const { return samples.back(); }

  friend bool operator==(const ValuationHistory&, const ValuationHistory&) = default;
};

struct Bid {
  AppIdx bidder = 0;
  ResIdx resource = 0;
  double amount = 0.0;
  int round = 0;

  friend bool operator==(const Bid&, const Bid&) = default;
};

struct WinnerEntry {
  AppIdx app = 0;
  double bid = 0.0;
  friend bool operator==(const WinnerEntry&, const WinnerEntry&) = default;
};

/// Auctioneer-side state of one parallel auction.
struct AuctionState {
  std::vector<double> prices;                     // p_k, per resource
  std::vector<double> min_bids;                   // minimum standing winner bid
  std::vector<std::vector<WinnerEntry>> winners;  // per resource, app-index order
  double epsilon = 0.0;
  int round = 0;

  static AuctionState initial(std::size_t n_resources, double epsilon) {
    AuctionState s;
    s.prices.assign(n_resources, 0.0);
    s.min_bids.assign(n_resources, 0.0);
    s.winners.assign(n_resources, {});
    s.epsilon = epsilon;
    return s;
  }

  std::optional<ResIdx> holding_of(AppIdx app) const {
    for (ResIdx j = 0; j < winners.size(); ++j)
      for (const WinnerEntry& w : winners[j])
        if (w.app == app) return j;
    return std::nullopt;
  }

  friend bool operator==(const AuctionState&, const AuctionState&) = default;
};

/// Final outcome of an auction: who holds what, who paid what.
struct Assignment {
  std::vector<std::optional<ResourceVector>> held;  // per app
  std::vector<double> payments;                     // per app
  double revenue = 0.0;

  friend bool operator==(const Assignment&, const Assignment&) = default;
};

enum class BudgetMode { literal, inclusive };
enum class BaselineMode { zero, mean };

struct AuctionConfig {
  std::optional<double> epsilon;  // absent: 1e-3 x largest valuation
  BudgetMode budget_mode = BudgetMode::literal;
  BaselineMode baseline_mode = BaselineMode::zero;

  friend bool operator==(const AuctionConfig&, const AuctionConfig&) = default;
};

struct Scenario {
  std::vector<ResourceKind> resources;
  std::vector<ApplicationAgent> applications;
  AuctionConfig auction;
  // Per resource: value as a function of holder count (index k = k+1 holders).
  // Empty vector = valuation is load-independent.
  std::vector<std::vector<double>> congestion_curves;
  std::optional<ResIdx> shared_resource;
  std::optional<ResIdx> private_resource;

  std::optional<ResIdx> resource_index(const std::string& id) const {
    for (ResIdx j = 0; j < resources.size(); ++j)
      if (resources[j].id == id) return j;
    return std::nullopt;
  }

  std::optional<AppIdx> application_index(const std::string& id) const {
    for (AppIdx i = 0; i < applications.size(); ++i)
      if (applications[i].id == id) return i;
    return std::nullopt;
  }

  double max_valuation() const {
    double m = 0.0;
    for (const ApplicationAgent& a : applications)
      for (const Phase& p : a.phases)
        for (double v : p.valuations) m = std::max(m, v);
    for (const auto& curve : congestion_curves)
      for (double v : curve) m = std::max(m, v);
    return m;
  }

  double effective_epsilon() const {
    if (auction.epsilon) return *auction.epsilon;
    const double m = max_valuation();
    return m > 0.0 ? 1e-3 * m : 1e-3;
  }

  Time last_finish() const {
    Time t = 0;
    for (const ApplicationAgent& a : applications) t = std::max(t, a.finish());
    return t;
  }

  friend bool operator==(const Scenario&, const Scenario&) = default;
};

struct Violation {
  std::string entity;
  std::string message;
  friend bool operator==(const Violation&, const Violation&) = default;
};

namespace detail {

inline bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace detail

/// Checks every structural invariant of a parsed scenario. Violations are
/// data, not failures: an empty list means the scenario is usable.
inline std::vector<Violation> validate_scenario(const Scenario& s) {
  std::vector<Violation> out;
  const auto add = [&out](std::string entity, std::string message) {
    out.push_back({std::move(entity), std::move(message)});
  };

  if (s.resources.empty()) add("scenario", "at least one resource is required");

  for (ResIdx j = 0; j < s.resources.size(); ++j) {
    const ResourceKind& r = s.resources[j];
    if (r.slots < 1) add("resource " + r.id, "slots >= 1");
    for (ResIdx k = j + 1; k < s.resources.size(); ++k)
      if (s.resources[k].id == r.id) add("resource " + r.id, "duplicate resource id");
  }

  for (AppIdx i = 0; i < s.applications.size(); ++i) {
    const ApplicationAgent& a = s.applications[i];
    const std::string who = "application " + a.id;
    for (AppIdx k = i + 1; k < s.applications.size(); ++k)
      if (s.applications[k].id == a.id) add(who, "duplicate application id");
    if (a.phases.empty()) add(who, "at least one phase is required");
    if (a.budget && !detail::finite_nonneg(*a.budget)) add(who, "budget must be finite and >= 0");
    if (!detail::finite_nonneg(a.spend)) add(who, "spend must be finite and >= 0");
    if (a.budget && a.spend > *a.budget) add(who, "spend <= budget");
    for (std::size_t p = 0; p < a.phases.size(); ++p) {
      const Phase& ph = a.phases[p];
      const std::string where = who + " phase " + std::to_string(p + 1);
      if (ph.start >= ph.end) add(where, "phase start < end");
      if (p > 0 && ph.start != a.phases[p - 1].end)
        add(where, "phases must be contiguous and non-overlapping");
      if (ph.valuations.size() != s.resources.size())
        add(where, "valuation required for every resource");
      for (double v : ph.valuations)
        if (!detail::finite_nonneg(v)) add(where, "valuations must be finite and >= 0");
    }
  }

  if (!s.congestion_curves.empty() && s.congestion_curves.size() != s.resources.size())
    add("congestion_curves", "one curve slot per resource");
  for (ResIdx j = 0; j < s.congestion_curves.size() && j < s.resources.size(); ++j) {
    const auto& curve = s.congestion_curves[j];
    if (curve.empty()) continue;
    const std::string where = "congestion curve " + s.resources[j].id;
    if (static_cast<int>(curve.size()) != s.resources[j].slots)
      add(where, "curve length must equal slots");
    for (double v : curve)
      if (!detail::finite_nonneg(v)) add(where, "curve values must be finite and >= 0");
  }

  if (s.shared_resource && *s.shared_resource >= s.resources.size())
    add("shared_resource", "unknown resource");
  if (s.private_resource && *s.private_resource >= s.resources.size())
    add("private_resource", "unknown resource");
  if (s.auction.epsilon && !(std::isfinite(*s.auction.epsilon) && *s.auction.epsilon > 0.0))
    add("auction", "epsilon must be finite and > 0");

  return out;
}

}  // namespace carma
