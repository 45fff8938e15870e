#pragma once

#include <cmath>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "carma/model.hpp"

namespace carma::valuation {

/// How the discount factor weighting past observations is chosen.
struct DiscountPolicy {
  enum class Mode { adaptive, fixed };
  Mode mode = Mode::adaptive;
  double fixed_delta = 1.0;
  double clamp_min = 0.0;
  double clamp_max = 1.0;

  static DiscountPolicy adaptive(double lo = 0.0, double hi = 1.0) {
    return {Mode::adaptive, 1.0, lo, hi};
  }
  static DiscountPolicy fixed(double delta) { return {Mode::fixed, delta, 0.0, 1.0}; }
};

/// Appends one observation; the input history is left untouched.
inline ValuationHistory record_observation(const ValuationHistory& h, Time t, double value) {
  if (!h.empty() && t <= h.back().t)
    throw std::invalid_argument("record_observation: sample times must be strictly increasing");
  if (h.period <= 0) throw std::invalid_argument("record_observation: period must be positive");
  if (t % h.period != 0)
    throw std::invalid_argument("record_observation: time must be a multiple of the period");
  ValuationHistory out = h;
  out.samples.push_back({t, value});
  return out;
}

namespace detail {

// delta^k with the convention 0^0 = 1 (the newest sample always has weight 1).
inline double discount_weight(double delta, double k) {
  if (k == 0.0) return 1.0;
  return std::pow(delta, k);
}

}  // namespace detail

/// Discounted average of the observed valuations up to time `now`:
/// sum_n delta^(now/T - n) v(nT) / sum_n delta^(now/T - n). Periods without
/// an observation are skipped from both sums, preserving normalization.
/// Weights are measured relative to the newest sample (an algebraic identity
/// for delta > 0) so the newest term always carries weight exactly 1; this
/// keeps the single-sample and delta=0 identities exact and defines the
/// delta=0 case when `now` itself has no observation.
inline double belief_update(const ValuationHistory& h, Time now, double delta) {
  if (h.empty()) throw std::invalid_argument("belief_update: empty history");
  if (!(delta >= 0.0 && delta <= 1.0))
    throw std::invalid_argument("belief_update: delta must lie in [0,1]");
  if (now < h.back().t)
    throw std::invalid_argument("belief_update: now must be >= the last sample time");

  if (h.size() == 1) return h.back().value;
  const Time newest = h.back().t;
  double num = 0.0;
  double den = 0.0;
  for (const Sample& s : h.samples) {
    const double k = static_cast<double>(newest - s.t) / static_cast<double>(h.period);
    const double w = detail::discount_weight(delta, k);
    num += w * s.value;
    den += w;
  }
  return num / den;
}

/// Stability-driven discount factor: mean(v)^2 / var(v) over the observed
/// values, clamped into [clamp_min, clamp_max]. A perfectly stable history
/// (zero variance) yields clamp_max. Fixed mode returns the configured delta.
inline double discount_factor(const ValuationHistory& h, const DiscountPolicy& policy) {
  if (h.empty()) throw std::invalid_argument("discount_factor: empty history");
  const auto clamp = [&policy](double d) {
    return std::min(policy.clamp_max, std::max(policy.clamp_min, d));
  };
  if (policy.mode == DiscountPolicy::Mode::fixed) return clamp(policy.fixed_delta);

  const double n = static_cast<double>(h.size());
  double mean = 0.0;
  for (const Sample& s : h.samples) mean += s.value;
  mean /= n;
  double var = 0.0;  // population variance
  for (const Sample& s : h.samples) var += (s.value - mean) * (s.value - mean);
  var /= n;
  if (var == 0.0) return policy.clamp_max;
  return clamp(mean * mean / var);
}

/// Utility of `app` in the phase containing `t` for holding `res` alone.
/// Empty once the application has finished (or before it arrives).
inline std::optional<double> phase_valuation(const ApplicationAgent& app, Time t, ResIdx res) {
  const Phase* p = app.phase_at(t);
  if (p == nullptr) return std::nullopt;
  if (res >= p->valuations.size()) throw std::invalid_argument("phase_valuation: unknown resource");
  return p->valuations[res];
}

/// Value a holder actually experiences on `res` when `holders` applications
/// share it: the congestion curve at that load when one is configured, the
/// phase profile otherwise.
inline double congested_value(const Scenario& scenario, AppIdx app, Time t, ResIdx res,
                              std::size_t holders) {
  if (res < scenario.congestion_curves.size() && !scenario.congestion_curves[res].empty()) {
    const auto& curve = scenario.congestion_curves[res];
    const std::size_t k = std::min(holders > 0 ? holders - 1 : 0, curve.size() - 1);
    return curve[k];
  }
  return phase_valuation(scenario.applications[app], t, res).value_or(0.0);
}

/// Anything that can evaluate v_i(t, m): profiles, belief books, test stubs.
class ValuationSource {
 public:
  virtual ~ValuationSource() = default;
  virtual double value(AppIdx app, Time t, const ResourceVector& holding) const = 0;
};

/// Marginal value of swapping the current bundle for `res`:
/// v_i(t, m <- res) - v_i(t, m). Zero for a resource already held.
inline double differential_valuation(AppIdx app, Time t, const ResourceVector& current,
                                     ResIdx res, const ValuationSource& beliefs) {
  ResourceVector swapped;
  if (current.empty()) {
    swapped = ResourceVector::single(res);
  } else if (current.holds(res)) {
    swapped = current;
  } else {
    // Swap candidate replaces the first held resource.
    swapped = current.replacing(current.entries().front().resource, res);
  }
  return beliefs.value(app, t, swapped) - beliefs.value(app, t, current);
}

/// Valuations straight from the phase profiles. The empty bundle is worth the
/// configured baseline: 0, or the mean of the per-resource phase valuations.
class PhaseProfileSource : public ValuationSource {
 public:
  PhaseProfileSource(const Scenario& scenario, BaselineMode baseline)
      : scenario_(&scenario), baseline_(baseline) {}

  explicit PhaseProfileSource(const Scenario& scenario)
      : PhaseProfileSource(scenario, scenario.auction.baseline_mode) {}

  double value(AppIdx app, Time t, const ResourceVector& holding) const override {
    if (app >= scenario_->applications.size())
      throw std::invalid_argument("PhaseProfileSource: unknown application");
    const ApplicationAgent& agent = scenario_->applications[app];
    if (holding.empty()) return baseline(agent, t);
    double total = 0.0;
    for (const ResourceVector::Entry& e : holding.entries()) {
      if (e.resource >= scenario_->resources.size())
        throw std::invalid_argument("PhaseProfileSource: unknown resource");
      total += e.quantity * phase_valuation(agent, t, e.resource).value_or(0.0);
    }
    return total;
  }

  double baseline(const ApplicationAgent& agent, Time t) const {
    if (baseline_ == BaselineMode::zero) return 0.0;
    const Phase* p = agent.phase_at(t);
    if (p == nullptr || p->valuations.empty()) return 0.0;
    double sum = 0.0;
    for (double v : p->valuations) sum += v;
    return sum / static_cast<double>(p->valuations.size());
  }

 private:
  const Scenario* scenario_;
  BaselineMode baseline_;
};

/// Per-application observation histories, keyed by the bundle observed.
using BeliefBook = std::vector<std::map<ResourceVector, ValuationHistory>>;

inline BeliefBook make_belief_book(const Scenario& scenario) {
  return BeliefBook(scenario.applications.size());
}

inline void observe(BeliefBook& book, AppIdx app, const ResourceVector& bundle, Time t,
                    double value) {
  auto& history = book.at(app)[bundle];
  history = record_observation(history, t, value);
}

/// Discounted observation history where available, phase profile otherwise.
class BeliefSource : public ValuationSource {
 public:
  BeliefSource(const Scenario& scenario, const BeliefBook& book, DiscountPolicy policy,
               BaselineMode baseline)
      : profile_(scenario, baseline), book_(&book), policy_(policy) {}

  BeliefSource(const Scenario& scenario, const BeliefBook& book, DiscountPolicy policy = {})
      : BeliefSource(scenario, book, policy, scenario.auction.baseline_mode) {}

  double value(AppIdx app, Time t, const ResourceVector& holding) const override {
    if (app < book_->size()) {
      const auto& histories = (*book_)[app];
      if (auto it = histories.find(holding); it != histories.end() && !it->second.empty())
        return belief_update(it->second, t, discount_factor(it->second, policy_));
    }
    return profile_.value(app, t, holding);
  }

 private:
  PhaseProfileSource profile_;
  const BeliefBook* book_;
  DiscountPolicy policy_;
};

}  // namespace carma::valuation
