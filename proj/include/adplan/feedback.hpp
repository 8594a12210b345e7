#pragma once

#include <algorithm>

#include "adplan/error.hpp"
#include "adplan/model.hpp"
#include "adplan/time.hpp"

namespace adplan {

struct FeedbackConfig {
  double delta_hours = 4.0;          // allowed lag either way before acting
  double boost_behind = 1.5;         // beta+: remaining demand multiplier when behind (1 = off)
  double damp_ahead = 10.0;          // beta-: remaining demand divisor when ahead
  double release_within_cycles = 2;  // a boost stays on until lag <= this many cycles

  bool operator==(const FeedbackConfig&) const = default;

  void validate() const {
    if (!(delta_hours > 0)) throw error("feedback: delta_hours must be positive");
    if (!(boost_behind >= 1)) throw error("feedback: boost_behind must be at least 1");
    if (!(damp_ahead >= 1)) throw error("feedback: damp_ahead must be at least 1");
    if (!(release_within_cycles >= 0)) throw error("feedback: release_within_cycles must be non-negative");
  }
};

// Per-contract delivery state at a cycle boundary.
struct DeliveryState {
  double delivered = 0;     // y_j(t)
  double linear_goal = 0;   // y*_j(t)
  double remaining = 0;     // booked - delivered
  bool boost_active = false;
};

// y*_j(t) = booked * (t - start) / (end - start), clamped to the flight.
inline double linear_goal(const Contract& c, Timestamp t) {
  if (t <= c.start) return 0.0;
  if (t >= c.end) return c.booked_demand;
  return c.booked_demand * (static_cast<double>((t - c.start).count()) / static_cast<double>((c.end - c.start).count()));
}

// Hours of delivery lag: h such that y(t) = y*(t - h). Positive = behind.
inline double delivery_lag_hours(const Contract& c, double delivered, Timestamp t) {
  return (linear_goal(c, t) - delivered) * c.flight_hours() / c.booked_demand;
}

struct FeedbackResult {
  double adjusted_remaining = 0;
  bool boost_active = false;
  double lag_hours = 0;
};

// Always computed from the true remaining demand, so repeated application
// within a cycle does not compound. `cycle_hours` is the re-optimization
// period used for the boost release window.
inline FeedbackResult apply_feedback(const DeliveryState& state, const Contract& c, Timestamp t,
                                     const FeedbackConfig& cfg, double cycle_hours) {
  FeedbackResult r;
  r.adjusted_remaining = state.remaining;
  if (t < c.start || t >= c.end) return r;
  r.lag_hours = delivery_lag_hours(c, state.delivered, t);
  bool boost = state.boost_active ? r.lag_hours > cfg.release_within_cycles * cycle_hours
                                  : r.lag_hours > cfg.delta_hours;
  if (boost) {
    r.boost_active = true;
    r.adjusted_remaining = state.remaining * cfg.boost_behind;
  } else if (r.lag_hours < -cfg.delta_hours) {
    r.adjusted_remaining = state.remaining / cfg.damp_ahead;
  }
  return r;
}

}  // namespace adplan
