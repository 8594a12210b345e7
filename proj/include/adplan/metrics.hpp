#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <set>
#include <vector>

#include "adplan/error.hpp"
#include "adplan/report.hpp"

namespace adplan {

// sigma_j(t) = 100 (y_j(t) - y*_j(t)) / d_j for every contract in flight at t,
// grouped by sample time.
struct SmoothnessSeries {
  std::vector<Timestamp> times;
  std::vector<std::vector<double>> values;
};

inline SmoothnessSeries smoothness_series(const std::vector<ContractDelivery>& contracts,
                                          const std::function<bool(const ContractDelivery&)>& include = {}) {
  std::map<Timestamp, std::vector<double>> by_time;
  for (const auto& c : contracts) {
    if (include && !include(c)) continue;
    for (const auto& p : c.series)
      if (p.t >= c.start && p.t <= c.end) by_time[p.t].push_back(100.0 * (p.delivered - p.linear_goal) / c.booked);
  }
  SmoothnessSeries s;
  for (auto& [t, v] : by_time) {
    s.times.push_back(t);
    s.values.push_back(std::move(v));
  }
  return s;
}

// Nearest-rank f-th percentile: the ceil(f/100 * n)-th smallest value.
inline double nearest_rank(std::vector<double> values, double f) {
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(f / 100.0 * static_cast<double>(values.size()) - 1e-12));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

// sigma^f = max over sample times of the f-th percentile across contracts.
// With `positive_part`, only over-delivery counts (negative sigma clamps to 0).
inline double smoothness_quantile(const SmoothnessSeries& series, double f, bool positive_part = false) {
  if (!(f > 0 && f <= 100)) throw error("smoothness percentile must be in (0, 100]");
  bool any = false;
  double best = 0;
  for (const auto& values : series.values) {
    if (values.empty()) continue;
    std::vector<double> v = values;
    if (positive_part)
      for (double& x : v) x = std::max(0.0, x);
    double q = nearest_rank(std::move(v), f);
    best = any ? std::max(best, q) : q;
    any = true;
  }
  if (!any) throw error("smoothness series is empty");
  return best;
}

inline bool finished_by(const ContractDelivery& c, Timestamp horizon) { return c.end <= horizon; }

inline SmoothnessSummary summarize_smoothness(const std::vector<ContractDelivery>& contracts, Timestamp horizon,
                                              bool positive_part = false) {
  SmoothnessSummary out;
  auto finished = smoothness_series(contracts, [&](const ContractDelivery& c) { return finished_by(c, horizon); });
  auto unfinished = smoothness_series(contracts, [&](const ContractDelivery& c) { return !finished_by(c, horizon); });
  if (!finished.times.empty()) {
    out.sigma75_finished = smoothness_quantile(finished, 75, positive_part);
    out.sigma95_finished = smoothness_quantile(finished, 95, positive_part);
  }
  if (!unfinished.times.empty()) out.sigma75_unfinished = smoothness_quantile(unfinished, 75, positive_part);
  return out;
}

// U = sum_j (booked_j - delivered_j) / sum_j booked_j
inline double underdelivery_fraction(const std::vector<ContractDelivery>& contracts) {
  double booked = 0, shortfall = 0;
  for (const auto& c : contracts) {
    booked += c.booked;
    shortfall += std::max(0.0, c.booked - c.delivered);
  }
  return booked > 0 ? shortfall / booked : 0.0;
}

// Percent reduction of underdelivery relative to the baseline.
inline double delivery_improvement(double test_underdelivery, double baseline_underdelivery) {
  if (baseline_underdelivery == 0) throw error("delivery improvement undefined: baseline has no underdelivery");
  return 100.0 * (baseline_underdelivery - test_underdelivery) / baseline_underdelivery;
}

inline double delivery_improvement(const SimulationReport& test, const SimulationReport& baseline) {
  std::set<std::string> a, b;
  for (const auto& c : test.contracts) a.insert(c.contract_id);
  for (const auto& c : baseline.contracts) b.insert(c.contract_id);
  if (a != b) throw error("delivery improvement needs reports over the same contracts");
  return delivery_improvement(underdelivery_fraction(test.contracts), underdelivery_fraction(baseline.contracts));
}

}  // namespace adplan
