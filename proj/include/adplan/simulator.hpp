#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adplan/dual.hpp"
#include "adplan/error.hpp"
#include "adplan/feedback.hpp"
#include "adplan/hwm.hpp"
#include "adplan/metrics.hpp"
#include "adplan/model.hpp"
#include "adplan/report.hpp"
#include "adplan/serving.hpp"
#include "adplan/targeting.hpp"
#include "adplan/time.hpp"

namespace adplan {

struct Impression {
  Timestamp ts{};
  std::uint32_t attribute_class = 0;
};

// Impression stream with attribute maps interned into classes.
class ImpressionLog {
 public:
  std::uint32_t intern(const AttributeMap& attrs) {
    auto [it, inserted] = class_index_.emplace(attrs, static_cast<std::uint32_t>(classes_.size()));
    if (inserted) classes_.push_back(attrs);
    return it->second;
  }

  void add(Timestamp ts, const AttributeMap& attrs, std::string id = {}) { add(ts, intern(attrs), std::move(id)); }

  void add(Timestamp ts, std::uint32_t attribute_class, std::string id = {}) {
    if (!id.empty()) {
      ids_.resize(events_.size());
      ids_.push_back(std::move(id));
    }
    events_.push_back({ts, attribute_class});
  }

  void reserve(std::size_t n) { events_.reserve(n); }

  const std::vector<AttributeMap>& classes() const { return classes_; }
  const std::vector<Impression>& events() const { return events_; }
  std::size_t size() const { return events_.size(); }

  std::string id(std::size_t k) const {
    return k < ids_.size() && !ids_[k].empty() ? ids_[k] : "i" + std::to_string(k);
  }

  // Stable sort by timestamp (ids follow their events).
  void sort_by_time() {
    std::vector<std::size_t> perm(events_.size());
    for (std::size_t k = 0; k < perm.size(); ++k) perm[k] = k;
    std::stable_sort(perm.begin(), perm.end(), [&](std::size_t a, std::size_t b) { return events_[a].ts < events_[b].ts; });
    std::vector<Impression> sorted(events_.size());
    std::vector<std::string> sorted_ids(ids_.empty() ? 0 : events_.size());
    ids_.resize(ids_.empty() ? 0 : events_.size());
    for (std::size_t k = 0; k < perm.size(); ++k) {
      sorted[k] = events_[perm[k]];
      if (!ids_.empty()) sorted_ids[k] = std::move(ids_[perm[k]]);
    }
    events_ = std::move(sorted);
    ids_ = std::move(sorted_ids);
  }

 private:
  std::vector<AttributeMap> classes_;
  std::map<AttributeMap, std::uint32_t, std::less<>> class_index_;
  std::vector<Impression> events_;
  std::vector<std::string> ids_;
};

enum class Algorithm { hwm, dual, base };
enum class ServingMode { expected, sampled };

inline std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::hwm: return "hwm";
    case Algorithm::dual: return "dual";
    case Algorithm::base: return "base";
  }
  return {};
}

inline Algorithm parse_algorithm(std::string_view s) {
  if (s == "hwm" || s == "HWM") return Algorithm::hwm;
  if (s == "dual" || s == "DUAL") return Algorithm::dual;
  if (s == "base" || s == "BASE") return Algorithm::base;
  throw error("unknown algorithm '" + std::string(s) + "'");
}

inline ServingMode parse_mode(std::string_view s) {
  if (s == "expected") return ServingMode::expected;
  if (s == "sampled") return ServingMode::sampled;
  throw error("unknown serving mode '" + std::string(s) + "'");
}

struct SimulationConfig {
  Algorithm algorithm = Algorithm::hwm;
  std::optional<FeedbackConfig> feedback;
  double reopt_period_hours = 2.0;
  // Forecast = true remaining supply x multiplier. Per-node entries are keyed
  // by supply node id and apply to impressions with exactly that node's attributes.
  double forecast_error_multiplier = 1.0;
  std::map<std::string, double> node_error_multipliers;
  std::uint64_t seed = 0;
  ServingMode mode = ServingMode::expected;
  std::size_t workers = 1;
  bool baseline_comparator = false;
  std::optional<Timestamp> stop_at;
  // When false, contracts keep serving past their booked goal (the setting of
  // the forecast-error analysis, where overdelivery is a possible outcome).
  bool stop_at_goal = true;
  double dual_tol = 1e-6;
  std::size_t dual_max_iters = 10000;

  void validate() const {
    if (!(reopt_period_hours > 0)) throw error("reopt_period_hours must be positive");
    if (hours(reopt_period_hours).count() <= 0) throw error("reopt_period_hours is below one second");
    if (!(forecast_error_multiplier > 0)) throw error("forecast_error_multiplier must be positive");
    for (const auto& [id, m] : node_error_multipliers)
      if (!(m > 0)) throw error("forecast multiplier for node '" + id + "' must be positive");
    if (workers == 0) throw error("workers must be at least 1");
    if (feedback) feedback->validate();
  }
};

// Terminal shortfall fraction for k re-optimizations with error rate r:
// (r/k) prod_{i=1}^{k-1} (1 + r/i). Positive = underdelivery, negative = overdelivery.
inline double replanning_shortfall(double r, int k) {
  if (!(r < 1)) throw error("replanning bound: error rate must be below 1");
  if (k < 1) throw error("replanning bound: need at least one cycle");
  double product = r / k;
  for (int i = 1; i < k; ++i) product *= 1.0 + r / i;
  return product;
}

inline double replanning_shortfall_bound(double r, int k) {
  if (!(r < 1)) throw error("replanning bound: error rate must be below 1");
  if (k < 1) throw error("replanning bound: need at least one cycle");
  if (r == 0) return 0.0;
  double denom = std::pow(static_cast<double>(k), 1.0 - r);
  return r > 0 ? (r + r * r) / denom : std::abs(r) / denom;
}

namespace detail {

// One (contract, amount) contribution of a served impression.
struct Contribution {
  std::uint32_t contract;
  double amount;
};

class SimulationRun {
 public:
  SimulationRun(const AllocationGraph& graph, const ImpressionLog& log, const SimulationConfig& cfg)
      : graph_(graph), log_(log), cfg_(cfg), contracts_(graph.contracts) {}

  SimulationReport run() {
    cfg_.validate();
    require_valid(graph_);
    check_sorted();
    const std::size_t m = contracts_.size();

    SimulationReport report;
    report.algorithm = to_string(cfg_.algorithm);
    report.total_impressions = static_cast<double>(log_.size());
    delivered_.assign(m, 0.0);
    fulfilled_.assign(m, false);
    boost_.assign(m, false);

    if (m == 0) {
      report.unallocated = report.total_impressions;
      return report;
    }

    setup_timeline();
    setup_classes();
    count_supply();

    for (const Contract& c : contracts_) {
      ContractDelivery cd;
      cd.contract_id = c.id;
      cd.booked = c.booked_demand;
      cd.start = c.start;
      cd.end = c.end;
      report.contracts.push_back(std::move(cd));
    }

    const auto& events = log_.events();
    auto first_in_window = [&](Timestamp t) {
      return static_cast<std::size_t>(
          std::lower_bound(events.begin(), events.end(), t, [](const Impression& e, Timestamp v) { return e.ts < v; }) -
          events.begin());
    };
    std::size_t served_begin = first_in_window(boundaries_.front());
    std::size_t served_end = first_in_window(stop_);
    unallocated_ = static_cast<double>(served_begin + (events.size() - served_end));

    for (std::size_t c = 0; c + 1 < boundaries_.size() && boundaries_[c] < stop_; ++c) {
      Timestamp t = boundaries_[c];
      report.cycle_starts.push_back(t);
      plan_cycle(c);
      for (std::size_t j = 0; j < m; ++j) report.contracts[j].alphas.push_back(planned_rate_[j]);
      serve_window(first_in_window(t), first_in_window(boundaries_[c + 1]));
      observe_traffic(first_in_window(t), first_in_window(boundaries_[c + 1]));
      Timestamp end = boundaries_[c + 1];
      for (std::size_t j = 0; j < m; ++j)
        report.contracts[j].series.push_back({end, delivered_[j], linear_goal(contracts_[j], end)});
    }

    for (std::size_t j = 0; j < m; ++j) report.contracts[j].delivered = delivered_[j];
    report.horizon = stop_;
    report.unallocated = unallocated_;
    report.underdelivery_fraction = underdelivery_fraction(report.contracts);
    report.smoothness = summarize_smoothness(report.contracts, report.horizon);
    return report;
  }

 private:
  void check_sorted() const {
    const auto& events = log_.events();
    for (std::size_t k = 1; k < events.size(); ++k)
      if (events[k].ts < events[k - 1].ts)
        throw error("impression stream not sorted by timestamp at event " + std::to_string(k) + " ('" + log_.id(k) +
                    "')");
  }

  void setup_timeline() {
    Timestamp first = contracts_.front().start, last = contracts_.front().end;
    for (const Contract& c : contracts_) {
      first = std::min(first, c.start);
      last = std::max(last, c.end);
    }
    period_ = hours(cfg_.reopt_period_hours);
    for (Timestamp t = first;; t += period_) {
      boundaries_.push_back(t);
      if (t >= last) break;
    }
    // Serving stops at stop_at; planning still sees the whole remaining flight.
    stop_ = boundaries_.back();
    if (cfg_.stop_at && *cfg_.stop_at > first && *cfg_.stop_at < stop_) {
      stop_ = *cfg_.stop_at;
      auto pos = std::lower_bound(boundaries_.begin(), boundaries_.end(), stop_);
      if (*pos != stop_) boundaries_.insert(pos, stop_);
    }
    std::vector<Timestamp> grid = boundaries_;
    for (const Contract& c : contracts_) {
      if (c.start > boundaries_.front() && c.start < boundaries_.back()) grid.push_back(c.start);
      if (c.end > boundaries_.front() && c.end < boundaries_.back()) grid.push_back(c.end);
    }
    std::sort(grid.begin(), grid.end());
    grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
    grid_ = std::move(grid);
  }

  void setup_classes() {
    const auto& classes = log_.classes();
    class_contracts_.resize(classes.size());
    class_multiplier_.assign(classes.size(), cfg_.forecast_error_multiplier);
    std::map<AttributeMap, double, std::less<>> node_multiplier;
    for (const SupplyNode& n : graph_.supply_nodes) {
      auto it = cfg_.node_error_multipliers.find(n.id);
      if (it != cfg_.node_error_multipliers.end()) node_multiplier[n.attributes] = it->second;
    }
    for (std::size_t cls = 0; cls < classes.size(); ++cls) {
      for (std::size_t j = 0; j < contracts_.size(); ++j)
        if (eligible(classes[cls], contracts_[j].targeting)) class_contracts_[cls].push_back(static_cast<std::uint32_t>(j));
      auto it = node_multiplier.find(classes[cls]);
      if (it != node_multiplier.end()) class_multiplier_[cls] = it->second;
    }
  }

  // Impressions per (class, grid segment); the forecast is restated from these.
  void count_supply() {
    const std::size_t segments = grid_.size() - 1;
    counts_.assign(log_.classes().size(), std::vector<double>(segments, 0.0));
    for (const Impression& e : log_.events()) {
      if (e.ts < grid_.front() || e.ts >= grid_.back()) continue;
      auto seg = static_cast<std::size_t>(std::upper_bound(grid_.begin(), grid_.end(), e.ts) - grid_.begin()) - 1;
      counts_[e.attribute_class][seg] += 1.0;
    }
  }

  double remaining(std::size_t j) const { return std::max(0.0, contracts_[j].booked_demand - delivered_[j]); }

  void plan_cycle(std::size_t cycle) {
    const std::size_t m = contracts_.size();
    const Timestamp t = boundaries_[cycle];
    planned_.assign(m, false);
    planned_rate_.assign(m, std::numeric_limits<double>::quiet_NaN());
    order_.assign(m, 0);
    alpha_.assign(m, 0.0);
    theta_.assign(m, 0.0);

    if (cfg_.algorithm == Algorithm::base) {
      plan_base(cycle);
      return;
    }

    IndexedGraph g;
    std::vector<std::size_t> local(m, kUnallocated), global;
    for (std::size_t j = 0; j < m; ++j) {
      const Contract& c = contracts_[j];
      if (fulfilled_[j] || c.end <= t) continue;
      double demand = remaining(j);
      if (cfg_.feedback) {
        DeliveryState state{delivered_[j], linear_goal(c, t), demand, boost_[j]};
        FeedbackResult fb = apply_feedback(state, c, t, *cfg_.feedback, cfg_.reopt_period_hours);
        boost_[j] = fb.boost_active;
        demand = fb.adjusted_remaining;
      }
      if (!(demand > 0)) continue;
      local[j] = g.add_contract(c.id, demand, c.penalty);
      global.push_back(j);
    }
    if (global.empty()) return;

    // Supply nodes with identical neighbor sets are interchangeable for both
    // planners, so the forecast graph keeps one aggregated node per set.
    std::map<std::vector<std::size_t>, double> aggregated;
    std::vector<std::size_t> signature;
    const std::size_t first_segment =
        static_cast<std::size_t>(std::lower_bound(grid_.begin(), grid_.end(), t) - grid_.begin());
    for (std::size_t cls = 0; cls < counts_.size(); ++cls) {
      for (std::size_t seg = first_segment; seg + 1 < grid_.size(); ++seg) {
        double count = counts_[cls][seg];
        if (count == 0) continue;
        signature.clear();
        for (std::uint32_t j : class_contracts_[cls]) {
          if (local[j] == kUnallocated) continue;
          if (contracts_[j].start <= grid_[seg] && grid_[seg + 1] <= contracts_[j].end) signature.push_back(local[j]);
        }
        if (signature.empty()) continue;
        std::sort(signature.begin(), signature.end());
        aggregated[signature] += count * class_multiplier_[cls];
      }
    }
    for (auto& [contracts, supply] : aggregated) g.add_node(supply, contracts);

    if (cfg_.algorithm == Algorithm::hwm) {
      HwmRates rates = compute_hwm_rates(g);
      for (std::size_t pos = 0; pos < rates.order.size(); ++pos) {
        std::size_t j = global[rates.order[pos]];
        planned_[j] = true;
        order_[j] = pos;
        alpha_[j] = rates.alpha[rates.order[pos]];
        planned_rate_[j] = alpha_[j];
      }
    } else {
      DualSolveResult r = solve_dual_indexed(g, cfg_.dual_tol, cfg_.dual_max_iters);
      for (std::size_t l = 0; l < global.size(); ++l) {
        std::size_t j = global[l];
        if (!(r.theta[l] > 0)) continue;
        planned_[j] = true;
        order_[j] = l;
        theta_[j] = r.theta[l];
        alpha_[j] = r.alpha[l];
        planned_rate_[j] = alpha_[j];
      }
    }
  }

  // Reactive comparator: no forecast. Each contract's rate aims to reach its
  // linear goal by the end of the next cycle given last cycle's traffic;
  // the most-behind contract is served first.
  void plan_base(std::size_t cycle) {
    const std::size_t m = contracts_.size();
    const Timestamp t = boundaries_[cycle], next = boundaries_[cycle + 1];
    if (cycle == 0) {
      const auto& events = log_.events();
      auto lo = std::lower_bound(events.begin(), events.end(), t, [](const Impression& e, Timestamp v) { return e.ts < v; });
      auto hi = std::lower_bound(lo, events.end(), next, [](const Impression& e, Timestamp v) { return e.ts < v; });
      class_rate_.assign(counts_.size(), 0.0);
      for (auto it = lo; it != hi; ++it) class_rate_[it->attribute_class] += 1.0;
      double h = hours_between(t, next);
      for (double& r : class_rate_) r /= h;
    }
    std::vector<std::pair<double, std::size_t>> lag;
    for (std::size_t j = 0; j < m; ++j) {
      const Contract& c = contracts_[j];
      if (fulfilled_[j] || c.end <= t || c.start >= next) continue;
      double in_flight_hours = hours_between(std::max(t, c.start), std::min(next, c.end));
      double expected = 0;
      for (std::size_t cls = 0; cls < class_contracts_.size(); ++cls)
        if (std::binary_search(class_contracts_[cls].begin(), class_contracts_[cls].end(), static_cast<std::uint32_t>(j)))
          expected += class_rate_[cls] * in_flight_hours;
      double need = std::max(0.0, linear_goal(c, std::min(next, c.end)) - delivered_[j]);
      double rate = expected > 0 ? std::clamp(need / expected, 0.0, 1.0) : (need > 0 ? 1.0 : 0.0);
      planned_[j] = true;
      alpha_[j] = rate;
      planned_rate_[j] = rate;
      lag.emplace_back(-delivery_lag_hours(c, delivered_[j], std::max(t, c.start)), j);
    }
    std::sort(lag.begin(), lag.end(), [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return contracts_[a.second].id < contracts_[b.second].id;
    });
    for (std::size_t pos = 0; pos < lag.size(); ++pos) order_[lag[pos].second] = pos;
  }

  void observe_traffic(std::size_t begin, std::size_t end) {
    if (cfg_.algorithm != Algorithm::base) return;
    class_rate_.assign(counts_.size(), 0.0);
    const auto& events = log_.events();
    for (std::size_t k = begin; k < end; ++k) class_rate_[events[k].attribute_class] += 1.0;
    double h = std::chrono::duration<double, std::ratio<3600>>(period_).count();
    for (double& r : class_rate_) r /= h;
  }

  // Pure function of the plan, the fulfilled set, and the impression.
  void evaluate(std::size_t k, std::vector<Contribution>& out, std::vector<std::uint32_t>& cand,
                std::vector<double>& rates, std::vector<double>& probs, std::vector<DualCandidate>& dual) const {
    const Impression& e = log_.events()[k];
    cand.clear();
    for (std::uint32_t j : class_contracts_[e.attribute_class]) {
      const Contract& c = contracts_[j];
      if (planned_[j] && !fulfilled_[j] && c.start <= e.ts && e.ts < c.end) cand.push_back(j);
    }
    if (cand.empty()) return;
    std::sort(cand.begin(), cand.end(), [&](std::uint32_t a, std::uint32_t b) { return order_[a] < order_[b]; });
    probs.resize(cand.size());
    if (cfg_.algorithm == Algorithm::dual) {
      dual.clear();
      for (std::uint32_t j : cand) dual.push_back({theta_[j], alpha_[j]});
      PrimalSlice slice = reconstruct_primal(dual);
      std::copy(slice.x.begin(), slice.x.end(), probs.begin());
    } else {
      rates.clear();
      for (std::uint32_t j : cand) rates.push_back(alpha_[j]);
      truncate_rates(rates, probs);
    }
    if (cfg_.mode == ServingMode::expected) {
      for (std::size_t q = 0; q < cand.size(); ++q)
        if (probs[q] > 0) out.push_back({cand[q], probs[q]});
    } else {
      SplitMix64 rng(stream_seed(cfg_.seed, k));
      std::size_t pick = categorical_pick(probs, uniform01(rng));
      if (pick != kUnallocated) out.push_back({cand[pick], 1.0});
    }
  }

  struct Shard {
    std::vector<Contribution> contributions;
    std::vector<std::size_t> offsets;  // per event, into contributions
  };

  void evaluate_range(std::size_t begin, std::size_t end, Shard& shard) const {
    shard.contributions.clear();
    shard.offsets.clear();
    std::vector<std::uint32_t> cand;
    std::vector<double> rates, probs;
    std::vector<DualCandidate> dual;
    for (std::size_t k = begin; k < end; ++k) {
      shard.offsets.push_back(shard.contributions.size());
      evaluate(k, shard.contributions, cand, rates, probs, dual);
    }
    shard.offsets.push_back(shard.contributions.size());
  }

  // Impressions are evaluated speculatively (possibly on several workers)
  // against the fulfilled set at the start of a chunk, then committed in
  // stream order. When a commit fulfills a contract, everything after that
  // impression is re-evaluated, so the result never depends on the number of
  // workers.
  void serve_window(std::size_t begin, std::size_t end) {
    constexpr std::size_t kChunk = 1 << 16;
    const std::size_t workers = std::max<std::size_t>(1, cfg_.workers);
    shards_.resize(workers);
    std::size_t pos = begin;
    while (pos < end) {
      std::size_t chunk_end = std::min(end, pos + kChunk);
      std::size_t per = (chunk_end - pos + workers - 1) / workers;
      std::vector<std::pair<std::size_t, std::size_t>> ranges;
      for (std::size_t w = 0; w < workers; ++w) {
        std::size_t lo = std::min(chunk_end, pos + w * per), hi = std::min(chunk_end, lo + per);
        ranges.emplace_back(lo, hi);
      }
      if (workers == 1) {
        evaluate_range(ranges[0].first, ranges[0].second, shards_[0]);
      } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < workers; ++w)
          threads.emplace_back([&, w] { evaluate_range(ranges[w].first, ranges[w].second, shards_[w]); });
        for (auto& th : threads) th.join();
      }

      std::size_t next = chunk_end;
      bool stop = false;
      for (std::size_t w = 0; w < workers && !stop; ++w) {
        const Shard& shard = shards_[w];
        for (std::size_t k = ranges[w].first; k < ranges[w].second; ++k) {
          std::size_t local = k - ranges[w].first;
          double given = 0;
          bool newly_fulfilled = false;
          for (std::size_t q = shard.offsets[local]; q < shard.offsets[local + 1]; ++q) {
            const Contribution& c = shard.contributions[q];
            double left = remaining(c.contract);
            if (!cfg_.stop_at_goal) {
              given += c.amount;
              delivered_[c.contract] += c.amount;
            } else if (c.amount >= left) {
              given += left;
              delivered_[c.contract] = contracts_[c.contract].booked_demand;
              fulfilled_[c.contract] = true;
              newly_fulfilled = true;
            } else {
              given += c.amount;
              delivered_[c.contract] += c.amount;
            }
          }
          unallocated_ += 1.0 - given;
          if (newly_fulfilled) {
            next = k + 1;
            stop = true;
            break;
          }
        }
      }
      pos = next;
    }
  }

  const AllocationGraph& graph_;
  const ImpressionLog& log_;
  SimulationConfig cfg_;
  std::vector<Contract> contracts_;

  Seconds period_{};
  std::vector<Timestamp> boundaries_;
  std::vector<Timestamp> grid_;
  std::vector<std::vector<std::uint32_t>> class_contracts_;
  std::vector<double> class_multiplier_;
  std::vector<std::vector<double>> counts_;
  std::vector<double> class_rate_;

  std::vector<double> delivered_;
  std::vector<bool> fulfilled_;
  std::vector<bool> boost_;
  double unallocated_ = 0;

  std::vector<bool> planned_;
  std::vector<double> planned_rate_;
  std::vector<std::size_t> order_;
  std::vector<double> alpha_;
  std::vector<double> theta_;
  std::vector<Shard> shards_;
  Timestamp stop_{};
};

}  // namespace detail

inline SimulationReport baseline_pacing(const AllocationGraph& graph, const ImpressionLog& impressions,
                                        SimulationConfig cfg) {
  cfg.algorithm = Algorithm::base;
  cfg.feedback.reset();
  cfg.baseline_comparator = false;
  return detail::SimulationRun(graph, impressions, cfg).run();
}

// Re-plans at every cycle boundary from the delivered counts and a forecast
// restated from the true remaining stream (times the configured error), then
// serves the cycle's impressions statelessly from that plan.
inline SimulationReport run_simulation(const AllocationGraph& graph, const ImpressionLog& impressions,
                                       const SimulationConfig& cfg) {
  SimulationReport report = detail::SimulationRun(graph, impressions, cfg).run();
  if (cfg.baseline_comparator && cfg.algorithm != Algorithm::base) {
    SimulationReport base = baseline_pacing(graph, impressions, cfg);
    if (base.underdelivery_fraction > 0) report.delivery_improvement = delivery_improvement(report, base);
  }
  return report;
}

}  // namespace adplan
