#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "adplan/error.hpp"
#include "adplan/model.hpp"
#include "adplan/simulator.hpp"
#include "adplan/targeting.hpp"
#include "adplan/time.hpp"

namespace adplan {

enum class Contention { low, medium, high };

inline Contention parse_contention(std::string_view s) {
  if (s == "low") return Contention::low;
  if (s == "medium") return Contention::medium;
  if (s == "high") return Contention::high;
  throw error("unknown contention level '" + std::string(s) + "'");
}

struct FlightLength {
  double days = 1;
  double weight = 1;
};

struct ScenarioSpec {
  std::size_t num_contracts = 20;
  std::size_t num_attributes = 3;
  std::size_t values_per_attribute = 3;
  double known_probability = 0.8;  // chance an attribute is present on a visit class
  std::vector<FlightLength> flights = {{1, 0.3}, {3, 0.4}, {7, 0.2}, {14, 0.1}};
  Contention contention = Contention::medium;
  double horizon_days = 14;
  double impressions_per_hour = 400;
  double day_night_swing = 0.6;  // relative amplitude of the daily traffic cycle
  double weekend_factor = 0.7;   // Saturday/Sunday traffic relative to weekdays
  double demand_fraction = 0.5;  // mean share of unsold eligible inventory each contract books
  std::uint64_t seed = 1;
  Timestamp start = parse_iso8601("2012-01-01T00:00:00Z");

  void validate() const {
    if (num_contracts == 0 || num_attributes == 0 || values_per_attribute == 0)
      throw error("scenario: counts must be positive");
    if (!(horizon_days > 0) || !(impressions_per_hour > 0) || !(demand_fraction > 0))
      throw error("scenario: horizon, traffic and demand fraction must be positive");
    if (flights.empty()) throw error("scenario: empty flight-length distribution");
    for (const auto& f : flights)
      if (!(f.days > 0) || !(f.weight > 0)) throw error("scenario: flight lengths and weights must be positive");
  }
};

struct Scenario {
  AllocationGraph graph;
  ImpressionLog impressions;
};

// Traffic multiplier for the hour starting at `t` (daily cycle peaking mid
// afternoon, lighter weekends).
inline double traffic_modulation(const ScenarioSpec& spec, Timestamp t) {
  auto day = std::chrono::floor<std::chrono::days>(t);
  double hour = static_cast<double>(std::chrono::duration_cast<std::chrono::hours>(t - day).count());
  unsigned weekday = std::chrono::weekday{day}.c_encoding();
  constexpr double pi = 3.14159265358979323846;
  double daily = 1.0 + spec.day_night_swing * std::sin(2 * pi * (hour - 9.0) / 24.0);
  double weekly = (weekday == 0 || weekday == 6) ? spec.weekend_factor : 1.0;
  return daily * weekly;
}

namespace detail {

inline TargetingExpr random_predicate(std::mt19937_64& rng, const ScenarioSpec& spec, std::size_t attr) {
  std::uniform_int_distribution<std::size_t> value(0, spec.values_per_attribute - 1);
  std::string name = "a" + std::to_string(attr);
  if (spec.values_per_attribute > 2 && std::bernoulli_distribution(0.3)(rng)) {
    std::size_t v1 = value(rng), v2 = value(rng);
    while (v2 == v1) v2 = value(rng);
    if (v2 < v1) std::swap(v1, v2);
    return TargetingExpr::in(name, {"v" + std::to_string(v1), "v" + std::to_string(v2)});
  }
  return TargetingExpr::equals(name, "v" + std::to_string(value(rng)));
}

inline TargetingExpr random_targeting(std::mt19937_64& rng, const ScenarioSpec& spec) {
  std::size_t lo = 1, hi = 2;
  if (spec.contention == Contention::low) lo = 2, hi = 3;
  if (spec.contention == Contention::high) lo = 0, hi = 1;
  hi = std::min(hi, spec.num_attributes);
  lo = std::min(lo, hi);
  std::size_t n = std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  if (n == 0) return TargetingExpr::always_true();
  std::vector<std::size_t> attrs(spec.num_attributes);
  for (std::size_t a = 0; a < attrs.size(); ++a) attrs[a] = a;
  std::shuffle(attrs.begin(), attrs.end(), rng);
  std::sort(attrs.begin(), attrs.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<TargetingExpr> terms;
  for (std::size_t k = 0; k < n; ++k) terms.push_back(random_predicate(rng, spec, attrs[k]));
  if (terms.size() == 1) return std::move(terms.front());
  return TargetingExpr::all_of(std::move(terms));
}

}  // namespace detail

// Deterministic synthetic scenario: supply node per attribute class with its
// expected traffic over the horizon, contracts with mixed flights and
// targeting breadth, and a Poisson impression stream per class and hour.
inline Scenario generate_scenario(const ScenarioSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  Scenario out;

  // Attribute classes: every combination of (value or unknown) per attribute,
  // each with a random traffic share.
  std::vector<AttributeMap> classes(1);
  for (std::size_t a = 0; a < spec.num_attributes; ++a) {
    std::vector<AttributeMap> next;
    for (const auto& base : classes) {
      next.push_back(base);
      for (std::size_t v = 0; v < spec.values_per_attribute; ++v) {
        AttributeMap m = base;
        m["a" + std::to_string(a)] = "v" + std::to_string(v);
        next.push_back(std::move(m));
      }
    }
    classes = std::move(next);
  }
  std::vector<double> share(classes.size());
  std::gamma_distribution<double> gamma(1.0, 1.0);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    double known = static_cast<double>(classes[c].size());
    double unknown = static_cast<double>(spec.num_attributes) - known;
    share[c] = gamma(rng) * std::pow(spec.known_probability, known) * std::pow(1 - spec.known_probability, unknown);
  }
  double total_share = 0;
  for (double s : share) total_share += s;
  for (double& s : share) s /= total_share;

  const auto total_hours = static_cast<std::size_t>(std::ceil(spec.horizon_days * 24));
  std::vector<double> expected(classes.size(), 0.0);
  std::vector<std::uint32_t> class_ids(classes.size());
  for (std::size_t c = 0; c < classes.size(); ++c) class_ids[c] = out.impressions.intern(classes[c]);

  std::vector<std::pair<Timestamp, std::uint32_t>> events;
  for (std::size_t h = 0; h < total_hours; ++h) {
    Timestamp hour_start = spec.start + std::chrono::hours(h);
    double modulation = traffic_modulation(spec, hour_start);
    for (std::size_t c = 0; c < classes.size(); ++c) {
      double rate = spec.impressions_per_hour * share[c] * modulation;
      expected[c] += rate;
      if (rate <= 0) continue;
      auto n = std::poisson_distribution<long>(rate)(rng);
      std::uniform_int_distribution<int> second(0, 3599);
      for (long e = 0; e < n; ++e) events.emplace_back(hour_start + Seconds(second(rng)), class_ids[c]);
    }
  }
  std::stable_sort(events.begin(), events.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  out.impressions.reserve(events.size());
  for (const auto& [ts, cls] : events) out.impressions.add(ts, cls);

  for (std::size_t c = 0; c < classes.size(); ++c)
    out.graph.supply_nodes.push_back({"n" + std::to_string(c), classes[c], std::round(expected[c])});

  // Contracts.
  std::vector<double> flight_weights;
  for (const auto& f : spec.flights) flight_weights.push_back(f.weight);
  std::discrete_distribution<std::size_t> flight_pick(flight_weights.begin(), flight_weights.end());
  std::uniform_real_distribution<double> demand_jitter(0.5, 1.5);
  for (std::size_t j = 0; j < spec.num_contracts; ++j) {
    double days = std::min(spec.flights[flight_pick(rng)].days, spec.horizon_days);
    auto length_hours = static_cast<long>(std::round(days * 24));
    long latest = std::max<long>(0, static_cast<long>(total_hours) - length_hours);
    long offset = std::uniform_int_distribution<long>(0, latest)(rng);
    Contract c;
    c.id = "c" + std::to_string(j);
    c.start = spec.start + std::chrono::hours(offset);
    c.end = c.start + std::chrono::hours(length_hours);
    c.targeting = detail::random_targeting(rng, spec);
    out.graph.contracts.push_back(std::move(c));
  }

  auto eligible_nodes = [&](const TargetingExpr& t) {
    std::set<std::size_t> nodes;
    for (std::size_t c = 0; c < classes.size(); ++c)
      if (eligible(classes[c], t)) nodes.insert(c);
    return nodes;
  };
  if (spec.contention == Contention::high && spec.num_contracts > 1) {
    for (std::size_t j = 0; j < spec.num_contracts; ++j) {
      auto shares = [&](std::size_t jj) {
        auto mine = eligible_nodes(out.graph.contracts[jj].targeting);
        for (std::size_t k = 0; k < spec.num_contracts; ++k) {
          if (k == jj) continue;
          for (std::size_t n : eligible_nodes(out.graph.contracts[k].targeting))
            if (mine.count(n)) return true;
        }
        return false;
      };
      for (int attempt = 0; attempt < 100 && !shares(j); ++attempt)
        out.graph.contracts[j].targeting = detail::random_targeting(rng, spec);
      if (!shares(j)) out.graph.contracts[j].targeting = TargetingExpr::always_true();
    }
  }

  // Booking: contracts are sold one after another, each taking a share of the
  // forecast inventory still unsold in its flight and targeting, so the book is
  // feasible against the forecast (this sale sequence is the witness).
  std::vector<std::vector<double>> unsold(classes.size(), std::vector<double>(total_hours));
  for (std::size_t h = 0; h < total_hours; ++h) {
    double modulation = traffic_modulation(spec, spec.start + std::chrono::hours(h));
    for (std::size_t k = 0; k < classes.size(); ++k) unsold[k][h] = spec.impressions_per_hour * share[k] * modulation;
  }
  for (Contract& c : out.graph.contracts) {
    double take = std::min(1.0, spec.demand_fraction * demand_jitter(rng));
    double booked = 0;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      if (!eligible(classes[k], c.targeting)) continue;
      for (std::size_t h = 0; h < total_hours; ++h) {
        Timestamp hs = spec.start + std::chrono::hours(h);
        if (hs < c.start || hs >= c.end) continue;
        booked += take * unsold[k][h];
        unsold[k][h] *= 1 - take;
      }
    }
    c.demand = std::max(1.0, std::floor(booked));
    c.booked_demand = c.demand;
  }
  out.graph.edges = build_edges(out.graph.supply_nodes, out.graph.contracts);
  return out;
}

// Single untargeted contract served by one class of traffic at a constant
// per-cycle volume: the setting of the forecast-error analysis.
struct SingleContractSetup {
  double demand = 2.5e6;
  std::size_t cycles = 5;
  double cycle_hours = 24;
  std::size_t impressions_per_cycle = 800000;
  Timestamp start = parse_iso8601("2012-01-01T00:00:00Z");
};

inline Scenario single_contract_scenario(const SingleContractSetup& s) {
  Scenario out;
  Contract c;
  c.id = "c0";
  c.targeting = TargetingExpr::always_true();
  c.demand = c.booked_demand = s.demand;
  c.start = s.start;
  c.end = s.start + hours(s.cycle_hours * static_cast<double>(s.cycles));
  out.graph.contracts.push_back(c);
  AttributeMap attrs{{"site", "all"}};
  out.graph.supply_nodes.push_back(
      {"n0", attrs, static_cast<double>(s.impressions_per_cycle) * static_cast<double>(s.cycles)});
  out.graph.edges = build_edges(out.graph.supply_nodes, out.graph.contracts);

  std::uint32_t cls = out.impressions.intern(attrs);
  out.impressions.reserve(s.impressions_per_cycle * s.cycles);
  const auto cycle = hours(s.cycle_hours);
  for (std::size_t k = 0; k < s.cycles; ++k) {
    Timestamp cycle_start = s.start + cycle * static_cast<long>(k);
    for (std::size_t e = 0; e < s.impressions_per_cycle; ++e) {
      auto offset = static_cast<long long>(static_cast<double>(e) * static_cast<double>(cycle.count()) /
                                           static_cast<double>(s.impressions_per_cycle));
      out.impressions.add(cycle_start + Seconds(offset), cls);
    }
  }
  return out;
}

}  // namespace adplan
