#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "adplan/time.hpp"

namespace adplan {

struct DeliveryPoint {
  Timestamp t{};
  double delivered = 0;    // cumulative y_j(t)
  double linear_goal = 0;  // y*_j(t)

  bool operator==(const DeliveryPoint&) const = default;
};

struct ContractDelivery {
  std::string contract_id;
  double booked = 0;
  Timestamp start{};
  Timestamp end{};
  double delivered = 0;
  std::vector<DeliveryPoint> series;  // sampled at cycle boundaries
  std::vector<double> alphas;         // plan rate in force during each cycle (NaN when not planned)

  bool operator==(const ContractDelivery&) const = default;
};

struct SmoothnessSummary {
  std::optional<double> sigma75_finished;
  std::optional<double> sigma95_finished;
  std::optional<double> sigma75_unfinished;

  bool operator==(const SmoothnessSummary&) const = default;
};

struct SimulationReport {
  std::string algorithm;
  std::vector<ContractDelivery> contracts;
  std::vector<Timestamp> cycle_starts;
  Timestamp horizon{};
  double total_impressions = 0;
  double unallocated = 0;
  double underdelivery_fraction = 0;
  SmoothnessSummary smoothness;
  std::optional<double> delivery_improvement;  // against the baseline comparator, percent

  double total_delivered() const {
    double total = 0;
    for (const auto& c : contracts) total += c.delivered;
    return total;
  }

  bool operator==(const SimulationReport&) const = default;
};

}  // namespace adplan
