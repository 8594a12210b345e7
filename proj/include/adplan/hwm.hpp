#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "adplan/error.hpp"
#include "adplan/model.hpp"
#include "adplan/serving.hpp"

namespace adplan {

struct NeighborSupply {
  double remaining = 0;  // r_i
  double supply = 0;     // s_i
};

// Smallest alpha with sum_i min(r_i, s_i * alpha) = demand, or 1 when the
// remaining supply cannot cover the demand. The left side is piecewise
// linear with kinks at r_i / s_i, so the root is found by scanning kinks.
inline double solve_alpha(std::span<const NeighborSupply> neighbors, double demand) {
  if (!(demand > 0)) throw error("solve_alpha: demand must be positive");
  double total_remaining = 0;
  double slope = 0;
  std::vector<std::pair<double, std::size_t>> kinks;
  kinks.reserve(neighbors.size());
  for (std::size_t k = 0; k < neighbors.size(); ++k) {
    const auto& n = neighbors[k];
    if (n.remaining < 0 || n.supply < 0 || n.remaining > n.supply)
      throw error("solve_alpha: need 0 <= remaining <= supply");
    if (n.supply == 0) continue;
    total_remaining += n.remaining;
    slope += n.supply;
    kinks.emplace_back(n.remaining / n.supply, k);
  }
  if (total_remaining < demand) return 1.0;
  std::sort(kinks.begin(), kinks.end());

  double capped = 0;
  double previous = 0;
  for (const auto& [kink, k] : kinks) {
    if (capped + slope * kink >= demand) return std::clamp((demand - capped) / slope, previous, kink);
    capped += neighbors[k].remaining;
    slope -= neighbors[k].supply;
    previous = kink;
  }
  // Only reachable when demand equals the total remaining supply up to rounding.
  return kinks.back().first;
}

struct HwmEntry {
  std::string contract_id;
  double eligible_supply = 0;  // S_j
  double alpha = 0;            // serving rate

  bool operator==(const HwmEntry&) const = default;
};

// Entries are stored in allocation order (ascending S_j, ties by id).
struct HwmPlan {
  std::vector<HwmEntry> entries;
  std::vector<std::string> empty_supply;  // no eligible forecast supply
  std::vector<std::string> unsatisfied;   // remaining supply short of demand; alpha forced to 1

  std::optional<std::size_t> position(std::string_view contract_id) const {
    for (std::size_t k = 0; k < entries.size(); ++k)
      if (entries[k].contract_id == contract_id) return k;
    return std::nullopt;
  }
};

// Allocation order plus alpha per contract of `g`, indexed by contract.
struct HwmRates {
  std::vector<std::size_t> order;  // contract indices in allocation order
  std::vector<double> alpha;
  std::vector<double> eligible_supply;
  std::vector<bool> satisfied;
};

inline HwmRates compute_hwm_rates(const IndexedGraph& g) {
  const std::size_t m = g.num_contracts();
  HwmRates out;
  out.alpha.assign(m, 1.0);
  out.satisfied.assign(m, false);
  out.eligible_supply.resize(m);
  for (std::size_t j = 0; j < m; ++j) out.eligible_supply[j] = g.eligible_supply(j);
  out.order.resize(m);
  std::iota(out.order.begin(), out.order.end(), std::size_t{0});
  std::sort(out.order.begin(), out.order.end(), [&](std::size_t a, std::size_t b) {
    if (out.eligible_supply[a] != out.eligible_supply[b]) return out.eligible_supply[a] < out.eligible_supply[b];
    return g.contract_ids[a] < g.contract_ids[b];
  });

  std::vector<double> remaining = g.supply;
  std::vector<NeighborSupply> neighbors;
  for (std::size_t j : out.order) {
    neighbors.clear();
    double available = 0;
    for (std::size_t i : g.contract_nodes[j]) {
      neighbors.push_back({remaining[i], g.supply[i]});
      available += remaining[i];
    }
    double alpha = solve_alpha(neighbors, g.demand[j]);
    out.alpha[j] = alpha;
    out.satisfied[j] = available >= g.demand[j] && out.eligible_supply[j] > 0;
    for (std::size_t i : g.contract_nodes[j]) remaining[i] -= std::min(remaining[i], g.supply[i] * alpha);
  }
  return out;
}

inline HwmPlan generate_hwm_plan(const IndexedGraph& g) {
  HwmRates rates = compute_hwm_rates(g);
  HwmPlan plan;
  for (std::size_t j : rates.order) {
    plan.entries.push_back({g.contract_ids[j], rates.eligible_supply[j], rates.alpha[j]});
    if (!(rates.eligible_supply[j] > 0))
      plan.empty_supply.push_back(g.contract_ids[j]);
    else if (!rates.satisfied[j])
      plan.unsatisfied.push_back(g.contract_ids[j]);
  }
  return plan;
}

inline HwmPlan generate_hwm_plan(const AllocationGraph& g) { return generate_hwm_plan(index_graph(g)); }

// Truncation rule: walking in allocation order, each contract receives its
// alpha until the cumulative mass would exceed 1; the first contract that
// crosses gets the remainder and later ones get nothing.
inline void truncate_rates(std::span<const double> alphas_in_order, std::span<double> out) {
  double used = 0;
  for (std::size_t k = 0; k < alphas_in_order.size(); ++k) {
    double p = std::clamp(std::min(alphas_in_order[k], 1.0 - used), 0.0, 1.0);
    out[k] = p;
    used += p;
  }
}

struct HwmCandidate {
  std::string contract_id;
  std::size_t order = 0;  // position in the plan's allocation order
  double alpha = 0;
};

template <typename Rng>
ServeDecision serve_hwm(std::vector<HwmCandidate> eligible, Rng& rng, std::string impression_id = {}) {
  std::sort(eligible.begin(), eligible.end(),
            [](const HwmCandidate& a, const HwmCandidate& b) { return a.order < b.order; });
  std::vector<double> alphas(eligible.size()), probabilities(eligible.size());
  for (std::size_t k = 0; k < eligible.size(); ++k) alphas[k] = eligible[k].alpha;
  truncate_rates(alphas, probabilities);

  ServeDecision d;
  d.impression_id = std::move(impression_id);
  d.draw = uniform01(rng);
  std::size_t pick = categorical_pick(probabilities, d.draw);
  if (pick != kUnallocated) d.chosen = eligible[pick].contract_id;
  for (std::size_t k = 0; k < eligible.size(); ++k) d.probabilities.emplace_back(eligible[k].contract_id, probabilities[k]);
  return d;
}

}  // namespace adplan
