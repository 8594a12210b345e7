#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "adplan/adplan.hpp"
#include "oracles/hwm_oracle.hpp"

namespace fixtures {

using namespace adplan;

inline Timestamp day0() { return parse_iso8601("2012-01-01T00:00:00Z"); }

inline Contract contract(std::string id, const std::string& targeting, double demand, Timestamp start = day0(),
                         Timestamp end = day0() + std::chrono::hours(24)) {
  Contract c;
  c.id = std::move(id);
  c.targeting = parse_targeting(targeting);
  c.demand = c.booked_demand = demand;
  c.start = start;
  c.end = end;
  return c;
}

// Six visitor classes (supply in thousands) and three contracts: Male (d=50),
// CA (d=200) and an age contract matching everyone (d=250).
inline AllocationGraph three_contracts() {
  std::vector<SupplyNode> nodes = {
      {"n1", {{"gender", "male"}, {"age_bucket", "5"}}, 100},
      {"n2", {{"gender", "male"}, {"state", "NV"}, {"age_bucket", "5"}}, 100},
      {"n3", {{"gender", "male"}, {"state", "CA"}, {"age_bucket", "5"}}, 100},
      {"n4", {{"state", "CA"}, {"age_bucket", "5"}}, 100},
      {"n5", {{"state", "NV"}, {"age_bucket", "5"}}, 100},
      {"n6", {{"state", "WA"}, {"age_bucket", "5"}}, 100},
  };
  std::vector<Contract> contracts = {contract("male", "gender = male", 50), contract("ca", "state = CA", 200),
                                     contract("age", "age_bucket = 5", 250)};
  return AllocationGraph::from_targeting(std::move(nodes), std::move(contracts));
}

struct RandomGraphSpec {
  std::size_t max_nodes = 20;
  std::size_t max_contracts = 10;
  double edge_probability = 0.35;
  double min_supply = 1, max_supply = 10;
  double min_fill = 0.1, max_fill = 0.9;  // demand as a share of eligible supply
  double oversold_probability = 0.0;      // chance a contract asks for 1.0-1.5x its supply
};

// Random bipartite graph in index form; every contract has at least one node.
inline IndexedGraph random_indexed_graph(std::mt19937_64& rng, const RandomGraphSpec& spec = {}) {
  std::size_t n = std::uniform_int_distribution<std::size_t>(1, spec.max_nodes)(rng);
  std::size_t m = std::uniform_int_distribution<std::size_t>(1, spec.max_contracts)(rng);
  std::vector<double> supply(n);
  for (double& s : supply) s = std::uniform_real_distribution<double>(spec.min_supply, spec.max_supply)(rng);
  std::vector<std::vector<std::size_t>> adjacency(n);
  std::vector<double> eligible(m, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      if (std::bernoulli_distribution(spec.edge_probability)(rng)) adjacency[i].push_back(j);
  for (std::size_t j = 0; j < m; ++j) {
    bool any = false;
    for (const auto& a : adjacency) any = any || std::find(a.begin(), a.end(), j) != a.end();
    if (!any) {
      auto& a = adjacency[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)];
      a.insert(std::upper_bound(a.begin(), a.end(), j), j);
    }
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j : adjacency[i]) eligible[j] += supply[i];
  IndexedGraph g;
  for (std::size_t j = 0; j < m; ++j) {
    bool oversold = std::bernoulli_distribution(spec.oversold_probability)(rng);
    double fill = oversold ? std::uniform_real_distribution<double>(1.0, 1.5)(rng)
                           : std::uniform_real_distribution<double>(spec.min_fill, spec.max_fill)(rng);
    g.add_contract("c" + std::to_string(j), eligible[j] * fill);
  }
  for (std::size_t i = 0; i < n; ++i) g.add_node(supply[i], adjacency[i]);
  return g;
}

// Same graph as an AllocationGraph: node i carries attribute "n<i>" = "1" and
// contract j targets the OR of its nodes' attributes.
inline AllocationGraph to_allocation_graph(const IndexedGraph& g) {
  AllocationGraph out;
  for (std::size_t i = 0; i < g.num_nodes(); ++i)
    out.supply_nodes.push_back({"n" + std::to_string(i), {{"n" + std::to_string(i), "1"}}, g.supply[i]});
  for (std::size_t j = 0; j < g.num_contracts(); ++j) {
    std::vector<TargetingExpr> terms;
    for (std::size_t i : g.contract_nodes[j]) terms.push_back(TargetingExpr::equals("n" + std::to_string(i), "1"));
    Contract c;
    c.id = g.contract_ids[j];
    c.targeting = terms.size() == 1 ? terms.front() : TargetingExpr::any_of(std::move(terms));
    c.demand = c.booked_demand = g.demand[j];
    c.penalty = g.penalty[j];
    c.start = day0();
    c.end = day0() + std::chrono::hours(24);
    out.contracts.push_back(std::move(c));
  }
  out.edges = build_edges(out.supply_nodes, out.contracts);
  return out;
}

// Expected allocation x_ij of an HWM plan replayed over the forecast graph,
// using the oracle truncation.
inline FractionalAllocation expected_hwm_allocation(const AllocationGraph& g, const HwmPlan& plan) {
  std::map<std::string, std::size_t> position;
  std::map<std::string, double> alpha;
  for (std::size_t k = 0; k < plan.entries.size(); ++k) {
    position[plan.entries[k].contract_id] = k;
    alpha[plan.entries[k].contract_id] = plan.entries[k].alpha;
  }
  std::map<std::string, std::vector<std::string>> by_node;
  for (const EdgeRef& e : g.edges) by_node[e.node_id].push_back(e.contract_id);
  FractionalAllocation x;
  for (auto& [node, contracts] : by_node) {
    std::sort(contracts.begin(), contracts.end(),
              [&](const std::string& a, const std::string& b) { return position.at(a) < position.at(b); });
    std::vector<double> alphas;
    for (const auto& c : contracts) alphas.push_back(alpha.at(c));
    std::vector<double> p = oracle::truncated(alphas);
    for (std::size_t k = 0; k < contracts.size(); ++k) x[{node, contracts[k]}] = p[k];
  }
  return x;
}

inline std::map<std::string, double> delivered_by(const AllocationGraph& g, const FractionalAllocation& x) {
  std::map<std::string, double> supply, out;
  for (const auto& n : g.supply_nodes) supply[n.id] = n.supply;
  for (const auto& c : g.contracts) out[c.id] = 0;
  for (const auto& [e, v] : x) out[e.contract_id] += v * supply.at(e.node_id);
  return out;
}

// Whether some allocation of the actual impression stream meets every demand,
// shown by a greedy witness: contracts in ascending order of eligible
// impressions each take whole (class, hour) cells inside their flight.
inline bool greedy_witness_feasible(const Scenario& s) {
  const auto& events = s.impressions.events();
  if (events.empty() || s.graph.contracts.empty()) return false;
  Timestamp origin = s.graph.contracts.front().start;
  for (const auto& c : s.graph.contracts) origin = std::min(origin, c.start);
  std::map<std::pair<std::uint32_t, long>, double> cells;
  for (const auto& e : events)
    cells[{e.attribute_class, std::chrono::floor<std::chrono::hours>(e.ts - origin).count()}] += 1;
  auto usable = [&](const Contract& c, std::uint32_t cls, long hour) {
    Timestamp begin = origin + std::chrono::hours(hour);
    return begin >= c.start && begin + std::chrono::hours(1) <= c.end &&
           eligible(s.impressions.classes()[cls], c.targeting);
  };
  std::vector<std::pair<double, std::size_t>> order;
  for (std::size_t j = 0; j < s.graph.contracts.size(); ++j) {
    double total = 0;
    for (const auto& [cell, count] : cells)
      if (usable(s.graph.contracts[j], cell.first, cell.second)) total += count;
    order.emplace_back(total, j);
  }
  std::sort(order.begin(), order.end());
  for (const auto& [total, j] : order) {
    const Contract& c = s.graph.contracts[j];
    double need = c.demand;
    for (auto& [cell, count] : cells) {
      if (need <= 0) break;
      if (!usable(c, cell.first, cell.second)) continue;
      double take = std::min(count, need);
      count -= take;
      need -= take;
    }
    if (need > 0) return false;
  }
  return true;
}

// Bit-exact report comparison; rates of unplanned cycles are NaN, which the
// defaulted operator== never considers equal.
inline bool identical(const SimulationReport& a, const SimulationReport& b) {
  if (to_json(a).dump() != to_json(b).dump() || a.contracts.size() != b.contracts.size()) return false;
  for (std::size_t j = 0; j < a.contracts.size(); ++j)
    if (a.contracts[j].series != b.contracts[j].series) return false;
  return a.cycle_starts == b.cycle_starts;
}

}  // namespace fixtures
