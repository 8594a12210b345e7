#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "adplan/error.hpp"
#include "adplan/targeting.hpp"
#include "adplan/time.hpp"
#include "adplan/types.hpp"

namespace adplan {

inline constexpr double kDefaultPenalty = 10.0;

struct SupplyNode {
  std::string id;
  AttributeMap attributes;
  double supply = 0;  // forecast impressions s_i

  bool operator==(const SupplyNode&) const = default;
};

struct Contract {
  std::string id;
  TargetingExpr targeting;
  double demand = 0;         // remaining demand d_j
  Timestamp start{};
  Timestamp end{};
  double booked_demand = 0;  // original d_j
  double penalty = kDefaultPenalty;

  bool operator==(const Contract&) const = default;

  double flight_hours() const { return hours_between(start, end); }
};

// Bipartite forecast graph. Edges are normally derived from targeting; a
// hand-built edge list must pass validate_graph before planning.
struct AllocationGraph {
  std::vector<SupplyNode> supply_nodes;
  std::vector<Contract> contracts;
  std::vector<EdgeRef> edges;

  bool operator==(const AllocationGraph&) const = default;

  static AllocationGraph from_targeting(std::vector<SupplyNode> nodes, std::vector<Contract> contracts) {
    AllocationGraph g{std::move(nodes), std::move(contracts), {}};
    g.edges = build_edges(g.supply_nodes, g.contracts);
    return g;
  }
};

// Sparse x_ij keyed by edge; absent edges are 0.
using FractionalAllocation = std::map<EdgeRef, double>;

// Index form of a graph consumed by the planners. Supply node i is eligible
// for contracts node_contracts[i]; both adjacency lists are sorted.
struct IndexedGraph {
  std::vector<std::string> contract_ids;
  std::vector<double> demand;
  std::vector<double> penalty;
  std::vector<double> supply;
  std::vector<std::vector<std::size_t>> node_contracts;
  std::vector<std::vector<std::size_t>> contract_nodes;

  std::size_t num_nodes() const { return supply.size(); }
  std::size_t num_contracts() const { return demand.size(); }

  std::size_t add_contract(std::string id, double d, double p = kDefaultPenalty) {
    contract_ids.push_back(std::move(id));
    demand.push_back(d);
    penalty.push_back(p);
    contract_nodes.emplace_back();
    return demand.size() - 1;
  }

  // `contracts` must be sorted ascending.
  std::size_t add_node(double s, std::vector<std::size_t> contracts) {
    std::size_t i = supply.size();
    supply.push_back(s);
    for (std::size_t j : contracts) contract_nodes[j].push_back(i);
    node_contracts.push_back(std::move(contracts));
    return i;
  }

  double eligible_supply(std::size_t j) const {
    double total = 0;
    for (std::size_t i : contract_nodes[j]) total += supply[i];
    return total;
  }
};

struct Violation {
  enum class Kind { duplicate_id, bad_value, unknown_reference, duplicate_edge, ineligible_edge, missing_edge };
  Kind kind;
  std::string message;
};

inline std::vector<Violation> validate_graph(const AllocationGraph& g) {
  using K = Violation::Kind;
  std::vector<Violation> out;
  std::unordered_map<std::string, std::size_t> node_index, contract_index;
  for (std::size_t i = 0; i < g.supply_nodes.size(); ++i) {
    const SupplyNode& n = g.supply_nodes[i];
    if (!node_index.emplace(n.id, i).second) out.push_back({K::duplicate_id, "duplicate supply node id '" + n.id + "'"});
    if (!(n.supply >= 0)) out.push_back({K::bad_value, "supply node '" + n.id + "' has negative supply"});
    for (const auto& [name, value] : n.attributes)
      if (name.empty()) out.push_back({K::bad_value, "supply node '" + n.id + "' has an empty attribute name"});
  }
  for (std::size_t j = 0; j < g.contracts.size(); ++j) {
    const Contract& c = g.contracts[j];
    if (!contract_index.emplace(c.id, j).second) out.push_back({K::duplicate_id, "duplicate contract id '" + c.id + "'"});
    if (!(c.demand > 0)) out.push_back({K::bad_value, "contract '" + c.id + "' has non-positive demand"});
    if (!(c.start < c.end)) out.push_back({K::bad_value, "contract '" + c.id + "' has start >= end"});
    if (!(c.booked_demand >= c.demand))
      out.push_back({K::bad_value, "contract '" + c.id + "' has booked demand below demand"});
    if (!(c.penalty > 0)) out.push_back({K::bad_value, "contract '" + c.id + "' has non-positive penalty"});
    if (!well_formed(c.targeting)) out.push_back({K::bad_value, "contract '" + c.id + "' has malformed targeting"});
  }

  std::set<EdgeRef> seen;
  for (const EdgeRef& e : g.edges) {
    std::string name = "(" + e.node_id + ", " + e.contract_id + ")";
    auto ni = node_index.find(e.node_id);
    auto cj = contract_index.find(e.contract_id);
    if (ni == node_index.end() || cj == contract_index.end()) {
      std::string which = ni == node_index.end() ? "supply node '" + e.node_id + "'" : "contract '" + e.contract_id + "'";
      out.push_back({K::unknown_reference, "edge " + name + " references unknown " + which});
      continue;
    }
    if (!seen.insert(e).second) {
      out.push_back({K::duplicate_edge, "duplicate edge " + name});
      continue;
    }
    if (!eligible(g.supply_nodes[ni->second].attributes, g.contracts[cj->second].targeting))
      out.push_back({K::ineligible_edge, "edge " + name + " fails the contract's targeting"});
  }
  for (const SupplyNode& n : g.supply_nodes)
    for (const Contract& c : g.contracts)
      if (eligible(n.attributes, c.targeting) && !seen.count({n.id, c.id}))
        out.push_back({K::missing_edge, "eligible pair (" + n.id + ", " + c.id + ") has no edge"});
  return out;
}

inline void require_valid(const AllocationGraph& g) {
  auto violations = validate_graph(g);
  if (violations.empty()) return;
  std::vector<std::string> messages;
  for (auto& v : violations) messages.push_back(v.message);
  throw validation_error(messages, "invalid allocation graph: " + messages.front() +
                                       (messages.size() > 1 ? " (+" + std::to_string(messages.size() - 1) + " more)" : ""));
}

// Validates, then lowers to index form (contracts and nodes keep input order).
inline IndexedGraph index_graph(const AllocationGraph& g) {
  require_valid(g);
  IndexedGraph ix;
  std::unordered_map<std::string, std::size_t> node_index, contract_index;
  for (const Contract& c : g.contracts) contract_index[c.id] = ix.add_contract(c.id, c.demand, c.penalty);
  std::vector<std::vector<std::size_t>> adjacency(g.supply_nodes.size());
  for (std::size_t i = 0; i < g.supply_nodes.size(); ++i) node_index[g.supply_nodes[i].id] = i;
  for (const EdgeRef& e : g.edges) adjacency[node_index.at(e.node_id)].push_back(contract_index.at(e.contract_id));
  for (std::size_t i = 0; i < g.supply_nodes.size(); ++i) {
    std::sort(adjacency[i].begin(), adjacency[i].end());
    ix.add_node(g.supply_nodes[i].supply, std::move(adjacency[i]));
  }
  return ix;
}

struct FeasibilityReport {
  std::map<std::string, double> demand_slack;   // sum_i x_ij s_i - d_j
  std::map<std::string, double> supply_excess;  // sum_j x_ij - 1
  std::vector<EdgeRef> negative_entries;
  bool feasible = false;
};

// `tolerance` is relative: demand slack may dip to -tolerance*d_j and supply
// excess may reach +tolerance before the constraint counts as violated.
inline FeasibilityReport check_feasibility(const AllocationGraph& g, const FractionalAllocation& x,
                                           double tolerance = 1e-9) {
  std::unordered_map<std::string, const SupplyNode*> nodes;
  std::unordered_map<std::string, const Contract*> contracts;
  for (const auto& n : g.supply_nodes) nodes[n.id] = &n;
  for (const auto& c : g.contracts) contracts[c.id] = &c;
  std::set<EdgeRef> edges(g.edges.begin(), g.edges.end());

  FeasibilityReport r;
  for (const auto& c : g.contracts) r.demand_slack[c.id] = -c.demand;
  for (const auto& n : g.supply_nodes) r.supply_excess[n.id] = -1.0;
  for (const auto& [edge, value] : x) {
    if (!edges.count(edge)) throw error("allocation references unknown edge (" + edge.node_id + ", " + edge.contract_id + ")");
    if (value < 0) r.negative_entries.push_back(edge);
    r.demand_slack[edge.contract_id] += value * nodes.at(edge.node_id)->supply;
    r.supply_excess[edge.node_id] += value;
  }
  r.feasible = r.negative_entries.empty();
  for (const auto& [id, slack] : r.demand_slack)
    if (slack < -tolerance * contracts.at(id)->demand) r.feasible = false;
  for (const auto& [id, excess] : r.supply_excess)
    if (excess > tolerance) r.feasible = false;
  return r;
}

}  // namespace adplan
