// Walks through planning and serving for three overlapping contracts.

#include <cstdio>

#include "adplan/adplan.hpp"

using namespace adplan;

int main() {
  Timestamp start = parse_iso8601("2012-01-01T00:00:00Z");
  Timestamp end = parse_iso8601("2012-01-02T00:00:00Z");
  auto contract = [&](const char* id, const char* targeting, double demand) {
    Contract c;
    c.id = id;
    c.targeting = parse_targeting(targeting);
    c.demand = c.booked_demand = demand;
    c.start = start;
    c.end = end;
    return c;
  };
  std::vector<SupplyNode> nodes = {
      {"n1", {{"gender", "male"}, {"age_bucket", "5"}}, 100},
      {"n2", {{"gender", "male"}, {"state", "NV"}, {"age_bucket", "5"}}, 100},
      {"n3", {{"gender", "male"}, {"state", "CA"}, {"age_bucket", "5"}}, 100},
      {"n4", {{"state", "CA"}, {"age_bucket", "5"}}, 100},
      {"n5", {{"state", "NV"}, {"age_bucket", "5"}}, 100},
      {"n6", {{"state", "WA"}, {"age_bucket", "5"}}, 100},
  };
  AllocationGraph g = AllocationGraph::from_targeting(
      nodes, {contract("male", "gender = male", 50), contract("ca", "state = CA", 200),
              contract("age", "age_bucket = 5", 250)});

  HwmPlan plan = generate_hwm_plan(g);
  std::printf("HWM plan (allocation order):\n");
  for (const auto& e : plan.entries)
    std::printf("  %-5s eligible %4.0f  alpha %.4f\n", e.contract_id.c_str(), e.eligible_supply, e.alpha);

  DualPlan dual = solve_dual_offline(g);
  std::printf("DUAL plan (%zu sweeps):\n", dual.sweeps);
  for (const auto& e : dual.entries)
    std::printf("  %-5s theta %.4f  alpha %.4f\n", e.contract_id.c_str(), e.theta, e.alpha);

  SplitMix64 rng(1);
  for (const auto& n : {nodes[2], nodes[0], nodes[5]}) {
    std::vector<HwmCandidate> eligible_contracts;
    for (std::size_t k = 0; k < plan.entries.size(); ++k) {
      const Contract& c = *std::find_if(g.contracts.begin(), g.contracts.end(),
                                        [&](const Contract& x) { return x.id == plan.entries[k].contract_id; });
      if (eligible(n.attributes, c.targeting)) eligible_contracts.push_back({c.id, k, plan.entries[k].alpha});
    }
    ServeDecision d = serve_hwm(eligible_contracts, rng, n.id);
    std::printf("impression like %s:", n.id.c_str());
    for (const auto& [id, p] : d.probabilities) std::printf("  %s %.3f", id.c_str(), p);
    std::printf("  -> %s\n", d.chosen.value_or("(unallocated)").c_str());
  }
}
