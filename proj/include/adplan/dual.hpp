#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "adplan/error.hpp"
#include "adplan/model.hpp"
#include "adplan/serving.hpp"

namespace adplan {

// Objective minimized by the dual planner:
//
//   sum_j sum_{i in G(j)} s_i (x_ij - theta_j)^2 / theta_j  +  sum_j p_j u_j
//
// subject to sum_i x_ij s_i + u_j >= d_j, sum_j x_ij <= 1, x >= 0, u >= 0,
// with theta_j = d_j / sum_{i in G(j)} s_i.
//
// The stored dual alpha_j is the one for which x_ij = max(0, theta_j (1 + alpha_j - beta_i))
// is stationary for this objective, so it is half of the textbook multiplier of the
// demand row and is capped at p_j / 2.
struct DualObjectiveSpec {
  std::map<std::string, double> penalty;  // overrides Contract::penalty

  double penalty_for(const Contract& c) const {
    auto it = penalty.find(c.id);
    return it == penalty.end() ? c.penalty : it->second;
  }
};

struct DualEntry {
  std::string contract_id;
  double theta = 0;
  double alpha = 0;
  double penalty = kDefaultPenalty;

  bool operator==(const DualEntry&) const = default;
};

struct DualPlan {
  std::vector<DualEntry> entries;
  std::vector<std::string> excluded;  // no eligible forecast supply, theta undefined
  std::size_t sweeps = 0;
};

inline double dual_alpha_cap(double penalty) { return penalty / 2.0; }

// theta_j for every contract of `g`; 0 where the contract has no supply.
inline std::vector<double> target_fractions(const IndexedGraph& g) {
  std::vector<double> theta(g.num_contracts(), 0.0);
  for (std::size_t j = 0; j < g.num_contracts(); ++j) {
    double s = g.eligible_supply(j);
    if (s > 0) theta[j] = g.demand[j] / s;
  }
  return theta;
}

inline double dual_objective(const AllocationGraph& g, const FractionalAllocation& x,
                             const std::map<std::string, double>& underdelivery,
                             const DualObjectiveSpec& spec = {}, double tolerance = 1e-9) {
  IndexedGraph ix = index_graph(g);
  std::vector<double> theta = target_fractions(ix);
  std::unordered_map<std::string, std::size_t> contract_index, node_index;
  for (std::size_t j = 0; j < g.contracts.size(); ++j) contract_index[g.contracts[j].id] = j;
  for (std::size_t i = 0; i < g.supply_nodes.size(); ++i) node_index[g.supply_nodes[i].id] = i;

  std::vector<double> delivered(g.contracts.size(), 0.0), used(g.supply_nodes.size(), 0.0);
  double objective = 0;
  for (const EdgeRef& e : g.edges) {
    std::size_t i = node_index.at(e.node_id), j = contract_index.at(e.contract_id);
    auto it = x.find(e);
    double value = it == x.end() ? 0.0 : it->second;
    if (value < 0) throw error("negative allocation on edge (" + e.node_id + ", " + e.contract_id + ")");
    double s = g.supply_nodes[i].supply;
    delivered[j] += value * s;
    used[i] += value;
    if (theta[j] > 0) objective += s * (value - theta[j]) * (value - theta[j]) / theta[j];
  }
  for (const auto& [edge, value] : x)
    if (!contract_index.count(edge.contract_id) || !node_index.count(edge.node_id))
      throw error("allocation references unknown edge (" + edge.node_id + ", " + edge.contract_id + ")");
  for (std::size_t i = 0; i < used.size(); ++i)
    if (used[i] > 1 + tolerance) throw error("supply constraint violated at node '" + g.supply_nodes[i].id + "'");
  for (std::size_t j = 0; j < g.contracts.size(); ++j) {
    const Contract& c = g.contracts[j];
    auto it = underdelivery.find(c.id);
    double u = it == underdelivery.end() ? 0.0 : it->second;
    if (u < 0) throw error("negative underdelivery for contract '" + c.id + "'");
    if (delivered[j] + u < c.demand * (1 - tolerance))
      throw error("relaxed demand constraint violated for contract '" + c.id + "'");
    objective += spec.penalty_for(c) * u;
  }
  return objective;
}

struct DualCandidate {
  double theta = 0;
  double alpha = 0;
};

struct PrimalSlice {
  std::vector<double> x;  // parallel to the candidates
  double beta = 0;        // dual of this impression's supply constraint
};

// Solves sum_j max(0, theta_j (1 + alpha_j - X)) = 1 for X, sets
// beta = max(0, X) and x_j = max(0, theta_j (1 + alpha_j - beta)).
inline PrimalSlice reconstruct_primal(std::span<const DualCandidate> eligible) {
  PrimalSlice out;
  out.x.resize(eligible.size());
  if (eligible.empty()) return out;

  double at_zero = 0;
  for (const auto& c : eligible) {
    if (!(c.theta > 0)) throw error("reconstruct_primal: theta must be positive");
    at_zero += std::max(0.0, c.theta * (1 + c.alpha));
  }
  if (at_zero > 1) {
    // g_j(alpha_j - X) vanishes for X >= 1 + alpha_j; activate contracts in
    // descending breakpoint order until the linear piece crosses 1.
    std::vector<std::size_t> idx(eligible.size());
    for (std::size_t k = 0; k < idx.size(); ++k) idx[k] = k;
    std::sort(idx.begin(), idx.end(),
              [&](std::size_t a, std::size_t b) { return eligible[a].alpha > eligible[b].alpha; });
    double theta_sum = 0, weighted = 0;
    for (std::size_t m = 0; m < idx.size(); ++m) {
      const auto& c = eligible[idx[m]];
      theta_sum += c.theta;
      weighted += c.theta * (1 + c.alpha);
      double x_root = (weighted - 1) / theta_sum;
      double lower = m + 1 < idx.size() ? 1 + eligible[idx[m + 1]].alpha : -std::numeric_limits<double>::infinity();
      if (x_root >= lower) {
        out.beta = std::max(0.0, x_root);
        break;
      }
    }
  }
  for (std::size_t k = 0; k < eligible.size(); ++k)
    out.x[k] = std::max(0.0, eligible[k].theta * (1 + eligible[k].alpha - out.beta));
  return out;
}

namespace detail {

// Expected delivery sum_i s_i x_ij as a function of alpha_j with the other
// duals held fixed.
class DualCoordinate {
 public:
  DualCoordinate(const IndexedGraph& g, const std::vector<double>& theta, const std::vector<double>& alpha)
      : g_(g), theta_(theta), alpha_(alpha) {}

  double delivery(std::size_t j, double a) {
    double total = 0;
    for (std::size_t i : g_.contract_nodes[j]) {
      const auto& contracts = g_.node_contracts[i];
      scratch_.clear();
      std::size_t self = 0;
      for (std::size_t k = 0; k < contracts.size(); ++k) {
        std::size_t c = contracts[k];
        if (!(theta_[c] > 0)) continue;
        if (c == j) self = scratch_.size();
        scratch_.push_back({theta_[c], c == j ? a : alpha_[c]});
      }
      total += g_.supply[i] * reconstruct_primal(scratch_).x[self];
    }
    return total;
  }

  // Root of delivery(j, a) = d_j on [0, cap] by regula falsi (Illinois),
  // falling back to bisection; delivery is monotone and piecewise linear.
  double solve(std::size_t j, double cap) {
    const double d = g_.demand[j];
    double lo = 0, f_lo = delivery(j, lo) - d;
    if (f_lo >= 0) return 0.0;
    double hi = cap, f_hi = delivery(j, hi) - d;
    if (f_hi <= 0) return cap;
    int side = 0;
    for (int iter = 0; iter < 200; ++iter) {
      double a = (lo * f_hi - hi * f_lo) / (f_hi - f_lo);
      if (!(a > lo && a < hi)) a = 0.5 * (lo + hi);
      double f = delivery(j, a) - d;
      if (f == 0 || std::abs(f) <= 1e-13 * d || hi - lo <= 1e-15 * std::max(1.0, cap)) return a;
      if (f < 0) {
        lo = a, f_lo = f;
        if (side == -1) f_hi *= 0.5;
        side = -1;
      } else {
        hi = a, f_hi = f;
        if (side == 1) f_lo *= 0.5;
        side = 1;
      }
    }
    return 0.5 * (lo + hi);
  }

 private:
  const IndexedGraph& g_;
  const std::vector<double>& theta_;
  const std::vector<double>& alpha_;
  std::vector<DualCandidate> scratch_;
};

}  // namespace detail

struct DualSolveResult {
  std::vector<double> theta;  // 0 for excluded contracts
  std::vector<double> alpha;
  std::size_t sweeps = 0;
};

// Gauss-Seidel coordinate ascent on the duals. Each step sets alpha_j, within
// [0, p_j/2], so that the reconstructed forecast delivery of j meets d_j.
// Stops once no dual moves by more than tol * max(1, alpha_j) in a sweep and
// complementary slackness holds to tol.
inline DualSolveResult solve_dual_indexed(const IndexedGraph& g, double tol = 1e-6, std::size_t max_iters = 10000) {
  if (!(tol > 0)) throw error("solve_dual_offline: tol must be positive");
  const std::size_t m = g.num_contracts();
  DualSolveResult r;
  r.theta = target_fractions(g);
  r.alpha.assign(m, 0.0);
  detail::DualCoordinate coord(g, r.theta, r.alpha);

  auto worst_violation = [&](std::size_t& worst_j) {
    double worst = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!(r.theta[j] > 0)) continue;
      double cap = dual_alpha_cap(g.penalty[j]);
      double rel = (coord.delivery(j, r.alpha[j]) - g.demand[j]) / g.demand[j];
      double v = 0;
      if (rel < -tol && r.alpha[j] < cap - tol) v = -rel;       // short and not priced at the cap
      if (rel > tol && r.alpha[j] > tol) v = std::max(v, rel);  // over-served while the dual is active
      if (v > worst) worst = v, worst_j = j;
    }
    return worst;
  };

  for (r.sweeps = 1; r.sweeps <= max_iters; ++r.sweeps) {
    double max_change = 0;
    for (std::size_t j = 0; j < m; ++j) {
      if (!(r.theta[j] > 0)) continue;
      double updated = coord.solve(j, dual_alpha_cap(g.penalty[j]));
      max_change = std::max(max_change, std::abs(updated - r.alpha[j]) / std::max(1.0, updated));
      r.alpha[j] = updated;
    }
    std::size_t worst_j = 0;
    if (max_change < tol && worst_violation(worst_j) == 0) return r;
  }
  std::size_t worst_j = 0;
  double worst = worst_violation(worst_j);
  throw convergence_error(m ? g.contract_ids[worst_j] : std::string{}, worst,
                          "dual solver did not converge in " + std::to_string(max_iters) +
                              " sweeps; worst relative violation " + std::to_string(worst) + " at contract '" +
                              (m ? g.contract_ids[worst_j] : std::string{}) + "'");
}

inline DualPlan solve_dual_offline(const AllocationGraph& g, const DualObjectiveSpec& spec = {}, double tol = 1e-6,
                                   std::size_t max_iters = 10000) {
  IndexedGraph ix = index_graph(g);
  for (std::size_t j = 0; j < g.contracts.size(); ++j) ix.penalty[j] = spec.penalty_for(g.contracts[j]);
  for (double p : ix.penalty)
    if (!(p > 0)) throw error("penalty must be positive");
  DualSolveResult r = solve_dual_indexed(ix, tol, max_iters);
  DualPlan plan;
  plan.sweeps = r.sweeps;
  for (std::size_t j = 0; j < ix.num_contracts(); ++j) {
    if (r.theta[j] > 0)
      plan.entries.push_back({ix.contract_ids[j], r.theta[j], r.alpha[j], ix.penalty[j]});
    else
      plan.excluded.push_back(ix.contract_ids[j]);
  }
  return plan;
}

// x values are used as serving probabilities in the order given.
template <typename Rng>
ServeDecision serve_dual(const std::vector<const DualEntry*>& eligible, Rng& rng, std::string impression_id = {}) {
  std::vector<DualCandidate> candidates;
  for (const DualEntry* e : eligible) candidates.push_back({e->theta, e->alpha});
  PrimalSlice slice = reconstruct_primal(candidates);
  ServeDecision d;
  d.impression_id = std::move(impression_id);
  d.draw = uniform01(rng);
  std::size_t pick = categorical_pick(slice.x, d.draw);
  if (pick != kUnallocated) d.chosen = eligible[pick]->contract_id;
  for (std::size_t k = 0; k < eligible.size(); ++k) d.probabilities.emplace_back(eligible[k]->contract_id, slice.x[k]);
  return d;
}

}  // namespace adplan
