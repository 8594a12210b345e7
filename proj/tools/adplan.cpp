#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "adplan/adplan.hpp"

namespace fs = std::filesystem;
using namespace adplan;

namespace {

struct PlanArgs {
  std::string supply, contracts, edges, algorithm = "hwm", out;
};

struct ServeArgs {
  std::string plan, contracts, impressions, out;
  std::optional<std::uint64_t> seed;
};

struct SimulateArgs {
  std::string config, scenario, out, mode;
  std::optional<std::size_t> workers;
};

struct MetricsArgs {
  std::string timeseries, report, baseline, out;
  bool positive_part = false;
};

struct ScenarioArgs {
  std::string out, preset, contention = "medium";
  ScenarioSpec spec;
  std::string start = "2012-01-01T00:00:00Z";
  double scale = 1.0;
};

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error(path + ": cannot open for writing");
  return out;
}

int cmd_plan(const PlanArgs& a) {
  std::optional<fs::path> edges;
  if (!a.edges.empty()) edges = a.edges;
  AllocationGraph g = load_graph(a.supply, a.contracts, edges);
  Algorithm alg = parse_algorithm(a.algorithm);
  auto out = open_out(a.out);
  if (alg == Algorithm::hwm) {
    HwmPlan plan = generate_hwm_plan(g);
    for (const auto& id : plan.empty_supply) std::cerr << "warning: contract '" << id << "' has no eligible supply\n";
    for (const auto& id : plan.unsatisfied)
      std::cerr << "warning: contract '" << id << "' cannot be satisfied from remaining supply (alpha = 1)\n";
    write_plan(out, plan);
  } else if (alg == Algorithm::dual) {
    DualPlan plan = solve_dual_offline(g);
    for (const auto& id : plan.excluded) std::cerr << "warning: contract '" << id << "' has no eligible supply\n";
    for (const auto& e : plan.entries)
      if (e.alpha >= dual_alpha_cap(e.penalty) * (1 - 1e-9))
        std::cerr << "warning: contract '" << e.contract_id << "' is infeasible; its dual is at the penalty cap\n";
    std::cerr << "dual solver converged in " << plan.sweeps << " sweeps\n";
    write_plan(out, plan);
  } else {
    throw error("plan supports --algorithm hwm or dual");
  }
  return 0;
}

int cmd_serve(const ServeArgs& a) {
  std::uint64_t seed = 0;
  if (a.seed) {
    seed = *a.seed;
  } else if (const char* env = std::getenv("GD_SEED")) {
    try {
      seed = std::stoull(env);
    } catch (const std::exception&) {
      throw error(std::string("GD_SEED is not an unsigned integer: '") + env + "'");
    }
  }

  std::vector<Contract> contracts = read_contracts(a.contracts);
  std::map<std::string, const Contract*, std::less<>> by_id;
  for (const Contract& c : contracts) by_id[c.id] = &c;
  Plan plan = read_plan(fs::path(a.plan));

  // Servable contracts in plan order, with their plan data.
  struct Servable {
    const Contract* contract;
    HwmCandidate hwm;
    const DualEntry* dual = nullptr;
  };
  std::vector<Servable> servable;
  auto lookup = [&](const std::string& id) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw error("plan references contract '" + id + "' which is not in " + a.contracts);
    return it->second;
  };
  const bool is_dual = std::holds_alternative<DualPlan>(plan);
  if (is_dual) {
    for (const DualEntry& e : std::get<DualPlan>(plan).entries) servable.push_back({lookup(e.contract_id), {}, &e});
  } else {
    const auto& entries = std::get<HwmPlan>(plan).entries;
    for (std::size_t k = 0; k < entries.size(); ++k)
      servable.push_back({lookup(entries[k].contract_id), {entries[k].contract_id, k, entries[k].alpha}, nullptr});
  }

  std::ifstream in(a.impressions);
  if (!in) throw format_error(a.impressions + ": cannot open for reading");
  ImpressionReader reader(in, a.impressions);
  auto out = open_out(a.out);
  ImpressionRecord r;
  std::vector<HwmCandidate> hwm;
  std::vector<const DualEntry*> dual;
  for (std::uint64_t index = 0; reader.next(r); ++index) {
    hwm.clear();
    dual.clear();
    for (const Servable& s : servable) {
      const Contract& c = *s.contract;
      if (r.ts < c.start || r.ts >= c.end || !eligible(r.attributes, c.targeting)) continue;
      if (is_dual)
        dual.push_back(s.dual);
      else
        hwm.push_back(s.hwm);
    }
    SplitMix64 rng(stream_seed(seed, index));
    ServeDecision d = is_dual ? serve_dual(dual, rng, r.id) : serve_hwm(hwm, rng, r.id);
    out << to_json(d).dump() << '\n';
  }
  return 0;
}

int cmd_simulate(const SimulateArgs& a) {
  SimulationConfig cfg = read_simulation_config(a.config);
  if (!a.mode.empty()) cfg.mode = parse_mode(a.mode);
  if (a.workers) cfg.workers = *a.workers;
  cfg.validate();
  Scenario s = load_scenario(a.scenario);
  SimulationReport report = run_simulation(s.graph, s.impressions, cfg);
  fs::create_directories(a.out);
  write_report(fs::path(a.out) / "report.json", report);
  write_timeseries(fs::path(a.out) / "delivery_timeseries.csv", report);
  std::cerr << "underdelivery " << 100 * report.underdelivery_fraction << "% over " << report.contracts.size()
            << " contracts, " << report.total_impressions << " impressions\n";
  return 0;
}

int cmd_metrics(const MetricsArgs& a) {
  SimulationReport report = read_report(a.report);
  auto series = read_timeseries(fs::path(a.timeseries));
  for (auto& c : report.contracts) {
    auto it = series.find(c.contract_id);
    if (it == series.end()) throw error("time series has no rows for contract '" + c.contract_id + "'");
    c.series = std::move(it->second);
    series.erase(it);
  }
  if (!series.empty()) throw error("time series has rows for unknown contract '" + series.begin()->first + "'");

  SmoothnessSummary s = summarize_smoothness(report.contracts, report.horizon, a.positive_part);
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json out = {{"sigma75_finished", opt(s.sigma75_finished)},
              {"sigma95_finished", opt(s.sigma95_finished)},
              {"sigma75_unfinished", opt(s.sigma75_unfinished)},
              {"underdelivery_fraction", underdelivery_fraction(report.contracts)},
              {"delivery_improvement", opt(report.delivery_improvement)}};
  if (!a.baseline.empty()) out["delivery_improvement"] = delivery_improvement(report, read_report(a.baseline));
  if (a.out.empty()) {
    std::cout << out.dump(2) << '\n';
  } else {
    auto f = open_out(a.out);
    f << out.dump(2) << '\n';
  }
  return 0;
}

int cmd_scenario(ScenarioArgs a) {
  if (a.preset == "single-contract") {
    SingleContractSetup setup;
    setup.demand = std::round(setup.demand * a.scale);
    setup.impressions_per_cycle = static_cast<std::size_t>(std::round(static_cast<double>(setup.impressions_per_cycle) * a.scale));
    setup.start = parse_iso8601(a.start);
    write_scenario(a.out, single_contract_scenario(setup));
    SimulationConfig cfg;
    cfg.reopt_period_hours = setup.cycle_hours;
    cfg.forecast_error_multiplier = 1.25;
    auto f = open_out((fs::path(a.out) / "config.json").string());
    f << to_json(cfg).dump(2) << '\n';
    return 0;
  }
  if (!a.preset.empty()) throw error("unknown preset '" + a.preset + "'");
  a.spec.contention = parse_contention(a.contention);
  a.spec.start = parse_iso8601(a.start);
  write_scenario(a.out, generate_scenario(a.spec));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Guaranteed-delivery allocation planner, server and simulator"};
  app.require_subcommand(1);

  PlanArgs plan;
  auto* p = app.add_subcommand("plan", "Build an allocation plan from a supply forecast and contracts");
  p->add_option("--supply", plan.supply, "supply.jsonl")->required()->check(CLI::ExistingFile);
  p->add_option("--contracts", plan.contracts, "contracts.jsonl")->required()->check(CLI::ExistingFile);
  p->add_option("--edges", plan.edges, "explicit edges.jsonl (default: derived from targeting)")
      ->check(CLI::ExistingFile);
  p->add_option("--algorithm", plan.algorithm, "hwm or dual")->check(CLI::IsMember({"hwm", "dual"}));
  p->add_option("--out", plan.out, "plan output (jsonl)")->required();

  ServeArgs serve;
  auto* s = app.add_subcommand("serve", "Serve an impression stream from a plan");
  s->add_option("--plan", serve.plan, "hwm_plan.jsonl or dual_plan.jsonl")->required()->check(CLI::ExistingFile);
  s->add_option("--contracts", serve.contracts, "contracts.jsonl")->required()->check(CLI::ExistingFile);
  s->add_option("--impressions", serve.impressions, "impressions.jsonl")->required()->check(CLI::ExistingFile);
  s->add_option("--seed", serve.seed, "random seed (default: $GD_SEED, else 0)");
  s->add_option("--out", serve.out, "decisions output (jsonl)")->required();

  SimulateArgs sim;
  auto* m = app.add_subcommand("simulate", "Run the re-optimization loop over a scenario");
  m->add_option("--config", sim.config, "config.json")->required()->check(CLI::ExistingFile);
  m->add_option("--scenario", sim.scenario, "directory with supply, contracts and impressions")
      ->required()
      ->check(CLI::ExistingDirectory);
  m->add_option("--out", sim.out, "output directory")->required();
  m->add_option("--mode", sim.mode, "expected or sampled (overrides config)")
      ->check(CLI::IsMember({"expected", "sampled"}));
  m->add_option("--workers", sim.workers, "serving worker threads");

  MetricsArgs met;
  auto* r = app.add_subcommand("metrics", "Smoothness and delivery metrics of a simulation");
  r->add_option("--timeseries", met.timeseries, "delivery_timeseries.csv")->required()->check(CLI::ExistingFile);
  r->add_option("--report", met.report, "report.json of the same run")->required()->check(CLI::ExistingFile);
  r->add_option("--baseline", met.baseline, "report.json of a baseline run")->check(CLI::ExistingFile);
  r->add_flag("--positive-part", met.positive_part, "only count delivery ahead of the linear goal");
  r->add_option("--out", met.out, "write JSON here instead of stdout");

  ScenarioArgs scen;
  auto* g = app.add_subcommand("scenario", "Generate a synthetic scenario directory");
  g->add_option("--out", scen.out, "output directory")->required();
  g->add_option("--preset", scen.preset, "single-contract: one contract, 2.5M demand, 0.8M/day, 25% forecast error");
  g->add_option("--scale", scen.scale, "volume scale for presets")->check(CLI::PositiveNumber);
  g->add_option("--contracts", scen.spec.num_contracts, "number of contracts");
  g->add_option("--attributes", scen.spec.num_attributes, "number of attributes");
  g->add_option("--values", scen.spec.values_per_attribute, "values per attribute");
  g->add_option("--contention", scen.contention, "low, medium or high")
      ->check(CLI::IsMember({"low", "medium", "high"}));
  g->add_option("--days", scen.spec.horizon_days, "horizon in days");
  g->add_option("--rate", scen.spec.impressions_per_hour, "mean impressions per hour");
  g->add_option("--demand-fraction", scen.spec.demand_fraction, "mean booked share of eligible supply");
  g->add_option("--seed", scen.spec.seed, "generator seed");
  g->add_option("--start", scen.start, "scenario start (ISO-8601)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, std::cerr, std::cerr);
  }

  try {
    if (*p) return cmd_plan(plan);
    if (*s) return cmd_serve(serve);
    if (*m) return cmd_simulate(sim);
    if (*r) return cmd_metrics(met);
    if (*g) return cmd_scenario(scen);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
