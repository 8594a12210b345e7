#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "adplan/dual.hpp"
#include "adplan/error.hpp"
#include "adplan/hwm.hpp"
#include "adplan/model.hpp"
#include "adplan/report.hpp"
#include "adplan/scenario.hpp"
#include "adplan/serving.hpp"
#include "adplan/simulator.hpp"
#include "adplan/targeting.hpp"
#include "adplan/time.hpp"

namespace adplan {

using json = nlohmann::json;

namespace detail {

inline std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw format_error(path.string() + ": cannot open for reading");
  return in;
}

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw format_error(path.string() + ": cannot open for writing");
  return out;
}

// Integral values are written as JSON integers.
inline json number(double v) {
  if (std::isfinite(v) && std::floor(v) == v && std::abs(v) < 9.0e15) return static_cast<std::int64_t>(v);
  return v;
}

inline json nullable(double v) { return std::isnan(v) ? json(nullptr) : json(v); }

template <typename T>
T field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end()) throw error(std::string("missing field \"") + key + "\"");
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    throw error(std::string("field \"") + key + "\" has the wrong type");
  }
}

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  try {
    return it->template get<T>();
  } catch (const json::exception&) {
    throw error(std::string("field \"") + key + "\" has the wrong type");
  }
}

inline AttributeMap attributes_from(const json& j) {
  auto it = j.find("attributes");
  if (it == j.end()) return {};
  if (!it->is_object()) throw error("field \"attributes\" must be an object");
  AttributeMap out;
  for (const auto& [k, v] : it->items()) {
    if (!v.is_string()) throw error("attribute \"" + k + "\" must be a string");
    out.emplace(k, v.get<std::string>());
  }
  return out;
}

inline json attributes_to(const AttributeMap& attrs) {
  json out = json::object();
  for (const auto& [k, v] : attrs) out[k] = v;
  return out;
}

}  // namespace detail

// Calls `fn(object, line_number)` for each non-blank line; any failure is
// rethrown as format_error "path:line: message".
inline void for_each_jsonl(std::istream& in, const std::string& name,
                           const std::function<void(const json&, std::size_t)>& fn) {
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      if (!j.is_object()) throw error("expected a JSON object");
      fn(j, number);
    } catch (const json::parse_error& e) {
      throw format_error(name + ":" + std::to_string(number) + ": invalid JSON (" + e.what() + ")");
    } catch (const format_error&) {
      throw;
    } catch (const std::exception& e) {
      throw format_error(name + ":" + std::to_string(number) + ": " + e.what());
    }
  }
}

inline void for_each_jsonl(const std::filesystem::path& path, const std::function<void(const json&, std::size_t)>& fn) {
  auto in = detail::open_input(path);
  for_each_jsonl(in, path.string(), fn);
}

// ---- supply / contracts / edges ----

inline SupplyNode supply_node_from_json(const json& j) {
  SupplyNode n{detail::field<std::string>(j, "id"), detail::attributes_from(j), detail::field<double>(j, "supply")};
  return n;
}

inline json to_json(const SupplyNode& n) {
  return {{"id", n.id}, {"attributes", detail::attributes_to(n.attributes)}, {"supply", detail::number(n.supply)}};
}

inline Contract contract_from_json(const json& j) {
  Contract c;
  c.id = detail::field<std::string>(j, "id");
  c.targeting = parse_targeting(detail::field<std::string>(j, "targeting"));
  c.demand = detail::field<double>(j, "demand");
  c.start = parse_iso8601(detail::field<std::string>(j, "start"));
  c.end = parse_iso8601(detail::field<std::string>(j, "end"));
  c.booked_demand = detail::optional_field<double>(j, "booked").value_or(c.demand);
  c.penalty = detail::optional_field<double>(j, "penalty").value_or(kDefaultPenalty);
  return c;
}

inline json to_json(const Contract& c) {
  json j = {{"id", c.id},
            {"targeting", to_string(c.targeting)},
            {"demand", detail::number(c.demand)},
            {"start", format_iso8601(c.start)},
            {"end", format_iso8601(c.end)}};
  if (c.booked_demand != c.demand) j["booked"] = detail::number(c.booked_demand);
  if (c.penalty != kDefaultPenalty) j["penalty"] = detail::number(c.penalty);
  return j;
}

inline std::vector<SupplyNode> read_supply(const std::filesystem::path& path) {
  std::vector<SupplyNode> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(supply_node_from_json(j)); });
  return out;
}

inline std::vector<Contract> read_contracts(const std::filesystem::path& path) {
  std::vector<Contract> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) { out.push_back(contract_from_json(j)); });
  return out;
}

inline std::vector<EdgeRef> read_edges(const std::filesystem::path& path) {
  std::vector<EdgeRef> out;
  for_each_jsonl(path, [&](const json& j, std::size_t) {
    out.push_back({detail::field<std::string>(j, "node"), detail::field<std::string>(j, "contract")});
  });
  std::sort(out.begin(), out.end());
  return out;
}

template <typename T>
void write_jsonl(const std::filesystem::path& path, const std::vector<T>& items) {
  auto out = detail::open_output(path);
  for (const auto& item : items) out << to_json(item).dump() << '\n';
}

inline void write_edges(const std::filesystem::path& path, const std::vector<EdgeRef>& edges) {
  auto out = detail::open_output(path);
  for (const auto& e : edges) out << json{{"node", e.node_id}, {"contract", e.contract_id}}.dump() << '\n';
}

// Edges come from targeting unless an explicit edge file is given.
inline AllocationGraph load_graph(const std::filesystem::path& supply, const std::filesystem::path& contracts,
                                  const std::optional<std::filesystem::path>& edges = std::nullopt) {
  AllocationGraph g;
  g.supply_nodes = read_supply(supply);
  g.contracts = read_contracts(contracts);
  g.edges = edges ? read_edges(*edges) : build_edges(g.supply_nodes, g.contracts);
  return g;
}

// ---- plans ----

inline json to_json(const HwmEntry& e) {
  return {{"contract_id", e.contract_id}, {"eligible_supply", detail::number(e.eligible_supply)}, {"alpha", e.alpha}};
}

inline json to_json(const DualEntry& e) {
  return {{"contract_id", e.contract_id}, {"theta", e.theta}, {"alpha", e.alpha}, {"penalty", detail::number(e.penalty)}};
}

inline void write_plan(std::ostream& out, const HwmPlan& plan) {
  for (const auto& e : plan.entries) out << to_json(e).dump() << '\n';
}

inline void write_plan(std::ostream& out, const DualPlan& plan) {
  for (const auto& e : plan.entries) out << to_json(e).dump() << '\n';
}

using Plan = std::variant<HwmPlan, DualPlan>;

// The plan type is recognised from its fields; line order of an HWM plan is
// its allocation order. An empty file reads as an empty HWM plan.
inline Plan read_plan(std::istream& in, const std::string& name) {
  std::optional<bool> is_dual;
  HwmPlan hwm;
  DualPlan dual;
  for_each_jsonl(in, name, [&](const json& j, std::size_t) {
    bool dual_line = j.contains("theta");
    if (is_dual && *is_dual != dual_line) throw error("mixed HWM and DUAL plan lines");
    is_dual = dual_line;
    if (dual_line) {
      dual.entries.push_back({detail::field<std::string>(j, "contract_id"), detail::field<double>(j, "theta"),
                              detail::field<double>(j, "alpha"),
                              detail::optional_field<double>(j, "penalty").value_or(kDefaultPenalty)});
    } else {
      hwm.entries.push_back({detail::field<std::string>(j, "contract_id"), detail::field<double>(j, "eligible_supply"),
                             detail::field<double>(j, "alpha")});
    }
  });
  if (is_dual.value_or(false)) return dual;
  return hwm;
}

inline Plan read_plan(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_plan(in, path.string());
}

// ---- impressions and decisions ----

struct ImpressionRecord {
  std::string id;
  Timestamp ts{};
  AttributeMap attributes;
};

inline ImpressionRecord impression_from_json(const json& j) {
  return {detail::field<std::string>(j, "id"), parse_iso8601(detail::field<std::string>(j, "ts")),
          detail::attributes_from(j)};
}

inline json to_json(const ImpressionRecord& r) {
  return {{"id", r.id}, {"ts", format_iso8601(r.ts)}, {"attributes", detail::attributes_to(r.attributes)}};
}

// Pull-based reader over an impression stream; holds one line at a time.
class ImpressionReader {
 public:
  ImpressionReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  bool next(ImpressionRecord& out) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_;
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      try {
        out = impression_from_json(json::parse(line));
        return true;
      } catch (const json::parse_error& e) {
        throw format_error(name_ + ":" + std::to_string(line_) + ": invalid JSON (" + e.what() + ")");
      } catch (const std::exception& e) {
        throw format_error(name_ + ":" + std::to_string(line_) + ": " + e.what());
      }
    }
    return false;
  }

 private:
  std::istream& in_;
  std::string name_;
  std::size_t line_ = 0;
};

// Loads and time-sorts a whole impression file for simulation.
inline ImpressionLog load_impressions(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  ImpressionReader reader(in, path.string());
  ImpressionLog log;
  ImpressionRecord r;
  while (reader.next(r)) log.add(r.ts, r.attributes, std::move(r.id));
  log.sort_by_time();
  return log;
}

inline void write_impressions(const std::filesystem::path& path, const ImpressionLog& log) {
  auto out = detail::open_output(path);
  const auto& classes = log.classes();
  std::vector<std::string> class_json;
  for (const auto& c : classes) class_json.push_back(detail::attributes_to(c).dump());
  const auto& events = log.events();
  for (std::size_t k = 0; k < events.size(); ++k) {
    out << "{\"id\":" << json(log.id(k)).dump() << ",\"ts\":\"" << format_iso8601(events[k].ts)
        << "\",\"attributes\":" << class_json[events[k].attribute_class] << "}\n";
  }
}

inline json to_json(const ServeDecision& d) {
  json probs = json::array();
  for (const auto& [id, p] : d.probabilities) probs.push_back({{"contract_id", id}, {"p", p}});
  return {{"impression_id", d.impression_id},
          {"chosen", d.chosen ? json(*d.chosen) : json(nullptr)},
          {"probabilities", std::move(probs)},
          {"draw", d.draw}};
}

inline ServeDecision decision_from_json(const json& j) {
  ServeDecision d;
  d.impression_id = detail::field<std::string>(j, "impression_id");
  d.chosen = detail::optional_field<std::string>(j, "chosen");
  for (const auto& p : j.at("probabilities"))
    d.probabilities.emplace_back(detail::field<std::string>(p, "contract_id"), detail::field<double>(p, "p"));
  d.draw = detail::field<double>(j, "draw");
  return d;
}

// ---- simulation config ----

inline SimulationConfig simulation_config_from_json(const json& j) {
  SimulationConfig cfg;
  cfg.algorithm = parse_algorithm(detail::field<std::string>(j, "algorithm"));
  if (auto it = j.find("feedback"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw error("field \"feedback\" must be an object or null");
    FeedbackConfig fb;
    fb.delta_hours = detail::optional_field<double>(*it, "delta_hours").value_or(fb.delta_hours);
    fb.boost_behind = detail::optional_field<double>(*it, "boost_behind").value_or(fb.boost_behind);
    fb.damp_ahead = detail::optional_field<double>(*it, "damp_ahead").value_or(fb.damp_ahead);
    fb.release_within_cycles =
        detail::optional_field<double>(*it, "release_within_cycles").value_or(fb.release_within_cycles);
    cfg.feedback = fb;
  }
  cfg.reopt_period_hours = detail::optional_field<double>(j, "reopt_period_hours").value_or(cfg.reopt_period_hours);
  cfg.forecast_error_multiplier = detail::optional_field<double>(j, "forecast_error_multiplier").value_or(1.0);
  if (auto m = detail::optional_field<std::map<std::string, double>>(j, "node_error_multipliers"))
    cfg.node_error_multipliers = *m;
  cfg.seed = detail::optional_field<std::uint64_t>(j, "seed").value_or(0);
  cfg.mode = parse_mode(detail::optional_field<std::string>(j, "mode").value_or("expected"));
  cfg.workers = detail::optional_field<std::size_t>(j, "workers").value_or(1);
  cfg.baseline_comparator = detail::optional_field<bool>(j, "baseline").value_or(false);
  cfg.stop_at_goal = detail::optional_field<bool>(j, "stop_at_goal").value_or(true);
  if (auto s = detail::optional_field<std::string>(j, "stop_at")) cfg.stop_at = parse_iso8601(*s);
  cfg.validate();
  return cfg;
}

inline SimulationConfig read_simulation_config(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  try {
    return simulation_config_from_json(json::parse(in));
  } catch (const std::exception& e) {
    throw format_error(path.string() + ": " + e.what());
  }
}

inline json to_json(const SimulationConfig& cfg) {
  json j = {{"algorithm", to_string(cfg.algorithm)},
            {"feedback", nullptr},
            {"reopt_period_hours", cfg.reopt_period_hours},
            {"forecast_error_multiplier", cfg.forecast_error_multiplier},
            {"seed", cfg.seed},
            {"mode", cfg.mode == ServingMode::expected ? "expected" : "sampled"}};
  if (cfg.feedback)
    j["feedback"] = {{"delta_hours", cfg.feedback->delta_hours},
                     {"boost_behind", cfg.feedback->boost_behind},
                     {"damp_ahead", cfg.feedback->damp_ahead},
                     {"release_within_cycles", cfg.feedback->release_within_cycles}};
  if (!cfg.node_error_multipliers.empty()) j["node_error_multipliers"] = cfg.node_error_multipliers;
  if (cfg.workers != 1) j["workers"] = cfg.workers;
  if (cfg.baseline_comparator) j["baseline"] = true;
  if (!cfg.stop_at_goal) j["stop_at_goal"] = false;
  if (cfg.stop_at) j["stop_at"] = format_iso8601(*cfg.stop_at);
  return j;
}

// ---- report and time series ----

inline json to_json(const SimulationReport& r) {
  auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json contracts = json::array();
  for (const auto& c : r.contracts) {
    json alphas = json::array();
    for (double a : c.alphas) alphas.push_back(detail::nullable(a));
    contracts.push_back({{"contract_id", c.contract_id},
                         {"booked", detail::number(c.booked)},
                         {"start", format_iso8601(c.start)},
                         {"end", format_iso8601(c.end)},
                         {"delivered", c.delivered},
                         {"alphas", std::move(alphas)}});
  }
  json cycles = json::array();
  for (Timestamp t : r.cycle_starts) cycles.push_back(format_iso8601(t));
  return {{"algorithm", r.algorithm},
          {"total_impressions", detail::number(r.total_impressions)},
          {"unallocated", r.unallocated},
          {"total_delivered", r.total_delivered()},
          {"underdelivery_fraction", r.underdelivery_fraction},
          {"smoothness",
           {{"sigma75_finished", opt(r.smoothness.sigma75_finished)},
            {"sigma95_finished", opt(r.smoothness.sigma95_finished)},
            {"sigma75_unfinished", opt(r.smoothness.sigma75_unfinished)}}},
          {"delivery_improvement", opt(r.delivery_improvement)},
          {"horizon", format_iso8601(r.horizon)},
          {"cycle_starts", std::move(cycles)},
          {"contracts", std::move(contracts)}};
}

// Reads report.json back; series are not part of it (see read_timeseries).
inline SimulationReport report_from_json(const json& j) {
  SimulationReport r;
  r.algorithm = detail::field<std::string>(j, "algorithm");
  r.total_impressions = detail::field<double>(j, "total_impressions");
  r.unallocated = detail::field<double>(j, "unallocated");
  r.underdelivery_fraction = detail::field<double>(j, "underdelivery_fraction");
  const json& s = j.at("smoothness");
  r.smoothness.sigma75_finished = detail::optional_field<double>(s, "sigma75_finished");
  r.smoothness.sigma95_finished = detail::optional_field<double>(s, "sigma95_finished");
  r.smoothness.sigma75_unfinished = detail::optional_field<double>(s, "sigma75_unfinished");
  r.delivery_improvement = detail::optional_field<double>(j, "delivery_improvement");
  r.horizon = parse_iso8601(detail::field<std::string>(j, "horizon"));
  for (const auto& t : j.at("cycle_starts")) r.cycle_starts.push_back(parse_iso8601(t.get<std::string>()));
  for (const auto& c : j.at("contracts")) {
    ContractDelivery cd;
    cd.contract_id = detail::field<std::string>(c, "contract_id");
    cd.booked = detail::field<double>(c, "booked");
    cd.start = parse_iso8601(detail::field<std::string>(c, "start"));
    cd.end = parse_iso8601(detail::field<std::string>(c, "end"));
    cd.delivered = detail::field<double>(c, "delivered");
    for (const auto& a : c.at("alphas")) cd.alphas.push_back(a.is_null() ? std::nan("") : a.get<double>());
    r.contracts.push_back(std::move(cd));
  }
  return r;
}

inline SimulationReport read_report(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  try {
    return report_from_json(json::parse(in));
  } catch (const std::exception& e) {
    throw format_error(path.string() + ": " + e.what());
  }
}

inline void write_report(const std::filesystem::path& path, const SimulationReport& r) {
  auto out = detail::open_output(path);
  out << to_json(r).dump(2) << '\n';
}

inline void write_timeseries(std::ostream& out, const SimulationReport& r) {
  out << "cycle_end_ts,contract_id,delivered_cum,linear_goal\n";
  char buf[64];
  for (const auto& c : r.contracts) {
    for (const auto& p : c.series) {
      out << format_iso8601(p.t) << ',' << c.contract_id << ',';
      std::snprintf(buf, sizeof buf, "%.17g", p.delivered);
      out << buf << ',';
      std::snprintf(buf, sizeof buf, "%.17g", p.linear_goal);
      out << buf << '\n';
    }
  }
}

inline void write_timeseries(const std::filesystem::path& path, const SimulationReport& r) {
  auto out = detail::open_output(path);
  write_timeseries(out, r);
}

// Series per contract id, in file order.
inline std::map<std::string, std::vector<DeliveryPoint>> read_timeseries(std::istream& in, const std::string& name) {
  std::map<std::string, std::vector<DeliveryPoint>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (number == 1) {
      if (line != "cycle_end_ts,contract_id,delivered_cum,linear_goal")
        throw format_error(name + ":1: unexpected header '" + line + "'");
      continue;
    }
    std::vector<std::string> cells;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
    if (cells.size() != 4) throw format_error(name + ":" + std::to_string(number) + ": expected 4 columns");
    try {
      std::size_t used = 0;
      DeliveryPoint p;
      p.t = parse_iso8601(cells[0]);
      p.delivered = std::stod(cells[2], &used);
      if (used != cells[2].size()) throw error("bad number '" + cells[2] + "'");
      p.linear_goal = std::stod(cells[3], &used);
      if (used != cells[3].size()) throw error("bad number '" + cells[3] + "'");
      out[cells[1]].push_back(p);
    } catch (const std::exception& e) {
      throw format_error(name + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return out;
}

inline std::map<std::string, std::vector<DeliveryPoint>> read_timeseries(const std::filesystem::path& path) {
  auto in = detail::open_input(path);
  return read_timeseries(in, path.string());
}

// ---- scenario directories ----

inline void write_scenario(const std::filesystem::path& dir, const Scenario& s) {
  std::filesystem::create_directories(dir);
  write_jsonl(dir / "supply.jsonl", s.graph.supply_nodes);
  write_jsonl(dir / "contracts.jsonl", s.graph.contracts);
  write_impressions(dir / "impressions.jsonl", s.impressions);
}

// supply.jsonl, contracts.jsonl and impressions.jsonl, plus edges.jsonl when present.
inline Scenario load_scenario(const std::filesystem::path& dir) {
  Scenario s;
  std::optional<std::filesystem::path> edges;
  if (std::filesystem::exists(dir / "edges.jsonl")) edges = dir / "edges.jsonl";
  s.graph = load_graph(dir / "supply.jsonl", dir / "contracts.jsonl", edges);
  s.impressions = load_impressions(dir / "impressions.jsonl");
  return s;
}

}  // namespace adplan
