#pragma once

// JSON encoding of the model types. Field names here are the file-format
// contract shared by the CLI, the HTTP service and the console; see
// docs/formats.md.

#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"

#include "divtune/error.hpp"
#include "divtune/model.hpp"

namespace divtune {

using json = nlohmann::json;

namespace detail {

template <typename T>
T get_or(const json& j, const char* key, T fallback) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

inline json routing_to_json(const QueryRouting& r) {
  json out = json::object();
  for (const auto& [q, reps] : r) out[q] = std::vector<int>(reps.begin(), reps.end());
  return out;
}

inline QueryRouting routing_from_json(const json& j) {
  QueryRouting out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto v = it.value().get<std::vector<int>>();
    out[it.key()] = std::set<int>(v.begin(), v.end());
  }
  return out;
}

}  // namespace detail

inline void to_json(json& j, const Table& t) {
  j = json{{"id", t.id}, {"name", t.name}, {"row_count", t.row_count}};
}
inline void from_json(const json& j, Table& t) {
  t.id = j.at("id").get<std::string>();
  t.name = detail::get_or<std::string>(j, "name", t.id);
  t.row_count = detail::get_or<std::int64_t>(j, "row_count", 0);
}

inline void to_json(json& j, const CandidateIndex& a) {
  j = json{{"id", a.id}, {"table", a.table_id}, {"size", a.size},
           {"create_cost", a.create_cost}, {"drop_cost", a.drop_cost}};
}
inline void from_json(const json& j, CandidateIndex& a) {
  a.id = j.at("id").get<std::string>();
  a.table_id = j.at("table").get<std::string>();
  a.size = detail::get_or<double>(j, "size", 0.0);
  a.create_cost = detail::get_or<double>(j, "create_cost", 0.0);
  a.drop_cost = detail::get_or<double>(j, "drop_cost", 0.0);
}

inline void to_json(json& j, const SlotOption& o) {
  j = json{{"access", o.access}, {"cost", o.cost}, {"usable", o.usable}};
}
inline void from_json(const json& j, SlotOption& o) {
  o.access = j.at("access").get<std::string>();
  o.cost = detail::get_or<double>(j, "cost", 0.0);
  o.usable = detail::get_or<bool>(j, "usable", true);
}

inline void to_json(json& j, const TemplatePlan& p) {
  j = json{{"id", p.id}, {"internal_cost", p.internal_cost}, {"slots", p.slots}};
}
inline void from_json(const json& j, TemplatePlan& p) {
  p.id = detail::get_or<std::string>(j, "id", "");
  p.internal_cost = detail::get_or<double>(j, "internal_cost", 0.0);
  p.slots = detail::get_or<std::map<TableId, std::vector<SlotOption>>>(j, "slots", {});
}

inline void to_json(json& j, const QueryStatement& q) {
  j = json{{"id", q.id}, {"weight", q.weight}, {"tables", q.referenced_tables}, {"templates", q.templates}};
}
inline void from_json(const json& j, QueryStatement& q) {
  q.id = detail::get_or<std::string>(j, "id", "");
  q.weight = detail::get_or<double>(j, "weight", 1.0);
  q.templates = j.at("templates").get<std::vector<TemplatePlan>>();
  for (std::size_t k = 0; k < q.templates.size(); ++k) {
    if (q.templates[k].id.empty()) q.templates[k].id = "p" + std::to_string(k + 1);
  }
  if (j.contains("tables")) {
    q.referenced_tables = j.at("tables").get<std::set<TableId>>();
  } else {
    q.referenced_tables.clear();
    for (const auto& p : q.templates) {
      for (const auto& [t, _] : p.slots) q.referenced_tables.insert(t);
    }
  }
}

inline void to_json(json& j, const UpdateStatement& u) {
  j = json{{"id", u.id}, {"weight", u.weight}, {"shell", u.query_shell},
           {"index_update_costs", u.index_update_costs}, {"base_cost", u.base_cost}};
}
inline void from_json(const json& j, UpdateStatement& u) {
  u.id = j.at("id").get<std::string>();
  u.weight = detail::get_or<double>(j, "weight", 1.0);
  u.query_shell = j.at("shell").get<QueryStatement>();
  if (u.query_shell.id.empty()) u.query_shell.id = u.id + "#shell";
  u.index_update_costs = detail::get_or<std::map<IndexId, double>>(j, "index_update_costs", {});
  u.base_cost = detail::get_or<double>(j, "base_cost", 0.0);
}

inline void to_json(json& j, const Catalog& c) { j = json{{"tables", c.tables}, {"indexes", c.indexes}}; }
inline void from_json(const json& j, Catalog& c) {
  c.tables = detail::get_or<std::vector<Table>>(j, "tables", {});
  c.indexes = detail::get_or<std::vector<CandidateIndex>>(j, "indexes", {});
}

inline void to_json(json& j, const Workload& w) {
  j = json{{"tables", w.catalog.tables}, {"indexes", w.catalog.indexes},
           {"queries", w.queries}, {"updates", w.updates}};
}
inline void from_json(const json& j, Workload& w) {
  w.catalog.tables = detail::get_or<std::vector<Table>>(j, "tables", {});
  w.catalog.indexes = detail::get_or<std::vector<CandidateIndex>>(j, "indexes", {});
  w.queries = detail::get_or<std::vector<QueryStatement>>(j, "queries", {});
  w.updates = detail::get_or<std::vector<UpdateStatement>>(j, "updates", {});
}

inline void to_json(json& j, const RoutingFunctions& r) {
  json fail = json::object();
  for (const auto& [f, routing] : r.on_failure) fail[std::to_string(f)] = detail::routing_to_json(routing);
  j = json{{"normal", detail::routing_to_json(r.normal)}, {"on_failure", fail}};
}
inline void from_json(const json& j, RoutingFunctions& r) {
  r.normal = j.contains("normal") ? detail::routing_from_json(j.at("normal")) : QueryRouting{};
  r.on_failure.clear();
  if (j.contains("on_failure")) {
    const auto& f = j.at("on_failure");
    for (auto it = f.begin(); it != f.end(); ++it) {
      r.on_failure[std::stoi(it.key())] = detail::routing_from_json(it.value());
    }
  }
}

inline void to_json(json& j, const DivergentDesign& d) {
  j = json{{"replicas", d.replica_count()}, {"configs", d.configs}, {"routing", d.routing}};
  if (!d.dropped.empty()) j["dropped"] = d.dropped;
}
inline void from_json(const json& j, DivergentDesign& d) {
  d.configs = j.at("configs").get<std::vector<std::set<IndexId>>>();
  d.routing = detail::get_or<RoutingFunctions>(j, "routing", {});
  d.dropped = detail::get_or<std::set<ReplicaId>>(j, "dropped", {});
}

inline std::string to_string(RoutingCardinality m) {
  return m == RoutingCardinality::kMin ? "min" : "paper_literal";
}
inline RoutingCardinality routing_cardinality_from_string(const std::string& s) {
  if (s == "min") return RoutingCardinality::kMin;
  if (s == "paper_literal") return RoutingCardinality::kPaperLiteral;
  throw Error("invalid_request", "unknown routing_cardinality_mode: " + s);
}

inline void to_json(json& j, const LoadSkew& s) {
  j = json{{"tau", s.tau}, {"mode", s.mode == SkewMode::kExact ? "exact" : "greedy"}};
}
inline void from_json(const json& j, LoadSkew& s) {
  s.tau = j.at("tau").get<double>();
  const auto mode = detail::get_or<std::string>(j, "mode", "exact");
  if (mode != "exact" && mode != "greedy") throw Error("invalid_request", "unknown load_skew mode: " + mode);
  s.mode = mode == "exact" ? SkewMode::kExact : SkewMode::kGreedy;
}

inline void to_json(json& j, const MaterializationBudget& m) {
  j = json{{"budget", m.budget}, {"current", m.current},
           {"target_replicas", m.target_replicas}, {"deploy_cost", m.deploy_cost}};
}
inline void from_json(const json& j, MaterializationBudget& m) {
  m.budget = j.at("budget").get<double>();
  m.current = j.at("current").get<DivergentDesign>();
  m.target_replicas = detail::get_or<int>(j, "target_replicas", 0);
  m.deploy_cost = detail::get_or<double>(j, "deploy_cost", 0.0);
}

inline void to_json(json& j, const UpdateCostBound& b) {
  j = json{{"fraction", b.fraction}};
  if (b.reference) j["reference"] = *b.reference;
}
inline void from_json(const json& j, UpdateCostBound& b) {
  b.fraction = j.at("fraction").get<double>();
  b.reference = j.contains("reference") && !j.at("reference").is_null()
                    ? std::optional<double>(j.at("reference").get<double>())
                    : std::nullopt;
}

inline void to_json(json& j, const IndexPropertyLimit& l) {
  j = json{{"name", l.name}, {"indexes", l.indexes}, {"max_per_replica", l.max_per_replica}};
}
inline void from_json(const json& j, IndexPropertyLimit& l) {
  l.name = detail::get_or<std::string>(j, "name", "limit");
  l.indexes = j.at("indexes").get<std::set<IndexId>>();
  l.max_per_replica = j.at("max_per_replica").get<int>();
}

inline void to_json(json& j, const ConstraintSet& c) {
  j = json::object();
  if (c.space_budget) j["space_budget"] = *c.space_budget;
  if (c.load_skew) j["load_skew"] = *c.load_skew;
  if (c.failure_load_skew) j["failure_load_skew"] = *c.failure_load_skew;
  if (c.materialization) j["materialization"] = *c.materialization;
  if (c.update_cost_bound) j["update_cost_bound"] = *c.update_cost_bound;
  if (!c.property_limits.empty()) j["property_limits"] = c.property_limits;
}
inline void from_json(const json& j, ConstraintSet& c) {
  c = ConstraintSet{};
  if (j.contains("space_budget") && !j["space_budget"].is_null()) c.space_budget = j["space_budget"].get<double>();
  if (j.contains("load_skew") && !j["load_skew"].is_null()) c.load_skew = j["load_skew"].get<LoadSkew>();
  if (j.contains("failure_load_skew") && !j["failure_load_skew"].is_null()) {
    c.failure_load_skew = j["failure_load_skew"].get<double>();
  }
  if (j.contains("materialization") && !j["materialization"].is_null()) {
    c.materialization = j["materialization"].get<MaterializationBudget>();
  }
  if (j.contains("update_cost_bound") && !j["update_cost_bound"].is_null()) {
    c.update_cost_bound = j["update_cost_bound"].get<UpdateCostBound>();
  }
  c.property_limits = detail::get_or<std::vector<IndexPropertyLimit>>(j, "property_limits", {});
}

inline void to_json(json& j, const SolverControls& s) {
  j = json{{"gap_tolerance", s.gap_tolerance}, {"time_limit", s.time_limit}};
}
inline void from_json(const json& j, SolverControls& s) {
  s.gap_tolerance = detail::get_or<double>(j, "gap_tolerance", 0.05);
  s.time_limit = detail::get_or<double>(j, "time_limit", 30.0);
}

inline void to_json(json& j, const TuningRequest& r) {
  j = json{{"workload", r.workload},
           {"replicas", r.replicas},
           {"multiplicity", r.multiplicity},
           {"failure_prob", r.failure_prob},
           {"constraints", r.constraints},
           {"solver", r.solver},
           {"routing_cardinality_mode", to_string(r.routing_mode)}};
}
inline void from_json(const json& j, TuningRequest& r) {
  r.workload = j.at("workload").get<Workload>();
  r.replicas = j.at("replicas").get<int>();
  r.multiplicity = detail::get_or<int>(j, "multiplicity", 1);
  r.failure_prob = detail::get_or<double>(j, "failure_prob", 0.0);
  r.constraints = detail::get_or<ConstraintSet>(j, "constraints", {});
  r.solver = detail::get_or<SolverControls>(j, "solver", {});
  r.routing_mode = routing_cardinality_from_string(detail::get_or<std::string>(j, "routing_cardinality_mode", "min"));
}

inline void to_json(json& j, const Violation& v) { j = json{{"field", v.field}, {"rule", v.rule}}; }

inline json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error("parse", path + ": " + e.what());
  }
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("io", "cannot write " + path);
  out << text;
}

// Canonical text form used for every persisted or returned document.
inline std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace divtune
