#pragma once

// Domain types for divergent index-design tuning over a replicated database:
// the tuning inputs (catalog, candidate indexes, workload statements expressed
// as template plans), the divergent design that is produced, and the request
// that ties them together.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_set>
#include <vector>

namespace divtune {

using TableId = std::string;
using IndexId = std::string;
using StatementId = std::string;

// Replica ids are 1-based throughout the public API.
using ReplicaId = int;

inline constexpr const char* kScanPrefix = "SCAN_";

inline std::string scan_access(const TableId& table) { return kScanPrefix + table; }

struct Table {
  TableId id;
  std::string name;
  std::int64_t row_count = 0;

  bool operator==(const Table&) const = default;
};

struct CandidateIndex {
  IndexId id;
  TableId table_id;
  double size = 0.0;
  double create_cost = 0.0;
  double drop_cost = 0.0;

  bool operator==(const CandidateIndex&) const = default;
};

// One way to fill a template slot: an index on the slot's table or the
// table scan. `usable == false` stands for an infinite access cost, e.g. an
// index that does not deliver the sort order the template needs.
struct SlotOption {
  std::string access;
  double cost = 0.0;
  bool usable = true;

  bool operator==(const SlotOption&) const = default;
};

struct TemplatePlan {
  std::string id;
  double internal_cost = 0.0;
  std::map<TableId, std::vector<SlotOption>> slots;

  bool operator==(const TemplatePlan&) const = default;
};

struct QueryStatement {
  StatementId id;
  double weight = 1.0;
  std::vector<TemplatePlan> templates;
  std::set<TableId> referenced_tables;

  bool operator==(const QueryStatement&) const = default;
};

// cost(u, X) = cost(shell, X) + sum_{a in X} index_update_costs[a] + base_cost
struct UpdateStatement {
  StatementId id;
  double weight = 1.0;
  QueryStatement query_shell;
  std::map<IndexId, double> index_update_costs;
  double base_cost = 0.0;

  bool operator==(const UpdateStatement&) const = default;
};

struct Catalog {
  std::vector<Table> tables;
  std::vector<CandidateIndex> indexes;

  bool operator==(const Catalog&) const = default;
};

struct Workload {
  Catalog catalog;
  std::vector<QueryStatement> queries;
  std::vector<UpdateStatement> updates;

  bool operator==(const Workload&) const = default;
};

using QueryRouting = std::map<StatementId, std::set<ReplicaId>>;

struct RoutingFunctions {
  QueryRouting normal;                            // h_0
  std::map<ReplicaId, QueryRouting> on_failure;   // h_j, keyed by failed replica

  bool operator==(const RoutingFunctions&) const = default;
};

struct DivergentDesign {
  std::vector<std::set<IndexId>> configs;  // configs[r - 1] is replica r
  RoutingFunctions routing;
  // Replicas removed by a shrinking reconfiguration. They keep their slot in
  // `configs` (empty) so replica ids stay stable.
  std::set<ReplicaId> dropped;

  int replica_count() const { return static_cast<int>(configs.size()); }
  bool is_active(ReplicaId r) const { return dropped.count(r) == 0; }
  int active_count() const { return replica_count() - static_cast<int>(dropped.size()); }

  bool operator==(const DivergentDesign&) const = default;
};

// How many replicas a query is routed to while one replica is down.
//   kMin:          min(m, N - 1)
//   kPaperLiteral: max(m, N - 1)
enum class RoutingCardinality { kMin, kPaperLiteral };

inline int failure_cardinality(int replicas, int multiplicity, RoutingCardinality mode) {
  return mode == RoutingCardinality::kMin ? std::min(multiplicity, replicas - 1)
                                          : std::max(multiplicity, replicas - 1);
}

enum class SkewMode { kExact, kGreedy };

struct LoadSkew {
  double tau = 0.0;
  SkewMode mode = SkewMode::kExact;

  bool operator==(const LoadSkew&) const = default;
};

struct MaterializationBudget {
  double budget = 0.0;  // C_m, per replica
  DivergentDesign current;
  int target_replicas = 0;     // N_d; 0 means "same as the request"
  double deploy_cost = 0.0;    // constant charged to every newly added replica

  bool operator==(const MaterializationBudget&) const = default;
};

struct UpdateCostBound {
  double fraction = 1.0;
  // Update cost of the reference design. Computed from the uniform baseline
  // when absent.
  std::optional<double> reference;

  bool operator==(const UpdateCostBound&) const = default;
};

// Per-replica cap on how many indexes of a client-flagged subset may be
// built, e.g. "at most 2 multi-key indexes".
struct IndexPropertyLimit {
  std::string name;
  std::set<IndexId> indexes;
  int max_per_replica = 0;

  bool operator==(const IndexPropertyLimit&) const = default;
};

struct ConstraintSet {
  std::optional<double> space_budget;
  std::optional<LoadSkew> load_skew;
  std::optional<double> failure_load_skew;
  std::optional<MaterializationBudget> materialization;
  std::optional<UpdateCostBound> update_cost_bound;
  std::vector<IndexPropertyLimit> property_limits;

  bool operator==(const ConstraintSet&) const = default;
};

struct SolverControls {
  double gap_tolerance = 0.05;
  double time_limit = 30.0;  // seconds

  bool operator==(const SolverControls&) const = default;
};

struct TuningRequest {
  Workload workload;
  int replicas = 1;
  int multiplicity = 1;
  double failure_prob = 0.0;
  ConstraintSet constraints;
  SolverControls solver;
  RoutingCardinality routing_mode = RoutingCardinality::kMin;

  bool operator==(const TuningRequest&) const = default;
};

struct Violation {
  std::string field;
  std::string rule;

  bool operator==(const Violation&) const = default;
};

namespace detail {

inline bool nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

inline void validate_statement(const QueryStatement& q, const std::string& where,
                               const std::map<TableId, std::size_t>& tables,
                               const std::map<IndexId, TableId>& index_table,
                               std::vector<Violation>& out) {
  if (!(std::isfinite(q.weight) && q.weight > 0.0)) {
    out.push_back({where + ".weight", "weight must be positive"});
  }
  if (q.templates.empty()) {
    out.push_back({where + ".templates", "at least one template plan required"});
    return;
  }
  for (const auto& t : q.referenced_tables) {
    if (!tables.count(t)) out.push_back({where + ".tables", "unresolved reference: table " + t});
  }
  bool any_usable = false;
  std::set<std::string> template_ids;
  for (std::size_t k = 0; k < q.templates.size(); ++k) {
    const auto& p = q.templates[k];
    const std::string tw = where + ".templates[" + std::to_string(k) + "]";
    if (!template_ids.insert(p.id).second) {
      out.push_back({tw + ".id", "duplicate template id " + p.id});
    }
    if (!nonneg(p.internal_cost)) out.push_back({tw + ".internal_cost", "must be >= 0"});
    for (const auto& t : q.referenced_tables) {
      if (!p.slots.count(t)) out.push_back({tw + ".slots", "missing slot for referenced table " + t});
    }
    bool all_slots_usable = true;
    for (const auto& [table, options] : p.slots) {
      const std::string sw = tw + ".slots." + table;
      if (!q.referenced_tables.count(table)) {
        out.push_back({sw, "slot on a table the query does not reference"});
      }
      bool slot_usable = false;
      std::set<std::string> seen;
      for (const auto& o : options) {
        if (!seen.insert(o.access).second) {
          out.push_back({sw, "duplicate access method " + o.access});
        }
        if (!nonneg(o.cost)) out.push_back({sw, "access cost must be >= 0"});
        if (o.access != scan_access(table)) {
          auto it = index_table.find(o.access);
          if (it == index_table.end()) {
            out.push_back({sw, "unresolved reference: index " + o.access});
            continue;
          }
          if (it->second != table) {
            out.push_back({sw, "index " + o.access + " is not defined on table " + table});
          }
        }
        if (o.usable) slot_usable = true;
      }
      all_slots_usable = all_slots_usable && slot_usable;
    }
    any_usable = any_usable || all_slots_usable;
  }
  if (!any_usable) {
    out.push_back({where + ".templates", "no template has a usable instantiation"});
  }
}

inline void validate_design(const DivergentDesign& d, const std::string& where,
                            const std::map<IndexId, TableId>& index_table,
                            std::vector<Violation>& out) {
  const int n = d.replica_count();
  for (int r = 0; r < n; ++r) {
    for (const auto& a : d.configs[r]) {
      if (!index_table.count(a)) {
        out.push_back({where + ".configs[" + std::to_string(r) + "]", "unresolved reference: index " + a});
      }
    }
  }
  auto check_ids = [&](const QueryRouting& routing, const std::string& w) {
    for (const auto& [q, reps] : routing) {
      for (int r : reps) {
        if (r < 1 || r > n) out.push_back({w + "." + q, "replica id out of range"});
      }
    }
  };
  check_ids(d.routing.normal, where + ".routing.normal");
  for (const auto& [j, routing] : d.routing.on_failure) {
    if (j < 1 || j > n) out.push_back({where + ".routing.on_failure", "failed replica id out of range"});
    check_ids(routing, where + ".routing.on_failure." + std::to_string(j));
  }
}

}  // namespace detail

// Checks every type invariant of the request. Never throws; an empty result
// means the request is well formed.
inline std::vector<Violation> validate_request(const TuningRequest& req) {
  std::vector<Violation> out;
  const auto& wl = req.workload;

  std::map<TableId, std::size_t> tables;
  for (std::size_t i = 0; i < wl.catalog.tables.size(); ++i) {
    const auto& t = wl.catalog.tables[i];
    if (!tables.emplace(t.id, i).second) out.push_back({"tables", "duplicate table id " + t.id});
    if (t.row_count < 0) out.push_back({"tables." + t.id + ".row_count", "must be >= 0"});
  }
  std::map<IndexId, TableId> index_table;
  for (const auto& a : wl.catalog.indexes) {
    const std::string w = "indexes." + a.id;
    if (!index_table.emplace(a.id, a.table_id).second) out.push_back({"indexes", "duplicate index id " + a.id});
    if (!tables.count(a.table_id)) out.push_back({w + ".table", "unresolved reference: table " + a.table_id});
    if (a.id.rfind(kScanPrefix, 0) == 0) out.push_back({w, "index ids may not use the scan prefix"});
    if (!detail::nonneg(a.size)) out.push_back({w + ".size", "must be >= 0"});
    if (!detail::nonneg(a.create_cost)) out.push_back({w + ".create_cost", "must be >= 0"});
    if (!detail::nonneg(a.drop_cost)) out.push_back({w + ".drop_cost", "must be >= 0"});
  }

  std::unordered_set<StatementId> ids;
  for (const auto& q : wl.queries) {
    if (!ids.insert(q.id).second) out.push_back({"queries." + q.id, "duplicate statement id"});
    detail::validate_statement(q, "queries." + q.id, tables, index_table, out);
  }
  for (const auto& u : wl.updates) {
    const std::string w = "updates." + u.id;
    if (!ids.insert(u.id).second) out.push_back({w, "duplicate statement id"});
    if (!(std::isfinite(u.weight) && u.weight > 0.0)) out.push_back({w + ".weight", "weight must be positive"});
    detail::validate_statement(u.query_shell, w + ".shell", tables, index_table, out);
    for (const auto& [a, c] : u.index_update_costs) {
      if (!index_table.count(a)) out.push_back({w + ".index_update_costs", "unresolved reference: index " + a});
      if (!detail::nonneg(c)) out.push_back({w + ".index_update_costs." + a, "must be >= 0"});
    }
    if (!detail::nonneg(u.base_cost)) out.push_back({w + ".base_cost", "must be >= 0"});
  }

  if (req.replicas < 1) out.push_back({"replicas", "replica count must be >= 1"});
  if (req.multiplicity < 1 || req.multiplicity > req.replicas) {
    out.push_back({"multiplicity", "multiplicity out of range: need 1 <= m <= N"});
  }
  if (!(req.failure_prob >= 0.0 && req.failure_prob <= 1.0)) {
    out.push_back({"failure_prob", "must lie in [0, 1]"});
  } else if (req.failure_prob > 0.0 && req.replicas == 1) {
    out.push_back({"failure_prob", "failures need at least two replicas"});
  }
  if (req.failure_prob > 0.0 && req.routing_mode == RoutingCardinality::kPaperLiteral &&
      req.multiplicity == req.replicas) {
    out.push_back({"routing_mode", "paper_literal cardinality max(m, N-1) exceeds the survivors when m = N"});
  }

  const auto& c = req.constraints;
  if (c.space_budget && !detail::nonneg(*c.space_budget)) out.push_back({"constraints.space_budget", "must be >= 0"});
  if (c.load_skew && !detail::nonneg(c.load_skew->tau)) out.push_back({"constraints.load_skew.tau", "must be >= 0"});
  if (c.failure_load_skew) {
    if (!detail::nonneg(*c.failure_load_skew)) out.push_back({"constraints.failure_load_skew", "must be >= 0"});
    if (req.failure_prob <= 0.0) out.push_back({"constraints.failure_load_skew", "requires failure_prob > 0"});
  }
  if (c.materialization) {
    const auto& mat = *c.materialization;
    if (!(mat.budget >= 0.0)) out.push_back({"constraints.materialization.budget", "must be >= 0"});
    if (!detail::nonneg(mat.deploy_cost)) out.push_back({"constraints.materialization.deploy_cost", "must be >= 0"});
    if (mat.current.replica_count() != req.replicas) {
      out.push_back({"constraints.materialization.current", "current design must have N replicas"});
    }
    detail::validate_design(mat.current, "constraints.materialization.current", index_table, out);
    const int target = mat.target_replicas == 0 ? req.replicas : mat.target_replicas;
    if (target < 1) out.push_back({"constraints.materialization.target_replicas", "must be >= 1"});
    if (req.multiplicity > target) {
      out.push_back({"constraints.materialization.target_replicas", "multiplicity exceeds the target replica count"});
    }
    if (target < req.replicas && (req.failure_prob > 0.0 || c.load_skew || c.failure_load_skew)) {
      out.push_back({"constraints.materialization.target_replicas",
                     "shrinking the replica set is supported with failure_prob = 0 and no load-skew bound"});
    }
  }
  if (c.update_cost_bound) {
    if (!detail::nonneg(c.update_cost_bound->fraction)) out.push_back({"constraints.update_cost_bound.fraction", "must be >= 0"});
    if (c.update_cost_bound->reference && !detail::nonneg(*c.update_cost_bound->reference)) {
      out.push_back({"constraints.update_cost_bound.reference", "must be >= 0"});
    }
  }
  for (const auto& lim : c.property_limits) {
    if (lim.max_per_replica < 0) out.push_back({"constraints.property_limits." + lim.name, "limit must be >= 0"});
    for (const auto& a : lim.indexes) {
      if (!index_table.count(a)) out.push_back({"constraints.property_limits." + lim.name, "unresolved reference: index " + a});
    }
  }
  if (!(req.solver.gap_tolerance >= 0.0)) out.push_back({"solver.gap_tolerance", "must be >= 0"});
  if (!(req.solver.time_limit > 0.0)) out.push_back({"solver.time_limit", "must be > 0"});
  return out;
}

}  // namespace divtune
