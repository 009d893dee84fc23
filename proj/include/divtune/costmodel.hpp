#pragma once

// Cost evaluation under a linearly composable cost function: a statement's
// cost under index set X is the cheapest instantiation of one of its template
// plans, where every slot is filled by the table scan or by an index of X.
// On top of that sit the replicated-design metrics (TotalCost, FTotalCost,
// ExpTotalCost, per-replica loads).

#include <algorithm>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "divtune/error.hpp"
#include "divtune/json_io.hpp"
#include "divtune/model.hpp"

namespace divtune {

// Membership vector over the candidate index universe (by position).
using IndexMask = std::vector<char>;

inline constexpr int kScan = -1;

struct CompiledOption {
  int access = kScan;  // index position, or kScan
  std::string access_id;
  double cost = 0.0;
  bool usable = true;
};

struct CompiledSlot {
  int table = 0;
  std::vector<CompiledOption> options;
  // Usable options ordered by (cost, access id); the first available entry is
  // the slot's best choice.
  std::vector<int> preference;
};

struct CompiledTemplate {
  std::string id;
  double internal_cost = 0.0;
  std::vector<CompiledSlot> slots;  // ordered by table id
};

struct CompiledStatement {
  StatementId id;
  double weight = 1.0;
  std::vector<CompiledTemplate> templates;  // ordered by template id
  int update = -1;                          // owning update for query shells
};

struct CompiledUpdate {
  StatementId id;
  double weight = 1.0;
  int shell = 0;  // position in CostModel::statements()
  std::vector<std::pair<int, double>> index_costs;
  double base_cost = 0.0;
};

// The chosen instantiation: template position and, per slot, the position of
// the option used.
struct PlanChoice {
  double cost = std::numeric_limits<double>::infinity();
  int template_pos = -1;
  std::vector<int> options;

  bool feasible() const { return template_pos >= 0; }
};

// Immutable, indexed view of a workload. Statements 0..query_count()-1 are
// the queries, the rest are the query shells of the updates in order.
class CostModel {
 public:
  explicit CostModel(Workload workload) : workload_(std::move(workload)) {
    const auto& cat = workload_.catalog;
    for (std::size_t i = 0; i < cat.tables.size(); ++i) table_pos_[cat.tables[i].id] = static_cast<int>(i);
    for (std::size_t i = 0; i < cat.indexes.size(); ++i) {
      index_pos_[cat.indexes[i].id] = static_cast<int>(i);
      auto t = table_pos_.find(cat.indexes[i].table_id);
      if (t == table_pos_.end()) throw Error("invalid_request", "index " + cat.indexes[i].id + " on unknown table");
      index_table_.push_back(t->second);
    }
    for (const auto& q : workload_.queries) statements_.push_back(compile(q));
    query_count_ = static_cast<int>(statements_.size());
    for (std::size_t u = 0; u < workload_.updates.size(); ++u) {
      const auto& upd = workload_.updates[u];
      CompiledUpdate cu;
      cu.id = upd.id;
      cu.weight = upd.weight;
      cu.shell = static_cast<int>(statements_.size());
      for (const auto& [a, c] : upd.index_update_costs) cu.index_costs.emplace_back(index_position(a), c);
      cu.base_cost = upd.base_cost;
      statements_.push_back(compile(upd.query_shell));
      statements_.back().weight = upd.weight;
      statements_.back().update = static_cast<int>(u);
      updates_.push_back(std::move(cu));
    }
    for (std::size_t i = 0; i < static_cast<std::size_t>(query_count_); ++i) {
      query_pos_[statements_[i].id] = static_cast<int>(i);
    }
  }

  const Workload& workload() const { return workload_; }
  int index_count() const { return static_cast<int>(index_table_.size()); }
  int table_count() const { return static_cast<int>(table_pos_.size()); }
  int query_count() const { return query_count_; }
  int statement_count() const { return static_cast<int>(statements_.size()); }
  const std::vector<CompiledStatement>& statements() const { return statements_; }
  const CompiledStatement& statement(int s) const { return statements_.at(s); }
  const std::vector<CompiledUpdate>& updates() const { return updates_; }
  const CandidateIndex& index(int a) const { return workload_.catalog.indexes.at(a); }
  const IndexId& index_id(int a) const { return workload_.catalog.indexes.at(a).id; }
  int index_table(int a) const { return index_table_.at(a); }
  const TableId& table_id(int t) const { return workload_.catalog.tables.at(t).id; }

  int index_position(const IndexId& id) const {
    auto it = index_pos_.find(id);
    if (it == index_pos_.end()) throw Error("invalid_request", "unknown index " + id);
    return it->second;
  }

  // Position of a query (not a shell) by id, or -1.
  int query_position(const StatementId& id) const {
    auto it = query_pos_.find(id);
    return it == query_pos_.end() ? -1 : it->second;
  }

  IndexMask mask(const std::set<IndexId>& config) const {
    IndexMask m(index_count(), 0);
    for (const auto& a : config) m[index_position(a)] = 1;
    return m;
  }

  std::set<IndexId> config(const IndexMask& m) const {
    std::set<IndexId> out;
    for (int a = 0; a < index_count(); ++a) {
      if (m[a]) out.insert(index_id(a));
    }
    return out;
  }

  // Compiles a statement against this catalog, e.g. an unseen query that
  // needs routing.
  CompiledStatement compile(const QueryStatement& q) const {
    CompiledStatement cs;
    cs.id = q.id;
    cs.weight = q.weight;
    for (const auto& p : q.templates) {
      CompiledTemplate ct;
      ct.id = p.id;
      ct.internal_cost = p.internal_cost;
      for (const auto& [table, options] : p.slots) {
        auto tp = table_pos_.find(table);
        if (tp == table_pos_.end()) throw Error("invalid_request", "statement " + q.id + " references unknown table " + table);
        CompiledSlot slot;
        slot.table = tp->second;
        for (const auto& o : options) {
          CompiledOption co;
          co.access_id = o.access;
          co.cost = o.cost;
          co.usable = o.usable;
          if (o.access == scan_access(table)) {
            co.access = kScan;
          } else {
            co.access = index_position(o.access);
            if (index_table_[co.access] != slot.table) {
              throw Error("invalid_request", "index " + o.access + " does not belong to table " + table);
            }
          }
          slot.options.push_back(std::move(co));
        }
        for (std::size_t k = 0; k < slot.options.size(); ++k) {
          if (slot.options[k].usable) slot.preference.push_back(static_cast<int>(k));
        }
        std::stable_sort(slot.preference.begin(), slot.preference.end(), [&](int x, int y) {
          const auto& ox = slot.options[x];
          const auto& oy = slot.options[y];
          if (ox.cost != oy.cost) return ox.cost < oy.cost;
          return ox.access_id < oy.access_id;
        });
        ct.slots.push_back(std::move(slot));
      }
      cs.templates.push_back(std::move(ct));
    }
    std::stable_sort(cs.templates.begin(), cs.templates.end(),
                     [](const CompiledTemplate& x, const CompiledTemplate& y) { return x.id < y.id; });
    return cs;
  }

  // Cheapest instantiation of `s` under index set `m`. Ties go to the lowest
  // template id, then to the lexicographically smallest access method.
  static PlanChoice best_plan(const CompiledStatement& s, const IndexMask& m) {
    PlanChoice best;
    std::vector<int> choice;
    for (std::size_t p = 0; p < s.templates.size(); ++p) {
      const auto& tp = s.templates[p];
      double cost = tp.internal_cost;
      choice.assign(tp.slots.size(), -1);
      bool ok = true;
      for (std::size_t k = 0; k < tp.slots.size() && ok; ++k) {
        const auto& slot = tp.slots[k];
        ok = false;
        for (int o : slot.preference) {
          const auto& opt = slot.options[o];
          if (opt.access == kScan || m[opt.access]) {
            cost += opt.cost;
            choice[k] = o;
            ok = true;
            break;
          }
        }
      }
      if (ok && cost < best.cost) {
        best.cost = cost;
        best.template_pos = static_cast<int>(p);
        best.options = choice;
      }
    }
    return best;
  }

  double statement_cost(const CompiledStatement& s, const IndexMask& m) const {
    PlanChoice c = best_plan(s, m);
    if (!c.feasible()) throw Error("unusable_statement", "statement " + s.id + " has no usable plan instantiation");
    return c.cost;
  }

  double statement_cost(int s, const IndexMask& m) const { return statement_cost(statements_.at(s), m); }

  // cost(u, X) = cost(shell, X) + sum_{a in X} ucost(u, a) + c_u
  double update_cost(int u, const IndexMask& m) const {
    const auto& upd = updates_.at(u);
    double cost = statement_cost(upd.shell, m) + upd.base_cost;
    for (const auto& [a, c] : upd.index_costs) {
      if (m[a]) cost += c;
    }
    return cost;
  }

 private:
  Workload workload_;
  std::unordered_map<TableId, int> table_pos_;
  std::unordered_map<IndexId, int> index_pos_;
  std::unordered_map<StatementId, int> query_pos_;
  std::vector<int> index_table_;
  std::vector<CompiledStatement> statements_;
  std::vector<CompiledUpdate> updates_;
  int query_count_ = 0;
};

// Single-statement entry points over raw model types.
inline double query_cost(const CostModel& model, const QueryStatement& q, const std::set<IndexId>& config) {
  return model.statement_cost(model.compile(q), model.mask(config));
}

inline double update_cost(const CostModel& model, const UpdateStatement& u, const std::set<IndexId>& config) {
  const IndexMask m = model.mask(config);
  double cost = model.statement_cost(model.compile(u.query_shell), m) + u.base_cost;
  for (const auto& [a, c] : u.index_update_costs) {
    if (m[model.index_position(a)]) cost += c;
  }
  return cost;
}

struct CostBreakdown {
  double total = 0.0;        // expected cost, = query_cost + update_cost
  double query_cost = 0.0;   // expected query part
  double update_cost = 0.0;  // expected update part, including the c_u constants
  std::vector<double> per_replica_load;  // normal-operation loads
  double total_cost = 0.0;   // normal operation (TotalCost)
  double update_constant = 0.0;  // c_u terms inside update_cost
};

inline void to_json(json& j, const CostBreakdown& c) {
  j = json{{"total", c.total},
           {"query_cost", c.query_cost},
           {"update_cost", c.update_cost},
           {"per_replica_load", c.per_replica_load},
           {"total_cost", c.total_cost},
           {"update_constant", c.update_constant}};
}

// Evaluates a design against a compiled workload. Queries must be routed by
// the design; query shells always run on every active replica.
class DesignEvaluator {
 public:
  DesignEvaluator(const CostModel& model, const DivergentDesign& design, int multiplicity,
                  RoutingCardinality mode = RoutingCardinality::kMin)
      : model_(model), design_(design), m_(multiplicity), mode_(mode) {
    for (const auto& cfg : design.configs) masks_.push_back(model.mask(cfg));
    const int n = design.replica_count();
    cost_.assign(model.statement_count(), std::vector<double>(n, 0.0));
    update_index_.assign(model.updates().size(), std::vector<double>(n, 0.0));
    for (int s = 0; s < model.statement_count(); ++s) {
      for (int r = 0; r < n; ++r) cost_[s][r] = model.statement_cost(s, masks_[r]);
    }
    for (std::size_t u = 0; u < model.updates().size(); ++u) {
      for (int r = 0; r < n; ++r) {
        const auto& upd = model.updates()[u];
        double c = upd.base_cost;
        for (const auto& [a, uc] : upd.index_costs) {
          if (masks_[r][a]) c += uc;
        }
        update_index_[u][r] = c;
      }
    }
  }

  int replicas() const { return design_.replica_count(); }
  int active_replicas() const { return design_.active_count(); }
  int failure_cardinality() const { return divtune::failure_cardinality(active_replicas(), m_, mode_); }

  // cost(q, I_r) by statement position and 1-based replica.
  double statement_cost(int s, ReplicaId r) const { return cost_.at(s).at(r - 1); }

  double update_cost(int u, ReplicaId r) const {
    const auto& upd = model_.updates()[u];
    return cost_[upd.shell][r - 1] + update_index_[u][r - 1];
  }

  const std::set<ReplicaId>& normal_route(int q) const {
    const auto& id = model_.statement(q).id;
    auto it = design_.routing.normal.find(id);
    if (it == design_.routing.normal.end()) throw Error("incomplete_routing", "query " + id + " has no routing entry");
    return it->second;
  }

  const std::set<ReplicaId>& failure_route(int q, ReplicaId failed) const {
    const auto& id = model_.statement(q).id;
    auto jt = design_.routing.on_failure.find(failed);
    if (jt == design_.routing.on_failure.end()) {
      throw Error("incomplete_routing", "no routing for failure of replica " + std::to_string(failed));
    }
    auto it = jt->second.find(id);
    if (it == jt->second.end()) {
      throw Error("incomplete_routing", "query " + id + " has no routing for failure of replica " + std::to_string(failed));
    }
    return it->second;
  }

  double query_part(ReplicaId r) const {
    double sum = 0.0;
    for (int q = 0; q < model_.query_count(); ++q) {
      if (normal_route(q).count(r)) sum += model_.statement(q).weight / m_ * cost_[q][r - 1];
    }
    return sum;
  }

  double update_part(ReplicaId r) const {
    if (!design_.is_active(r)) return 0.0;
    double sum = 0.0;
    for (std::size_t u = 0; u < model_.updates().size(); ++u) {
      sum += model_.updates()[u].weight * update_cost(static_cast<int>(u), r);
    }
    return sum;
  }

  // load(I, h, r)
  double load(ReplicaId r) const { return query_part(r) + update_part(r); }

  // fload(I, h, r, j)
  double fload(ReplicaId r, ReplicaId failed) const {
    if (r == failed) throw Error("invalid_argument", "fload of the failed replica is undefined");
    const double card = failure_cardinality();
    double sum = 0.0;
    for (int q = 0; q < model_.query_count(); ++q) {
      if (failure_route(q, failed).count(r)) sum += model_.statement(q).weight / card * cost_[q][r - 1];
    }
    return sum + update_part(r);
  }

  double query_cost() const {
    double sum = 0.0;
    for (int r = 1; r <= replicas(); ++r) sum += query_part(r);
    return sum;
  }

  double update_cost() const {
    double sum = 0.0;
    for (int r = 1; r <= replicas(); ++r) sum += update_part(r);
    return sum;
  }

  double update_constant() const {
    double sum = 0.0;
    for (const auto& u : model_.updates()) sum += u.weight * u.base_cost;
    return sum * active_replicas();
  }

  double total_cost() const { return query_cost() + update_cost(); }

  double failure_query_cost(ReplicaId failed) const {
    double sum = 0.0;
    for (int r = 1; r <= replicas(); ++r) {
      if (r == failed || !design_.is_active(r)) continue;
      const double card = failure_cardinality();
      for (int q = 0; q < model_.query_count(); ++q) {
        if (failure_route(q, failed).count(r)) sum += model_.statement(q).weight / card * cost_[q][r - 1];
      }
    }
    return sum;
  }

  double failure_update_cost(ReplicaId failed) const { return update_cost() - update_part(failed); }

  // FTotalCost(I, h, j)
  double ftotal_cost(ReplicaId failed) const {
    if (!design_.is_active(failed)) throw Error("invalid_argument", "replica " + std::to_string(failed) + " is not active");
    return failure_query_cost(failed) + failure_update_cost(failed);
  }

  CostBreakdown breakdown(double alpha) const {
    if (alpha < 0.0 || alpha > 1.0) throw Error("invalid_argument", "failure probability must lie in [0, 1]");
    CostBreakdown out;
    const double qc = query_cost();
    const double uc = update_cost();
    out.total_cost = qc + uc;
    out.query_cost = (1.0 - alpha) * qc;
    out.update_cost = (1.0 - alpha) * uc;
    out.update_constant = (1.0 - alpha) * update_constant();
    if (alpha > 0.0) {
      if (active_replicas() < 2) throw Error("invalid_argument", "failures need at least two replicas");
      const double w = alpha / active_replicas();
      const double per_survivor_constant = update_constant() / active_replicas();
      for (int j = 1; j <= replicas(); ++j) {
        if (!design_.is_active(j)) continue;
        out.query_cost += w * failure_query_cost(j);
        out.update_cost += w * failure_update_cost(j);
        out.update_constant += w * per_survivor_constant * (active_replicas() - 1);
      }
    }
    out.total = out.query_cost + out.update_cost;
    for (int r = 1; r <= replicas(); ++r) out.per_replica_load.push_back(load(r));
    return out;
  }

  double exp_total_cost(double alpha) const { return breakdown(alpha).total; }

  const IndexMask& mask(ReplicaId r) const { return masks_.at(r - 1); }

 private:
  const CostModel& model_;
  const DivergentDesign& design_;
  int m_;
  RoutingCardinality mode_;
  std::vector<IndexMask> masks_;
  std::vector<std::vector<double>> cost_;
  std::vector<std::vector<double>> update_index_;
};

inline double total_cost(const DivergentDesign& d, const CostModel& model, int m) {
  return DesignEvaluator(model, d, m).total_cost();
}

inline double ftotal_cost(const DivergentDesign& d, const CostModel& model, int m, ReplicaId failed,
                          RoutingCardinality mode = RoutingCardinality::kMin) {
  return DesignEvaluator(model, d, m, mode).ftotal_cost(failed);
}

inline double exp_total_cost(const DivergentDesign& d, const CostModel& model, int m, double alpha,
                             RoutingCardinality mode = RoutingCardinality::kMin) {
  return DesignEvaluator(model, d, m, mode).exp_total_cost(alpha);
}

inline double replica_load(const DivergentDesign& d, const CostModel& model, int m, ReplicaId r) {
  return DesignEvaluator(model, d, m).load(r);
}

inline double replica_fload(const DivergentDesign& d, const CostModel& model, int m, ReplicaId r, ReplicaId failed,
                            RoutingCardinality mode = RoutingCardinality::kMin) {
  return DesignEvaluator(model, d, m, mode).fload(r, failed);
}

// Smallest tau with max(load) <= (1 + tau) * min(load).
inline double skew_factor(std::span<const double> loads) {
  if (loads.empty()) throw Error("invalid_argument", "no loads");
  for (double l : loads) {
    if (!(l > 0.0)) throw Error("invalid_argument", "skew factor undefined for a zero load");
  }
  const auto [lo, hi] = std::minmax_element(loads.begin(), loads.end());
  return *hi / *lo - 1.0;
}

// 1 - candidate / baseline
inline double improvement(double candidate_cost, double baseline_cost) {
  if (!(baseline_cost > 0.0)) throw Error("invalid_argument", "improvement needs a positive baseline cost");
  return 1.0 - candidate_cost / baseline_cost;
}

}  // namespace divtune
