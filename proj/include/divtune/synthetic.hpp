#pragma once

// Seeded generators: random tiny requests for oracle comparisons, and the
// crafted scenario workloads used by the acceptance suite and `bench`.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "divtune/model.hpp"

namespace divtune::synthetic {

struct TinyShape {
  int max_replicas = 2;
  int max_queries = 3;
  int max_updates = 1;
  int max_indexes = 3;
  int max_templates = 2;
  int max_multiplicity = 2;
  std::vector<double> alphas = {0.0, 0.3};
};

enum class BudgetKind { kZero, kTight, kUnbounded };

inline const char* to_string(BudgetKind b) {
  switch (b) {
    case BudgetKind::kZero: return "zero";
    case BudgetKind::kTight: return "tight";
    case BudgetKind::kUnbounded: return "unbounded";
  }
  return "?";
}

namespace detail {

inline double uniform(std::mt19937_64& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int pick(std::mt19937_64& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

// Costs on a coarse grid keep ties frequent, which exercises tie-breaking.
inline double grid(std::mt19937_64& rng, int lo, int hi) { return static_cast<double>(pick(rng, lo, hi)); }

inline QueryStatement random_query(std::mt19937_64& rng, const std::string& id, const Catalog& cat, int max_templates) {
  QueryStatement q;
  q.id = id;
  q.weight = grid(rng, 1, 4);
  const int ntab = static_cast<int>(cat.tables.size());
  const int first = pick(rng, 0, ntab - 1);
  q.referenced_tables.insert(cat.tables[first].id);
  if (ntab > 1 && pick(rng, 0, 2) == 0) q.referenced_tables.insert(cat.tables[(first + 1) % ntab].id);
  const int nt = pick(rng, 1, max_templates);
  for (int k = 0; k < nt; ++k) {
    TemplatePlan p;
    p.id = "p" + std::to_string(k + 1);
    p.internal_cost = grid(rng, 0, 20);
    for (const auto& t : q.referenced_tables) {
      std::vector<SlotOption> opts;
      // Template 1 always has a usable scan so the statement is plannable.
      opts.push_back({scan_access(t), grid(rng, 40, 100), k == 0 || pick(rng, 0, 3) != 0});
      for (const auto& idx : cat.indexes) {
        if (idx.table_id != t || pick(rng, 0, 3) == 0) continue;
        opts.push_back({idx.id, grid(rng, 1, 40), pick(rng, 0, 5) != 0});
      }
      p.slots[t] = std::move(opts);
    }
    q.templates.push_back(std::move(p));
  }
  return q;
}

}  // namespace detail

struct TinyInstance {
  TuningRequest request;
  BudgetKind budget = BudgetKind::kUnbounded;
  std::uint64_t seed = 0;
};

// A random instance within `shape`. Deterministic in `seed`.
inline TinyInstance random_tiny(std::uint64_t seed, const TinyShape& shape = {}) {
  std::mt19937_64 rng(seed);
  TinyInstance out;
  out.seed = seed;
  TuningRequest& req = out.request;
  Workload& w = req.workload;
  const int ntab = detail::pick(rng, 1, 2);
  for (int t = 1; t <= ntab; ++t) w.catalog.tables.push_back({"T" + std::to_string(t), "t" + std::to_string(t), 1000 * t});
  const int nidx = detail::pick(rng, 1, shape.max_indexes);
  for (int a = 1; a <= nidx; ++a) {
    const auto& t = w.catalog.tables[detail::pick(rng, 0, ntab - 1)].id;
    w.catalog.indexes.push_back({"i" + std::to_string(a), t, detail::grid(rng, 1, 10), detail::grid(rng, 0, 20),
                                 detail::grid(rng, 0, 5)});
  }
  const int nq = detail::pick(rng, 1, shape.max_queries);
  for (int q = 1; q <= nq; ++q) w.queries.push_back(detail::random_query(rng, "q" + std::to_string(q), w.catalog, shape.max_templates));
  const int nu = detail::pick(rng, 0, shape.max_updates);
  for (int u = 1; u <= nu; ++u) {
    UpdateStatement up;
    up.id = "u" + std::to_string(u);
    up.weight = detail::grid(rng, 1, 3);
    up.query_shell = detail::random_query(rng, up.id + "_sel", w.catalog, 1);
    up.query_shell.weight = 1.0;
    up.base_cost = detail::grid(rng, 0, 10);
    for (const auto& idx : w.catalog.indexes) {
      if (detail::pick(rng, 0, 1) == 0) up.index_update_costs[idx.id] = detail::grid(rng, 1, 30);
    }
    w.updates.push_back(std::move(up));
  }
  req.replicas = detail::pick(rng, 1, shape.max_replicas);
  req.multiplicity = detail::pick(rng, 1, std::min(req.replicas, shape.max_multiplicity));
  req.failure_prob = req.replicas >= 2 ? shape.alphas[detail::pick(rng, 0, static_cast<int>(shape.alphas.size()) - 1)] : 0.0;
  out.budget = static_cast<BudgetKind>(detail::pick(rng, 0, 2));
  if (out.budget == BudgetKind::kZero) {
    req.constraints.space_budget = 0.0;
  } else if (out.budget == BudgetKind::kTight) {
    double total = 0.0;
    for (const auto& idx : w.catalog.indexes) total += idx.size;
    req.constraints.space_budget = std::floor(total / 2.0);
  }
  req.solver.gap_tolerance = 0.0;
  req.solver.time_limit = 60.0;
  return out;
}

// ---------------------------------------------------------------------------
// Scenario workloads.

namespace detail {

inline QueryStatement point_query(const std::string& id, const std::string& table, double weight, double scan_cost,
                                  const std::vector<std::pair<std::string, double>>& indexes, double beta = 5.0) {
  QueryStatement q;
  q.id = id;
  q.weight = weight;
  q.referenced_tables = {table};
  TemplatePlan p{"p1", beta, {}};
  std::vector<SlotOption> opts{{scan_access(table), scan_cost, true}};
  for (const auto& [a, c] : indexes) opts.push_back({a, c, true});
  p.slots[table] = std::move(opts);
  q.templates.push_back(std::move(p));
  return q;
}

}  // namespace detail

// Query groups with disjoint index affinity: group g's queries are only
// helped by index a_g on table T_g. With a budget of one index per replica
// each replica can serve one group well.
inline Workload disjoint_groups(int groups, int queries_per_group, double index_size = 10.0) {
  Workload w;
  for (int g = 1; g <= groups; ++g) {
    const std::string t = "T" + std::to_string(g);
    w.catalog.tables.push_back({t, "table" + std::to_string(g), 100000});
    w.catalog.indexes.push_back({"a" + std::to_string(g), t, index_size, 50.0, 5.0});
  }
  for (int g = 1; g <= groups; ++g) {
    const std::string t = "T" + std::to_string(g);
    for (int k = 1; k <= queries_per_group; ++k) {
      w.queries.push_back(detail::point_query("g" + std::to_string(g) + "q" + std::to_string(k), t, 1.0,
                                              100.0 + 10.0 * k, {{"a" + std::to_string(g), 2.0 + k}}));
    }
  }
  return w;
}

// Mixed workload: one general index g helps every query moderately but is
// expensive to maintain; specialized indexes s_k help one group each and are
// cheap to maintain.
inline Workload general_vs_specialized(int groups = 3) {
  Workload w;
  w.catalog.tables.push_back({"T", "facts", 1000000});
  w.catalog.indexes.push_back({"g", "T", 10.0, 50.0, 5.0});
  for (int k = 1; k <= groups; ++k) w.catalog.indexes.push_back({"s" + std::to_string(k), "T", 10.0, 20.0, 2.0});
  for (int k = 1; k <= groups; ++k) {
    w.queries.push_back(detail::point_query("q" + std::to_string(k), "T", 1.0, 100.0, {{"g", 40.0}, {"s" + std::to_string(k), 10.0}}));
  }
  UpdateStatement u;
  u.id = "u1";
  u.weight = 1.0;
  u.query_shell = detail::point_query("u1_sel", "T", 1.0, 5.0, {});
  u.base_cost = 1.0;
  u.index_update_costs["g"] = 30.0;
  for (int k = 1; k <= groups; ++k) u.index_update_costs["s" + std::to_string(k)] = 1.0;
  w.updates.push_back(std::move(u));
  return w;
}

// Monitor scenario: three phases of `phase_length` statements; phase k draws
// its queries from group k of a disjoint-groups workload (index a_k helps).
// Phases 1 and 3 share group 1 so the series tapers back after the second
// shift.
struct PhasedStream {
  Workload catalog_workload;           // catalog + every distinct statement
  std::vector<QueryStatement> stream;  // in arrival order
};

inline PhasedStream three_phase_stream(int phase_length = 200, std::uint64_t seed = 1) {
  PhasedStream out;
  out.catalog_workload = disjoint_groups(2, 4);
  std::mt19937_64 rng(seed);
  auto draw = [&](int group) {
    const int k = detail::pick(rng, 1, 4);
    const std::string id = "g" + std::to_string(group) + "q" + std::to_string(k);
    for (const auto& q : out.catalog_workload.queries) {
      if (q.id == id) return q;
    }
    return out.catalog_workload.queries.front();
  };
  const int phase_group[3] = {1, 2, 1};
  for (int ph = 0; ph < 3; ++ph) {
    for (int i = 0; i < phase_length; ++i) out.stream.push_back(draw(phase_group[ph]));
  }
  return out;
}

}  // namespace divtune::synthetic
