#pragma once

// Routing of (possibly unseen) queries onto a materialized divergent design.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "divtune/costmodel.hpp"
#include "divtune/error.hpp"
#include "divtune/model.hpp"

namespace divtune {

struct RouteResult {
  std::set<ReplicaId> replicas;
  std::vector<double> costs;  // per replica; +inf where q has no plan
  bool by_similarity = false;
  StatementId matched;        // training query when routed by similarity
};

inline void to_json(json& j, const RouteResult& r) {
  json costs = json::array();
  for (double c : r.costs) costs.push_back(std::isfinite(c) ? json(c) : json(nullptr));
  j = json{{"replicas", std::vector<int>(r.replicas.begin(), r.replicas.end())},
           {"costs", costs},
           {"method", r.by_similarity ? "similarity" : "top_m"}};
  if (r.by_similarity) j["matched"] = r.matched;
}

inline std::vector<double> replica_costs(const CostModel& model, const CompiledStatement& q, const DivergentDesign& d) {
  std::vector<double> out;
  for (int r = 1; r <= d.replica_count(); ++r) {
    const PlanChoice c = CostModel::best_plan(q, model.mask(d.configs[r - 1]));
    out.push_back(d.is_active(r) && c.feasible() ? c.cost : std::numeric_limits<double>::infinity());
  }
  return out;
}

inline std::set<ReplicaId> top_m(const std::vector<double>& costs, int m) {
  std::vector<int> order(costs.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return costs[a] < costs[b]; });
  std::set<ReplicaId> out;
  for (int i = 0; i < m && i < static_cast<int>(order.size()); ++i) {
    if (!std::isfinite(costs[order[i]])) break;
    out.insert(order[i] + 1);
  }
  if (static_cast<int>(out.size()) < m) throw Error("unroutable", "fewer than m replicas can evaluate the query");
  return out;
}

// The m replicas with the lowest evaluation cost, ties by lowest replica id.
inline std::set<ReplicaId> route_top_m(const CostModel& model, const QueryStatement& q, const DivergentDesign& d, int m) {
  return top_m(replica_costs(model, model.compile(q), d), m);
}

// Concatenation over replicas of the indicator of the candidate indexes used
// by q's optimal plan on that replica.
inline std::vector<double> similarity_vector(const CostModel& model, const CompiledStatement& q, const DivergentDesign& d) {
  const int n_idx = model.index_count();
  std::vector<double> v(static_cast<std::size_t>(d.replica_count()) * n_idx, 0.0);
  for (int r = 1; r <= d.replica_count(); ++r) {
    if (!d.is_active(r)) continue;
    const PlanChoice c = CostModel::best_plan(q, model.mask(d.configs[r - 1]));
    if (!c.feasible()) continue;
    const auto& tpl = q.templates[c.template_pos];
    for (std::size_t k = 0; k < tpl.slots.size(); ++k) {
      const int a = tpl.slots[k].options[c.options[k]].access;
      if (a != kScan) v[static_cast<std::size_t>(r - 1) * n_idx + a] = 1.0;
    }
  }
  return v;
}

inline std::vector<double> similarity_vector(const CostModel& model, const QueryStatement& q, const DivergentDesign& d) {
  return similarity_vector(model, model.compile(q), d);
}

inline double cosine(const std::vector<double>& a, const std::vector<double>& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / std::sqrt(na * nb);
}

// Routes unseen queries by their most similar training query. `model` is the
// training workload the design was tuned for.
class Router {
 public:
  Router(const CostModel& model, const DivergentDesign& design, int multiplicity)
      : model_(model), design_(design), m_(multiplicity) {
    for (int q = 0; q < model.query_count(); ++q) {
      const auto& st = model.statement(q);
      if (!design.routing.normal.count(st.id)) continue;
      training_.push_back({st.id, similarity_vector(model, st, design)});
    }
    std::sort(training_.begin(), training_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  }

  RouteResult route_top_m(const QueryStatement& q) const {
    RouteResult out;
    out.costs = replica_costs(model_, model_.compile(q), design_);
    out.replicas = top_m(out.costs, m_);
    return out;
  }

  // h0 of the most similar training query (ties: lowest id); top-m when no
  // training query has positive similarity.
  RouteResult route_by_similarity(const QueryStatement& q) const {
    const CompiledStatement cq = model_.compile(q);
    RouteResult out;
    out.costs = replica_costs(model_, cq, design_);
    const auto v = similarity_vector(model_, cq, design_);
    double best = 0.0;
    const Entry* match = nullptr;
    for (const auto& e : training_) {
      const double s = cosine(v, e.vector);
      if (s > best + 1e-12) {
        best = s;
        match = &e;
      }
    }
    if (!match) {
      out.replicas = top_m(out.costs, m_);
      return out;
    }
    out.replicas = design_.routing.normal.at(match->id);
    out.by_similarity = true;
    out.matched = match->id;
    return out;
  }

 private:
  struct Entry {
    StatementId id;
    std::vector<double> vector;
  };
  const CostModel& model_;
  const DivergentDesign& design_;
  int m_;
  std::vector<Entry> training_;
};

inline std::set<ReplicaId> route_by_similarity(const CostModel& training, const QueryStatement& q,
                                               const DivergentDesign& d, int m) {
  return Router(training, d, m).route_by_similarity(q).replicas;
}

}  // namespace divtune
