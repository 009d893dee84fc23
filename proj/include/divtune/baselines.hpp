#pragma once

// Reference designs: UNIF (one configuration replicated everywhere) and a
// simplified DivgDesign (partition the workload, tune each part greedily,
// reassign, repeat).

#include <algorithm>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <vector>

#include "divtune/bip.hpp"
#include "divtune/costmodel.hpp"
#include "divtune/error.hpp"
#include "divtune/model.hpp"

namespace divtune {

// Greedy single-system index selection. Minimizes
//   sum_q w_q cost(q, X) + update_scale * sum_u f(u) cost(u, X)
// by repeatedly adding the index with the best benefit per unit of size that
// still fits in `budget`. `query_weights` overrides f(q) (0 excludes q).
inline std::set<IndexId> greedy_selection(const CostModel& m, std::optional<double> budget,
                                          const std::vector<double>& query_weights, double update_scale,
                                          const std::vector<IndexPropertyLimit>& limits = {}) {
  IndexMask mask(m.index_count(), 0);
  auto objective = [&](const IndexMask& x) {
    double v = 0.0;
    for (int q = 0; q < m.query_count(); ++q) {
      if (query_weights[q] > 0.0) v += query_weights[q] * m.statement_cost(q, x);
    }
    for (int u = 0; u < static_cast<int>(m.updates().size()); ++u) v += update_scale * m.updates()[u].weight * m.update_cost(u, x);
    return v;
  };
  auto limits_ok = [&](const IndexMask& x) {
    for (const auto& lim : limits) {
      int n = 0;
      for (const auto& id : lim.indexes) n += x[m.index_position(id)] ? 1 : 0;
      if (n > lim.max_per_replica) return false;
    }
    return true;
  };
  double used = 0.0;
  double current = objective(mask);
  while (true) {
    int best = -1;
    double best_ratio = 0.0;
    double best_value = current;
    for (int a = 0; a < m.index_count(); ++a) {
      if (mask[a]) continue;
      const double size = m.index(a).size;
      if (budget && used + size > *budget + 1e-9) continue;
      mask[a] = 1;
      const double v = limits_ok(mask) ? objective(mask) : current;
      mask[a] = 0;
      const double benefit = current - v;
      if (benefit <= 1e-12 * std::max(1.0, current)) continue;
      const double ratio = size > 0.0 ? benefit / size : std::numeric_limits<double>::max();
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best = a;
        best_value = v;
      }
    }
    if (best < 0) break;
    mask[best] = 1;
    used += m.index(best).size;
    current = best_value;
  }
  return m.config(mask);
}

// Round-robin routing: query i goes to replicas i*m, i*m+1, ... (mod N).
inline QueryRouting round_robin(const CostModel& m, int replicas, int multiplicity) {
  QueryRouting out;
  for (int q = 0; q < m.query_count(); ++q) {
    for (int k = 0; k < multiplicity; ++k) out[m.statement(q).id].insert((q * multiplicity + k) % replicas + 1);
  }
  return out;
}

inline DivergentDesign unif(const CostModel& m, int replicas, int multiplicity, std::optional<double> budget,
                            const std::vector<IndexPropertyLimit>& limits = {},
                            RoutingCardinality mode = RoutingCardinality::kMin) {
  if (replicas < 1 || multiplicity < 1 || multiplicity > replicas) throw Error("invalid_request", "need 1 <= m <= N");
  std::vector<double> w;
  for (int q = 0; q < m.query_count(); ++q) w.push_back(m.statement(q).weight);
  const auto config = greedy_selection(m, budget, w, replicas, limits);
  DivergentDesign d;
  d.configs.assign(replicas, config);
  d.routing.normal = round_robin(m, replicas, multiplicity);
  fill_failure_routing(d, m, multiplicity, mode);
  return d;
}

struct DivgDesignOptions {
  int runs = 5;
  int max_iterations = 20;
  std::uint64_t seed = 1;
};

// Simplified DivgDesign: the per-part advisor is the greedy selector above.
inline DivergentDesign divgdesign(const CostModel& m, int replicas, int multiplicity, std::optional<double> budget,
                                  const DivgDesignOptions& opt = {}, const std::vector<IndexPropertyLimit>& limits = {},
                                  RoutingCardinality mode = RoutingCardinality::kMin) {
  if (replicas < 1 || multiplicity < 1 || multiplicity > replicas) throw Error("invalid_request", "need 1 <= m <= N");
  const int nq = m.query_count();
  std::mt19937_64 rng(opt.seed);
  std::optional<DivergentDesign> best;
  double best_cost = std::numeric_limits<double>::infinity();

  for (int run = 0; run < std::max(1, opt.runs); ++run) {
    // Random initial partition: each query in m distinct parts.
    std::vector<std::set<int>> assign(nq);
    for (int q = 0; q < nq; ++q) {
      std::vector<int> reps(replicas);
      std::iota(reps.begin(), reps.end(), 0);
      std::shuffle(reps.begin(), reps.end(), rng);
      assign[q] = std::set<int>(reps.begin(), reps.begin() + multiplicity);
    }
    DivergentDesign d;
    d.configs.resize(replicas);
    for (int it = 0; it < opt.max_iterations; ++it) {
      for (int r = 0; r < replicas; ++r) {
        std::vector<double> w(nq, 0.0);
        for (int q = 0; q < nq; ++q) {
          if (assign[q].count(r)) w[q] = m.statement(q).weight / multiplicity;
        }
        d.configs[r] = greedy_selection(m, budget, w, 1.0, limits);
      }
      DesignEvaluator ev(m, d, multiplicity);
      std::vector<std::set<int>> next(nq);
      for (int q = 0; q < nq; ++q) {
        std::vector<std::pair<double, int>> order;
        for (int r = 0; r < replicas; ++r) order.emplace_back(ev.statement_cost(q, r + 1), r);
        std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
        for (int k = 0; k < multiplicity; ++k) next[q].insert(order[k].second);
      }
      if (next == assign) break;
      assign = std::move(next);
    }
    d.routing.normal.clear();
    for (int q = 0; q < nq; ++q) {
      for (int r : assign[q]) d.routing.normal[m.statement(q).id].insert(r + 1);
    }
    const double cost = DesignEvaluator(m, d, multiplicity).total_cost();
    if (cost < best_cost - 1e-12 * std::max(1.0, cost)) {
      best_cost = cost;
      best = d;
    }
  }
  fill_failure_routing(*best, m, multiplicity, mode);
  return *best;
}

}  // namespace divtune
