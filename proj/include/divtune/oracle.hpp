#pragma once

// Exhaustive ground truth for tiny instances: every per-replica configuration
// tuple, every admissible routing, evaluated directly with the cost model and
// filtered by the request's constraints.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <vector>

#include "divtune/bip.hpp"
#include "divtune/costmodel.hpp"
#include "divtune/error.hpp"
#include "divtune/json_io.hpp"
#include "divtune/model.hpp"

namespace divtune {

struct OracleCaps {
  int max_indexes = 4;
  int max_replicas = 3;
  int max_queries = 4;
};

struct OracleResult {
  DivergentDesign design;
  double objective = 0.0;  // the request's objective (see oracle_objective)
  CostBreakdown cost;
  long designs_evaluated = 0;
};

namespace detail {

using Bits = std::uint32_t;

inline std::vector<std::vector<int>> subsets(const std::vector<int>& from, int k) {
  std::vector<std::vector<int>> out;
  const int n = static_cast<int>(from.size());
  if (k > n || k < 0) return out;
  std::vector<int> idx(k);
  std::iota(idx.begin(), idx.end(), 0);
  while (true) {
    std::vector<int> pick;
    for (int i : idx) pick.push_back(from[i]);
    out.push_back(pick);
    int i = k - 1;
    while (i >= 0 && idx[i] == n - k + i) --i;
    if (i < 0) break;
    ++idx[i];
    for (int j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
  return out;
}

class Enumerator {
 public:
  Enumerator(const TuningRequest& req, const OracleCaps& caps) : req_(req), model_(req.workload) {
    const auto violations = validate_request(req);
    if (!violations.empty()) throw Error("invalid_request", violations.front().field + ": " + violations.front().rule);
    const auto& c = req.constraints;
    replicas_ = req.replicas;
    target_ = req.replicas;
    if (c.materialization) {
      target_ = c.materialization->target_replicas == 0 ? req.replicas : c.materialization->target_replicas;
      replicas_ = std::max(req.replicas, target_);
    }
    if (model_.index_count() > caps.max_indexes || replicas_ > caps.max_replicas || model_.query_count() > caps.max_queries) {
      throw Error("caps_exceeded", "instance exceeds the oracle's enumeration caps");
    }
    if (c.update_cost_bound && !c.update_cost_bound->reference) {
      throw Error("invalid_request", "oracle needs an explicit update-cost reference");
    }
    const int nsub = 1 << model_.index_count();
    stmt_cost_.assign(model_.statement_count(), std::vector<double>(nsub));
    upd_cost_.assign(nsub, 0.0);
    for (Bits b = 0; b < static_cast<Bits>(nsub); ++b) {
      IndexMask mask(model_.index_count(), 0);
      for (int a = 0; a < model_.index_count(); ++a) mask[a] = (b >> a) & 1;
      for (int q = 0; q < model_.statement_count(); ++q) {
        const PlanChoice pc = CostModel::best_plan(model_.statement(q), mask);
        stmt_cost_[q][b] = pc.feasible() ? pc.cost : std::numeric_limits<double>::infinity();
      }
      double uc = 0.0;
      for (std::size_t u = 0; u < model_.updates().size(); ++u) uc += model_.updates()[u].weight * update_cost(static_cast<int>(u), b);
      upd_cost_[b] = uc;
    }
  }

  // Calls `visit` for every feasible (design, objective); returns the count.
  long run(const std::function<void(const DivergentDesign&, double)>& visit) {
    const auto& c = req_.constraints;
    std::optional<double> greedy_cap;
    if (c.load_skew && c.load_skew->mode == SkewMode::kGreedy && greedy_beta(c.load_skew->tau, target_) >= 0.0) {
      // Reference optimum: minimum TotalCost under the remaining constraints.
      TuningRequest plain = req_;
      plain.failure_prob = 0.0;
      plain.constraints.load_skew.reset();
      plain.constraints.failure_load_skew.reset();
      Enumerator inner(plain, OracleCaps{32, 32, 32});
      inner.total_cost_objective_ = true;
      double best = std::numeric_limits<double>::infinity();
      inner.run([&](const DivergentDesign&, double v) { best = std::min(best, v); });
      if (std::isfinite(best)) greedy_cap = (1.0 + greedy_beta(c.load_skew->tau, target_)) * best / target_;
    } else if (c.load_skew && c.load_skew->mode == SkewMode::kGreedy) {
      // beta < 0: handled as exact skew.
    }
    greedy_cap_ = greedy_cap;
    const long n = enumerate(visit);
    if (n > 0 || !greedy_cap_) return n;
    // Greedy skew admits nothing: same fallback as the tuner, exact skew.
    greedy_cap_.reset();
    return enumerate(visit);
  }

  const CostModel& model() const { return model_; }

 private:
  long enumerate(const std::function<void(const DivergentDesign&, double)>& visit) {
    std::vector<int> all(replicas_);
    std::iota(all.begin(), all.end(), 1);
    std::vector<std::vector<int>> actives = target_ < replicas_ ? subsets(all, target_) : std::vector<std::vector<int>>{all};
    long count = 0;
    for (const auto& active : actives) {
      std::vector<char> on(replicas_ + 1, 0);
      for (int r : active) on[r] = 1;
      // Admissible configurations per replica.
      std::vector<std::vector<Bits>> choices(replicas_ + 1);
      for (int r = 1; r <= replicas_; ++r) {
        if (!on[r]) {
          choices[r] = {0};
          continue;
        }
        for (Bits b = 0; b < (Bits(1) << model_.index_count()); ++b) {
          if (config_ok(r, b)) choices[r].push_back(b);
        }
      }
      std::vector<Bits> tuple(replicas_ + 1, 0);
      std::function<void(int)> rec = [&](int r) {
        if (r > replicas_) {
          count += evaluate(tuple, on, visit);
          return;
        }
        for (Bits b : choices[r]) {
          tuple[r] = b;
          rec(r + 1);
        }
      };
      rec(1);
    }
    return count;
  }

  double update_cost(int u, Bits b) const {
    const auto& upd = model_.updates()[u];
    double c = stmt_cost_[upd.shell][b] + upd.base_cost;
    for (const auto& [a, uc] : upd.index_costs) {
      if ((b >> a) & 1) c += uc;
    }
    return c;
  }

  std::set<IndexId> config(Bits b) const {
    std::set<IndexId> out;
    for (int a = 0; a < model_.index_count(); ++a) {
      if ((b >> a) & 1) out.insert(model_.index_id(a));
    }
    return out;
  }

  bool config_ok(int r, Bits b) const {
    const auto& c = req_.constraints;
    if (c.space_budget) {
      double size = 0.0;
      for (int a = 0; a < model_.index_count(); ++a) {
        if ((b >> a) & 1) size += model_.index(a).size;
      }
      if (size > *c.space_budget + 1e-9) return false;
    }
    for (const auto& lim : c.property_limits) {
      int n = 0;
      for (const auto& id : lim.indexes) n += (b >> model_.index_position(id)) & 1;
      if (n > lim.max_per_replica) return false;
    }
    if (c.materialization) {
      const auto& mat = *c.materialization;
      const double cost = transition_cost(model_, mat.current, config(b), r, mat.deploy_cost);
      if (cost > mat.budget + 1e-9 * std::max(1.0, mat.budget)) return false;
    }
    for (int q = model_.query_count(); q < model_.statement_count(); ++q) {
      if (!std::isfinite(stmt_cost_[q][b])) return false;
    }
    return true;
  }

  bool skew_ok(const std::vector<double>& loads, const std::vector<int>& reps, double tau) const {
    for (int r : reps) {
      for (int r2 : reps) {
        if (r == r2) continue;
        if (loads[r] > (1.0 + tau) * loads[r2] + 1e-9 * std::max(1.0, loads[r])) return false;
      }
    }
    return true;
  }

  // Enumerates routings for one configuration tuple; returns feasible count.
  long evaluate(const std::vector<Bits>& tuple, const std::vector<char>& on,
                const std::function<void(const DivergentDesign&, double)>& visit) {
    const auto& c = req_.constraints;
    const int m = req_.multiplicity;
    const int nq = model_.query_count();
    const double alpha = total_cost_objective_ ? 0.0 : req_.failure_prob;
    std::vector<int> active;
    for (int r = 1; r <= replicas_; ++r) {
      if (on[r]) active.push_back(r);
    }
    const int n = static_cast<int>(active.size());
    std::vector<double> update_load(replicas_ + 1, 0.0);
    double update_total = 0.0;
    for (int r : active) {
      update_load[r] = upd_cost_[tuple[r]];
      update_total += update_load[r];
    }
    if (c.update_cost_bound) {
      if (update_total > c.update_cost_bound->fraction * *c.update_cost_bound->reference + 1e-9 * std::max(1.0, update_total)) {
        return 0;
      }
    }
    const bool query_only = c.update_cost_bound.has_value() && !total_cost_objective_;
    const bool exact_skew = c.load_skew && (c.load_skew->mode == SkewMode::kExact || !greedy_cap_);
    const bool normal_constrained = exact_skew || greedy_cap_.has_value();

    // Candidate routings per query (normal operation).
    auto options_for = [&](int q, const std::vector<int>& reps, int k, bool all) {
      std::vector<std::vector<int>> out;
      std::vector<std::pair<double, int>> order;
      for (int r : reps) order.emplace_back(stmt_cost_[q][tuple[r]], r);
      if (all) {
        for (auto& s : subsets(reps, k)) {
          bool finite = true;
          for (int r : s) finite = finite && std::isfinite(stmt_cost_[q][tuple[r]]);
          if (finite) out.push_back(s);
        }
        return out;
      }
      std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
      if (static_cast<int>(order.size()) < k || !std::isfinite(order[k - 1].first)) return out;
      std::vector<int> pick;
      for (int i = 0; i < k; ++i) pick.push_back(order[i].second);
      std::sort(pick.begin(), pick.end());
      out.push_back(pick);
      return out;
    };

    std::vector<std::vector<std::vector<int>>> normal(nq);
    for (int q = 0; q < nq; ++q) {
      normal[q] = options_for(q, active, m, normal_constrained);
      if (normal[q].empty()) return 0;
    }

    // Failure scenarios are independent of the normal routing: pick the best
    // admissible routing per failed replica.
    std::map<int, QueryRouting> failure_routing;
    double failure_part = 0.0;
    if (alpha > 0.0) {
      const int card = failure_cardinality(n, m, req_.routing_mode);
      for (int j : active) {
        std::vector<int> survivors;
        for (int r : active) {
          if (r != j) survivors.push_back(r);
        }
        std::vector<std::vector<std::vector<int>>> opts(nq);
        for (int q = 0; q < nq; ++q) {
          opts[q] = options_for(q, survivors, card, c.failure_load_skew.has_value());
          if (opts[q].empty()) return 0;
        }
        double best = std::numeric_limits<double>::infinity();
        std::vector<int> best_pick;
        std::vector<int> pick(nq, 0);
        while (true) {
          std::vector<double> load(replicas_ + 1, 0.0);
          double qc = 0.0;
          for (int q = 0; q < nq; ++q) {
            for (int r : opts[q][pick[q]]) {
              const double v = model_.statement(q).weight / card * stmt_cost_[q][tuple[r]];
              load[r] += v;
              qc += v;
            }
          }
          bool ok = true;
          if (c.failure_load_skew) {
            for (int r : survivors) load[r] += update_load[r];
            ok = skew_ok(load, survivors, *c.failure_load_skew);
          }
          if (ok && qc < best - 1e-12 * std::max(1.0, std::abs(qc))) {
            best = qc;
            best_pick = pick;
          }
          int q = 0;
          while (q < nq && ++pick[q] == static_cast<int>(opts[q].size())) pick[q++] = 0;
          if (q == nq) break;
        }
        if (best_pick.empty()) return 0;
        QueryRouting routing;
        for (int q = 0; q < nq; ++q) {
          const auto& reps = opts[q][best_pick[q]];
          routing[model_.statement(q).id] = std::set<ReplicaId>(reps.begin(), reps.end());
        }
        failure_routing[j] = std::move(routing);
        const double update_part = query_only ? 0.0 : update_total - update_load[j];
        failure_part += alpha / n * (best + update_part);
      }
    }

    long feasible = 0;
    std::vector<int> pick(nq, 0);
    while (true) {
      std::vector<double> load(replicas_ + 1, 0.0);
      double qc = 0.0;
      for (int q = 0; q < nq; ++q) {
        for (int r : normal[q][pick[q]]) {
          const double v = model_.statement(q).weight / m * stmt_cost_[q][tuple[r]];
          load[r] += v;
          qc += v;
        }
      }
      for (int r : active) load[r] += update_load[r];
      bool ok = true;
      if (exact_skew) ok = skew_ok(load, active, c.load_skew->tau);
      if (ok && greedy_cap_) {
        for (int r : active) ok = ok && load[r] <= *greedy_cap_ + 1e-9 * std::max(1.0, *greedy_cap_);
      }
      if (ok) {
        const double normal_part = query_only ? qc : qc + update_total;
        const double objective = (1.0 - alpha) * normal_part + failure_part;
        DivergentDesign d;
        d.configs.resize(replicas_);
        for (int r = 1; r <= replicas_; ++r) d.configs[r - 1] = config(tuple[r]);
        for (int r = 1; r <= replicas_; ++r) {
          if (!on[r]) d.dropped.insert(r);
        }
        for (int q = 0; q < nq; ++q) {
          const auto& reps = normal[q][pick[q]];
          d.routing.normal[model_.statement(q).id] = std::set<ReplicaId>(reps.begin(), reps.end());
        }
        d.routing.on_failure = failure_routing;
        ++feasible;
        visit(d, objective);
      }
      int q = 0;
      while (q < nq && ++pick[q] == static_cast<int>(normal[q].size())) pick[q++] = 0;
      if (q == nq) break;
    }
    return feasible;
  }

  TuningRequest req_;
  CostModel model_;
  int replicas_ = 0;
  int target_ = 0;
  bool total_cost_objective_ = false;
  std::optional<double> greedy_cap_;
  std::vector<std::vector<double>> stmt_cost_;  // [statement][config bits]
  std::vector<double> upd_cost_;                // weighted update cost per config
};

}  // namespace detail

// Calls `visit(design, objective)` for every feasible design the oracle
// considers. The objective is ExpTotalCost, or the expected query cost when
// an update-cost bound is set.
inline long for_each_feasible_design(const TuningRequest& req, const OracleCaps& caps,
                                     const std::function<void(const DivergentDesign&, double)>& visit) {
  detail::Enumerator e(req, caps);
  return e.run(visit);
}

inline OracleResult enumerate_optimal(const TuningRequest& req, const OracleCaps& caps = {}) {
  detail::Enumerator e(req, caps);
  std::optional<DivergentDesign> best;
  std::string best_key;
  double best_value = std::numeric_limits<double>::infinity();
  const long n = e.run([&](const DivergentDesign& d, double v) {
    const double tol = 1e-12 * std::max(1.0, std::abs(v));
    if (v < best_value - tol) {
      best = d;
      best_value = v;
      best_key.clear();
      return;
    }
    if (v <= best_value + tol) {
      if (best_key.empty()) best_key = json(*best).dump();
      std::string key = json(d).dump();
      if (key < best_key) {
        best = d;
        best_key = std::move(key);
      }
    }
  });
  if (!best) throw Error("infeasible", "no design satisfies the constraints");
  OracleResult out;
  out.design = *best;
  fill_failure_routing(out.design, e.model(), req.multiplicity, req.routing_mode);
  out.objective = best_value;
  out.cost = DesignEvaluator(e.model(), out.design, req.multiplicity, req.routing_mode).breakdown(req.failure_prob);
  out.designs_evaluated = n;
  return out;
}

}  // namespace divtune
