#pragma once

// Reduction of divergent design tuning to a binary integer program, the
// constraint-family builders, and the two directions between assignments and
// designs (decode, embed).
//
// Variables (r is a replica, q a statement, p a template of q, (k, o) an
// option o in slot k of p):
//   s[r,a]        index a is built on replica r
//   t[r,q]        q is routed to r (query shells: runs on r)
//   y[r,q,p]      q uses template p on r
//   x[r,q,p,k,o]  q fills slot k of p with option o on r
//   t/y/x_fail    the same while replica j is down (queries only, r != j)
//   z[r]          replica r stays in service (shrinking)
//   yo/xo/u       the query-optimal plan at every replica (exact load skew)

#include <algorithm>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "divtune/costmodel.hpp"
#include "divtune/error.hpp"
#include "divtune/model.hpp"
#include "divtune/program.hpp"

namespace divtune {

struct DdtProgram {
  std::shared_ptr<const CostModel> model;
  TuningRequest request;
  BinaryProgram bp;
  int replicas = 0;       // replica range of the program
  int active_target = 0;  // replicas in service after tuning
  int multiplicity = 1;
  double alpha = 0.0;
  bool failures = false;
  bool shrink = false;
  bool query_only_objective = false;
  bool ordered_skew = false;
  bool query_optimal = false;
  std::vector<std::string> families;  // constraint families, in order added

  const CostModel& cm() const { return *model; }
  int failure_cardinality() const { return divtune::failure_cardinality(active_target, multiplicity, request.routing_mode); }
};

namespace detail {

inline std::string replica_tag(int r) { return "_r" + std::to_string(r); }

inline void add_family(DdtProgram& p, const std::string& f) {
  if (std::find(p.families.begin(), p.families.end(), f) == p.families.end()) p.families.push_back(f);
}

// Statement-local names: q<id>_p<template>_a<access>.
inline std::string stmt_tag(const CostModel& m, int q) { return "_q" + m.statement(q).id; }
inline std::string tmpl_tag(const CostModel& m, int q, int p) { return stmt_tag(m, q) + "_p" + m.statement(q).templates[p].id; }
inline std::string opt_tag(const CostModel& m, int q, int p, int k, int o) {
  return tmpl_tag(m, q, p) + "_a" + m.statement(q).templates[p].slots[k].options[o].access_id;
}

inline double stmt_weight(const DdtProgram& p, int q) {
  const auto& s = p.cm().statement(q);
  return q < p.cm().query_count() ? s.weight / p.multiplicity : s.weight;
}

// Upper bound on the optimal cost of q under any configuration.
inline double plan_cost_bound(const CompiledStatement& s) {
  double bound = 0.0;
  for (const auto& tp : s.templates) {
    double c = tp.internal_cost;
    for (const auto& slot : tp.slots) {
      double worst = 0.0;
      for (const auto& o : slot.options) {
        if (o.usable) worst = std::max(worst, o.cost);
      }
      c += worst;
    }
    bound = std::max(bound, c);
  }
  return bound + 1.0;
}

// Adds t/y/x for one statement on one replica (j = 0: normal operation).
inline void add_plan_family(DdtProgram& p, int r, int j, int q, double weight) {
  const CostModel& m = p.cm();
  const auto& st = m.statement(q);
  const bool fail = j > 0;
  const std::string jt = fail ? "_j" + std::to_string(j) : "";
  const VarKind tk = fail ? VarKind::t_fail : VarKind::t;
  const VarKind yk = fail ? VarKind::y_fail : VarKind::y;
  const VarKind xk = fail ? VarKind::x_fail : VarKind::x;
  const char* pre = fail ? "f" : "";
  BinaryProgram& bp = p.bp;

  const int t = bp.add_var(VarKey{tk, r, j, q}, std::string("t") + pre + replica_tag(r) + jt + stmt_tag(m, q));
  std::vector<LinearTerm> pick{{t, -1.0}};
  for (int tp = 0; tp < static_cast<int>(st.templates.size()); ++tp) {
    const auto& tpl = st.templates[tp];
    const int y = bp.add_var(VarKey{yk, r, j, q, tp}, std::string("y") + pre + replica_tag(r) + jt + tmpl_tag(m, q, tp),
                             weight * tpl.internal_cost);
    pick.emplace_back(y, 1.0);
    for (int k = 0; k < static_cast<int>(tpl.slots.size()); ++k) {
      const auto& slot = tpl.slots[k];
      std::vector<LinearTerm> fill{{y, -1.0}};
      for (int o = 0; o < static_cast<int>(slot.options.size()); ++o) {
        const auto& opt = slot.options[o];
        if (!opt.usable) continue;
        const int x = bp.add_var(VarKey{xk, r, j, q, tp, k, o},
                                 std::string("x") + pre + replica_tag(r) + jt + opt_tag(m, q, tp, k, o), weight * opt.cost);
        fill.emplace_back(x, 1.0);
        if (opt.access != kScan) {
          const int s = bp.col(VarKey{VarKind::s, r, 0, -1, -1, -1, -1, opt.access});
          bp.add_row({{x, 1.0}, {s, -1.0}}, Relation::le, 0.0, fail ? "fail_index_available" : "index_available");
        }
      }
      bp.add_row(std::move(fill), Relation::eq, 0.0, fail ? "fail_atomic" : "atomic");
    }
  }
  bp.add_row(std::move(pick), Relation::eq, 0.0, fail ? "fail_one_template" : "one_template");
}

inline int s_col(const DdtProgram& p, int r, int a) { return p.bp.col(VarKey{VarKind::s, r, 0, -1, -1, -1, -1, a}); }

struct LinearForm {
  std::vector<LinearTerm> terms;
  double constant = 0.0;
};

// Normal (failed = 0) or failure-scenario load of replica r.
inline LinearForm load_form(const DdtProgram& p, int r, int failed) {
  const CostModel& m = p.cm();
  LinearForm f;
  const double card = failed > 0 ? p.failure_cardinality() : p.multiplicity;
  for (int q = 0; q < m.statement_count(); ++q) {
    const bool query = q < m.query_count();
    const auto& st = m.statement(q);
    const double w = query ? st.weight / card : st.weight;
    const int j = query ? failed : 0;
    const VarKind yk = j > 0 ? VarKind::y_fail : VarKind::y;
    const VarKind xk = j > 0 ? VarKind::x_fail : VarKind::x;
    for (int tp = 0; tp < static_cast<int>(st.templates.size()); ++tp) {
      const auto& tpl = st.templates[tp];
      f.terms.emplace_back(p.bp.col(VarKey{yk, r, j, q, tp}), w * tpl.internal_cost);
      for (int k = 0; k < static_cast<int>(tpl.slots.size()); ++k) {
        for (int o = 0; o < static_cast<int>(tpl.slots[k].options.size()); ++o) {
          if (!tpl.slots[k].options[o].usable) continue;
          f.terms.emplace_back(p.bp.col(VarKey{xk, r, j, q, tp, k, o}), w * tpl.slots[k].options[o].cost);
        }
      }
    }
  }
  for (const auto& u : m.updates()) {
    for (const auto& [a, c] : u.index_costs) f.terms.emplace_back(s_col(p, r, a), u.weight * c);
    f.constant += u.weight * u.base_cost;
  }
  return f;
}

inline double update_constant(const CostModel& m) {
  double c = 0.0;
  for (const auto& u : m.updates()) c += u.weight * u.base_cost;
  return c;
}

// lhs(r1) - (1 + tau) * lhs(r2) <= tau * constant
inline void add_skew_pair(DdtProgram& p, const LinearForm& hi, const LinearForm& lo, double tau, const std::string& family) {
  std::vector<LinearTerm> terms = hi.terms;
  for (const auto& [c, v] : lo.terms) terms.emplace_back(c, -(1.0 + tau) * v);
  p.bp.add_row(std::move(terms), Relation::le, (1.0 + tau) * lo.constant - hi.constant, family);
}

}  // namespace detail

// Core program: routing, template choice, atomic configurations, index
// availability. The objective is QueryCost + UpdateCost without the c_u
// constants, which are kept as the program's objective constant.
inline DdtProgram build_core(const TuningRequest& req, std::shared_ptr<const CostModel> model = nullptr) {
  if (!model) model = std::make_shared<const CostModel>(req.workload);
  DdtProgram p;
  p.model = model;
  p.request = req;
  p.multiplicity = req.multiplicity;
  p.replicas = req.replicas;
  if (req.constraints.materialization && req.constraints.materialization->target_replicas > req.replicas) {
    p.replicas = req.constraints.materialization->target_replicas;
  }
  p.active_target = p.replicas;
  const CostModel& m = *model;

  for (int q = 0; q < m.statement_count(); ++q) {
    const auto& st = m.statement(q);
    if (!CostModel::best_plan(st, IndexMask(m.index_count(), 1)).feasible()) {
      throw Error("invalid_request", "statement " + st.id + " has no usable template instantiation");
    }
  }

  for (int r = 1; r <= p.replicas; ++r) {
    for (int a = 0; a < m.index_count(); ++a) {
      p.bp.add_var(VarKey{VarKind::s, r, 0, -1, -1, -1, -1, a}, "s" + detail::replica_tag(r) + "_a" + m.index_id(a));
    }
  }
  for (int r = 1; r <= p.replicas; ++r) {
    for (int q = 0; q < m.statement_count(); ++q) detail::add_plan_family(p, r, 0, q, detail::stmt_weight(p, q));
  }
  for (int q = 0; q < m.statement_count(); ++q) {
    std::vector<LinearTerm> route;
    for (int r = 1; r <= p.replicas; ++r) route.emplace_back(p.bp.col(VarKey{VarKind::t, r, 0, q}), 1.0);
    if (q < m.query_count()) {
      p.bp.add_row(std::move(route), Relation::eq, p.multiplicity, "route");
    } else {
      p.bp.add_row(std::move(route), Relation::eq, p.replicas, "shell_route");
    }
  }
  for (const auto& u : m.updates()) {
    for (int r = 1; r <= p.replicas; ++r) {
      for (const auto& [a, c] : u.index_costs) p.bp.add_cost(detail::s_col(p, r, a), u.weight * c);
    }
  }
  p.bp.set_objective_constant(p.replicas * detail::update_constant(m));
  detail::add_family(p, "core");
  return p;
}

// Failure scenarios: one routing per failed replica j; the objective becomes
// ExpTotalCost.
inline void add_failures(DdtProgram& p, double alpha) {
  if (alpha <= 0.0) return;
  if (p.failures) throw Error("internal", "failures already added");
  if (p.replicas < 2) throw Error("invalid_request", "failures need at least two replicas");
  if (p.shrink) throw Error("invalid_request", "failures cannot be combined with shrinking");
  const CostModel& m = p.cm();
  const int n = p.replicas;
  const double card = p.failure_cardinality();
  if (card > n - 1) throw Error("invalid_request", "failure routing cardinality exceeds the surviving replicas");
  p.alpha = alpha;
  p.failures = true;

  // Normal-operation query terms keep weight (1 - alpha). Update work runs on
  // every surviving replica: (1 - alpha) + alpha (N - 1) / N = 1 - alpha / N.
  const double keep = 1.0 - alpha;
  const double survive = 1.0 - alpha / n;
  for (int c = 0; c < p.bp.num_vars(); ++c) {
    const VarKey& k = p.bp.key(c);
    const bool stmt_var = k.kind == VarKind::y || k.kind == VarKind::x;
    if (stmt_var && k.q < m.query_count()) {
      p.bp.set_cost(c, p.bp.objective()[c] * keep);
    } else if (stmt_var || k.kind == VarKind::s) {
      p.bp.set_cost(c, p.bp.objective()[c] * survive);
    }
  }
  p.bp.set_objective_constant(p.bp.objective_constant() * survive);

  for (int j = 1; j <= n; ++j) {
    for (int r = 1; r <= n; ++r) {
      if (r == j) continue;
      for (int q = 0; q < m.query_count(); ++q) {
        detail::add_plan_family(p, r, j, q, alpha / n * m.statement(q).weight / card);
      }
    }
    for (int q = 0; q < m.query_count(); ++q) {
      std::vector<LinearTerm> route;
      for (int r = 1; r <= n; ++r) {
        if (r != j) route.emplace_back(p.bp.col(VarKey{VarKind::t_fail, r, j, q}), 1.0);
      }
      p.bp.add_row(std::move(route), Relation::eq, card, "fail_route");
    }
  }
  detail::add_family(p, "failures");
}

inline void add_space_budget(DdtProgram& p, double budget) {
  const CostModel& m = p.cm();
  for (int r = 1; r <= p.replicas; ++r) {
    std::vector<LinearTerm> terms;
    for (int a = 0; a < m.index_count(); ++a) terms.emplace_back(detail::s_col(p, r, a), m.index(a).size);
    p.bp.add_row(std::move(terms), Relation::le, budget, "space_budget");
  }
  detail::add_family(p, "space_budget");
}

inline void add_property_limit(DdtProgram& p, const IndexPropertyLimit& limit) {
  for (int r = 1; r <= p.replicas; ++r) {
    std::vector<LinearTerm> terms;
    for (const auto& id : limit.indexes) terms.emplace_back(detail::s_col(p, r, p.cm().index_position(id)), 1.0);
    p.bp.add_row(std::move(terms), Relation::le, limit.max_per_replica, "property_limit");
  }
  detail::add_family(p, "property_limit");
}

// Query-optimal machinery: yo/xo pick the cheapest plan of every statement on
// every replica; y/x (and the failure copies) may only follow it.
inline void add_query_optimal(DdtProgram& p) {
  if (p.query_optimal) return;
  const CostModel& m = p.cm();
  for (int q = 0; q < m.statement_count(); ++q) {
    if (!CostModel::best_plan(m.statement(q), IndexMask(m.index_count(), 0)).feasible()) {
      throw Error("unsupported", "exact load skew needs a scan-only plan for statement " + m.statement(q).id);
    }
  }
  BinaryProgram& bp = p.bp;
  for (int r = 1; r <= p.replicas; ++r) {
    for (int q = 0; q < m.statement_count(); ++q) {
      const auto& st = m.statement(q);
      const double big = detail::plan_cost_bound(st);
      const std::string rt = detail::replica_tag(r);

      // costopt = sum_p beta_p yo_p + sum gamma xo
      std::vector<LinearTerm> costopt;
      std::vector<LinearTerm> one;
      for (int tp = 0; tp < static_cast<int>(st.templates.size()); ++tp) {
        const auto& tpl = st.templates[tp];
        const int yo = bp.add_var(VarKey{VarKind::yo, r, 0, q, tp}, "yo" + rt + detail::tmpl_tag(m, q, tp));
        one.emplace_back(yo, 1.0);
        costopt.emplace_back(yo, tpl.internal_cost);
        for (int k = 0; k < static_cast<int>(tpl.slots.size()); ++k) {
          const auto& slot = tpl.slots[k];
          std::vector<LinearTerm> fill{{yo, -1.0}};
          for (int o = 0; o < static_cast<int>(slot.options.size()); ++o) {
            const auto& opt = slot.options[o];
            if (!opt.usable) continue;
            const int xo = bp.add_var(VarKey{VarKind::xo, r, 0, q, tp, k, o}, "xo" + rt + detail::opt_tag(m, q, tp, k, o));
            fill.emplace_back(xo, 1.0);
            costopt.emplace_back(xo, opt.cost);
            if (opt.access != kScan) {
              bp.add_row({{xo, 1.0}, {detail::s_col(p, r, opt.access), -1.0}}, Relation::le, 0.0, "opt_index_available");
            }
          }
          bp.add_row(std::move(fill), Relation::eq, 0.0, "opt_atomic");
        }
      }
      bp.add_row(std::move(one), Relation::eq, 1.0, "opt_one_template");

      for (int tp = 0; tp < static_cast<int>(st.templates.size()); ++tp) {
        const auto& tpl = st.templates[tp];
        // costopt - sum gamma~ u <= beta_p
        std::vector<LinearTerm> upper = costopt;
        for (int k = 0; k < static_cast<int>(tpl.slots.size()); ++k) {
          const auto& slot = tpl.slots[k];
          std::vector<int> u(slot.options.size());
          std::vector<double> g(slot.options.size());
          std::vector<LinearTerm> one_u;
          for (int o = 0; o < static_cast<int>(slot.options.size()); ++o) {
            const auto& opt = slot.options[o];
            g[o] = opt.usable ? opt.cost : big;
            u[o] = bp.add_var(VarKey{VarKind::u_slot, r, 0, q, tp, k, o}, "u" + rt + detail::opt_tag(m, q, tp, k, o));
            one_u.emplace_back(u[o], 1.0);
            upper.emplace_back(u[o], -g[o]);
            if (opt.access != kScan) {
              bp.add_row({{u[o], 1.0}, {detail::s_col(p, r, opt.access), -1.0}}, Relation::le, 0.0, "opt_slot_available");
            }
          }
          bp.add_row(std::move(one_u), Relation::eq, 1.0, "opt_slot_one");
          // The chosen access is at least as cheap as every available usable
          // one (ties count as cheap enough).
          for (int o = 0; o < static_cast<int>(slot.options.size()); ++o) {
            const auto& opt = slot.options[o];
            if (!opt.usable) continue;
            std::vector<LinearTerm> cheaper;
            for (int b = 0; b < static_cast<int>(slot.options.size()); ++b) {
              if (g[b] <= g[o]) cheaper.emplace_back(u[b], 1.0);
            }
            if (opt.access == kScan) {
              bp.add_row(std::move(cheaper), Relation::ge, 1.0, "opt_least_cost");
            } else {
              cheaper.emplace_back(detail::s_col(p, r, opt.access), -1.0);
              bp.add_row(std::move(cheaper), Relation::ge, 0.0, "opt_least_cost");
            }
          }
        }
        bp.add_row(std::move(upper), Relation::le, tpl.internal_cost, "opt_upper");
      }

      // Linkage: the plan charged for q on r is the optimal one.
      auto link = [&](VarKind yk, VarKind xk, int j) {
        for (int tp = 0; tp < static_cast<int>(st.templates.size()); ++tp) {
          const auto& tpl = st.templates[tp];
          bp.add_row({{bp.col(VarKey{yk, r, j, q, tp}), 1.0}, {bp.col(VarKey{VarKind::yo, r, 0, q, tp}), -1.0}},
                     Relation::le, 0.0, "opt_link");
          for (int k = 0; k < static_cast<int>(tpl.slots.size()); ++k) {
            for (int o = 0; o < static_cast<int>(tpl.slots[k].options.size()); ++o) {
              if (!tpl.slots[k].options[o].usable) continue;
              bp.add_row({{bp.col(VarKey{xk, r, j, q, tp, k, o}), 1.0}, {bp.col(VarKey{VarKind::xo, r, 0, q, tp, k, o}), -1.0}},
                         Relation::le, 0.0, "opt_link");
            }
          }
        }
      };
      link(VarKind::y, VarKind::x, 0);
      if (p.failures && q < m.query_count()) {
        for (int j = 1; j <= p.replicas; ++j) {
          if (j != r) link(VarKind::y_fail, VarKind::x_fail, j);
        }
      }
    }
  }
  p.query_optimal = true;
  detail::add_family(p, "query_optimal");
}

// Exact load skew: every replica's load is within (1 + tau) of every other's.
// With interchangeable replicas the loads are ordered and only the extremes
// are compared; otherwise all pairs are constrained.
inline void add_load_skew_exact(DdtProgram& p, double tau) {
  if (!std::isfinite(tau)) return;
  add_query_optimal(p);
  const int n = p.replicas;
  std::vector<detail::LinearForm> loads;
  for (int r = 1; r <= n; ++r) loads.push_back(detail::load_form(p, r, 0));
  const bool symmetric = !p.request.constraints.materialization.has_value();
  if (symmetric) {
    for (int r = 1; r < n; ++r) detail::add_skew_pair(p, loads[r - 1], loads[r], 0.0, "load_order");
    if (n > 1) detail::add_skew_pair(p, loads[n - 1], loads[0], tau, "load_skew");
    p.ordered_skew = true;
  } else {
    for (int r = 1; r <= n; ++r) {
      for (int r2 = 1; r2 <= n; ++r2) {
        if (r != r2) detail::add_skew_pair(p, loads[r - 1], loads[r2 - 1], tau, "load_skew");
      }
    }
  }
  detail::add_family(p, "load_skew");
}

inline double greedy_beta(double tau, int replicas) { return (tau - 1.0) / (1.0 + (replicas - 1) * tau); }

// Greedy load skew: load(r) <= (1 + beta) * opt / N for every replica, where
// opt is the optimal TotalCost without skew constraints.
inline void add_load_skew_greedy(DdtProgram& p, double tau, double opt_cost) {
  const int n = p.replicas;
  const double beta = greedy_beta(tau, n);
  const double cap = (1.0 + beta) * opt_cost / n;
  for (int r = 1; r <= n; ++r) {
    const auto f = detail::load_form(p, r, 0);
    p.bp.add_row(f.terms, Relation::le, cap - f.constant, "load_skew_greedy");
  }
  detail::add_family(p, "load_skew_greedy");
}

// Failure load skew: for each failed replica j, survivors' loads are within
// (1 + tau') of each other.
inline void add_failure_load_skew(DdtProgram& p, double tau) {
  if (!p.failures) throw Error("invalid_request", "failure load skew requires failures");
  add_query_optimal(p);
  const int n = p.replicas;
  for (int j = 1; j <= n; ++j) {
    std::map<int, detail::LinearForm> loads;
    for (int r = 1; r <= n; ++r) {
      if (r != j) loads[r] = detail::load_form(p, r, j);
    }
    for (const auto& [r, hi] : loads) {
      for (const auto& [r2, lo] : loads) {
        if (r != r2) detail::add_skew_pair(p, hi, lo, tau, "failure_load_skew");
      }
    }
  }
  detail::add_family(p, "failure_load_skew");
}

// Transition cost of replica r from the current design: creates of new
// indexes plus drops of removed ones, plus the deployment constant for a
// replica that does not exist yet.
inline double transition_cost(const CostModel& m, const DivergentDesign& current, const std::set<IndexId>& config,
                              int r, double deploy_cost) {
  if (r > current.replica_count()) {
    double c = deploy_cost;
    for (const auto& a : config) c += m.index(m.index_position(a)).create_cost;
    return c;
  }
  const auto& cur = current.configs[r - 1];
  double c = 0.0;
  for (const auto& a : config) {
    if (!cur.count(a)) c += m.index(m.index_position(a)).create_cost;
  }
  for (const auto& a : cur) {
    if (!config.count(a)) c += m.index(m.index_position(a)).drop_cost;
  }
  return c;
}

// Largest per-replica transition cost of `next` (dropped replicas are free).
inline double materialization_cost(const CostModel& m, const DivergentDesign& current, const DivergentDesign& next,
                                   double deploy_cost) {
  double worst = 0.0;
  for (int r = 1; r <= next.replica_count(); ++r) {
    if (!next.is_active(r)) continue;
    worst = std::max(worst, transition_cost(m, current, next.configs[r - 1], r, deploy_cost));
  }
  return worst;
}

inline void add_materialization(DdtProgram& p, double budget, const DivergentDesign& current, int target_replicas,
                                double deploy_cost = 0.0) {
  const CostModel& m = p.cm();
  const int n = p.request.replicas;
  if (current.replica_count() != n) throw Error("invalid_request", "current design must have N replicas");
  const int target = target_replicas == 0 ? n : target_replicas;
  if (target > p.replicas) throw Error("internal", "program was built over too few replicas for expansion");

  if (target < n) {
    if (p.failures) throw Error("invalid_request", "shrinking cannot be combined with failures");
    p.shrink = true;
    p.active_target = target;
    std::vector<LinearTerm> count;
    for (int r = 1; r <= p.replicas; ++r) {
      const int z = p.bp.add_var(VarKey{VarKind::z, r}, "z" + detail::replica_tag(r));
      count.emplace_back(z, 1.0);
      for (int q = 0; q < m.statement_count(); ++q) {
        p.bp.add_row({{p.bp.col(VarKey{VarKind::t, r, 0, q}), 1.0}, {z, -1.0}}, Relation::le, 0.0, "active_route");
      }
      for (int a = 0; a < m.index_count(); ++a) {
        p.bp.add_row({{detail::s_col(p, r, a), 1.0}, {z, -1.0}}, Relation::le, 0.0, "active_index");
      }
    }
    p.bp.add_row(std::move(count), Relation::eq, target, "active_count");
    for (auto& row : p.bp.mutable_rows()) {
      if (row.family == "shell_route") row.rhs = target;
    }
    p.bp.set_objective_constant(p.bp.objective_constant() / p.replicas * target);
  }

  for (int r = 1; r <= p.replicas; ++r) {
    std::vector<LinearTerm> terms;
    double rhs = budget;
    if (r <= n) {
      const auto& cur = current.configs[r - 1];
      double dropped_all = 0.0;
      for (int a = 0; a < m.index_count(); ++a) {
        const auto& idx = m.index(a);
        if (cur.count(idx.id)) {
          terms.emplace_back(detail::s_col(p, r, a), -idx.drop_cost);
          dropped_all += idx.drop_cost;
        } else {
          terms.emplace_back(detail::s_col(p, r, a), idx.create_cost);
        }
      }
      if (p.shrink) {
        terms.emplace_back(p.bp.col(VarKey{VarKind::z, r}), dropped_all);
      } else {
        rhs -= dropped_all;
      }
    } else {
      for (int a = 0; a < m.index_count(); ++a) terms.emplace_back(detail::s_col(p, r, a), m.index(a).create_cost);
      rhs -= deploy_cost;
    }
    p.bp.add_row(std::move(terms), Relation::le, rhs, "materialization");
  }
  detail::add_family(p, "materialization");
}

// UpdateCost (normal operation) of the program's replicas as a linear form.
inline detail::LinearForm update_cost_form(const DdtProgram& p) {
  const CostModel& m = p.cm();
  detail::LinearForm f;
  for (int r = 1; r <= p.replicas; ++r) {
    for (int q = m.query_count(); q < m.statement_count(); ++q) {
      const auto& st = m.statement(q);
      for (int tp = 0; tp < static_cast<int>(st.templates.size()); ++tp) {
        const auto& tpl = st.templates[tp];
        f.terms.emplace_back(p.bp.col(VarKey{VarKind::y, r, 0, q, tp}), st.weight * tpl.internal_cost);
        for (int k = 0; k < static_cast<int>(tpl.slots.size()); ++k) {
          for (int o = 0; o < static_cast<int>(tpl.slots[k].options.size()); ++o) {
            if (!tpl.slots[k].options[o].usable) continue;
            f.terms.emplace_back(p.bp.col(VarKey{VarKind::x, r, 0, q, tp, k, o}), st.weight * tpl.slots[k].options[o].cost);
          }
        }
      }
    }
    for (const auto& u : m.updates()) {
      for (const auto& [a, c] : u.index_costs) f.terms.emplace_back(detail::s_col(p, r, a), u.weight * c);
    }
  }
  f.constant = p.active_target * detail::update_constant(m);
  return f;
}

// Minimize query cost subject to UpdateCost <= fraction * reference. With
// keep_objective the objective is left alone (used to compute the greedy
// skew reference optimum under the same feasible set).
inline void add_update_cost_bound(DdtProgram& p, double fraction, double reference, bool keep_objective = false) {
  const CostModel& m = p.cm();
  const auto f = update_cost_form(p);
  p.bp.add_row(f.terms, Relation::le, fraction * reference - f.constant, "update_cost_bound");
  if (!keep_objective) {
    for (int c = 0; c < p.bp.num_vars(); ++c) {
      const VarKey& k = p.bp.key(c);
      const bool shell = (k.kind == VarKind::y || k.kind == VarKind::x) && k.q >= m.query_count();
      if (shell || k.kind == VarKind::s) p.bp.set_cost(c, 0.0);
    }
    p.bp.set_objective_constant(0.0);
    p.query_only_objective = true;
  }
  detail::add_family(p, "update_cost_bound");
}

// Number of access methods: every candidate index (each has an s variable
// per replica) plus one scan per referenced table.
inline std::size_t used_access_methods(const CostModel& m) {
  std::set<int> tables;
  for (const auto& st : m.statements()) {
    for (const auto& tpl : st.templates) {
      for (const auto& slot : tpl.slots) tables.insert(slot.table);
    }
  }
  return static_cast<std::size_t>(m.index_count()) + tables.size();
}

// ---------------------------------------------------------------------------
// Decoding and embedding.

struct Decoded {
  DivergentDesign design;
  CostBreakdown cost;
};

// Failure routing used when the program has no failure variables: the
// cheapest surviving replicas, ties by lowest id.
inline QueryRouting cheapest_survivors(const DesignEvaluator& ev, const CostModel& m, int failed, int card,
                                       const std::set<ReplicaId>& active) {
  QueryRouting out;
  for (int q = 0; q < m.query_count(); ++q) {
    std::vector<std::pair<double, int>> order;
    for (int r : active) {
      if (r != failed) order.emplace_back(ev.statement_cost(q, r), r);
    }
    std::sort(order.begin(), order.end());
    std::set<ReplicaId> pick;
    for (int i = 0; i < card && i < static_cast<int>(order.size()); ++i) pick.insert(order[i].second);
    out[m.statement(q).id] = pick;
  }
  return out;
}

inline void fill_failure_routing(DivergentDesign& d, const CostModel& m, int multiplicity, RoutingCardinality mode) {
  std::set<ReplicaId> active;
  for (int r = 1; r <= d.replica_count(); ++r) {
    if (d.is_active(r)) active.insert(r);
  }
  if (active.size() < 2) return;
  const int card = failure_cardinality(static_cast<int>(active.size()), multiplicity, mode);
  if (card > static_cast<int>(active.size()) - 1) return;
  DesignEvaluator ev(m, d, multiplicity, mode);
  for (int j : active) {
    if (!d.routing.on_failure.count(j)) d.routing.on_failure[j] = cheapest_survivors(ev, m, j, card, active);
  }
}

inline Decoded decode(const DdtProgram& p, const std::vector<char>& assignment) {
  const auto violations = check_assignment(p.bp, assignment);
  if (!violations.empty()) {
    throw Error("solver_failure", "assignment violates constraint family " + violations.front().family);
  }
  const CostModel& m = p.cm();
  Decoded out;
  DivergentDesign& d = out.design;
  d.configs.assign(p.replicas, {});
  for (int c = 0; c < p.bp.num_vars(); ++c) {
    if (!assignment[c]) continue;
    const VarKey& k = p.bp.key(c);
    switch (k.kind) {
      case VarKind::s: d.configs[k.r - 1].insert(m.index_id(k.a)); break;
      case VarKind::t:
        if (k.q < m.query_count()) d.routing.normal[m.statement(k.q).id].insert(k.r);
        break;
      case VarKind::t_fail: d.routing.on_failure[k.j][m.statement(k.q).id].insert(k.r); break;
      default: break;
    }
  }
  if (p.shrink) {
    for (int r = 1; r <= p.replicas; ++r) {
      if (!assignment[p.bp.col(VarKey{VarKind::z, r})]) d.dropped.insert(r);
    }
  }
  fill_failure_routing(d, m, p.multiplicity, p.request.routing_mode);
  out.cost = DesignEvaluator(m, d, p.multiplicity, p.request.routing_mode).breakdown(p.alpha);
  return out;
}

// Embedding of a design into an assignment: s from the
// configurations, t from the routing, and every routed statement uses its
// cheapest instantiated plan. With ordered load constraints the replicas are
// relabelled by increasing load first.
inline std::vector<char> embed(const DdtProgram& p, DivergentDesign design) {
  const CostModel& m = p.cm();
  if (design.replica_count() != p.replicas) throw Error("invalid_argument", "design has the wrong replica count");
  for (int q = 0; q < m.query_count(); ++q) {
    if (!design.routing.normal.count(m.statement(q).id)) {
      throw Error("incomplete_routing", "query " + m.statement(q).id + " has no routing entry");
    }
  }
  if (p.ordered_skew) {
    DesignEvaluator ev(m, design, p.multiplicity, p.request.routing_mode);
    std::vector<std::pair<double, int>> order;
    for (int r = 1; r <= p.replicas; ++r) order.emplace_back(ev.load(r), r);
    std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    std::vector<int> new_id(p.replicas + 1);
    for (int i = 0; i < p.replicas; ++i) new_id[order[i].second] = i + 1;
    DivergentDesign relabelled;
    relabelled.configs.resize(p.replicas);
    for (int r = 1; r <= p.replicas; ++r) relabelled.configs[new_id[r] - 1] = design.configs[r - 1];
    auto map_routing = [&](const QueryRouting& in) {
      QueryRouting outr;
      for (const auto& [q, reps] : in) {
        for (int r : reps) outr[q].insert(new_id[r]);
      }
      return outr;
    };
    relabelled.routing.normal = map_routing(design.routing.normal);
    for (const auto& [j, routing] : design.routing.on_failure) relabelled.routing.on_failure[new_id[j]] = map_routing(routing);
    for (int r : design.dropped) relabelled.dropped.insert(new_id[r]);
    design = std::move(relabelled);
  }
  if (p.failures) fill_failure_routing(design, m, p.multiplicity, p.request.routing_mode);

  std::vector<char> x(p.bp.num_vars(), 0);
  auto set = [&](const VarKey& k) {
    const int c = p.bp.find(k);
    if (c < 0) throw Error("invalid_argument", std::string("design needs a variable the program lacks (") + to_string(k.kind) + ")");
    x[c] = 1;
  };
  std::vector<IndexMask> masks;
  for (const auto& cfg : design.configs) masks.push_back(m.mask(cfg));

  auto set_plan = [&](int r, int j, int q) {
    const PlanChoice c = CostModel::best_plan(m.statement(q), masks[r - 1]);
    if (!c.feasible()) throw Error("invalid_argument", "statement " + m.statement(q).id + " has no plan on replica " + std::to_string(r));
    const bool fail = j > 0;
    set(VarKey{fail ? VarKind::t_fail : VarKind::t, r, j, q});
    set(VarKey{fail ? VarKind::y_fail : VarKind::y, r, j, q, c.template_pos});
    for (int k = 0; k < static_cast<int>(c.options.size()); ++k) {
      set(VarKey{fail ? VarKind::x_fail : VarKind::x, r, j, q, c.template_pos, k, c.options[k]});
    }
  };

  for (int r = 1; r <= p.replicas; ++r) {
    if (!design.is_active(r)) continue;
    for (const auto& a : design.configs[r - 1]) set(VarKey{VarKind::s, r, 0, -1, -1, -1, -1, m.index_position(a)});
    if (p.shrink) set(VarKey{VarKind::z, r});
  }
  for (int q = 0; q < m.statement_count(); ++q) {
    if (q < m.query_count()) {
      for (int r : design.routing.normal.at(m.statement(q).id)) set_plan(r, 0, q);
    } else {
      for (int r = 1; r <= p.replicas; ++r) {
        if (design.is_active(r)) set_plan(r, 0, q);
      }
    }
  }
  if (p.failures) {
    for (int j = 1; j <= p.replicas; ++j) {
      const auto& routing = design.routing.on_failure.at(j);
      for (int q = 0; q < m.query_count(); ++q) {
        for (int r : routing.at(m.statement(q).id)) set_plan(r, j, q);
      }
    }
  }
  if (p.query_optimal) {
    for (int r = 1; r <= p.replicas; ++r) {
      for (int q = 0; q < m.statement_count(); ++q) {
        const auto& st = m.statement(q);
        const PlanChoice c = CostModel::best_plan(st, masks[r - 1]);
        set(VarKey{VarKind::yo, r, 0, q, c.template_pos});
        for (int k = 0; k < static_cast<int>(c.options.size()); ++k) {
          set(VarKey{VarKind::xo, r, 0, q, c.template_pos, k, c.options[k]});
        }
        for (int tp = 0; tp < static_cast<int>(st.templates.size()); ++tp) {
          for (int k = 0; k < static_cast<int>(st.templates[tp].slots.size()); ++k) {
            const auto& slot = st.templates[tp].slots[k];
            int choice = -1;
            for (int o : slot.preference) {
              const auto& opt = slot.options[o];
              if (opt.access == kScan || masks[r - 1][opt.access]) {
                choice = o;
                break;
              }
            }
            if (choice < 0) {
              for (int o = 0; o < static_cast<int>(slot.options.size()); ++o) {
                if (slot.options[o].access == kScan) choice = o;
              }
            }
            if (choice < 0) throw Error("internal", "slot without a scan option");
            set(VarKey{VarKind::u_slot, r, 0, q, tp, k, choice});
          }
        }
      }
    }
  }
  return x;
}

// Design read off an LP point: s rounded at 0.5, repaired against the space
// budget and property limits by dropping the least-supported indexes, active
// replicas by largest z, queries routed to their cheapest replicas.
inline std::optional<DivergentDesign> round_design(const DdtProgram& p, const std::vector<double>& lp) {
  const CostModel& m = p.cm();
  const auto& c = p.request.constraints;
  DivergentDesign d;
  d.configs.resize(p.replicas);
  if (p.shrink) {
    std::vector<std::pair<double, int>> zs;
    for (int r = 1; r <= p.replicas; ++r) zs.emplace_back(-lp[p.bp.col(VarKey{VarKind::z, r})], r);
    std::sort(zs.begin(), zs.end());
    for (int i = p.active_target; i < p.replicas; ++i) d.dropped.insert(zs[i].second);
  }
  for (int r = 1; r <= p.replicas; ++r) {
    if (!d.is_active(r)) continue;
    std::vector<std::pair<double, int>> chosen;
    for (int a = 0; a < m.index_count(); ++a) {
      const double v = lp[detail::s_col(p, r, a)];
      if (v >= 0.5) chosen.emplace_back(v, a);
    }
    std::sort(chosen.begin(), chosen.end(), [](const auto& x, const auto& y) {
      return x.first != y.first ? x.first > y.first : x.second < y.second;
    });
    auto fits = [&](const std::vector<std::pair<double, int>>& set) {
      if (c.space_budget) {
        double size = 0.0;
        for (const auto& [v, a] : set) size += m.index(a).size;
        if (size > *c.space_budget + 1e-9) return false;
      }
      for (const auto& lim : c.property_limits) {
        int n = 0;
        for (const auto& [v, a] : set) n += lim.indexes.count(m.index_id(a)) ? 1 : 0;
        if (n > lim.max_per_replica) return false;
      }
      return true;
    };
    while (!chosen.empty() && !fits(chosen)) chosen.pop_back();
    for (const auto& [v, a] : chosen) d.configs[r - 1].insert(m.index_id(a));
  }
  DesignEvaluator ev(m, d, p.multiplicity, p.request.routing_mode);
  for (int q = 0; q < m.query_count(); ++q) {
    std::vector<std::pair<double, int>> order;
    for (int r = 1; r <= p.replicas; ++r) {
      if (d.is_active(r)) order.emplace_back(ev.statement_cost(q, r), r);
    }
    std::sort(order.begin(), order.end());
    if (static_cast<int>(order.size()) < p.multiplicity) return std::nullopt;
    for (int i = 0; i < p.multiplicity; ++i) d.routing.normal[m.statement(q).id].insert(order[i].second);
  }
  return d;
}

// Solver hooks: rounding heuristic and the decode/embed polish that replaces
// an assignment by one charging every routed statement its true cost.
inline std::function<std::optional<std::vector<char>>(const std::vector<double>&)> rounding_heuristic(const DdtProgram& p) {
  return [&p](const std::vector<double>& lp) -> std::optional<std::vector<char>> {
    try {
      auto d = round_design(p, lp);
      if (!d) return std::nullopt;
      return embed(p, std::move(*d));
    } catch (const Error&) {
      return std::nullopt;
    }
  };
}

inline std::function<std::vector<char>(const std::vector<char>&)> embed_polish(const DdtProgram& p) {
  return [&p](const std::vector<char>& x) -> std::vector<char> {
    try {
      return embed(p, decode(p, x).design);
    } catch (const Error&) {
      return x;
    }
  };
}

}  // namespace divtune
