#pragma once

// Benchmark scenarios on the synthetic workloads. Each returns the raw
// numbers; the acceptance suite judges them and `divtune bench` writes them
// out as CSV.

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <deque>
#include <sstream>
#include <string>
#include <vector>

#include "divtune/baselines.hpp"
#include "divtune/monitor.hpp"
#include "divtune/recommender.hpp"
#include "divtune/synthetic.hpp"

namespace divtune::scenarios {

struct Row {
  std::vector<std::pair<std::string, std::string>> cells;

  Row& add(const std::string& k, double v) {
    std::ostringstream s;
    s.precision(10);
    s << v;
    cells.emplace_back(k, s.str());
    return *this;
  }
  Row& add(const std::string& k, const std::string& v) {
    cells.emplace_back(k, v);
    return *this;
  }
};

inline std::string to_csv(const std::vector<Row>& rows) {
  if (rows.empty()) return "";
  std::string out;
  for (std::size_t i = 0; i < rows[0].cells.size(); ++i) out += (i ? "," : "") + rows[0].cells[i].first;
  out += "\n";
  for (const auto& r : rows) {
    for (std::size_t i = 0; i < r.cells.size(); ++i) out += (i ? "," : "") + r.cells[i].second;
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Divergent vs uniform: disjoint index affinity, one index per replica.

struct DivergentVsUniform {
  double tuned = 0.0;
  double unif = 0.0;
  double divg = 0.0;
  // m = N: every query everywhere.
  double divg_full = 0.0;
  double unif_full = 0.0;
  std::vector<Row> rows;
};

inline TuningRequest divergent_request(int replicas = 3, int multiplicity = 1) {
  TuningRequest req;
  req.workload = synthetic::disjoint_groups(3, 3);
  req.replicas = replicas;
  req.multiplicity = multiplicity;
  req.constraints.space_budget = 10.0;
  req.solver.gap_tolerance = 0.0;
  return req;
}

inline DivergentVsUniform divergent_vs_uniform(std::uint64_t seed = 1) {
  DivergentVsUniform out;
  const TuningRequest req = divergent_request();
  const CostModel m(req.workload);
  const int n = req.replicas;
  DivgDesignOptions o;
  o.seed = seed;
  out.tuned = tune(req).cost.total;
  out.unif = exp_total_cost(unif(m, n, 1, req.constraints.space_budget), m, 1, 0.0);
  out.divg = exp_total_cost(divgdesign(m, n, 1, req.constraints.space_budget, o), m, 1, 0.0);
  out.divg_full = exp_total_cost(divgdesign(m, n, n, req.constraints.space_budget, o), m, n, 0.0);
  out.unif_full = exp_total_cost(unif(m, n, n, req.constraints.space_budget), m, n, 0.0);
  out.rows.push_back(Row().add("m", 1.0).add("tuned", out.tuned).add("unif", out.unif).add("divg_simplified", out.divg));
  out.rows.push_back(Row().add("m", static_cast<double>(n)).add("tuned", tune(divergent_request(n, n)).cost.total)
                         .add("unif", out.unif_full).add("divg_simplified", out.divg_full));
  return out;
}

// ---------------------------------------------------------------------------
// Update-cost bound on the general-vs-specialized workload.

struct UpdateBound {
  double fraction = 0.4;
  double reference = 0.0;  // UNIF update cost
  double tuned_update = 0.0;
  double tuned_query = 0.0;
  double unif_query = 0.0;
  std::vector<Row> rows;
};

inline TuningRequest update_bound_request(double fraction) {
  TuningRequest req;
  req.workload = synthetic::general_vs_specialized(3);
  req.replicas = 3;
  req.multiplicity = 1;
  req.constraints.space_budget = 10.0;
  req.constraints.update_cost_bound = UpdateCostBound{fraction, std::nullopt};
  req.solver.gap_tolerance = 0.0;
  return req;
}

inline UpdateBound update_bound(const std::vector<double>& fractions = {0.4, 0.6, 0.8, 1.0}) {
  UpdateBound out;
  for (double x : fractions) {
    const TuningRequest req = update_bound_request(x);
    const CostModel m(req.workload);
    const auto u = unif(m, 3, 1, req.constraints.space_budget);
    const DesignEvaluator ue(m, u, 1);
    const TuneResult r = tune(req);
    if (x == fractions.front()) {
      out.fraction = x;
      out.reference = *r.update_reference;
      out.tuned_update = r.cost.update_cost;
      out.tuned_query = r.cost.query_cost;
      out.unif_query = ue.query_cost();
    }
    out.rows.push_back(Row().add("fraction", x).add("reference_update", *r.update_reference)
                           .add("tuned_update", r.cost.update_cost).add("tuned_query", r.cost.query_cost)
                           .add("unif_update", ue.update_cost()).add("unif_query", ue.query_cost()));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Failure robustness: three groups whose indexes are cheap to duplicate, plus
// a scan-only reporting query that every replica pays for.

inline Workload failure_workload() {
  Workload w = synthetic::disjoint_groups(3, 2);
  w.catalog.tables.push_back({"R", "report", 1000000});
  QueryStatement rep;
  rep.id = "report";
  rep.weight = 3.0;
  rep.referenced_tables = {"R"};
  rep.templates.push_back({"p1", 20.0, {{"R", {{scan_access("R"), 200.0, true}}}}});
  w.queries.push_back(rep);
  UpdateStatement u;
  u.id = "maint";
  u.query_shell.id = "maint_sel";
  u.query_shell.referenced_tables = {"R"};
  u.query_shell.templates.push_back({"p1", 0.0, {{"R", {{scan_access("R"), 1.0, true}}}}});
  for (const auto& a : w.catalog.indexes) u.index_update_costs[a.id] = 2.0;
  w.updates.push_back(u);
  return w;
}

inline TuningRequest failure_request(double alpha) {
  TuningRequest req;
  req.workload = failure_workload();
  req.replicas = 3;
  req.multiplicity = 1;
  req.failure_prob = alpha;
  req.constraints.space_budget = 20.0;
  req.solver.gap_tolerance = 0.0;
  return req;
}

struct FailureRobustness {
  std::vector<double> alphas;
  std::vector<double> tuned;      // ExpTotalCost of the design tuned at alpha
  double oblivious_at_zero = 0.0;
  double oblivious_at_max = 0.0;  // alpha=0 design evaluated at the last alpha
  double tuned_variation = 0.0;   // max/min - 1 over `tuned`
  double oblivious_degradation = 0.0;
  std::vector<Row> rows;
};

inline FailureRobustness failure_robustness(const std::vector<double>& alphas = {0.0, 0.1, 0.2, 0.3, 0.4}) {
  FailureRobustness out;
  out.alphas = alphas;
  const TuneResult oblivious = tune(failure_request(0.0));
  const CostModel m(failure_workload());
  for (double a : alphas) {
    const TuneResult r = a == 0.0 ? oblivious : tune(failure_request(a));
    out.tuned.push_back(r.cost.total);
    const double obl = exp_total_cost(oblivious.design, m, 1, a);
    out.rows.push_back(Row().add("alpha", a).add("tuned", r.cost.total).add("oblivious", obl));
  }
  out.oblivious_at_zero = exp_total_cost(oblivious.design, m, 1, 0.0);
  out.oblivious_at_max = exp_total_cost(oblivious.design, m, 1, alphas.back());
  const auto [lo, hi] = std::minmax_element(out.tuned.begin(), out.tuned.end());
  out.tuned_variation = *hi / *lo - 1.0;
  out.oblivious_degradation = out.oblivious_at_max / out.oblivious_at_zero - 1.0;
  return out;
}

// ---------------------------------------------------------------------------
// Online monitor on the three-phase stream.

struct MonitorRun {
  std::vector<SeriesEntry> series;
  double max_latency = 0.0;  // wall time of the slowest observe()
  std::vector<Row> rows;
};

inline MonitorConfig monitor_config(int window = 60) {
  MonitorConfig c;
  c.catalog = synthetic::three_phase_stream(1).catalog_workload.catalog;
  c.window = window;
  c.replicas = 2;
  c.multiplicity = 1;
  c.space_budget = 10.0;
  return c;
}

// The materialized design is the one tuned for the first window.
inline MonitorRun monitor_run(int phase_length = 200, int window = 60, std::uint64_t seed = 1) {
  MonitorRun out;
  const auto stream = synthetic::three_phase_stream(phase_length, seed);
  const MonitorConfig cfg = monitor_config(window);
  std::deque<Statement> first;
  for (int i = 0; i < window && i < static_cast<int>(stream.stream.size()); ++i) first.push_back(stream.stream[i]);
  TuningRequest req;
  req.workload = window_workload(cfg.catalog, first);
  req.replicas = cfg.replicas;
  req.multiplicity = cfg.multiplicity;
  req.constraints.space_budget = cfg.space_budget;
  Monitor mon(cfg, tune(req).design);
  for (const auto& q : stream.stream) {
    const auto t0 = std::chrono::steady_clock::now();
    const SeriesEntry e = mon.observe(q);
    out.max_latency = std::max(out.max_latency, std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    out.rows.push_back(Row().add("statement_index", static_cast<double>(e.statement_index))
                           .add("improvement", e.improvement).add("solve_time", e.solve_time).add("status", e.status));
  }
  out.series = mon.series();
  return out;
}

// ---------------------------------------------------------------------------
// Pareto grid.

inline TuningRequest pareto_request() {
  TuningRequest req;
  req.workload = synthetic::disjoint_groups(3, 2);
  // Staggered build costs so intermediate thresholds admit partial moves.
  req.workload.catalog.indexes[1].create_cost = 20.0;
  req.workload.catalog.indexes[2].create_cost = 40.0;
  req.replicas = 3;
  req.multiplicity = 1;
  req.constraints.space_budget = 10.0;
  DivergentDesign cur;
  cur.configs = {{"a1"}, {"a1"}, {"a1"}};
  req.constraints.materialization = MaterializationBudget{0.0, cur, 3, 20.0};
  return req;
}

struct ParetoRun {
  ParetoResult result;
  std::vector<Row> rows;
};

inline ParetoRun pareto_run(const std::vector<int>& replica_counts = {2, 3, 4}) {
  ParetoRun out;
  ParetoDimensions dims;
  dims.replica_counts = replica_counts;
  out.result = pareto(pareto_request(), dims);
  for (const auto& p : out.result.points) {
    out.rows.push_back(Row().add("replicas", static_cast<double>(p.replicas)).add("multiplicity", static_cast<double>(p.multiplicity))
                           .add("fraction", p.fraction.value_or(-1.0)).add("threshold", p.threshold).add("status", p.status)
                           .add("exp_total_cost", p.exp_total_cost.value_or(-1.0))
                           .add("materialization_cost", p.materialization_cost.value_or(-1.0)).add("solve_time", p.solve_time));
  }
  return out;
}

}  // namespace divtune::scenarios
