#pragma once

// Tuning sessions: compose the program for a request, solve, decode; and
// Pareto exploration over materialization budget x replica count x
// multiplicity.

#include <chrono>
#include <future>
#include <memory>
#include <optional>
#include <stop_token>
#include <string>
#include <vector>

#include "divtune/baselines.hpp"
#include "divtune/bip.hpp"
#include "divtune/costmodel.hpp"
#include "divtune/error.hpp"
#include "divtune/json_io.hpp"
#include "divtune/model.hpp"
#include "divtune/solver.hpp"

namespace divtune {

struct TuneOptions {
  std::stop_token stop;
  std::optional<DivergentDesign> warm_start;
  bool detect_binding = true;
};

struct TuneResult {
  DivergentDesign design;
  CostBreakdown cost;
  Solution report;
  std::vector<std::string> families;
  std::vector<std::string> warnings;
  std::string skew_mode = "none";  // none | exact | greedy
  std::optional<double> greedy_reference;  // optimal TotalCost used by greedy skew
  std::optional<double> greedy_beta;
  std::optional<double> update_reference;
  std::optional<double> materialization_cost;
  std::size_t variables = 0;
  std::size_t constraints = 0;
};

inline void to_json(json& j, const TuneResult& r) {
  j = json{{"design", r.design},
           {"cost", r.cost},
           {"solve", r.report},
           {"families", r.families},
           {"warnings", r.warnings},
           {"skew_mode", r.skew_mode},
           {"program", {{"variables", r.variables}, {"constraints", r.constraints}}}};
  if (r.greedy_reference) j["greedy_reference"] = *r.greedy_reference;
  if (r.greedy_beta) j["greedy_beta"] = *r.greedy_beta;
  if (r.update_reference) j["update_reference"] = *r.update_reference;
  if (r.materialization_cost) j["materialization_cost"] = *r.materialization_cost;
}

// UNIF's normal-operation update cost, the default update-cost reference.
inline double unif_update_cost(const CostModel& m, const TuningRequest& req) {
  const auto d = unif(m, req.replicas, req.multiplicity, req.constraints.space_budget, req.constraints.property_limits,
                      req.routing_mode);
  return DesignEvaluator(m, d, req.multiplicity, req.routing_mode).update_cost();
}

// Fills in defaults that depend on other parts of the request.
inline TuningRequest resolve_request(TuningRequest req, const CostModel& m) {
  if (req.constraints.update_cost_bound && !req.constraints.update_cost_bound->reference) {
    req.constraints.update_cost_bound->reference = unif_update_cost(m, req);
  }
  return req;
}

// Builds the program for `req` in a fixed order: core, failures, space
// budget, property limits, materialization, update-cost bound, load skew,
// failure load skew. `greedy_opt` is required for greedy skew.
inline DdtProgram compose_program(const TuningRequest& req, std::shared_ptr<const CostModel> model,
                                  std::optional<double> greedy_opt = std::nullopt, bool keep_objective = false) {
  const auto& c = req.constraints;
  DdtProgram p = build_core(req, std::move(model));
  add_failures(p, req.failure_prob);
  if (c.space_budget) add_space_budget(p, *c.space_budget);
  for (const auto& lim : c.property_limits) add_property_limit(p, lim);
  if (c.materialization) {
    const auto& mat = *c.materialization;
    add_materialization(p, mat.budget, mat.current, mat.target_replicas, mat.deploy_cost);
  }
  if (c.update_cost_bound) {
    if (!c.update_cost_bound->reference) throw Error("internal", "update-cost reference not resolved");
    add_update_cost_bound(p, c.update_cost_bound->fraction, *c.update_cost_bound->reference, keep_objective);
  }
  if (c.load_skew) {
    if (greedy_opt) {
      add_load_skew_greedy(p, c.load_skew->tau, *greedy_opt);
    } else {
      add_load_skew_exact(p, c.load_skew->tau);
    }
  }
  if (c.failure_load_skew) add_failure_load_skew(p, *c.failure_load_skew);
  return p;
}

namespace detail {

inline SolveControls controls_for(const DdtProgram& p, const TuningRequest& req, const TuneOptions& opt) {
  SolveControls sc;
  sc.gap_tolerance = req.solver.gap_tolerance;
  sc.time_limit = req.solver.time_limit;
  sc.stop = opt.stop;
  sc.heuristic = rounding_heuristic(p);
  sc.polish = embed_polish(p);
  if (opt.warm_start) {
    try {
      sc.warm_start = embed(p, *opt.warm_start);
    } catch (const Error&) {
    }
  }
  return sc;
}

inline const char* const kDroppable[] = {"load_skew", "failure_load_skew", "update_cost_bound",
                                         "materialization", "property_limit", "space_budget"};

inline TuningRequest without_family(TuningRequest req, const std::string& f) {
  auto& c = req.constraints;
  if (f == "load_skew") c.load_skew.reset();
  if (f == "failure_load_skew") c.failure_load_skew.reset();
  if (f == "update_cost_bound") c.update_cost_bound.reset();
  if (f == "materialization") c.materialization.reset();
  if (f == "property_limit") c.property_limits.clear();
  if (f == "space_budget") c.space_budget.reset();
  return req;
}

inline bool has_family(const TuningRequest& req, const std::string& f) {
  const auto& c = req.constraints;
  if (f == "load_skew") return c.load_skew.has_value();
  if (f == "failure_load_skew") return c.failure_load_skew.has_value();
  if (f == "update_cost_bound") return c.update_cost_bound.has_value();
  if (f == "materialization") return c.materialization.has_value();
  if (f == "property_limit") return !c.property_limits.empty();
  if (f == "space_budget") return c.space_budget.has_value();
  return false;
}

}  // namespace detail

TuneResult tune(const TuningRequest& request, const TuneOptions& options = {});

namespace detail {

// Solves one composed program; returns nullopt when infeasible.
inline std::optional<TuneResult> solve_composed(const TuningRequest& req, const std::shared_ptr<const CostModel>& model,
                                                std::optional<double> greedy_opt, const TuneOptions& opt) {
  DdtProgram p = compose_program(req, model, greedy_opt);
  const SolveControls sc = controls_for(p, req, opt);
  Solution s = solve(p.bp, sc);
  if (s.status == SolveStatus::infeasible) return std::nullopt;
  if (s.status == SolveStatus::timeout_no_solution) {
    throw Error("timeout", "time limit reached before any feasible design was found");
  }
  Decoded dec = decode(p, s.assignment);
  TuneResult out;
  out.design = std::move(dec.design);
  out.cost = dec.cost;
  out.report = std::move(s);
  out.families = p.families;
  out.variables = static_cast<std::size_t>(p.bp.num_vars());
  out.constraints = static_cast<std::size_t>(p.bp.num_rows());
  if (req.constraints.update_cost_bound) out.update_reference = req.constraints.update_cost_bound->reference;
  if (req.constraints.materialization) {
    const auto& mat = *req.constraints.materialization;
    out.materialization_cost = materialization_cost(*model, mat.current, out.design, mat.deploy_cost);
  }
  return out;
}

// Names the constraint family whose removal restores feasibility, if any.
inline std::string binding_family(const TuningRequest& req, const TuneOptions& opt) {
  for (const char* f : kDroppable) {
    if (!has_family(req, f)) continue;
    TuningRequest relaxed = without_family(req, f);
    relaxed.solver.time_limit = std::min(relaxed.solver.time_limit, 5.0);
    TuneOptions o;
    o.stop = opt.stop;
    o.detect_binding = false;
    try {
      tune(relaxed, o);
      return f;
    } catch (const Error&) {
    }
  }
  return "";
}

}  // namespace detail

inline TuneResult tune(const TuningRequest& request, const TuneOptions& options) {
  const auto violations = validate_request(request);
  if (!violations.empty()) {
    throw Error("invalid_request", violations.front().field + ": " + violations.front().rule);
  }
  auto model = std::make_shared<const CostModel>(request.workload);
  const TuningRequest req = resolve_request(request, *model);
  std::vector<std::string> warnings;
  std::optional<TuneResult> result;
  std::string skew_mode = req.constraints.load_skew ? "exact" : "none";
  std::optional<double> greedy_ref, beta;

  if (req.constraints.load_skew && req.constraints.load_skew->mode == SkewMode::kGreedy) {
    // Reference optimum: TotalCost without skew, under the other constraints.
    TuningRequest plain = req;
    plain.failure_prob = 0.0;
    plain.constraints.load_skew.reset();
    plain.constraints.failure_load_skew.reset();
    DdtProgram p0 = compose_program(plain, model, std::nullopt, true);
    Solution s0 = solve(p0.bp, detail::controls_for(p0, plain, TuneOptions{options.stop, std::nullopt, false}));
    const int n = build_core(req, model).replicas;
    beta = greedy_beta(req.constraints.load_skew->tau, n);
    if (!has_solution(s0.status)) {
      warnings.push_back("greedy skew: reference solve found no design; falling back to exact mode");
    } else if (*beta < 0.0) {
      warnings.push_back("greedy skew infeasible for tau < 1 (beta < 0); falling back to exact mode");
    } else {
      greedy_ref = decode(p0, s0.assignment).cost.total_cost;
      result = detail::solve_composed(req, model, greedy_ref, options);
      if (result) {
        skew_mode = "greedy";
      } else {
        warnings.push_back("greedy infeasible, fall back to exact");
      }
    }
  }
  if (!result) result = detail::solve_composed(req, model, std::nullopt, options);
  if (!result) {
    std::string msg = "no design satisfies the constraint set";
    if (options.detect_binding) {
      const std::string f = detail::binding_family(req, options);
      if (!f.empty()) msg += "; binding constraint family: " + f;
    }
    throw Error("infeasible", msg);
  }
  result->warnings.insert(result->warnings.begin(), warnings.begin(), warnings.end());
  result->skew_mode = skew_mode;
  if (skew_mode == "greedy") {
    result->greedy_reference = greedy_ref;
    result->greedy_beta = beta;
  }
  return std::move(*result);
}

// ---------------------------------------------------------------------------
// Pareto exploration.

struct ParetoDimensions {
  std::vector<double> fractions = {0.0, 0.125, 0.25, 0.5, 0.75, 1.0};
  std::vector<double> thresholds;  // absolute budgets; replaces fractions when set
  std::vector<int> replica_counts;  // defaults to the request's N
  std::vector<int> multiplicities;  // defaults to the request's m
  bool chain_warm_start = true;
};

struct FrontierPoint {
  std::optional<double> fraction;
  double threshold = 0.0;
  int replicas = 0;
  int multiplicity = 0;
  std::string status;  // solver status, or "infeasible" / "error"
  std::optional<double> exp_total_cost;
  std::optional<double> materialization_cost;
  std::optional<DivergentDesign> design;
  std::optional<CostBreakdown> cost;
  double solve_time = 0.0;
  std::string error;
};

struct ParetoResult {
  std::vector<FrontierPoint> points;
  std::string mode;  // "chained" or "parallel"
  double total_time = 0.0;
  std::vector<std::pair<std::pair<int, int>, double>> unbounded_cost;  // ((N, m), C_m)
};

inline void to_json(json& j, const FrontierPoint& p) {
  j = json{{"threshold", p.threshold}, {"replicas", p.replicas}, {"multiplicity", p.multiplicity},
           {"status", p.status}, {"solve_time", p.solve_time}};
  if (p.fraction) j["fraction"] = *p.fraction;
  if (p.exp_total_cost) j["exp_total_cost"] = *p.exp_total_cost;
  if (p.materialization_cost) j["materialization_cost_actual"] = *p.materialization_cost;
  if (p.design) j["design"] = *p.design;
  if (p.cost) j["cost"] = *p.cost;
  if (!p.error.empty()) j["error"] = p.error;
}

inline void to_json(json& j, const ParetoResult& r) {
  json caps = json::array();
  for (const auto& [nm, c] : r.unbounded_cost) caps.push_back({{"replicas", nm.first}, {"multiplicity", nm.second}, {"c_m", c}});
  j = json{{"points", r.points}, {"mode", r.mode}, {"total_time", r.total_time}, {"unbounded", caps}};
}

inline void from_json(const json& j, ParetoDimensions& d) {
  if (j.contains("fractions")) d.fractions = j.at("fractions").get<std::vector<double>>();
  if (j.contains("thresholds")) d.thresholds = j.at("thresholds").get<std::vector<double>>();
  if (j.contains("replica_counts")) d.replica_counts = j.at("replica_counts").get<std::vector<int>>();
  if (j.contains("multiplicities")) d.multiplicities = j.at("multiplicities").get<std::vector<int>>();
  if (j.contains("chain_warm_start")) d.chain_warm_start = j.at("chain_warm_start").get<bool>();
}

inline void to_json(json& j, const ParetoDimensions& d) {
  j = json{{"fractions", d.fractions}, {"thresholds", d.thresholds}, {"replica_counts", d.replica_counts},
           {"multiplicities", d.multiplicities}, {"chain_warm_start", d.chain_warm_start}};
}

namespace detail {

// Largest transition cost any design over `target` replicas can incur.
inline double transition_ceiling(const CostModel& m, const DivergentDesign& current, int target, double deploy) {
  double worst = 0.0;
  std::set<IndexId> all;
  for (int a = 0; a < m.index_count(); ++a) all.insert(m.index_id(a));
  for (int r = 1; r <= target; ++r) {
    double c = r > current.replica_count() ? deploy : 0.0;
    for (int a = 0; a < m.index_count(); ++a) {
      const auto& idx = m.index(a);
      const bool had = r <= current.replica_count() && current.configs[r - 1].count(idx.id);
      c += had ? idx.drop_cost : idx.create_cost;
    }
    worst = std::max(worst, c);
  }
  return worst + 1.0;
}

inline FrontierPoint solve_point(const TuningRequest& req, double threshold, std::optional<double> fraction, int n, int m,
                                 const TuneOptions& opt) {
  FrontierPoint pt;
  pt.fraction = fraction;
  pt.threshold = threshold;
  pt.replicas = n;
  pt.multiplicity = m;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    TuningRequest r = req;
    r.multiplicity = m;
    r.constraints.materialization->budget = threshold;
    r.constraints.materialization->target_replicas = n;
    TuneOptions o = opt;
    o.detect_binding = false;
    TuneResult res = tune(r, o);
    pt.status = to_string(res.report.status);
    pt.exp_total_cost = res.cost.total;
    pt.materialization_cost = res.materialization_cost;
    pt.design = std::move(res.design);
    pt.cost = res.cost;
  } catch (const Error& e) {
    pt.status = e.code() == "infeasible" ? "infeasible" : "error";
    pt.error = e.what();
  }
  pt.solve_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return pt;
}

}  // namespace detail

inline ParetoResult pareto(const TuningRequest& request, ParetoDimensions dims, std::stop_token stop = {}) {
  if (!request.constraints.materialization) {
    throw Error("invalid_request", "pareto exploration needs constraints.materialization with the current design");
  }
  if (dims.replica_counts.empty()) dims.replica_counts = {request.replicas};
  if (dims.multiplicities.empty()) dims.multiplicities = {request.multiplicity};
  const bool absolute = !dims.thresholds.empty();
  std::vector<double> grid = absolute ? dims.thresholds : dims.fractions;
  std::sort(grid.begin(), grid.end());
  const auto t0 = std::chrono::steady_clock::now();
  auto model = std::make_shared<const CostModel>(request.workload);
  const auto& mat = *request.constraints.materialization;

  ParetoResult out;
  out.mode = dims.chain_warm_start ? "chained" : "parallel";
  for (int n : dims.replica_counts) {
    for (int m : dims.multiplicities) {
      if (m > n) continue;
      // Unbounded solve: its transition cost is the budget ceiling C_m.
      TuningRequest unbounded = request;
      unbounded.multiplicity = m;
      unbounded.constraints.materialization->target_replicas = n;
      unbounded.constraints.materialization->budget = detail::transition_ceiling(*model, mat.current, n, mat.deploy_cost);
      double c_m = 0.0;
      std::optional<DivergentDesign> previous;
      try {
        TuneOptions o;
        o.stop = stop;
        o.detect_binding = false;
        TuneResult r = tune(unbounded, o);
        c_m = r.materialization_cost.value_or(0.0);
      } catch (const Error& e) {
        FrontierPoint pt;
        pt.replicas = n;
        pt.multiplicity = m;
        pt.status = "error";
        pt.error = e.what();
        out.points.push_back(pt);
        continue;
      }
      out.unbounded_cost.push_back({{n, m}, c_m});

      if (dims.chain_warm_start) {
        for (double g : grid) {
          const double threshold = absolute ? g : g * c_m;
          TuneOptions o;
          o.stop = stop;
          o.warm_start = previous;
          FrontierPoint pt = detail::solve_point(request, threshold, absolute ? std::nullopt : std::optional<double>(g), n, m, o);
          if (pt.design) previous = pt.design;
          out.points.push_back(std::move(pt));
        }
      } else {
        std::vector<std::future<FrontierPoint>> jobs;
        for (double g : grid) {
          const double threshold = absolute ? g : g * c_m;
          TuneOptions o;
          o.stop = stop;
          jobs.push_back(std::async(std::launch::async, detail::solve_point, request, threshold,
                                    absolute ? std::nullopt : std::optional<double>(g), n, m, o));
        }
        for (auto& j : jobs) out.points.push_back(j.get());
      }
    }
  }
  out.total_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

}  // namespace divtune
