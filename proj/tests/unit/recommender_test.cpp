#include <gtest/gtest.h>

#include "divtune/oracle.hpp"
#include "divtune/recommender.hpp"
#include "divtune/synthetic.hpp"
#include "test_util.hpp"

namespace divtune {
namespace {

using testing::brute_exp_total_cost;
using testing::brute_loads;
using testing::check_design;
using testing::index;
using testing::opt;
using testing::plan;
using testing::query;
using testing::rel_near;

TuningRequest groups_request(int n, int m, double alpha = 0.0) {
  TuningRequest r;
  r.workload = synthetic::disjoint_groups(3, 2);
  r.replicas = n;
  r.multiplicity = m;
  r.failure_prob = alpha;
  r.constraints.space_budget = 10.0;
  r.solver.gap_tolerance = 0.0;
  return r;
}

TEST(Tune, CompositionIdentityWithBudget) {
  TuningRequest req = groups_request(3, 1);
  const TuneResult r = tune(req);
  DdtProgram p = build_core(req);
  add_space_budget(p, 10.0);
  SolveControls c;
  c.gap_tolerance = 0.0;
  const Solution s = solve(p.bp, c);
  EXPECT_TRUE(rel_near(r.report.objective, s.objective));
  EXPECT_EQ(r.families, (std::vector<std::string>{"core", "space_budget"}));
  EXPECT_EQ(r.skew_mode, "none");
}

TEST(Tune, AllFamiliesPassIndependentChecker) {
  TuningRequest req = groups_request(3, 2, 0.2);
  req.constraints.load_skew = LoadSkew{0.5, SkewMode::kExact};
  req.constraints.failure_load_skew = 1.0;
  req.constraints.property_limits.push_back({"one", {"a1", "a2", "a3"}, 1});
  const TuneResult r = tune(req);
  EXPECT_TRUE(check_design(req, r.design).empty());
  EXPECT_TRUE(rel_near(r.cost.total, brute_exp_total_cost(req.workload, r.design, 2, 0.2)));
  EXPECT_TRUE(rel_near(r.cost.total, enumerate_optimal(req, OracleCaps{4, 3, 6}).objective));
  for (const char* f : {"core", "failures", "space_budget", "property_limit", "load_skew", "failure_load_skew"}) {
    EXPECT_NE(std::find(r.families.begin(), r.families.end(), f), r.families.end()) << f;
  }
}

// One query on two replicas: the idle replica only carries update work, so
// the loads are 110 and 10. tau = 10.5 admits that (110 <= 11.5 * 10) but
// the greedy cap (1 + beta) * 120 / 2 = 109.6 does not.
TEST(Tune, GreedyFallsBackToExact) {
  TuningRequest req;
  req.workload.catalog.tables = {{"T", "t", 1}};
  req.workload.queries.push_back(query("q", {plan("p1", 0, {{"T", {opt("SCAN_T", 100)}}})}));
  UpdateStatement u;
  u.id = "u";
  u.query_shell = query("u_sel", {plan("p1", 0, {{"T", {opt("SCAN_T", 0)}}})});
  u.base_cost = 10.0;
  req.workload.updates.push_back(u);
  req.replicas = 2;
  req.constraints.load_skew = LoadSkew{10.5, SkewMode::kGreedy};
  const TuneResult r = tune(req);
  EXPECT_EQ(r.skew_mode, "exact");
  ASSERT_FALSE(r.warnings.empty());
  EXPECT_NE(r.warnings.front().find("fall back"), std::string::npos);
  const auto loads = brute_loads(req.workload, r.design, 1);
  EXPECT_LE(std::max(loads[0], loads[1]), 11.5 * std::min(loads[0], loads[1]) + 1e-9);
}

TEST(Tune, GreedyBoundHolds) {
  TuningRequest req = groups_request(3, 1);
  req.constraints.load_skew = LoadSkew{2.0, SkewMode::kGreedy};
  const TuneResult r = tune(req);
  ASSERT_EQ(r.skew_mode, "greedy");
  ASSERT_TRUE(r.greedy_reference && r.greedy_beta);
  EXPECT_DOUBLE_EQ(*r.greedy_beta, 0.2);
  const auto loads = brute_loads(req.workload, r.design, 1);
  for (double l : loads) EXPECT_LE(l, (1.0 + 0.2) * *r.greedy_reference / 3.0 + 1e-6);
  EXPECT_LE(r.cost.total_cost, (1.0 + 0.2) * *r.greedy_reference + 1e-6);
}

TEST(Tune, InfeasibleNamesBindingFamily) {
  TuningRequest req = groups_request(2, 1);
  req.constraints.update_cost_bound = UpdateCostBound{0.5, 0.0};
  req.workload.updates.push_back([] {
    UpdateStatement u;
    u.id = "u";
    u.query_shell = query("u_sel", {plan("p1", 0, {{"T1", {opt("SCAN_T1", 1)}}})});
    u.base_cost = 1.0;
    return u;
  }());
  try {
    tune(req);
    FAIL() << "expected infeasible";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "infeasible");
    EXPECT_NE(std::string(e.what()).find("update_cost_bound"), std::string::npos) << e.what();
  }
}

TEST(Tune, InvalidRequestRejected) {
  TuningRequest req = groups_request(2, 3);
  try {
    tune(req);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "invalid_request");
  }
}

TEST(Tune, UpdateReferenceDefaultsToUnif) {
  TuningRequest req;
  req.workload = synthetic::general_vs_specialized();
  req.replicas = 3;
  req.constraints.space_budget = 10.0;
  req.constraints.update_cost_bound = UpdateCostBound{0.4, std::nullopt};
  req.solver.gap_tolerance = 0.0;
  const TuneResult r = tune(req);
  ASSERT_TRUE(r.update_reference);
  const CostModel m(req.workload);
  EXPECT_DOUBLE_EQ(*r.update_reference, unif_update_cost(m, req));
  EXPECT_LE(r.cost.update_cost, 0.4 * *r.update_reference + 1e-9);
}

TEST(Tune, WarmStartGivesSameOptimum) {
  TuningRequest req = groups_request(3, 1, 0.1);
  const TuneResult cold = tune(req);
  TuneOptions o;
  o.warm_start = cold.design;
  const TuneResult warm = tune(req, o);
  EXPECT_TRUE(rel_near(cold.cost.total, warm.cost.total));
}

TEST(Tune, StopTokenBeforeStart) {
  TuningRequest req = groups_request(3, 1, 0.1);
  std::stop_source src;
  src.request_stop();
  TuneOptions o;
  o.stop = src.get_token();
  try {
    const TuneResult r = tune(req, o);
    EXPECT_TRUE(r.report.status == SolveStatus::timeout_best_known || r.report.status == SolveStatus::optimal);
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "timeout");
  }
}

TEST(Tune, ResultJsonShape) {
  const TuneResult r = tune(groups_request(2, 1));
  const json j = r;
  for (const char* k : {"design", "cost", "solve", "families", "warnings", "skew_mode", "program"}) EXPECT_TRUE(j.contains(k)) << k;
  EXPECT_EQ(j["solve"]["status"], "optimal");
}

// ---------------------------------------------------------------------------

TuningRequest pareto_request() {
  TuningRequest req = groups_request(3, 1);
  DivergentDesign cur;
  cur.configs = {{"a1"}, {"a1"}, {"a1"}};
  req.constraints.materialization = MaterializationBudget{0.0, cur, 3, 0.0};
  return req;
}

TEST(Pareto, EndpointsAndMonotonicity) {
  const TuningRequest req = pareto_request();
  ParetoDimensions dims;
  dims.fractions = {0.0, 0.5, 1.0};
  const ParetoResult res = pareto(req, dims);
  ASSERT_EQ(res.points.size(), 3u);
  EXPECT_EQ(res.mode, "chained");
  ASSERT_EQ(res.unbounded_cost.size(), 1u);
  for (const auto& p : res.points) ASSERT_TRUE(p.exp_total_cost) << p.status << " " << p.error;
  for (std::size_t i = 1; i < res.points.size(); ++i) {
    EXPECT_LE(*res.points[i].exp_total_cost, *res.points[i - 1].exp_total_cost + 1e-9);
  }
  // Fraction 0: nothing may change.
  const auto& zero = res.points.front();
  EXPECT_EQ(zero.design->configs, req.constraints.materialization->current.configs);
  // Fraction 1: the unconstrained optimum.
  TuningRequest free = req;
  free.constraints.materialization.reset();
  EXPECT_TRUE(rel_near(*res.points.back().exp_total_cost, tune(free).cost.total));
  for (const auto& p : res.points) {
    TuningRequest at = req;
    at.constraints.materialization->budget = p.threshold;
    EXPECT_TRUE(check_design(at, *p.design).empty());
  }
}

TEST(Pareto, IndependentSolvesAgree) {
  const TuningRequest req = pareto_request();
  ParetoDimensions dims;
  dims.fractions = {0.25, 0.5, 1.0};
  const ParetoResult chained = pareto(req, dims);
  dims.chain_warm_start = false;
  const ParetoResult parallel = pareto(req, dims);
  EXPECT_EQ(parallel.mode, "parallel");
  ASSERT_EQ(chained.points.size(), parallel.points.size());
  for (std::size_t i = 0; i < chained.points.size(); ++i) {
    EXPECT_TRUE(rel_near(*chained.points[i].exp_total_cost, *parallel.points[i].exp_total_cost));
  }
}

TEST(Pareto, ReplicaCountsAndInfeasiblePointsRecorded) {
  TuningRequest req = pareto_request();
  req.constraints.materialization->deploy_cost = 5.0;
  ParetoDimensions dims;
  dims.fractions = {0.0, 1.0};
  dims.replica_counts = {2, 3, 4};
  const ParetoResult res = pareto(req, dims);
  EXPECT_EQ(res.points.size(), 6u);
  for (const auto& p : res.points) {
    // Growing to 4 replicas costs at least the deploy constant.
    if (p.replicas == 4 && p.fraction && *p.fraction == 0.0) {
      EXPECT_EQ(p.status, "infeasible");
    } else {
      EXPECT_TRUE(p.exp_total_cost) << p.replicas << " " << p.status << " " << p.error;
    }
  }
}

TEST(Pareto, RequiresMaterialization) {
  EXPECT_THROW(pareto(groups_request(2, 1), ParetoDimensions{}), Error);
}

}  // namespace
}  // namespace divtune
