#include <gtest/gtest.h>

#include <random>

#include "divtune/costmodel.hpp"
#include "test_util.hpp"

namespace divtune {
namespace {

using namespace divtune::testing;

Workload one_query_workload() {
  Workload w;
  w.catalog.tables = {Table{"T", "t", 100}, Table{"R", "r", 10}};
  w.catalog.indexes = {index("a", "T"), index("b", "R")};
  w.queries = {query("q", {plan("p1", 10, {{"T", {opt("a", 2), opt("SCAN_T", 5)}}})})};
  return w;
}

TEST(QueryCost, IndexInConfiguration) {
  CostModel m(one_query_workload());
  EXPECT_DOUBLE_EQ(query_cost(m, m.workload().queries[0], {"a"}), 12.0);
}

TEST(QueryCost, EmptyConfigurationUsesScan) {
  CostModel m(one_query_workload());
  EXPECT_DOUBLE_EQ(query_cost(m, m.workload().queries[0], {}), 15.0);
}

TEST(QueryCost, MinimumOverTemplates) {
  Workload w = one_query_workload();
  w.queries[0] = query("q", {plan("p1", 10, {{"T", {opt("a", 2), opt("SCAN_T", 5)}}}),
                             plan("p2", 8, {{"T", {opt("a", 7), opt("SCAN_T", 9)}}})});
  CostModel m(w);
  const double expected = brute_query_cost(w.queries[0], {"a"});
  EXPECT_DOUBLE_EQ(expected, 12.0);
  EXPECT_DOUBLE_EQ(query_cost(m, w.queries[0], {"a"}), expected);
}

TEST(QueryCost, UnusableOptionsAreSkipped) {
  Workload w = one_query_workload();
  w.queries[0] = query("q", {plan("p1", 1, {{"T", {opt("a", 0, false), opt("SCAN_T", 5)}}})});
  CostModel m(w);
  EXPECT_DOUBLE_EQ(query_cost(m, w.queries[0], {"a"}), 6.0);
}

TEST(QueryCost, NoUsablePlanIsAnError) {
  Workload w = one_query_workload();
  w.queries[0] = query("q", {plan("p1", 1, {{"T", {opt("a", 1), opt("SCAN_T", 5, false)}}})});
  CostModel m(w);
  EXPECT_THROW(query_cost(m, w.queries[0], {}), Error);
  EXPECT_DOUBLE_EQ(query_cost(m, w.queries[0], {"a"}), 2.0);
}

TEST(QueryCost, TiesGoToLowestTemplateThenAccessId) {
  Workload w = one_query_workload();
  w.catalog.indexes.push_back(index("a0", "T"));
  w.queries[0] = query("q", {plan("p2", 5, {{"T", {opt("SCAN_T", 5)}}}),
                             plan("p1", 5, {{"T", {opt("a", 5), opt("a0", 5), opt("SCAN_T", 6)}}})});
  CostModel m(w);
  const auto& s = m.statement(0);
  const PlanChoice c = CostModel::best_plan(s, m.mask({"a", "a0"}));
  EXPECT_EQ(s.templates[c.template_pos].id, "p1");
  EXPECT_EQ(s.templates[c.template_pos].slots[0].options[c.options[0]].access_id, "a");
}

UpdateStatement update_on_T() {
  UpdateStatement u;
  u.id = "u";
  u.query_shell = query("u#shell", {plan("p1", 10, {{"T", {opt("a", 2), opt("SCAN_T", 5)}}})});
  u.index_update_costs = {{"a", 4}, {"b", 6}};
  u.base_cost = 3;
  return u;
}

TEST(UpdateCost, NoIndexes) {
  Workload w = one_query_workload();
  w.updates = {update_on_T()};
  CostModel m(w);
  EXPECT_DOUBLE_EQ(update_cost(m, w.updates[0], {}), 18.0);
}

TEST(UpdateCost, TermByTerm) {
  Workload w = one_query_workload();
  w.updates = {update_on_T()};
  CostModel m(w);
  EXPECT_DOUBLE_EQ(update_cost(m, w.updates[0], {"a"}), 19.0);
}

TEST(UpdateCost, IndexOnUnreferencedTableStillPaysMaintenance) {
  Workload w = one_query_workload();
  w.updates = {update_on_T()};
  CostModel m(w);
  const double expected = brute_update_cost(w.updates[0], {"a", "b"});
  EXPECT_DOUBLE_EQ(expected, 12 + 4 + 6 + 3);
  EXPECT_DOUBLE_EQ(update_cost(m, w.updates[0], {"a", "b"}), expected);
}

// Two queries on two tables, one update, three replicas.
Workload mixed_workload() {
  Workload w;
  w.catalog.tables = {Table{"T", "t", 100}, Table{"R", "r", 10}};
  w.catalog.indexes = {index("a", "T"), index("b", "R"), index("c", "T")};
  w.queries = {
      query("q1", {plan("p1", 10, {{"T", {opt("a", 2), opt("c", 3), opt("SCAN_T", 20)}}})}, 2.0),
      query("q2", {plan("p1", 4, {{"R", {opt("b", 1), opt("SCAN_R", 9)}}, {"T", {opt("c", 1), opt("SCAN_T", 20)}}}),
                   plan("p2", 15, {{"R", {opt("SCAN_R", 3)}}, {"T", {opt("SCAN_T", 2)}}})})};
  UpdateStatement u;
  u.id = "u";
  u.weight = 0.5;
  u.query_shell = query("u#shell", {plan("p1", 1, {{"T", {opt("a", 1), opt("SCAN_T", 7)}}})});
  u.index_update_costs = {{"a", 3}, {"c", 5}, {"b", 1}};
  u.base_cost = 2;
  w.updates = {u};
  return w;
}

DivergentDesign mixed_design() {
  DivergentDesign d;
  d.configs = {{"a"}, {"b", "c"}, {}};
  d.routing.normal = {{"q1", {1, 2}}, {"q2", {2, 3}}};
  d.routing.on_failure[1] = {{"q1", {2, 3}}, {"q2", {2, 3}}};
  d.routing.on_failure[2] = {{"q1", {1, 3}}, {"q2", {1, 3}}};
  d.routing.on_failure[3] = {{"q1", {1, 2}}, {"q2", {1, 2}}};
  return d;
}

TEST(TotalCost, SingleReplica) {
  Workload w = one_query_workload();
  w.queries[0].weight = 3;
  CostModel m(w);
  DivergentDesign d;
  d.configs = {{"a"}};
  d.routing.normal = {{"q", {1}}};
  EXPECT_DOUBLE_EQ(total_cost(d, m, 1), 3 * 12.0);
}

TEST(TotalCost, IdenticalConfigsAverage) {
  CostModel m(one_query_workload());
  DivergentDesign d;
  d.configs = {{"a"}, {"a"}};
  d.routing.normal = {{"q", {1, 2}}};
  EXPECT_DOUBLE_EQ(total_cost(d, m, 2), 12.0);
}

TEST(TotalCost, MixedMatchesResummation) {
  const Workload w = mixed_workload();
  CostModel m(w);
  const auto d = mixed_design();
  EXPECT_TRUE(rel_near(total_cost(d, m, 2), brute_total_cost(w, d, 2), 1e-12));
}

TEST(TotalCost, MissingRoutingIsAnError) {
  CostModel m(mixed_workload());
  auto d = mixed_design();
  d.routing.normal.erase("q2");
  EXPECT_THROW(total_cost(d, m, 2), Error);
}

TEST(FTotalCost, OneSurvivor) {
  Workload w = one_query_workload();
  w.updates = {update_on_T()};
  CostModel m(w);
  DivergentDesign d;
  d.configs = {{"a"}, {}};
  d.routing.normal = {{"q", {2}}};
  d.routing.on_failure[2] = {{"q", {1}}};
  EXPECT_DOUBLE_EQ(ftotal_cost(d, m, 1, 2), 12.0 + 19.0);
}

TEST(FTotalCost, QueriesOnly) {
  const Workload w = one_query_workload();
  CostModel m(w);
  DivergentDesign d;
  d.configs = {{"a"}, {"a"}, {}};
  d.routing.normal = {{"q", {1, 3}}};
  d.routing.on_failure[3] = {{"q", {1, 2}}};
  EXPECT_DOUBLE_EQ(ftotal_cost(d, m, 2, 3), 12.0);
}

TEST(FTotalCost, ThreeReplicasMatchResummation) {
  const Workload w = mixed_workload();
  CostModel m(w);
  const auto d = mixed_design();
  for (int j = 1; j <= 3; ++j) {
    EXPECT_TRUE(rel_near(ftotal_cost(d, m, 2, j), brute_ftotal_cost(w, d, 2, j), 1e-12)) << j;
  }
}

TEST(FTotalCost, PaperLiteralUsesMaxCardinality) {
  const Workload w = mixed_workload();
  CostModel m(w);
  auto d = mixed_design();
  // m = 1, N = 3: min gives 1, max gives 2.
  for (auto& [j, routing] : d.routing.on_failure) {
    for (auto& [q, reps] : routing) reps = {*reps.begin()};
  }
  d.routing.normal = {{"q1", {1}}, {"q2", {2}}};
  const double a = ftotal_cost(d, m, 1, 1, RoutingCardinality::kMin);
  const double b = ftotal_cost(d, m, 1, 1, RoutingCardinality::kPaperLiteral);
  DesignEvaluator ev(m, d, 1);
  const double queries = ev.failure_query_cost(1);
  EXPECT_NEAR(a - b, queries / 2, 1e-12);
}

TEST(ExpTotalCost, AlphaZeroIsTotalCost) {
  CostModel m(mixed_workload());
  const auto d = mixed_design();
  EXPECT_EQ(exp_total_cost(d, m, 2, 0.0), total_cost(d, m, 2));
}

TEST(ExpTotalCost, BlendOfScenarios) {
  CostModel m(mixed_workload());
  const auto d = mixed_design();
  const double tc = total_cost(d, m, 2);
  const double f1 = ftotal_cost(d, m, 2, 1), f2 = ftotal_cost(d, m, 2, 2), f3 = ftotal_cost(d, m, 2, 3);
  EXPECT_TRUE(rel_near(exp_total_cost(d, m, 2, 0.1), 0.9 * tc + 0.1 / 3 * (f1 + f2 + f3), 1e-12));
}

TEST(ExpTotalCost, BreakdownSumsUp) {
  CostModel m(mixed_workload());
  const auto d = mixed_design();
  const CostBreakdown b = DesignEvaluator(m, d, 2).breakdown(0.3);
  EXPECT_TRUE(rel_near(b.total, b.query_cost + b.update_cost, 1e-9));
  EXPECT_EQ(b.per_replica_load.size(), 3u);
}

TEST(Load, PartitionsTotalCost) {
  CostModel m(mixed_workload());
  const auto d = mixed_design();
  double sum = 0;
  for (int r = 1; r <= 3; ++r) sum += replica_load(d, m, 2, r);
  EXPECT_TRUE(rel_near(sum, total_cost(d, m, 2), 1e-9));
}

TEST(Load, ReplicaWithoutQueriesCarriesUpdatesOnly) {
  const Workload w = mixed_workload();
  CostModel m(w);
  auto d = mixed_design();
  d.routing.normal = {{"q1", {1, 2}}, {"q2", {1, 2}}};
  EXPECT_DOUBLE_EQ(replica_load(d, m, 2, 3), 0.5 * brute_update_cost(w.updates[0], {}));
}

TEST(Load, MixedMatchesResummation) {
  const Workload w = mixed_workload();
  CostModel m(w);
  const auto d = mixed_design();
  for (int r = 1; r <= 3; ++r) {
    double expected = 0;
    for (const auto& q : w.queries) {
      if (d.routing.normal.at(q.id).count(r)) expected += q.weight / 2 * brute_query_cost(q, d.configs[r - 1]);
    }
    expected += w.updates[0].weight * brute_update_cost(w.updates[0], d.configs[r - 1]);
    EXPECT_TRUE(rel_near(replica_load(d, m, 2, r), expected, 1e-12)) << r;
  }
}

TEST(FLoad, FailedReplicaIsAnError) {
  CostModel m(mixed_workload());
  EXPECT_THROW(replica_fload(mixed_design(), m, 2, 2, 2), Error);
}

TEST(FLoad, SurvivorsPartitionFTotalCost) {
  CostModel m(mixed_workload());
  const auto d = mixed_design();
  for (int j = 1; j <= 3; ++j) {
    double sum = 0;
    for (int r = 1; r <= 3; ++r) {
      if (r != j) sum += replica_fload(d, m, 2, r, j);
    }
    EXPECT_TRUE(rel_near(sum, ftotal_cost(d, m, 2, j), 1e-9));
  }
}

TEST(FLoad, MixedMatchesResummation) {
  const Workload w = mixed_workload();
  CostModel m(w);
  const auto d = mixed_design();
  const int j = 2;
  for (int r : {1, 3}) {
    double expected = 0;
    for (const auto& q : w.queries) {
      if (d.routing.on_failure.at(j).at(q.id).count(r)) expected += q.weight / 2 * brute_query_cost(q, d.configs[r - 1]);
    }
    expected += w.updates[0].weight * brute_update_cost(w.updates[0], d.configs[r - 1]);
    EXPECT_TRUE(rel_near(replica_fload(d, m, 2, r, j), expected, 1e-12)) << r;
  }
}

TEST(Skew, Values) {
  EXPECT_DOUBLE_EQ(skew_factor(std::vector<double>{10, 10, 10}), 0.0);
  EXPECT_DOUBLE_EQ(skew_factor(std::vector<double>{10, 20}), 1.0);
  EXPECT_DOUBLE_EQ(skew_factor(std::vector<double>{12, 30, 18}), 30.0 / 12.0 - 1.0);
  EXPECT_THROW(skew_factor(std::vector<double>{0, 1}), Error);
}

TEST(Improvement, Values) {
  EXPECT_DOUBLE_EQ(improvement(50, 100), 0.5);
  EXPECT_DOUBLE_EQ(improvement(100, 100), 0.0);
  EXPECT_DOUBLE_EQ(improvement(25, 100), 0.75);
  EXPECT_THROW(improvement(1, 0), Error);
}

TEST(Properties, MoreIndexesNeverHurtQueries) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> cost(0, 20);
  for (int trial = 0; trial < 200; ++trial) {
    Workload w;
    w.catalog.tables = {Table{"T", "t", 1}, Table{"R", "r", 1}};
    w.catalog.indexes = {index("a", "T"), index("b", "T"), index("c", "R")};
    std::vector<TemplatePlan> ps;
    for (int p = 0; p < 2; ++p) {
      ps.push_back(plan("p" + std::to_string(p), cost(rng),
                        {{"T", {opt("a", cost(rng), rng() % 4 != 0), opt("b", cost(rng)), opt("SCAN_T", cost(rng))}},
                         {"R", {opt("c", cost(rng)), opt("SCAN_R", cost(rng))}}}));
    }
    w.queries = {query("q", ps)};
    CostModel m(w);
    const std::vector<std::set<IndexId>> chain = {{}, {"a"}, {"a", "c"}, {"a", "b", "c"}};
    double prev = std::numeric_limits<double>::infinity();
    for (const auto& x : chain) {
      const double c = query_cost(m, w.queries[0], x);
      EXPECT_DOUBLE_EQ(c, brute_query_cost(w.queries[0], x));
      EXPECT_LE(c, prev);
      prev = c;
    }
  }
}

TEST(Properties, UniformDesignBalancedRoutingHasZeroSkew) {
  CostModel m(one_query_workload());
  DivergentDesign d;
  d.configs = {{"a"}, {"a"}, {"a"}};
  d.routing.normal = {{"q", {1, 2, 3}}};
  DesignEvaluator ev(m, d, 3);
  std::vector<double> loads = {ev.load(1), ev.load(2), ev.load(3)};
  EXPECT_DOUBLE_EQ(skew_factor(loads), 0.0);
}

}  // namespace
}  // namespace divtune
