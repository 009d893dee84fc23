#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "divtune/routing.hpp"
#include "test_util.hpp"

namespace divtune {
namespace {

using testing::brute_query_cost;
using testing::index;
using testing::opt;
using testing::plan;
using testing::query;

Workload catalog() {
  Workload w;
  w.catalog.tables = {{"T1", "t1", 10}, {"T2", "t2", 10}};
  w.catalog.indexes = {index("a", "T1"), index("b", "T1"), index("c", "T2")};
  return w;
}

QueryStatement q_a(const std::string& id = "qa") {
  return query(id, {plan("p1", 1, {{"T1", {opt("SCAN_T1", 50), opt("a", 5), opt("b", 20)}}})});
}

QueryStatement q_c(const std::string& id = "qc") {
  return query(id, {plan("p1", 1, {{"T2", {opt("SCAN_T2", 40), opt("c", 4)}}})});
}

DivergentDesign design(std::vector<std::set<IndexId>> configs) {
  DivergentDesign d;
  d.configs = std::move(configs);
  return d;
}

TEST(RouteTopM, IdenticalConfigsTieToLowestIds) {
  const CostModel m(catalog());
  const auto d = design({{"a"}, {"a"}, {"a"}});
  EXPECT_EQ(route_top_m(m, q_a(), d, 2), (std::set<ReplicaId>{1, 2}));
}

TEST(RouteTopM, PicksReplicaWithHelpfulIndex) {
  const CostModel m(catalog());
  EXPECT_EQ(route_top_m(m, q_a(), design({{}, {"a"}}), 1), (std::set<ReplicaId>{2}));
}

TEST(RouteTopM, MatchesExhaustiveRanking) {
  const CostModel m(catalog());
  const std::vector<std::set<IndexId>> pool = {{}, {"a"}, {"b"}, {"a", "b"}, {"c"}};
  for (const auto& c1 : pool) {
    for (const auto& c2 : pool) {
      for (const auto& c3 : pool) {
        const auto d = design({c1, c2, c3});
        const auto q = q_a();
        std::vector<int> order = {1, 2, 3};
        std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
          return brute_query_cost(q, d.configs[x - 1]) < brute_query_cost(q, d.configs[y - 1]);
        });
        EXPECT_EQ(route_top_m(m, q, d, 2), (std::set<ReplicaId>{order[0], order[1]}));
      }
    }
  }
}

TEST(RouteTopM, ArgminStable) {
  const CostModel m(catalog());
  const auto d = design({{"b"}, {}, {"a"}, {"a", "b"}});
  const auto q = q_a();
  const auto out = route_top_m(m, q, d, 2);
  EXPECT_EQ(out.size(), 2u);
  for (int in : out) {
    for (int r = 1; r <= 4; ++r) {
      if (!out.count(r)) {
        EXPECT_LE(brute_query_cost(q, d.configs[in - 1]), brute_query_cost(q, d.configs[r - 1]));
      }
    }
  }
}

TEST(SimilarityVector, EmptyConfigsGiveZeroVector) {
  const CostModel m(catalog());
  const auto v = similarity_vector(m, q_a(), design({{}, {}}));
  EXPECT_EQ(v.size(), 6u);
  EXPECT_TRUE(std::all_of(v.begin(), v.end(), [](double x) { return x == 0.0; }));
}

TEST(SimilarityVector, UnitIndicator) {
  const CostModel m(catalog());
  EXPECT_EQ(similarity_vector(m, q_a(), design({{"a", "c"}})), (std::vector<double>{1, 0, 0}));
}

TEST(SimilarityVector, TwoReplicasMatchPlanInspection) {
  const CostModel m(catalog());
  // Replica 1 has b only (20 < 50, b used); replica 2 has a and b (a wins).
  const auto q = query("q", {plan("p1", 1, {{"T1", {opt("SCAN_T1", 50), opt("a", 5), opt("b", 20)}},
                                            {"T2", {opt("SCAN_T2", 40), opt("c", 4)}}})});
  const auto v = similarity_vector(m, q, design({{"b", "c"}, {"a", "b"}}));
  EXPECT_EQ(v, (std::vector<double>{0, 1, 1, 1, 0, 0}));
}

Workload training() {
  Workload w = catalog();
  w.queries = {q_a("q1"), q_c("q2")};
  return w;
}

DivergentDesign trained_design() {
  auto d = design({{"a"}, {"c"}, {"a", "c"}});
  d.routing.normal = {{"q1", {1}}, {"q2", {2}}};
  return d;
}

TEST(RouteBySimilarity, TrainingQueryRoutedAsItself) {
  const CostModel m(training());
  const auto d = trained_design();
  EXPECT_EQ(route_by_similarity(m, q_a("q1"), d, 1), (std::set<ReplicaId>{1}));
  EXPECT_EQ(route_by_similarity(m, q_c("q2"), d, 1), (std::set<ReplicaId>{2}));
}

TEST(RouteBySimilarity, OrthogonalFallsBackToTopM) {
  const CostModel m(training());
  const auto d = trained_design();
  // Uses no index anywhere: zero vector, so top-m decides (all tie: replica 1).
  const auto q = query("new", {plan("p1", 1, {{"T1", {opt("SCAN_T1", 1), opt("a", 5)}}})});
  const RouteResult r = Router(m, d, 1).route_by_similarity(q);
  EXPECT_FALSE(r.by_similarity);
  EXPECT_EQ(r.replicas, (std::set<ReplicaId>{1}));
}

TEST(RouteBySimilarity, PerturbedCloneInheritsRouting) {
  const CostModel m(training());
  const auto d = trained_design();
  // A clone of q2 with different costs. Its vector is (0,0,0, 0,0,1, 0,0,1)
  // like q2's, cosine 1; against q1 (1,0,0, 0,0,0, 1,0,0) it is 0.
  const auto clone = query("q2x", {plan("p1", 7, {{"T2", {opt("SCAN_T2", 90), opt("c", 1)}}})});
  const RouteResult r = Router(m, d, 1).route_by_similarity(clone);
  EXPECT_TRUE(r.by_similarity);
  EXPECT_EQ(r.matched, "q2");
  EXPECT_EQ(r.replicas, (std::set<ReplicaId>{2}));
}

TEST(RouteBySimilarity, AlwaysReturnsMReplicas) {
  Workload w = training();
  const CostModel m(w);
  auto d = design({{"a"}, {"c"}, {"a", "c"}});
  d.routing.normal = {{"q1", {1, 3}}, {"q2", {2, 3}}};
  for (const auto& q : {q_a("x"), q_c("y")}) EXPECT_EQ(route_by_similarity(m, q, d, 2).size(), 2u);
}

TEST(Cosine, Basics) {
  EXPECT_DOUBLE_EQ(cosine({1, 0}, {1, 0}), 1.0);
  EXPECT_DOUBLE_EQ(cosine({1, 0}, {0, 1}), 0.0);
  EXPECT_DOUBLE_EQ(cosine({0, 0}, {1, 1}), 0.0);
}

}  // namespace
}  // namespace divtune
