#include <gtest/gtest.h>

#include "divtune/json_io.hpp"
#include "divtune/model.hpp"
#include "test_util.hpp"

namespace divtune {
namespace {

using namespace divtune::testing;

TuningRequest small_request() {
  TuningRequest req;
  req.workload.catalog.tables = {Table{"T", "t", 100}, Table{"R", "r", 10}};
  req.workload.catalog.indexes = {index("a", "T", 2, 3, 1), index("b", "R", 1, 1, 1)};
  req.workload.queries = {
      query("q1", {plan("p1", 10, {{"T", {opt("a", 2), opt("SCAN_T", 5)}}})}),
      query("q2", {plan("p1", 4, {{"T", {opt("SCAN_T", 5)}}, {"R", {opt("b", 1), opt("SCAN_R", 3, false)}}}),
                   plan("p2", 9, {{"T", {opt("SCAN_T", 5)}}, {"R", {opt("SCAN_R", 3)}}})},
            2.0)};
  UpdateStatement u;
  u.id = "u1";
  u.weight = 0.5;
  u.query_shell = query("u1#shell", {plan("p1", 1, {{"T", {opt("a", 1), opt("SCAN_T", 4)}}})});
  u.index_update_costs = {{"a", 4}};
  u.base_cost = 3;
  req.workload.updates = {u};
  req.replicas = 2;
  req.multiplicity = 1;
  return req;
}

bool has_rule(const std::vector<Violation>& v, const std::string& needle) {
  for (const auto& x : v) {
    if (x.rule.find(needle) != std::string::npos) return true;
  }
  return false;
}

TEST(Validate, WellFormedRequestHasNoViolations) {
  EXPECT_TRUE(validate_request(small_request()).empty());
}

TEST(Validate, MultiplicityAboveReplicaCount) {
  auto req = small_request();
  req.multiplicity = req.replicas + 1;
  auto v = validate_request(req);
  ASSERT_FALSE(v.empty());
  EXPECT_TRUE(has_rule(v, "multiplicity out of range"));
  EXPECT_EQ(v.front().field, "multiplicity");
}

TEST(Validate, UpdateReferencingUnknownIndex) {
  auto req = small_request();
  req.workload.updates[0].index_update_costs["nope"] = 1.0;
  auto v = validate_request(req);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_TRUE(has_rule(v, "unresolved reference"));
}

TEST(Validate, FailuresNeedTwoReplicas) {
  auto req = small_request();
  req.replicas = 1;
  req.failure_prob = 1.0;
  EXPECT_TRUE(has_rule(validate_request(req), "at least two replicas"));
}

TEST(Validate, TemplateWithoutUsableInstantiation) {
  auto req = small_request();
  req.workload.queries[0].templates[0].slots["T"] = {opt("a", 2, false), opt("SCAN_T", 5, false)};
  EXPECT_TRUE(has_rule(validate_request(req), "no template has a usable instantiation"));
}

TEST(Validate, IsTotalOnGarbage) {
  TuningRequest req;
  req.replicas = -3;
  req.multiplicity = 0;
  req.failure_prob = std::nan("");
  req.solver.time_limit = 0;
  req.workload.queries.push_back(QueryStatement{"q", -1, {}, {"missing"}});
  req.workload.catalog.indexes.push_back(index("SCAN_x", "missing", -1));
  std::vector<Violation> v;
  EXPECT_NO_THROW(v = validate_request(req));
  EXPECT_GE(v.size(), 6u);
}

TEST(Validate, ShrinkWithFailuresRejected) {
  auto req = small_request();
  MaterializationBudget mat;
  mat.budget = 10;
  mat.current.configs = {{}, {}};
  mat.target_replicas = 1;
  req.constraints.materialization = mat;
  EXPECT_TRUE(validate_request(req).empty());
  req.failure_prob = 0.1;
  EXPECT_FALSE(validate_request(req).empty());
}

TEST(Json, RequestRoundTrip) {
  auto req = small_request();
  req.failure_prob = 0.3;
  req.routing_mode = RoutingCardinality::kPaperLiteral;
  req.constraints.space_budget = 4.5;
  req.constraints.load_skew = LoadSkew{0.5, SkewMode::kGreedy};
  req.constraints.failure_load_skew = 1.0;
  req.constraints.update_cost_bound = UpdateCostBound{0.4, 12.0};
  req.constraints.property_limits = {IndexPropertyLimit{"multikey", {"a", "b"}, 1}};
  MaterializationBudget mat;
  mat.budget = 7;
  mat.current.configs = {{"a"}, {}};
  mat.current.routing.normal = {{"q1", {1}}, {"q2", {2}}};
  mat.current.routing.on_failure[1] = {{"q1", {2}}};
  mat.target_replicas = 3;
  mat.deploy_cost = 2;
  req.constraints.materialization = mat;
  req.solver = SolverControls{0.0, 12.5};

  json j = req;
  TuningRequest back = j.get<TuningRequest>();
  EXPECT_EQ(back, req);
  EXPECT_EQ(dump(json(back)), dump(j));
}

TEST(Json, DesignRoundTripWithDroppedReplica) {
  DivergentDesign d;
  d.configs = {{"a", "b"}, {}};
  d.routing.normal = {{"q1", {1}}};
  d.dropped = {2};
  json j = d;
  EXPECT_EQ(j.get<DivergentDesign>(), d);
}

TEST(Json, DefaultsApplyOnRead) {
  const json w = json::parse(R"({
    "tables": [{"id": "T"}],
    "indexes": [{"id": "a", "table": "T", "size": 1}],
    "queries": [{"id": "q", "templates": [{"internal_cost": 3, "slots": {"T": [{"access": "SCAN_T", "cost": 1}]}}]}],
    "updates": []
  })");
  Workload wl = w.get<Workload>();
  ASSERT_EQ(wl.queries.size(), 1u);
  EXPECT_EQ(wl.queries[0].weight, 1.0);
  EXPECT_EQ(wl.queries[0].templates[0].id, "p1");
  EXPECT_TRUE(wl.queries[0].templates[0].slots.at("T")[0].usable);
  EXPECT_EQ(wl.queries[0].referenced_tables, std::set<TableId>{"T"});
  EXPECT_EQ(json(wl).get<Workload>(), wl);
}

}  // namespace
}  // namespace divtune
