#include <gtest/gtest.h>

#include <future>

#include "divtune/monitor.hpp"
#include "divtune/synthetic.hpp"
#include "test_util.hpp"

namespace divtune {
namespace {

using testing::rel_near;

MonitorConfig config(int window) {
  MonitorConfig c;
  c.catalog = synthetic::disjoint_groups(2, 4).catalog;
  c.window = window;
  c.replicas = 2;
  c.multiplicity = 1;
  c.space_budget = 10.0;
  c.gap_tolerance = 0.0;
  return c;
}

const QueryStatement& pick(const Workload& w, const std::string& id) {
  for (const auto& q : w.queries) {
    if (q.id == id) return q;
  }
  throw std::runtime_error(id);
}

TEST(Monitor, SeriesLengthAndWindowBound) {
  const Workload w = synthetic::disjoint_groups(2, 4);
  Monitor mon(config(3));
  for (int i = 0; i < 7; ++i) mon.observe(w.queries[i % w.queries.size()]);
  EXPECT_EQ(mon.series().size(), 7u);
  EXPECT_EQ(mon.snapshot().window.size(), 3u);
  for (std::size_t i = 0; i < 7; ++i) EXPECT_EQ(mon.series()[i].statement_index, static_cast<long>(i));
}

TEST(Monitor, WindowOfOneIsPersonalOptimum) {
  const Workload w = synthetic::disjoint_groups(2, 4);
  const QueryStatement& q = pick(w, "g2q1");
  Monitor mon(config(1));
  const SeriesEntry e = mon.observe(q);
  // Direct: cost on empty replicas vs with a2 on the routed replica.
  const double base = 5.0 + 110.0;
  const double best = 5.0 + 3.0;
  EXPECT_TRUE(rel_near(e.improvement, 1.0 - best / base));
}

TEST(Monitor, SelfTunedRegimeHasNoImprovement) {
  const Workload w = synthetic::disjoint_groups(2, 4);
  DivergentDesign cur;
  cur.configs = {{"a1"}, {"a1"}};
  Monitor mon(config(5), cur);
  for (int i = 0; i < 10; ++i) {
    const SeriesEntry e = mon.observe(pick(w, "g1q" + std::to_string(i % 4 + 1)));
    EXPECT_LE(e.improvement, 1e-9);
    EXPECT_GE(e.improvement, -1e-9);
  }
}

TEST(Monitor, ShiftRaisesImprovement) {
  const Workload w = synthetic::disjoint_groups(2, 4);
  DivergentDesign cur;
  cur.configs = {{"a1"}, {"a1"}};
  Monitor mon(config(4), cur);
  for (int i = 0; i < 4; ++i) mon.observe(pick(w, "g1q1"));
  for (int i = 0; i < 4; ++i) mon.observe(pick(w, "g2q1"));
  EXPECT_GT(mon.series().back().improvement, 0.5);
}

TEST(Monitor, UpdatesEnterTheWindow) {
  Workload w = synthetic::disjoint_groups(1, 1);
  MonitorConfig c = config(4);
  c.catalog = w.catalog;
  Monitor mon(c);
  UpdateStatement u;
  u.id = "u";
  u.query_shell = w.queries[0];
  u.query_shell.id = "u_sel";
  u.index_update_costs = {{"a1", 1000.0}};
  mon.observe(u);
  mon.observe(w.queries[0]);
  // The update makes a1 too expensive to keep anywhere.
  EXPECT_TRUE(mon.snapshot().latest_slide_design->configs[0].empty());
  EXPECT_EQ(window_workload(c.catalog, mon.snapshot().window).updates.size(), 1u);
}

TEST(Monitor, RejectsUnknownIndex) {
  Monitor mon(config(3));
  QueryStatement q = synthetic::disjoint_groups(2, 1).queries[0];
  q.templates[0].slots.begin()->second.push_back({"zz", 1.0, true});
  try {
    mon.observe(q);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), "invalid_request");
  }
  EXPECT_TRUE(mon.snapshot().window.empty());
}

TEST(Monitor, WindowMergesRepeatedStatements) {
  const Workload w = synthetic::disjoint_groups(1, 2);
  std::deque<Statement> win = {w.queries[0], w.queries[1], w.queries[0]};
  const Workload agg = window_workload(w.catalog, win);
  ASSERT_EQ(agg.queries.size(), 2u);
  EXPECT_DOUBLE_EQ(agg.queries[0].weight, 2.0);
}

TEST(Monitor, TryObserveRefusesWhileBusy) {
  const Workload w = synthetic::disjoint_groups(2, 4);
  Monitor mon(config(3));
  std::atomic<int> refused = 0;
  std::vector<std::future<void>> jobs;
  for (int t = 0; t < 4; ++t) {
    jobs.push_back(std::async(std::launch::async, [&, t] {
      for (int i = 0; i < 20; ++i) {
        if (!mon.try_observe(w.queries[(t + i) % w.queries.size()])) ++refused;
      }
    }));
  }
  for (auto& j : jobs) j.get();
  EXPECT_EQ(static_cast<int>(mon.series().size()) + refused.load(), 80);
}

TEST(Monitor, StateJsonRoundTrip) {
  const Workload w = synthetic::disjoint_groups(2, 4);
  Monitor mon(config(3));
  mon.observe(w.queries[0]);
  const json j = mon.snapshot();
  const MonitorState back = j.get<MonitorState>();
  EXPECT_EQ(json(back), j);
}

}  // namespace
}  // namespace divtune
