#include <gtest/gtest.h>

#include <random>

#include "divtune/solver.hpp"

namespace divtune {
namespace {

VarKey key(int i) { return VarKey{VarKind::s, 1, 0, -1, -1, -1, -1, i}; }

SolveControls exact() {
  SolveControls c;
  c.gap_tolerance = 0.0;
  return c;
}

// Independent optimum by enumerating every 0/1 vector.
std::optional<double> enumerate(const BinaryProgram& bp) {
  std::optional<double> best;
  const int n = bp.num_vars();
  std::vector<char> x(n);
  for (long mask = 0; mask < (1L << n); ++mask) {
    for (int i = 0; i < n; ++i) x[i] = (mask >> i) & 1;
    bool ok = true;
    for (const auto& row : bp.rows()) {
      double lhs = 0;
      for (const auto& [c, v] : row.terms) lhs += x[c] ? v : 0.0;
      if (row.rel == Relation::le) ok = ok && lhs <= row.rhs + 1e-9;
      if (row.rel == Relation::ge) ok = ok && lhs >= row.rhs - 1e-9;
      if (row.rel == Relation::eq) ok = ok && std::abs(lhs - row.rhs) <= 1e-9;
    }
    if (!ok) continue;
    double obj = 0;
    for (int i = 0; i < n; ++i) obj += x[i] ? bp.objective()[i] : 0.0;
    if (!best || obj < *best) best = obj;
  }
  return best;
}

TEST(Solver, SingleVariableNoConstraints) {
  BinaryProgram bp;
  bp.add_var(key(0), "v", 3.0);
  Solution s = solve(bp, exact());
  EXPECT_EQ(s.status, SolveStatus::optimal);
  EXPECT_EQ(s.assignment, std::vector<char>{0});
  EXPECT_DOUBLE_EQ(s.objective, 0.0);
  EXPECT_EQ(s.gap, 0.0);
}

TEST(Solver, ExactlyOneOfTwo) {
  BinaryProgram bp;
  int a = bp.add_var(key(0), "a", 5);
  int b = bp.add_var(key(1), "b", 7);
  bp.add_row({{a, 1}, {b, 1}}, Relation::eq, 1, "pick");
  Solution s = solve(bp, exact());
  EXPECT_EQ(s.status, SolveStatus::optimal);
  EXPECT_EQ(s.assignment, (std::vector<char>{1, 0}));
  EXPECT_DOUBLE_EQ(s.objective, 5.0);
}

TEST(Solver, Infeasible) {
  BinaryProgram bp;
  int a = bp.add_var(key(0), "a", 1);
  int b = bp.add_var(key(1), "b", 1);
  bp.add_row({{a, 1}, {b, 1}}, Relation::ge, 3, "impossible");
  EXPECT_EQ(solve(bp, exact()).status, SolveStatus::infeasible);
}

TEST(Solver, IntegerInfeasibleButLpFeasible) {
  BinaryProgram bp;
  int a = bp.add_var(key(0), "a", 1);
  int b = bp.add_var(key(1), "b", 1);
  bp.add_row({{a, 2}, {b, 2}}, Relation::eq, 1, "odd");
  Solution s = solve(bp, exact());
  EXPECT_EQ(s.status, SolveStatus::infeasible);
  EXPECT_TRUE(s.assignment.empty());
}

TEST(Solver, ObjectiveConstantIsReported) {
  BinaryProgram bp;
  bp.add_var(key(0), "a", 2);
  bp.set_objective_constant(10);
  EXPECT_DOUBLE_EQ(solve(bp, exact()).objective, 10.0);
}

class RandomPrograms : public ::testing::TestWithParam<int> {};

BinaryProgram random_program(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> cost(-10, 10);
  std::uniform_int_distribution<int> small(-3, 6);
  BinaryProgram bp;
  const int n = 6 + static_cast<int>(rng() % 7);
  for (int i = 0; i < n; ++i) bp.add_var(key(i), "v" + std::to_string(i), cost(rng));
  const int m = 2 + static_cast<int>(rng() % 6);
  for (int r = 0; r < m; ++r) {
    std::vector<LinearTerm> terms;
    for (int i = 0; i < n; ++i) {
      if (rng() % 3 == 0) terms.emplace_back(i, small(rng));
    }
    const int kind = static_cast<int>(rng() % 4);
    const Relation rel = kind == 0 ? Relation::eq : kind == 1 ? Relation::ge : Relation::le;
    bp.add_row(terms, rel, small(rng) * 0.5 + 1, "r" + std::to_string(r));
  }
  return bp;
}

TEST_P(RandomPrograms, MatchesEnumeration) {
  const BinaryProgram bp = random_program(1000 + GetParam());
  const auto expected = enumerate(bp);
  const Solution s = solve(bp, exact());
  if (!expected) {
    EXPECT_EQ(s.status, SolveStatus::infeasible);
    return;
  }
  ASSERT_EQ(s.status, SolveStatus::optimal);
  EXPECT_NEAR(s.objective, *expected, 1e-7);
  EXPECT_TRUE(is_feasible(bp, s.assignment));
}

TEST_P(RandomPrograms, GapBoundIsValid) {
  const BinaryProgram bp = random_program(5000 + GetParam());
  const auto expected = enumerate(bp);
  SolveControls c;
  c.gap_tolerance = 0.25;
  const Solution s = solve(bp, c);
  if (!expected) return;
  ASSERT_TRUE(has_solution(s.status));
  EXPECT_TRUE(is_feasible(bp, s.assignment));
  EXPECT_LE(s.bound, *expected + 1e-7);
  EXPECT_GE(s.objective, *expected - 1e-7);
}

TEST_P(RandomPrograms, Deterministic) {
  const BinaryProgram bp = random_program(9000 + GetParam());
  const Solution a = solve(bp, exact());
  const Solution b = solve(bp, exact());
  EXPECT_EQ(a.status, b.status);
  EXPECT_EQ(a.assignment, b.assignment);
  EXPECT_EQ(a.nodes_explored, b.nodes_explored);
}

INSTANTIATE_TEST_SUITE_P(Seeds, RandomPrograms, ::testing::Range(0, 60));

// First seed at or after `from` whose program is feasible and needs branching.
BinaryProgram feasible_program(std::uint64_t from) {
  for (std::uint64_t seed = from;; ++seed) {
    BinaryProgram bp = random_program(seed);
    const Solution s = solve(bp, exact());
    if (has_solution(s.status) && s.nodes_explored > 1) return bp;
  }
}

TEST(Refine, SameProgramKeepsObjective) {
  const BinaryProgram bp = feasible_program(42);
  const Solution first = solve(bp, exact());
  ASSERT_TRUE(has_solution(first.status));
  const Solution again = refine(first, bp, exact());
  EXPECT_NEAR(again.objective, first.objective, 1e-9);
}

TEST(Refine, RedundantConstraintKeepsOptimum) {
  BinaryProgram bp = feasible_program(43);
  const Solution first = solve(bp, exact());
  ASSERT_TRUE(has_solution(first.status));
  bp.add_row({{0, 1}}, Relation::le, 1, "redundant");
  const Solution again = refine(first, bp, exact());
  EXPECT_NEAR(again.objective, first.objective, 1e-9);
}

TEST(Refine, TighterProgramNeverImproves) {
  for (int seed = 0; seed < 20; ++seed) {
    BinaryProgram bp = random_program(7000 + seed);
    const Solution first = solve(bp, exact());
    if (!has_solution(first.status)) continue;
    std::vector<LinearTerm> all;
    for (int i = 0; i < bp.num_vars(); ++i) all.emplace_back(i, 1.0);
    bp.add_row(all, Relation::le, 2, "tighten");
    const Solution refined = refine(first, bp, exact());
    const Solution scratch = solve(bp, exact());
    ASSERT_EQ(refined.status, scratch.status);
    if (!has_solution(scratch.status)) continue;
    EXPECT_GE(refined.objective, first.objective - 1e-9);
    EXPECT_NEAR(refined.objective, scratch.objective, 1e-7);
  }
}

TEST(Solver, StopTokenInterrupts) {
  const BinaryProgram bp = feasible_program(77);
  std::stop_source src;
  src.request_stop();
  SolveControls c = exact();
  c.stop = src.get_token();
  const Solution s = solve(bp, c);
  EXPECT_TRUE(s.status == SolveStatus::timeout_best_known || s.status == SolveStatus::timeout_no_solution);
}

TEST(Solver, WarmStartMustBeFeasible) {
  BinaryProgram bp;
  int a = bp.add_var(key(0), "a", 5);
  int b = bp.add_var(key(1), "b", 7);
  bp.add_row({{a, 1}, {b, 1}}, Relation::eq, 1, "pick");
  SolveControls c = exact();
  c.warm_start = std::vector<char>{1, 1};
  const Solution s = solve(bp, c);
  EXPECT_EQ(s.assignment, (std::vector<char>{1, 0}));
}

}  // namespace
}  // namespace divtune
