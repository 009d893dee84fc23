#pragma once

// Best-first branch-and-bound over the LP relaxation, with depth-first
// diving below each popped node.

#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <queue>
#include <stop_token>
#include <string>
#include <vector>

#include "divtune/error.hpp"
#include "divtune/json_io.hpp"
#include "divtune/program.hpp"
#include "divtune/simplex.hpp"

namespace divtune {

enum class SolveStatus { optimal, feasible_within_gap, infeasible, timeout_best_known, timeout_no_solution };

inline std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::feasible_within_gap: return "feasible_within_gap";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::timeout_best_known: return "timeout_best_known";
    case SolveStatus::timeout_no_solution: return "timeout_no_solution";
  }
  return "?";
}

inline bool has_solution(SolveStatus s) {
  return s == SolveStatus::optimal || s == SolveStatus::feasible_within_gap || s == SolveStatus::timeout_best_known;
}

struct Solution {
  std::vector<char> assignment;
  double objective = 0.0;  // including the program's objective constant
  SolveStatus status = SolveStatus::infeasible;
  double gap = 0.0;
  double bound = -std::numeric_limits<double>::infinity();
  long nodes_explored = 0;
  long lp_iterations = 0;
  double wall_time = 0.0;  // seconds
};

// Solve report (the assignment itself is omitted).
inline void to_json(json& j, const Solution& s) {
  j = json{{"status", to_string(s.status)},
           {"objective", s.objective},
           {"gap", s.gap},
           {"nodes_explored", s.nodes_explored},
           {"lp_iterations", s.lp_iterations},
           {"wall_time", s.wall_time}};
  if (std::isfinite(s.bound)) j["bound"] = s.bound;
}

struct SolveControls {
  double gap_tolerance = 0.05;
  double time_limit = 30.0;  // seconds
  long node_limit = -1;
  std::optional<std::vector<char>> warm_start;
  std::stop_token stop;
  // Proposes an assignment from a fractional LP point.
  std::function<std::optional<std::vector<char>>(const std::vector<double>&)> heuristic;
  // Maps a feasible assignment to an equivalent or better one.
  std::function<std::vector<char>(const std::vector<char>&)> polish;
  int heuristic_every = 8;  // nodes between heuristic calls
};

class BranchAndBound {
 public:
  BranchAndBound(const BinaryProgram& bp, const SolveControls& controls) : bp_(bp), ctl_(controls) {}

  Solution run() {
    start_ = Clock::now();
    Solution out;
    if (ctl_.warm_start) offer(*ctl_.warm_start);

    Simplex root(bp_);
    const LpStatus rs = root.solve();
    iterations_ += root.iterations();
    if (rs == LpStatus::infeasible) return finish(out, false);
    if (rs != LpStatus::optimal) throw Error("solver_failure", "root relaxation did not solve");
    root_bound_ = root.objective();

    std::priority_queue<Node, std::vector<Node>, NodeOrder> open;
    long seq = 0;
    bool interrupted = false;

    std::optional<Simplex> lp;
    Node current{root_bound_, seq++, 0, {}};
    lp.emplace(root);
    bool diving = true;

    while (true) {
      if (!diving) {
        if (open.empty()) break;
        Node next = open.top();
        open.pop();
        if (has_incumbent_ && next.bound >= cutoff()) {
          note_pruned(next.bound);
          continue;
        }
        current = std::move(next);
        lp.emplace(root);
        for (const auto& [c, v] : current.fixes) lp->set_bounds(c, v, v);
        const int before = lp->iterations();
        lp->reoptimize();
        iterations_ += lp->iterations() - before;
        diving = true;
      }
      if (out_of_budget()) {
        interrupted = true;
        open.push(current);
        break;
      }
      ++nodes_;
      diving = false;
      if (lp->status() != LpStatus::optimal) continue;
      const double bound = lp->objective();
      if (has_incumbent_ && bound >= cutoff()) {
        note_pruned(bound);
        continue;
      }
      const std::vector<double> x = lp->primal();
      int branch = -1;
      double most = kIntTol;
      for (int c = 0; c < bp_.num_vars(); ++c) {
        const double f = std::min(x[c] - std::floor(x[c]), std::ceil(x[c]) - x[c]);
        if (f > most) {
          most = f;
          branch = c;
        }
      }
      if (branch < 0) {
        std::vector<char> a(bp_.num_vars());
        for (int c = 0; c < bp_.num_vars(); ++c) a[c] = x[c] > 0.5 ? 1 : 0;
        offer(a);
        continue;
      }
      if (ctl_.heuristic && (nodes_ == 1 || nodes_ % ctl_.heuristic_every == 0)) {
        if (auto h = ctl_.heuristic(x)) offer(*h);
        if (has_incumbent_ && bound >= cutoff()) {
          note_pruned(bound);
          continue;
        }
      }
      const char first = x[branch] >= 0.5 ? 1 : 0;
      Node other{bound, seq++, current.depth + 1, current.fixes};
      other.fixes.emplace_back(branch, static_cast<char>(1 - first));
      open.push(std::move(other));

      current.fixes.emplace_back(branch, first);
      current.bound = bound;
      current.depth += 1;
      lp->set_bounds(branch, first, first);
      const int before = lp->iterations();
      lp->reoptimize();
      iterations_ += lp->iterations() - before;
      diving = true;
    }

    if (interrupted) {
      while (!open.empty()) {
        note_pruned(open.top().bound);
        open.pop();
      }
    }
    return finish(out, interrupted);
  }

 private:
  using Clock = std::chrono::steady_clock;
  static constexpr double kIntTol = 1e-6;

  struct Node {
    double bound = 0.0;
    long seq = 0;
    int depth = 0;
    std::vector<std::pair<int, char>> fixes;
  };

  struct NodeOrder {
    bool operator()(const Node& a, const Node& b) const {
      if (a.bound != b.bound) return a.bound > b.bound;
      return a.seq > b.seq;
    }
  };

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  bool out_of_budget() const {
    if (ctl_.stop.stop_requested()) return true;
    if (ctl_.node_limit >= 0 && nodes_ >= ctl_.node_limit) return true;
    return elapsed() > ctl_.time_limit;
  }

  double tolerance() const {
    const double scale = std::max(1.0, std::abs(incumbent_value_));
    return std::max(1e-9 * scale, ctl_.gap_tolerance * std::abs(incumbent_value_));
  }

  double cutoff() const { return incumbent_value_ - tolerance(); }

  // Nodes discarded only because of the gap tolerance (or an interruption)
  // still bound the optimum from below.
  void note_pruned(double bound) {
    const double exact = incumbent_value_ - 1e-9 * std::max(1.0, std::abs(incumbent_value_));
    if (!has_incumbent_ || bound < exact) pruned_bound_ = std::min(pruned_bound_, bound);
  }

  void offer(const std::vector<char>& candidate) {
    if (static_cast<int>(candidate.size()) != bp_.num_vars()) return;
    if (!is_feasible(bp_, candidate)) return;
    std::vector<char> best = candidate;
    double value = bp_.evaluate(candidate);
    if (ctl_.polish) {
      std::vector<char> p = ctl_.polish(candidate);
      if (static_cast<int>(p.size()) == bp_.num_vars() && is_feasible(bp_, p)) {
        const double pv = bp_.evaluate(p);
        if (pv <= value + 1e-12 * std::max(1.0, std::abs(value))) {
          best = std::move(p);
          value = pv;
        }
      }
    }
    if (!has_incumbent_ || value < incumbent_value_ - 1e-12 * std::max(1.0, std::abs(value))) {
      incumbent_ = std::move(best);
      incumbent_value_ = value;
      has_incumbent_ = true;
    }
  }

  Solution finish(Solution& out, bool interrupted) {
    out.nodes_explored = nodes_;
    out.lp_iterations = iterations_;
    out.wall_time = elapsed();
    if (!has_incumbent_) {
      out.status = interrupted ? SolveStatus::timeout_no_solution : SolveStatus::infeasible;
      if (std::isfinite(pruned_bound_)) out.bound = pruned_bound_ + bp_.objective_constant();
      return out;
    }
    out.assignment = incumbent_;
    out.objective = incumbent_value_ + bp_.objective_constant();
    const double lower = std::min(pruned_bound_, incumbent_value_);
    out.bound = lower + bp_.objective_constant();
    const double denom = std::max(std::abs(incumbent_value_ + bp_.objective_constant()), 1e-9);
    double gap = std::max(0.0, incumbent_value_ - lower) / denom;
    if (gap <= 1e-9) gap = 0.0;
    out.gap = gap;
    if (interrupted) {
      out.status = SolveStatus::timeout_best_known;
    } else {
      out.status = gap == 0.0 ? SolveStatus::optimal : SolveStatus::feasible_within_gap;
    }
    return out;
  }

  const BinaryProgram& bp_;
  const SolveControls& ctl_;
  Clock::time_point start_;
  std::vector<char> incumbent_;
  double incumbent_value_ = std::numeric_limits<double>::infinity();
  bool has_incumbent_ = false;
  double pruned_bound_ = std::numeric_limits<double>::infinity();
  double root_bound_ = 0.0;
  long nodes_ = 0;
  long iterations_ = 0;
};

inline Solution solve(const BinaryProgram& bp, const SolveControls& controls = {}) {
  if (!(controls.gap_tolerance >= 0.0)) throw Error("invalid_argument", "gap tolerance must be >= 0");
  return BranchAndBound(bp, controls).run();
}

// Re-solves a program that shares (a prefix of) its column registry with the
// one `previous` came from, warm-starting from the previous assignment.
inline Solution refine(const Solution& previous, const BinaryProgram& bp, SolveControls controls = {}) {
  if (!previous.assignment.empty()) {
    std::vector<char> warm(bp.num_vars(), 0);
    const auto n = std::min<std::size_t>(warm.size(), previous.assignment.size());
    std::copy_n(previous.assignment.begin(), n, warm.begin());
    if (!controls.warm_start || !is_feasible(bp, *controls.warm_start)) controls.warm_start = std::move(warm);
  }
  return solve(bp, controls);
}

}  // namespace divtune
