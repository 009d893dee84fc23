#pragma once

// Bounded-variable simplex on a dense tableau. Used for the linear
// relaxations inside branch-and-bound: columns are the binary program's
// columns relaxed to [lo, up], one slack per row, and one artificial per row
// that only takes part in phase 1.
//
// The object has value semantics; copying it snapshots the tableau, which is
// how branch-and-bound restores the root relaxation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "divtune/error.hpp"
#include "divtune/program.hpp"

namespace divtune {

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

class Simplex {
 public:
  static constexpr double kInf = std::numeric_limits<double>::infinity();

  explicit Simplex(const BinaryProgram& bp) : n_(bp.num_vars()), m_(bp.num_rows()) {
    ncols_ = n_ + 2 * m_;
    lo_.assign(ncols_, 0.0);
    up_.assign(ncols_, 0.0);
    cost_.assign(ncols_, 0.0);
    for (int c = 0; c < n_; ++c) {
      up_[c] = 1.0;
      cost_[c] = bp.objective()[c];
    }
    rows_.resize(m_);
    b_.assign(m_, 0.0);
    sigma_.assign(m_, 1.0);
    rho_.assign(m_, 1.0);
    for (int i = 0; i < m_; ++i) {
      const Row& row = bp.rows()[i];
      double scale = 0.0;
      for (const auto& [c, v] : row.terms) scale = std::max(scale, std::abs(v));
      if (scale == 0.0) scale = 1.0;
      for (const auto& [c, v] : row.terms) rows_[i].emplace_back(c, v / scale);
      b_[i] = row.rhs / scale;
      const int s = slack(i);
      switch (row.rel) {
        case Relation::le: sigma_[i] = 1.0; up_[s] = kInf; break;
        case Relation::ge: sigma_[i] = -1.0; up_[s] = kInf; break;
        case Relation::eq: sigma_[i] = 1.0; up_[s] = 0.0; break;
      }
    }
    x_.assign(ncols_, 0.0);
    pos_.assign(ncols_, -1);
    basis_.assign(m_, -1);
  }

  int num_structural() const { return n_; }
  int iterations() const { return iterations_; }
  LpStatus status() const { return status_; }

  double lower(int c) const { return lo_.at(c); }
  double upper(int c) const { return up_.at(c); }

  // Changes the bounds of a structural column. Nonbasic columns move to the
  // nearest new bound so the basic values stay consistent; call reoptimize()
  // afterwards.
  void set_bounds(int c, double lo, double up) {
    if (c < 0 || c >= n_) throw Error("internal", "bound change on a non-structural column");
    lo_[c] = lo;
    up_[c] = up;
    if (!solved_ || pos_[c] >= 0) return;
    const double target = std::clamp(x_[c], lo, up);
    move_nonbasic(c, target);
  }

  // Two-phase primal simplex from the slack/artificial basis.
  LpStatus solve() {
    initialize();
    status_ = run_phase1();
    if (status_ != LpStatus::optimal) return status_;
    status_ = run_phase2();
    return status_;
  }

  // Dual simplex from the current (dual feasible) basis after bound changes,
  // followed by a primal pass that mops up any dual infeasibility.
  LpStatus reoptimize() {
    if (!solved_) return solve();
    LpStatus st = run_dual();
    if (st == LpStatus::iteration_limit) return solve();
    if (st == LpStatus::infeasible) {
      status_ = st;
      return st;
    }
    status_ = run_primal();
    if (status_ == LpStatus::optimal && !residual_ok()) {
      refactor();
      status_ = run_primal();
      if (status_ == LpStatus::optimal && max_primal_infeasibility() > kFeasTol * 10) return solve();
    }
    return status_;
  }

  double objective() const {
    double v = 0.0;
    for (int c = 0; c < n_; ++c) v += cost_[c] * x_[c];
    return v;
  }

  std::vector<double> primal() const { return std::vector<double>(x_.begin(), x_.begin() + n_); }

 private:
  static constexpr double kPivTol = 1e-9;
  static constexpr double kFeasTol = 1e-9;
  static constexpr double kOptTol = 1e-9;
  static constexpr int kDegenerateSwitch = 100;

  int slack(int i) const { return n_ + i; }
  int artificial(int i) const { return n_ + m_ + i; }
  bool is_artificial(int c) const { return c >= n_ + m_; }
  double* row(int i) { return T_.data() + static_cast<std::size_t>(i) * ncols_; }
  const double* row(int i) const { return T_.data() + static_cast<std::size_t>(i) * ncols_; }

  int max_iterations() const { return 50000 + 50 * (m_ + ncols_); }

  void initialize() {
    T_.assign(static_cast<std::size_t>(m_) * ncols_, 0.0);
    std::fill(pos_.begin(), pos_.end(), -1);
    for (int c = 0; c < ncols_; ++c) {
      if (is_artificial(c)) {
        lo_[c] = 0.0;
        up_[c] = 0.0;
      }
      x_[c] = lo_[c];
    }
    for (int i = 0; i < m_; ++i) {
      double r = b_[i];
      for (const auto& [c, v] : rows_[i]) r -= v * x_[c];
      const int s = slack(i);
      const int a = artificial(i);
      const double slack_value = r / sigma_[i];
      int basic = s;
      double diag = sigma_[i];
      if (slack_value < lo_[s] - kFeasTol || slack_value > up_[s] + kFeasTol) {
        rho_[i] = r >= 0.0 ? 1.0 : -1.0;
        up_[a] = kInf;
        basic = a;
        diag = rho_[i];
        x_[a] = std::abs(r);
      } else {
        x_[s] = std::clamp(slack_value, lo_[s], up_[s]);
      }
      double* t = row(i);
      for (const auto& [c, v] : rows_[i]) t[c] = v / diag;
      t[s] = sigma_[i] / diag;
      t[a] = rho_[i] / diag;
      basis_[i] = basic;
      pos_[basic] = i;
    }
    solved_ = true;
    degenerate_ = 0;
    bland_ = false;
  }

  void set_costs(const std::vector<double>& c) {
    d_ = c;
    for (int i = 0; i < m_; ++i) {
      const double cb = c[basis_[i]];
      if (cb == 0.0) continue;
      const double* t = row(i);
      for (int k = 0; k < ncols_; ++k) {
        if (t[k] != 0.0) d_[k] -= cb * t[k];
      }
    }
    for (int i = 0; i < m_; ++i) d_[basis_[i]] = 0.0;
  }

  LpStatus run_phase1() {
    std::vector<double> c1(ncols_, 0.0);
    bool any = false;
    for (int i = 0; i < m_; ++i) {
      if (up_[artificial(i)] > 0.0) {
        c1[artificial(i)] = 1.0;
        any = true;
      }
    }
    if (any) {
      set_costs(c1);
      LpStatus st = run_primal();
      if (st == LpStatus::iteration_limit) return st;
      double infeas = 0.0;
      for (int i = 0; i < m_; ++i) infeas += x_[artificial(i)];
      if (infeas > 1e-7) return LpStatus::infeasible;
    }
    for (int i = 0; i < m_; ++i) {
      const int a = artificial(i);
      up_[a] = 0.0;
      if (pos_[a] < 0) x_[a] = 0.0;
    }
    drive_out_artificials();
    return LpStatus::optimal;
  }

  LpStatus run_phase2() {
    set_costs(cost_);
    LpStatus st = run_primal();
    if (st == LpStatus::optimal && !residual_ok()) {
      refactor();
      st = run_primal();
    }
    return st;
  }

  void drive_out_artificials() {
    for (int i = 0; i < m_; ++i) {
      if (!is_artificial(basis_[i])) continue;
      const double* t = row(i);
      int best = -1;
      double best_abs = 1e-7;
      for (int c = 0; c < n_ + m_; ++c) {
        if (pos_[c] >= 0) continue;
        if (std::abs(t[c]) > best_abs) {
          best_abs = std::abs(t[c]);
          best = c;
        }
      }
      if (best < 0) continue;  // redundant row; the artificial stays basic at 0
      x_[basis_[i]] = 0.0;
      pivot(i, best);
    }
  }

  // Moves a nonbasic column to `value`, updating the basic values.
  void move_nonbasic(int c, double value) {
    const double delta = value - x_[c];
    if (delta == 0.0) return;
    for (int i = 0; i < m_; ++i) {
      const double t = row(i)[c];
      if (t != 0.0) x_[basis_[i]] -= t * delta;
    }
    x_[c] = value;
  }

  void pivot(int r, int e) {
    double* pr = row(r);
    const double inv = 1.0 / pr[e];
    nz_.clear();
    for (int k = 0; k < ncols_; ++k) {
      if (pr[k] != 0.0) {
        pr[k] *= inv;
        nz_.push_back(k);
      }
    }
    pr[e] = 1.0;
    for (int i = 0; i < m_; ++i) {
      if (i == r) continue;
      double* pi = row(i);
      const double f = pi[e];
      if (f == 0.0) continue;
      for (int k : nz_) pi[k] -= f * pr[k];
      pi[e] = 0.0;
    }
    const double fd = d_[e];
    if (fd != 0.0) {
      for (int k : nz_) d_[k] -= fd * pr[k];
    }
    d_[e] = 0.0;
    const int leaving = basis_[r];
    pos_[leaving] = -1;
    basis_[r] = e;
    pos_[e] = r;
    ++iterations_;
  }

  int choose_entering() const {
    int best = -1;
    double best_score = 0.0;
    for (int c = 0; c < ncols_; ++c) {
      if (pos_[c] >= 0 || lo_[c] == up_[c]) continue;
      double score = 0.0;
      if (x_[c] <= lo_[c] && d_[c] < -kOptTol) score = -d_[c];
      else if (x_[c] >= up_[c] && d_[c] > kOptTol) score = d_[c];
      else if (x_[c] > lo_[c] && x_[c] < up_[c] && std::abs(d_[c]) > kOptTol) score = std::abs(d_[c]);
      if (score <= 0.0) continue;
      if (bland_) return c;
      if (score > best_score) {
        best_score = score;
        best = c;
      }
    }
    return best;
  }

  LpStatus run_primal() {
    const int limit = max_iterations();
    for (int it = 0; it < limit; ++it) {
      const int e = choose_entering();
      if (e < 0) return LpStatus::optimal;
      const double dir = d_[e] < 0.0 ? 1.0 : -1.0;

      // Harris ratio test, pass 1: relaxed step length.
      double theta_max = kInf;
      for (int i = 0; i < m_; ++i) {
        const double alpha = dir * row(i)[e];
        const int b = basis_[i];
        if (alpha > kPivTol) {
          theta_max = std::min(theta_max, (x_[b] - lo_[b] + kFeasTol) / alpha);
        } else if (alpha < -kPivTol && up_[b] < kInf) {
          theta_max = std::min(theta_max, (up_[b] + kFeasTol - x_[b]) / -alpha);
        }
      }
      // Pass 2: largest pivot among rows blocking within the relaxed step.
      int r = -1;
      double r_alpha = 0.0;
      double theta = kInf;
      for (int i = 0; i < m_; ++i) {
        const double alpha = dir * row(i)[e];
        const int b = basis_[i];
        double ratio;
        if (alpha > kPivTol) {
          ratio = (x_[b] - lo_[b]) / alpha;
        } else if (alpha < -kPivTol && up_[b] < kInf) {
          ratio = (up_[b] - x_[b]) / -alpha;
        } else {
          continue;
        }
        if (ratio <= theta_max && std::abs(alpha) > std::abs(r_alpha)) {
          r = i;
          r_alpha = alpha;
          theta = std::max(ratio, 0.0);
        }
      }
      const double room = dir > 0 ? up_[e] - x_[e] : x_[e] - lo_[e];
      if (r < 0 && room == kInf) return LpStatus::unbounded;

      if (r < 0 || room <= theta) {
        // Bound flip.
        move_nonbasic(e, dir > 0 ? up_[e] : lo_[e]);
        degenerate_ = 0;
        bland_ = false;
        continue;
      }
      const int leaving = basis_[r];
      const double step = dir * theta;
      for (int i = 0; i < m_; ++i) {
        const double t = row(i)[e];
        if (t != 0.0) x_[basis_[i]] -= t * step;
      }
      x_[e] += step;
      x_[leaving] = r_alpha > 0 ? lo_[leaving] : up_[leaving];
      pivot(r, e);
      if (theta < 1e-12) {
        if (++degenerate_ > kDegenerateSwitch) bland_ = true;
      } else {
        degenerate_ = 0;
        bland_ = false;
      }
    }
    return LpStatus::iteration_limit;
  }

  LpStatus run_dual() {
    const int limit = max_iterations();
    for (int it = 0; it < limit; ++it) {
      int r = -1;
      double worst = kFeasTol;
      for (int i = 0; i < m_; ++i) {
        const int b = basis_[i];
        const double v = std::max(lo_[b] - x_[b], x_[b] - up_[b]);
        if (v > worst) {
          worst = v;
          r = i;
        }
      }
      if (r < 0) return LpStatus::optimal;
      const int b = basis_[r];
      const bool below = x_[b] < lo_[b];
      const double target = below ? lo_[b] : up_[b];
      const double* tr = row(r);

      auto eligible = [&](int c) -> bool {
        if (pos_[c] >= 0 || lo_[c] == up_[c]) return false;
        const double t = tr[c];
        const bool at_lo = x_[c] <= lo_[c];
        const bool at_up = x_[c] >= up_[c];
        if (below) return (at_lo && t < -kPivTol) || (at_up && t > kPivTol) || (!at_lo && !at_up && std::abs(t) > kPivTol);
        return (at_lo && t > kPivTol) || (at_up && t < -kPivTol) || (!at_lo && !at_up && std::abs(t) > kPivTol);
      };

      double theta_max = kInf;
      for (int c = 0; c < ncols_; ++c) {
        if (!eligible(c)) continue;
        theta_max = std::min(theta_max, (std::abs(d_[c]) + kOptTol) / std::abs(tr[c]));
      }
      int e = -1;
      double e_abs = 0.0;
      for (int c = 0; c < ncols_; ++c) {
        if (!eligible(c)) continue;
        const double ratio = std::abs(d_[c]) / std::abs(tr[c]);
        if (ratio <= theta_max && std::abs(tr[c]) > e_abs) {
          e_abs = std::abs(tr[c]);
          e = c;
        }
      }
      if (e < 0) return LpStatus::infeasible;
      const double delta = (x_[b] - target) / tr[e];
      for (int i = 0; i < m_; ++i) {
        const double t = row(i)[e];
        if (t != 0.0) x_[basis_[i]] -= t * delta;
      }
      x_[e] += delta;
      x_[b] = target;
      pivot(r, e);
    }
    return LpStatus::iteration_limit;
  }

  double max_primal_infeasibility() const {
    double worst = 0.0;
    for (int i = 0; i < m_; ++i) {
      const int b = basis_[i];
      worst = std::max(worst, std::max(lo_[b] - x_[b], x_[b] - up_[b]));
    }
    return worst;
  }

  bool residual_ok() const {
    for (int i = 0; i < m_; ++i) {
      double lhs = sigma_[i] * x_[slack(i)] + rho_[i] * x_[artificial(i)];
      for (const auto& [c, v] : rows_[i]) lhs += v * x_[c];
      if (std::abs(lhs - b_[i]) > 1e-7 * std::max(1.0, std::abs(b_[i]))) return false;
    }
    return true;
  }

  // Recomputes the tableau, basic values and reduced costs from the original
  // rows and the current basis (Gaussian elimination with partial pivoting).
  void refactor() {
    std::vector<double> full(static_cast<std::size_t>(m_) * ncols_, 0.0);
    std::vector<double> rhs(m_, 0.0);
    for (int i = 0; i < m_; ++i) {
      double* f = full.data() + static_cast<std::size_t>(i) * ncols_;
      for (const auto& [c, v] : rows_[i]) f[c] = v;
      f[slack(i)] = sigma_[i];
      f[artificial(i)] = rho_[i];
      rhs[i] = b_[i];
    }
    // Eliminate column basis_[k] for k = 0..m-1 choosing the pivot row among
    // the remaining rows; then permute rows so row k holds basis_[k].
    std::vector<int> row_of(m_, -1);
    std::vector<char> used(m_, 0);
    for (int k = 0; k < m_; ++k) {
      const int c = basis_[k];
      int pr = -1;
      double best = 1e-12;
      for (int i = 0; i < m_; ++i) {
        if (used[i]) continue;
        const double v = std::abs(full[static_cast<std::size_t>(i) * ncols_ + c]);
        if (v > best) {
          best = v;
          pr = i;
        }
      }
      if (pr < 0) throw Error("internal", "singular basis during refactorization");
      used[pr] = 1;
      row_of[k] = pr;
      double* p = full.data() + static_cast<std::size_t>(pr) * ncols_;
      const double inv = 1.0 / p[c];
      for (int j = 0; j < ncols_; ++j) p[j] *= inv;
      rhs[pr] *= inv;
      for (int i = 0; i < m_; ++i) {
        if (i == pr) continue;
        double* q = full.data() + static_cast<std::size_t>(i) * ncols_;
        const double f = q[c];
        if (f == 0.0) continue;
        for (int j = 0; j < ncols_; ++j) q[j] -= f * p[j];
        rhs[i] -= f * rhs[pr];
      }
    }
    for (int k = 0; k < m_; ++k) {
      std::copy_n(full.data() + static_cast<std::size_t>(row_of[k]) * ncols_, ncols_, row(k));
      double v = rhs[row_of[k]];
      const double* t = row(k);
      for (int c = 0; c < ncols_; ++c) {
        if (pos_[c] < 0 && t[c] != 0.0) v -= t[c] * x_[c];
      }
      x_[basis_[k]] = v;
    }
    set_costs(cost_);
  }

  int n_ = 0;
  int m_ = 0;
  int ncols_ = 0;
  std::vector<std::vector<LinearTerm>> rows_;  // scaled structural coefficients
  std::vector<double> b_;
  std::vector<double> sigma_;  // slack coefficient per row
  std::vector<double> rho_;    // artificial coefficient per row
  std::vector<double> lo_, up_, cost_;
  std::vector<double> T_;  // B^-1 A, row-major m x ncols
  std::vector<double> d_;  // reduced costs
  std::vector<double> x_;
  std::vector<int> basis_;
  std::vector<int> pos_;
  std::vector<int> nz_;
  bool solved_ = false;
  bool bland_ = false;
  int degenerate_ = 0;
  int iterations_ = 0;
  LpStatus status_ = LpStatus::optimal;
};

}  // namespace divtune
