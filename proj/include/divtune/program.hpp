#pragma once

// A solver-agnostic binary integer program: binary columns registered under
// semantic keys, a linear objective to minimize, and linear rows.

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <map>
#include <sstream>
#include <string>
#include <unordered_set>
#include <vector>

#include "divtune/error.hpp"

namespace divtune {

enum class VarKind : std::uint8_t { s, t, y, x, t_fail, y_fail, x_fail, z, yo, xo, u_slot };

inline const char* to_string(VarKind k) {
  switch (k) {
    case VarKind::s: return "s";
    case VarKind::t: return "t";
    case VarKind::y: return "y";
    case VarKind::x: return "x";
    case VarKind::t_fail: return "t_fail";
    case VarKind::y_fail: return "y_fail";
    case VarKind::x_fail: return "x_fail";
    case VarKind::z: return "z";
    case VarKind::yo: return "yo";
    case VarKind::xo: return "xo";
    case VarKind::u_slot: return "u_slot";
  }
  return "?";
}

// Indices are positions in the compiled workload (statement, template, slot,
// option) and 1-based replica ids. Unused fields stay at -1 / 0.
struct VarKey {
  VarKind kind = VarKind::s;
  int r = 0;       // replica
  int j = 0;       // failed replica (failure families)
  int q = -1;      // statement position
  int p = -1;      // template position
  int slot = -1;   // slot position within the template
  int opt = -1;    // option position within the slot
  int a = -1;      // index position (s variables)

  auto operator<=>(const VarKey&) const = default;
};

enum class Relation : std::uint8_t { le, eq, ge };

inline const char* to_string(Relation r) {
  switch (r) {
    case Relation::le: return "<=";
    case Relation::eq: return "=";
    case Relation::ge: return ">=";
  }
  return "?";
}

using LinearTerm = std::pair<int, double>;

struct Row {
  std::vector<LinearTerm> terms;
  Relation rel = Relation::le;
  double rhs = 0.0;
  std::string family;  // constraint family tag, e.g. "route", "budget"
};

class BinaryProgram {
 public:
  int add_var(const VarKey& key, std::string name, double cost = 0.0) {
    if (!std::isfinite(cost)) throw Error("internal", "non-finite objective coefficient for " + name);
    auto [it, fresh] = index_.emplace(key, static_cast<int>(keys_.size()));
    if (!fresh) throw Error("internal", "duplicate variable " + name);
    keys_.push_back(key);
    names_.push_back(std::move(name));
    objective_.push_back(cost);
    return it->second;
  }

  // Column of `key`, or -1.
  int find(const VarKey& key) const {
    auto it = index_.find(key);
    return it == index_.end() ? -1 : it->second;
  }

  int col(const VarKey& key) const {
    int c = find(key);
    if (c < 0) throw Error("internal", std::string("missing variable of kind ") + to_string(key.kind));
    return c;
  }

  void add_row(std::vector<LinearTerm> terms, Relation rel, double rhs, std::string family) {
    std::map<int, double> merged;
    for (const auto& [c, v] : terms) {
      if (c < 0 || c >= num_vars()) throw Error("internal", "row references unknown column");
      if (!std::isfinite(v)) throw Error("internal", "non-finite coefficient in family " + family);
      merged[c] += v;
    }
    if (!std::isfinite(rhs)) throw Error("internal", "non-finite right-hand side in family " + family);
    Row row;
    for (const auto& [c, v] : merged) {
      if (v != 0.0) row.terms.emplace_back(c, v);
    }
    row.rel = rel;
    row.rhs = rhs;
    row.family = std::move(family);
    rows_.push_back(std::move(row));
  }

  void set_cost(int c, double v) { objective_.at(c) = v; }
  void add_cost(int c, double v) { objective_.at(c) += v; }
  void set_objective_constant(double v) { objective_constant_ = v; }

  int num_vars() const { return static_cast<int>(keys_.size()); }
  int num_rows() const { return static_cast<int>(rows_.size()); }
  const std::vector<VarKey>& keys() const { return keys_; }
  const VarKey& key(int c) const { return keys_.at(c); }
  const std::string& name(int c) const { return names_.at(c); }
  const std::vector<double>& objective() const { return objective_; }
  double objective_constant() const { return objective_constant_; }
  const std::vector<Row>& rows() const { return rows_; }
  std::vector<Row>& mutable_rows() { return rows_; }

  std::size_t count(VarKind kind) const {
    return static_cast<std::size_t>(std::count_if(keys_.begin(), keys_.end(), [&](const VarKey& k) { return k.kind == kind; }));
  }

  std::size_t count_rows(const std::string& family) const {
    return static_cast<std::size_t>(std::count_if(rows_.begin(), rows_.end(), [&](const Row& r) { return r.family == family; }));
  }

  // Objective of an assignment, without the constant.
  double evaluate(const std::vector<char>& x) const {
    double v = 0.0;
    for (int c = 0; c < num_vars(); ++c) {
      if (x[c]) v += objective_[c];
    }
    return v;
  }

 private:
  std::vector<VarKey> keys_;
  std::vector<std::string> names_;
  std::map<VarKey, int> index_;
  std::vector<double> objective_;
  double objective_constant_ = 0.0;
  std::vector<Row> rows_;
};

struct RowViolation {
  int row = 0;
  std::string family;
  double lhs = 0.0;
  double rhs = 0.0;
};

inline double row_activity(const Row& row, const std::vector<char>& x) {
  double lhs = 0.0;
  for (const auto& [c, v] : row.terms) {
    if (x[c]) lhs += v;
  }
  return lhs;
}

// Independent feasibility check of a 0/1 assignment. The tolerance is
// relative to the magnitude of the row.
inline std::vector<RowViolation> check_assignment(const BinaryProgram& bp, const std::vector<char>& x,
                                                  double tol = 1e-7) {
  if (static_cast<int>(x.size()) != bp.num_vars()) throw Error("internal", "assignment has the wrong length");
  std::vector<RowViolation> out;
  for (int i = 0; i < bp.num_rows(); ++i) {
    const Row& row = bp.rows()[i];
    const double lhs = row_activity(row, x);
    double scale = std::max(1.0, std::abs(row.rhs));
    for (const auto& [c, v] : row.terms) scale = std::max(scale, std::abs(v));
    const double eps = tol * scale;
    bool ok = true;
    switch (row.rel) {
      case Relation::le: ok = lhs <= row.rhs + eps; break;
      case Relation::ge: ok = lhs >= row.rhs - eps; break;
      case Relation::eq: ok = std::abs(lhs - row.rhs) <= eps; break;
    }
    if (!ok) out.push_back({i, row.family, lhs, row.rhs});
  }
  return out;
}

inline bool is_feasible(const BinaryProgram& bp, const std::vector<char>& x) {
  return check_assignment(bp, x).empty();
}

namespace detail {

inline std::string lp_number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

inline std::string lp_sanitize(const std::string& s) {
  std::string out;
  for (char ch : s) {
    const bool keep = std::isalnum(static_cast<unsigned char>(ch)) || ch == '_' || ch == '.';
    out += keep ? ch : '_';
  }
  if (out.empty() || std::isdigit(static_cast<unsigned char>(out[0])) || out[0] == '.') out = "v" + out;
  return out;
}

inline void lp_terms(std::ostream& os, const std::vector<LinearTerm>& terms, const std::vector<std::string>& names) {
  int on_line = 0;
  bool first = true;
  for (const auto& [c, v] : terms) {
    if (v == 0.0) continue;
    if (on_line == 6) {
      os << "\n   ";
      on_line = 0;
    }
    if (v < 0) {
      os << " - ";
    } else if (!first) {
      os << " + ";
    } else {
      os << " ";
    }
    os << lp_number(std::abs(v)) << " " << names[c];
    first = false;
    ++on_line;
  }
  if (first) os << " 0 " << (names.empty() ? std::string("dummy") : names[0]);
}

}  // namespace detail

// Unique, LP-safe column names.
inline std::vector<std::string> lp_column_names(const BinaryProgram& bp) {
  std::vector<std::string> names;
  std::unordered_set<std::string> used;
  for (int c = 0; c < bp.num_vars(); ++c) {
    std::string n = detail::lp_sanitize(bp.name(c));
    if (!used.insert(n).second) {
      n += "_c" + std::to_string(c);
      used.insert(n);
    }
    names.push_back(std::move(n));
  }
  return names;
}

// CPLEX LP text format. The objective constant is emitted as a comment since
// not every reader accepts constants in the objective.
inline std::string write_lp(const BinaryProgram& bp) {
  const auto names = lp_column_names(bp);
  std::ostringstream os;
  os << "\\ divtune binary program: " << bp.num_vars() << " columns, " << bp.num_rows() << " rows\n";
  os << "\\ objective constant: " << detail::lp_number(bp.objective_constant()) << "\n";
  os << "Minimize\n obj:";
  std::vector<LinearTerm> obj;
  for (int c = 0; c < bp.num_vars(); ++c) {
    if (bp.objective()[c] != 0.0) obj.emplace_back(c, bp.objective()[c]);
  }
  detail::lp_terms(os, obj, names);
  os << "\nSubject To\n";
  for (int i = 0; i < bp.num_rows(); ++i) {
    const Row& row = bp.rows()[i];
    os << " " << detail::lp_sanitize(row.family) << "_" << i << ":";
    detail::lp_terms(os, row.terms, names);
    os << " " << to_string(row.rel) << " " << detail::lp_number(row.rhs) << "\n";
  }
  os << "Binary\n";
  for (int c = 0; c < bp.num_vars(); ++c) os << " " << names[c] << "\n";
  os << "End\n";
  return os.str();
}

}  // namespace divtune
