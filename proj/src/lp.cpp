#include "hubopt/lp.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace hubopt {

int VariableIndex::column(int node, int var, int t) const {
  if (node < 0 || node >= static_cast<int>(first.size()))
    throw Error("column lookup: node #" + std::to_string(node) +
                " out of range");
  const auto& vars = first[node];
  if (var < 0 || var >= static_cast<int>(vars.size()))
    throw Error("column lookup: variable #" + std::to_string(var) +
                " out of range on node #" + std::to_string(node));
  int base = vars[var];
  const Entry& head = columns[base];
  if (head.t < 0) {
    if (t != -1)
      throw Error("column lookup: scalar variable addressed with t=" +
                  std::to_string(t));
    return base;
  }
  if (t < 0)
    throw Error("column lookup: time-indexed variable addressed as scalar");
  int col = base + t;
  if (col >= static_cast<int>(columns.size()) || columns[col].node != head.node ||
      columns[col].var != head.var)
    throw Error("column lookup: index " + std::to_string(t) +
                " outside the horizon");
  return col;
}

VariableIndex index_variables(const ModelGraph& graph) {
  VariableIndex idx;
  const int T = graph.horizon.T;
  for (size_t ni = 0; ni < graph.nodes.size(); ++ni) {
    const NodeBlock& node = graph.nodes[ni];
    idx.first.emplace_back();
    for (size_t vi = 0; vi < node.variables.size(); ++vi) {
      idx.first.back().push_back(static_cast<int32_t>(idx.columns.size()));
      if (node.variables[vi].shape == VarShape::Scalar) {
        idx.columns.push_back({static_cast<int32_t>(ni),
                               static_cast<int32_t>(vi), -1});
      } else {
        for (int t = 0; t < T; ++t)
          idx.columns.push_back({static_cast<int32_t>(ni),
                                 static_cast<int32_t>(vi), t});
      }
    }
  }
  return idx;
}

std::string SparseLP::row_label(int r) const {
  if (r < 0 || r >= nrows()) return "row#" + std::to_string(r);
  if (static_cast<size_t>(r) < row_ref.size()) {
    const BlockRef& ref = row_ref[r];
    std::string s = ref.block + ":" + ref.item;
    if (ref.t >= 0) s += "[" + std::to_string(ref.t) + "]";
    return s;
  }
  return "row#" + std::to_string(r);
}

std::string SparseLP::col_label(int j) const {
  if (j < 0 || j >= ncols) return "col#" + std::to_string(j);
  if (static_cast<size_t>(j) < col_ref.size()) {
    const BlockRef& ref = col_ref[j];
    std::string s = ref.block + "." + ref.item;
    if (ref.t >= 0) s += "[" + std::to_string(ref.t) + "]";
    return s;
  }
  return "col#" + std::to_string(j);
}

namespace {

// Accumulates one expanded row, merging duplicate columns.
struct RowBuilder {
  std::vector<std::pair<int32_t, double>> entries;

  void add(int col, double val) {
    if (val == 0.0) return;
    entries.emplace_back(col, val);
  }

  // Sorts, merges, and drops exact cancellations.
  void finalize() {
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    size_t out = 0;
    for (size_t k = 0; k < entries.size();) {
      int32_t col = entries[k].first;
      double sum = 0.0;
      while (k < entries.size() && entries[k].first == col) sum += entries[k++].second;
      if (sum != 0.0) entries[out++] = {col, sum};
    }
    entries.resize(out);
  }
};

bool vacuous(Sense s, double rhs) {
  switch (s) {
    case Sense::Eq: return rhs == 0.0;
    case Sense::Le: return rhs >= 0.0;
    case Sense::Ge: return rhs <= 0.0;
  }
  return false;
}

class Assembler {
 public:
  Assembler(const ModelGraph& graph, const VariableIndex& index)
      : graph_(graph), index_(index) {
    lp_.name = "MODEL";
    lp_.ncols = index.count();
    lp_.c.assign(lp_.ncols, 0.0);
    lp_.lb.resize(lp_.ncols);
    lp_.ub.resize(lp_.ncols);
    lp_.col_ref.resize(lp_.ncols);
    for (int j = 0; j < lp_.ncols; ++j) {
      const VariableIndex::Entry& e = index.columns[j];
      const VariableDecl& decl = graph.nodes[e.node].variables[e.var];
      lp_.lb[j] = decl.lb;
      lp_.ub[j] = decl.ub;
      lp_.col_ref[j] = {graph.nodes[e.node].name, decl.name, e.t};
    }
  }

  SparseLP run() {
    for (size_t ni = 0; ni < graph_.nodes.size(); ++ni) {
      const NodeBlock& node = graph_.nodes[ni];
      auto col_of = [&](const Term& term, int t) {
        return resolve_node_column(static_cast<int>(ni), term, t);
      };
      for (const ConstraintBlock& cb : node.constraints)
        expand(cb, node.name, node.series, col_of);
      add_objective(static_cast<int>(ni));
    }
    for (const HyperedgeBlock& edge : graph_.hyperedges) {
      std::vector<std::pair<int, int>> members; // (node, var)
      for (const MemberRef& m : edge.members()) {
        int ni = graph_.find_node(m.node);
        if (ni < 0)
          throw Error("assemble: hyperedge '" + edge.name +
                      "' references unknown node '" + m.node + "'");
        int vi = graph_.nodes[ni].find_variable(m.var);
        if (vi < 0)
          throw Error("assemble: hyperedge '" + edge.name +
                      "' references unknown variable '" + m.var + "'");
        members.emplace_back(ni, vi);
      }
      auto col_of = [&](const Term& term, int t) {
        if (term.var < 0 || term.var >= static_cast<int32_t>(members.size()))
          throw Error("assemble: member index out of range in hyperedge '" +
                      edge.name + "'");
        auto [ni, vi] = members[term.var];
        return resolve_column(ni, vi, term, t);
      };
      for (const ConstraintBlock& cb : edge.constraints)
        expand(cb, edge.name, edge.series, col_of);
    }
    // Negated zero constants would serialize differently from zero.
    auto unsign = [](std::vector<double>& v) {
      for (double& d : v)
        if (d == 0.0) d = 0.0;
    };
    unsign(lp_.rhs);
    unsign(lp_.c);
    unsign(lp_.lb);
    unsign(lp_.ub);
    return std::move(lp_);
  }

 private:
  int resolve_node_column(int ni, const Term& term, int t) {
    return resolve_column(ni, term.var, term, t);
  }

  int resolve_column(int ni, int vi, const Term& term, int t) {
    switch (term.tkind) {
      case TimeRefKind::Scalar: return index_.column(ni, vi, -1);
      case TimeRefKind::Absolute: return index_.column(ni, vi, term.time);
      case TimeRefKind::Relative: return index_.column(ni, vi, t + term.time);
    }
    throw Error("assemble: unknown time reference kind");
  }

  template <class ColOf>
  void expand(const ConstraintBlock& cb, const std::string& owner,
              std::span<const std::vector<double>> series, ColOf&& col_of) {
    for (int32_t t : cb.expansion) {
      RowBuilder row;
      for (const Term& term : cb.expr.terms) {
        double coeff = term.coeff;
        if (term.series >= 0) coeff *= series[term.series][t];
        if (!std::isfinite(coeff))
          throw Error("assemble: non-finite coefficient in '" + owner + ":" +
                      cb.name + "'");
        row.add(col_of(term, t), coeff);
      }
      row.finalize();
      double constant = cb.expr.constant;
      if (cb.expr.constant_series >= 0)
        constant += cb.expr.constant_series_scale *
                    series[cb.expr.constant_series][t];
      double rhs = -constant;
      if (row.entries.empty()) {
        if (vacuous(cb.sense, rhs)) continue;
        throw Error("assemble: '" + owner + ":" + cb.name + "' at t=" +
                    std::to_string(t) +
                    " reduced to an unsatisfiable empty row");
      }
      int32_t r = lp_.nrows();
      for (const auto& [col, val] : row.entries) {
        lp_.a_row.push_back(r);
        lp_.a_col.push_back(col);
        lp_.a_val.push_back(val);
      }
      lp_.sense.push_back(cb.sense);
      lp_.rhs.push_back(rhs);
      lp_.row_ref.push_back({owner, cb.name, t});
    }
  }

  void add_objective(int ni) {
    const NodeBlock& node = graph_.nodes[ni];
    const int T = graph_.horizon.T;
    lp_.c0 += node.objective.constant;
    for (const Term& term : node.objective.terms) {
      switch (term.tkind) {
        case TimeRefKind::Scalar:
          lp_.c[index_.column(ni, term.var, -1)] += term.coeff;
          break;
        case TimeRefKind::Absolute:
          lp_.c[index_.column(ni, term.var, term.time)] += term.coeff;
          break;
        case TimeRefKind::Relative:
          for (int t = 0; t < T; ++t) {
            double coeff = term.coeff;
            if (term.series >= 0) coeff *= node.series[term.series][t];
            lp_.c[index_.column(ni, term.var, t + term.time)] += coeff;
          }
          break;
      }
    }
  }

  const ModelGraph& graph_;
  const VariableIndex& index_;
  SparseLP lp_;
};

} // namespace

SparseLP assemble_lp(const ModelGraph& graph, const VariableIndex& index) {
  return Assembler(graph, index).run();
}

SparseLP assemble_lp(const ModelGraph& graph) {
  VariableIndex index = index_variables(graph);
  return assemble_lp(graph, index);
}

namespace {

struct Fnv1a {
  uint64_t h = 1469598103934665603ull;
  void bytes(const void* p, size_t n) {
    const unsigned char* b = static_cast<const unsigned char*>(p);
    for (size_t k = 0; k < n; ++k) {
      h ^= b[k];
      h *= 1099511628211ull;
    }
  }
  void u64(uint64_t v) { bytes(&v, sizeof v); }
  void i32(int32_t v) { bytes(&v, sizeof v); }
  void f64(double v) {
    uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    u64(bits);
  }
  void f64s(const std::vector<double>& v) {
    u64(v.size());
    for (double d : v) f64(d);
  }
};

} // namespace

uint64_t fingerprint(const SparseLP& lp) {
  Fnv1a h;
  h.u64(static_cast<uint64_t>(lp.ncols));
  h.u64(static_cast<uint64_t>(lp.nrows()));
  h.f64s(lp.c);
  h.f64(lp.c0);
  h.f64s(lp.lb);
  h.f64s(lp.ub);
  for (Sense s : lp.sense) h.i32(static_cast<int32_t>(s));
  h.f64s(lp.rhs);
  h.u64(lp.nnz());
  for (size_t k = 0; k < lp.nnz(); ++k) {
    h.i32(lp.a_row[k]);
    h.i32(lp.a_col[k]);
    h.f64(lp.a_val[k]);
  }
  return h.h;
}

const char* status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Optimal: return "optimal";
    case SolveStatus::Feasible: return "feasible";
    case SolveStatus::Infeasible: return "infeasible";
    case SolveStatus::Unbounded: return "unbounded";
    case SolveStatus::IterationLimit: return "iteration-limit";
    case SolveStatus::Error: return "error";
  }
  return "?";
}

double Solution::value(const VariableIndex& index, int node, int var,
                       int t) const {
  return x.at(index.column(node, var, t));
}

Solution map_solution(const ModelGraph& graph, const VariableIndex& index,
                      const SparseLP& lp, std::vector<double> x,
                      SolveStatus status) {
  if (static_cast<int>(x.size()) != lp.ncols)
    throw Error("map_solution: vector length " + std::to_string(x.size()) +
                " != column count " + std::to_string(lp.ncols));
  Solution sol;
  sol.status = status;
  sol.x = std::move(x);

  sol.objective = lp.c0;
  for (int j = 0; j < lp.ncols; ++j) sol.objective += lp.c[j] * sol.x[j];

  for (size_t ni = 0; ni < graph.nodes.size(); ++ni) {
    ValueFn fn = [&, ni](int var, int t) -> std::optional<double> {
      return sol.x[index.column(static_cast<int>(ni), var, t)];
    };
    sol.node_objective.push_back(
        eval_objective(graph.nodes[ni], graph.horizon, fn));
  }

  std::vector<double> activity(lp.nrows(), 0.0);
  for (size_t k = 0; k < lp.nnz(); ++k)
    activity[lp.a_row[k]] += lp.a_val[k] * sol.x[lp.a_col[k]];
  for (int r = 0; r < lp.nrows(); ++r) {
    double g = activity[r] - lp.rhs[r];
    double viol = 0.0;
    switch (lp.sense[r]) {
      case Sense::Eq: viol = std::abs(g); break;
      case Sense::Le: viol = std::max(0.0, g); break;
      case Sense::Ge: viol = std::max(0.0, -g); break;
    }
    sol.max_row_residual = std::max(sol.max_row_residual, viol);
  }
  for (int j = 0; j < lp.ncols; ++j) {
    sol.max_bound_violation =
        std::max(sol.max_bound_violation, lp.lb[j] - sol.x[j]);
    sol.max_bound_violation =
        std::max(sol.max_bound_violation, sol.x[j] - lp.ub[j]);
  }
  sol.max_bound_violation = std::max(sol.max_bound_violation, 0.0);
  return sol;
}

} // namespace hubopt
