#include "hubopt/model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace hubopt {

TimeHorizon make_horizon(int periods, double hours_per_period, double years) {
  if (periods < 1)
    throw ValidationError("horizon: T must be >= 1, got " +
                          std::to_string(periods));
  if (!(hours_per_period > 0.0))
    throw ValidationError("horizon: dt must be > 0, got " +
                          std::to_string(hours_per_period));
  if (!(years > 0.0))
    throw ValidationError("horizon: years must be > 0, got " +
                          std::to_string(years));
  return TimeHorizon{periods, hours_per_period, years};
}

const char* sense_name(Sense s) {
  switch (s) {
    case Sense::Eq: return "=";
    case Sense::Le: return "<=";
    case Sense::Ge: return ">=";
  }
  return "?";
}

AffineExpr& AffineExpr::add(int32_t var, TimeRefKind tkind, int32_t time,
                            double coeff, int32_t series) {
  for (Term& term : terms) {
    if (term.var == var && term.tkind == tkind && term.time == time &&
        term.series == series) {
      term.coeff += coeff;
      return *this;
    }
  }
  terms.push_back(Term{var, tkind, time, coeff, series});
  return *this;
}

std::vector<int32_t> full_range(int T) { return index_range(0, T); }

std::vector<int32_t> index_range(int lo, int hi_exclusive) {
  std::vector<int32_t> out;
  out.reserve(std::max(0, hi_exclusive - lo));
  for (int t = lo; t < hi_exclusive; ++t) out.push_back(t);
  return out;
}

int NodeBlock::find_variable(const std::string& var_name) const {
  for (size_t i = 0; i < variables.size(); ++i)
    if (variables[i].name == var_name) return static_cast<int>(i);
  return -1;
}

int NodeBlock::add_series(std::vector<double> values) {
  series.push_back(std::move(values));
  return static_cast<int>(series.size()) - 1;
}

std::vector<MemberRef> HyperedgeBlock::members() const {
  std::vector<MemberRef> out = tail;
  out.insert(out.end(), head.begin(), head.end());
  return out;
}

int HyperedgeBlock::add_series(std::vector<double> values) {
  series.push_back(std::move(values));
  return static_cast<int>(series.size()) - 1;
}

int ModelGraph::find_node(const std::string& name) const {
  for (size_t i = 0; i < nodes.size(); ++i)
    if (nodes[i].name == name) return static_cast<int>(i);
  return -1;
}

namespace {

struct VarView {
  // Uniform view over node variables or hyperedge member variables.
  std::vector<VariableDecl> decls;
};

void check_expr(const std::string& block, const std::string& where,
                const AffineExpr& expr, const VarView& vars,
                std::span<const std::vector<double>> series,
                const std::vector<int32_t>& expansion, int T,
                bool objective_form, std::vector<GraphDiagnostic>& out) {
  auto diag = [&](const std::string& rule, const std::string& msg,
                  int index = -1) {
    out.push_back(GraphDiagnostic{block, rule, where + ": " + msg, index});
  };

  if (!std::isfinite(expr.constant))
    diag("nonfinite-constant", "constant is not finite");
  if (expr.constant_series >= 0 &&
      expr.constant_series >= static_cast<int32_t>(series.size()))
    diag("bad-series", "constant series index out of range");

  for (const Term& term : expr.terms) {
    if (term.var < 0 || term.var >= static_cast<int32_t>(vars.decls.size())) {
      diag("unknown-variable",
           "term references variable #" + std::to_string(term.var));
      continue;
    }
    const VariableDecl& decl = vars.decls[term.var];
    if (!std::isfinite(term.coeff))
      diag("nonfinite-coefficient",
           "coefficient on '" + decl.name + "' is not finite");
    if (term.series >= 0) {
      if (term.series >= static_cast<int32_t>(series.size())) {
        diag("bad-series", "series index out of range on '" + decl.name + "'");
      } else if (static_cast<int>(series[term.series].size()) != T) {
        diag("bad-series", "series length " +
                               std::to_string(series[term.series].size()) +
                               " != horizon " + std::to_string(T) + " on '" +
                               decl.name + "'");
      }
    }
    if (decl.shape == VarShape::Scalar) {
      if (term.tkind != TimeRefKind::Scalar)
        diag("time-ref-on-scalar",
             "time-indexed reference to scalar '" + decl.name + "'");
      continue;
    }
    switch (term.tkind) {
      case TimeRefKind::Scalar:
        diag("scalar-ref-on-series",
             "scalar reference to time-indexed '" + decl.name + "'");
        break;
      case TimeRefKind::Absolute:
        if (term.time < 0 || term.time >= T)
          diag("index-out-of-range",
               "absolute index " + std::to_string(term.time) + " on '" +
                   decl.name + "' outside [0, " + std::to_string(T - 1) + "]",
               term.time);
        break;
      case TimeRefKind::Relative: {
        if (objective_form && term.time != 0) {
          diag("objective-offset",
               "objective term on '" + decl.name +
                   "' uses nonzero offset " + std::to_string(term.time));
          break;
        }
        // Report the first expansion index whose shifted reference escapes
        // the horizon.
        for (int32_t t : expansion) {
          int64_t idx = static_cast<int64_t>(t) + term.time;
          if (idx < 0 || idx >= T) {
            diag("index-out-of-range",
                 "offset " + std::to_string(term.time) + " on '" + decl.name +
                     "' resolves to " + std::to_string(idx) + " at t=" +
                     std::to_string(t),
                 t);
            break;
          }
        }
        break;
      }
    }
  }
}

} // namespace

std::vector<GraphDiagnostic> validate_graph(const ModelGraph& graph) {
  std::vector<GraphDiagnostic> out;
  const int T = graph.horizon.T;
  auto diag = [&](const std::string& block, const std::string& rule,
                  const std::string& msg, int index = -1) {
    out.push_back(GraphDiagnostic{block, rule, msg, index});
  };

  if (T < 1 || !(graph.horizon.dt > 0) || !(graph.horizon.years > 0))
    diag("<horizon>", "bad-horizon", "invalid horizon parameters");

  for (size_t a = 0; a < graph.nodes.size(); ++a)
    for (size_t b = a + 1; b < graph.nodes.size(); ++b)
      if (graph.nodes[a].name == graph.nodes[b].name)
        diag(graph.nodes[a].name, "duplicate-node",
             "node name declared more than once");

  for (const NodeBlock& node : graph.nodes) {
    VarView vars{node.variables};
    for (size_t a = 0; a < node.variables.size(); ++a) {
      for (size_t b = a + 1; b < node.variables.size(); ++b)
        if (node.variables[a].name == node.variables[b].name)
          diag(node.name, "duplicate-variable",
               "variable '" + node.variables[a].name + "' declared twice");
      const VariableDecl& v = node.variables[a];
      if (v.lb > v.ub)
        diag(node.name, "bad-bounds",
             "variable '" + v.name + "' has lb > ub");
    }
    for (const ConstraintBlock& c : node.constraints) {
      for (int32_t t : c.expansion)
        if (t < 0 || t >= T) {
          diag(node.name, "expansion-out-of-range",
               "constraint '" + c.name + "' expands at t=" + std::to_string(t),
               t);
          break;
        }
      check_expr(node.name, "constraint '" + c.name + "'", c.expr, vars,
                 node.series, c.expansion, T, false, out);
    }
    check_expr(node.name, "objective", node.objective, vars, node.series,
               full_range(T), T, true, out);
  }

  for (const HyperedgeBlock& edge : graph.hyperedges) {
    for (const MemberRef& m : edge.tail)
      for (const MemberRef& h : edge.head)
        if (m == h)
          diag(edge.name, "tail-head-overlap",
               "member " + m.node + "." + m.var + " appears on both sides");

    VarView vars;
    bool resolved_all = true;
    for (const MemberRef& m : edge.members()) {
      int ni = graph.find_node(m.node);
      if (ni < 0) {
        diag(edge.name, "unknown-node", "member references unknown node '" +
                                            m.node + "'");
        resolved_all = false;
        vars.decls.push_back(VariableDecl{m.node + "." + m.var});
        continue;
      }
      int vi = graph.nodes[ni].find_variable(m.var);
      if (vi < 0) {
        diag(edge.name, "unknown-variable",
             "no variable '" + m.var + "' on node '" + m.node + "'");
        resolved_all = false;
        vars.decls.push_back(VariableDecl{m.node + "." + m.var});
        continue;
      }
      const VariableDecl& decl = graph.nodes[ni].variables[vi];
      if (decl.kind != VarKind::External)
        diag(edge.name, "non-external-variable",
             "hyperedge references non-external variable '" + m.node + "." +
                 m.var + "'");
      vars.decls.push_back(decl);
    }
    (void)resolved_all;
    for (const ConstraintBlock& c : edge.constraints) {
      for (int32_t t : c.expansion)
        if (t < 0 || t >= T) {
          diag(edge.name, "expansion-out-of-range",
               "constraint '" + c.name + "' expands at t=" + std::to_string(t),
               t);
          break;
        }
      check_expr(edge.name, "constraint '" + c.name + "'", c.expr, vars,
                 edge.series, c.expansion, T, false, out);
    }
  }
  return out;
}

double eval_affine(const AffineExpr& expr,
                   std::span<const std::vector<double>> series,
                   const ValueFn& values, int t, const std::string& who) {
  double acc = expr.constant;
  if (expr.constant_series >= 0)
    acc += expr.constant_series_scale * series[expr.constant_series][t];
  for (const Term& term : expr.terms) {
    int idx;
    switch (term.tkind) {
      case TimeRefKind::Scalar: idx = -1; break;
      case TimeRefKind::Relative: idx = t + term.time; break;
      case TimeRefKind::Absolute: idx = term.time; break;
      default: idx = -1;
    }
    std::optional<double> v = values(term.var, idx);
    if (!v) {
      std::ostringstream os;
      os << "unresolved variable #" << term.var;
      if (idx >= 0) os << " at index " << idx;
      if (!who.empty()) os << " in " << who;
      throw EvalError(os.str());
    }
    double coeff = term.coeff;
    if (term.series >= 0) coeff *= series[term.series][t];
    acc += coeff * *v;
  }
  return acc;
}

double eval_objective(const NodeBlock& node, const TimeHorizon& horizon,
                      const ValueFn& values) {
  double acc = node.objective.constant;
  for (const Term& term : node.objective.terms) {
    if (term.tkind == TimeRefKind::Relative) {
      for (int t = 0; t < horizon.T; ++t) {
        std::optional<double> v = values(term.var, t + term.time);
        if (!v)
          throw EvalError("unresolved variable #" + std::to_string(term.var) +
                          " at index " + std::to_string(t + term.time) +
                          " in objective of node '" + node.name + "'");
        double coeff = term.coeff;
        if (term.series >= 0) coeff *= node.series[term.series][t];
        acc += coeff * *v;
      }
    } else {
      int idx = term.tkind == TimeRefKind::Scalar ? -1 : term.time;
      std::optional<double> v = values(term.var, idx);
      if (!v)
        throw EvalError("unresolved variable #" + std::to_string(term.var) +
                        " in objective of node '" + node.name + "'");
      double coeff = term.coeff;
      if (term.series >= 0)
        coeff *= node.series[term.series][idx < 0 ? 0 : idx];
      acc += coeff * *v;
    }
  }
  return acc;
}

} // namespace hubopt
