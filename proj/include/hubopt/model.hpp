#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

// Core intermediate representation: a discrete-time hypergraph of node
// blocks (variables, affine constraints, local objective) coupled by
// hyperedge blocks over the nodes' external variables. Assembly flattens
// this IR into a sparse LP; everything upstream (templates, the modeling
// language) produces it and everything downstream consumes it.

namespace hubopt {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(what) {}
};

class EvalError : public Error {
 public:
  explicit EvalError(const std::string& what) : Error(what) {}
};

struct TimeHorizon {
  int T = 1;          // number of periods
  double dt = 1.0;    // hours per period
  double years = 1.0; // years spanned by the horizon
};

// Validates and packages horizon parameters.
TimeHorizon make_horizon(int periods, double hours_per_period, double years);

enum class VarKind : uint8_t { Internal, External };
enum class VarShape : uint8_t { Scalar, TimeIndexed };

struct VariableDecl {
  std::string name;
  VarKind kind = VarKind::Internal;
  VarShape shape = VarShape::TimeIndexed;
  double lb = 0.0;
  double ub = kInf;
  std::string unit; // documentation only, never checked
};

enum class TimeRefKind : uint8_t {
  Scalar,   // variable has no time dimension
  Relative, // index = expansion t + offset
  Absolute  // index fixed regardless of expansion t
};

// One linear term. `series` (when >= 0) indexes the owning block's series
// pool; the effective coefficient at expansion time t is coeff * series[t].
struct Term {
  int32_t var = -1;
  TimeRefKind tkind = TimeRefKind::Relative;
  int32_t time = 0; // offset (Relative) or absolute index (Absolute)
  double coeff = 0.0;
  int32_t series = -1;
};

// Sparse affine form over one block's variables. Duplicate
// (var, time ref, series) keys are merged on insertion.
struct AffineExpr {
  std::vector<Term> terms;
  double constant = 0.0;
  int32_t constant_series = -1; // adds series[t] * constant_series_scale
  double constant_series_scale = 1.0;

  AffineExpr& add(int32_t var, TimeRefKind tkind, int32_t time, double coeff,
                  int32_t series = -1);
  AffineExpr& add_scalar(int32_t var, double coeff) {
    return add(var, TimeRefKind::Scalar, 0, coeff);
  }
  AffineExpr& add_rel(int32_t var, int32_t offset, double coeff,
                      int32_t series = -1) {
    return add(var, TimeRefKind::Relative, offset, coeff, series);
  }
  AffineExpr& add_abs(int32_t var, int32_t index, double coeff) {
    return add(var, TimeRefKind::Absolute, index, coeff);
  }
};

enum class Sense : uint8_t { Eq, Le, Ge };

const char* sense_name(Sense s);

// A constraint template: `expr sense 0`, expanded once per index in
// `expansion`. Absolute-index constraints use a singleton expansion set.
struct ConstraintBlock {
  std::string name;
  AffineExpr expr;
  Sense sense = Sense::Eq;
  std::vector<int32_t> expansion;
};

// Builds {0, 1, ..., T-1} and sub-ranges for expansion sets.
std::vector<int32_t> full_range(int T);
std::vector<int32_t> index_range(int lo, int hi_exclusive);

struct NodeBlock {
  std::string name;
  std::vector<VariableDecl> variables;
  std::vector<std::vector<double>> series; // per-block coefficient series
  std::vector<ConstraintBlock> constraints;
  // Local objective: Scalar/Absolute terms contribute once, Relative terms
  // (offset 0) are summed over every period.
  AffineExpr objective;

  int find_variable(const std::string& var_name) const;
  int add_series(std::vector<double> values);
};

struct MemberRef {
  std::string node;
  std::string var;
  bool operator==(const MemberRef&) const = default;
};

// Coupling block: constraints over the external variables of its members.
// Constraint terms index into members() = tail followed by head.
struct HyperedgeBlock {
  std::string name;
  std::vector<MemberRef> tail;
  std::vector<MemberRef> head;
  std::vector<std::vector<double>> series;
  std::vector<ConstraintBlock> constraints;

  std::vector<MemberRef> members() const;
  int add_series(std::vector<double> values);
};

struct ModelGraph {
  TimeHorizon horizon;
  std::vector<NodeBlock> nodes;
  std::vector<HyperedgeBlock> hyperedges;

  int find_node(const std::string& name) const;
};

struct GraphDiagnostic {
  std::string block;   // node or hyperedge name
  std::string rule;    // short identifier of the violated rule
  std::string message; // human-readable detail
  int index = -1;      // offending time index or -1
};

// Structural validation; empty result means the graph is safe to assemble.
std::vector<GraphDiagnostic> validate_graph(const ModelGraph& graph);

// Value lookup used by evaluation: (variable index, time index or -1 for
// scalars) -> value, or nullopt when the assignment does not cover it.
using ValueFn = std::function<std::optional<double>(int var, int t)>;

// Evaluates `expr` at expansion index t. Throws EvalError on an unresolved
// reference; `who` names the owning block in messages.
double eval_affine(const AffineExpr& expr,
                   std::span<const std::vector<double>> series,
                   const ValueFn& values, int t, const std::string& who = {});

// Objective evaluation: relative terms summed over all T periods.
double eval_objective(const NodeBlock& node, const TimeHorizon& horizon,
                      const ValueFn& values);

} // namespace hubopt
