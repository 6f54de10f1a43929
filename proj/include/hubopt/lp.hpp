#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "hubopt/model.hpp"

// Flattening of a ModelGraph into a sparse mixed-sense LP, the MPS
// interchange writer/reader, and solution mapping back onto blocks.

namespace hubopt {

// Dense column ordering: nodes in declaration order, then each node's
// variables in declaration order, time ascending; scalars take one column.
struct VariableIndex {
  struct Entry {
    int32_t node = -1;
    int32_t var = -1;
    int32_t t = -1; // -1 for scalar variables
  };
  std::vector<Entry> columns;            // column id -> owner
  std::vector<std::vector<int32_t>> first; // first[node][var] = base column
  std::vector<int32_t> horizon_len;      // per (node,var) flattened? unused

  int count() const { return static_cast<int>(columns.size()); }
  // t = -1 addresses scalars; throws on shape mismatch or range error.
  int column(int node, int var, int t = -1) const;
};

VariableIndex index_variables(const ModelGraph& graph);

// Human-readable provenance of a row or column.
struct BlockRef {
  std::string block;
  std::string item; // constraint name (rows) or variable name (columns)
  int32_t t = -1;
  bool operator==(const BlockRef&) const = default;
};

struct SparseLP {
  std::string name = "LP";
  int ncols = 0;
  std::vector<double> c;
  double c0 = 0.0; // objective constant
  std::vector<double> lb, ub;
  std::vector<Sense> sense;
  std::vector<double> rhs;
  // Triplets sorted by (row, col), duplicates summed, zeros dropped.
  std::vector<int32_t> a_row, a_col;
  std::vector<double> a_val;
  // Optional provenance, parallel to rows/columns when populated.
  std::vector<BlockRef> row_ref, col_ref;

  int nrows() const { return static_cast<int>(rhs.size()); }
  size_t nnz() const { return a_val.size(); }
  std::string row_label(int r) const;
  std::string col_label(int j) const;
};

SparseLP assemble_lp(const ModelGraph& graph, const VariableIndex& index);
SparseLP assemble_lp(const ModelGraph& graph);

// Content hash over sizes, costs, bounds, senses, right-hand sides, and
// sorted triplets; stable across runs and platforms.
uint64_t fingerprint(const SparseLP& lp);

enum class SolveStatus : uint8_t {
  Optimal,
  Feasible, // mapped point, optimality not claimed
  Infeasible,
  Unbounded,
  IterationLimit,
  Error,
};

const char* status_name(SolveStatus s);

struct Solution {
  SolveStatus status = SolveStatus::Error;
  double objective = 0.0;
  std::vector<double> x;
  std::vector<double> node_objective; // per node, declaration order
  double max_row_residual = 0.0;
  double max_bound_violation = 0.0;
  std::vector<double> ray; // infeasibility/unboundedness certificate
  int64_t iterations = 0;
  std::string detail; // free-form solver note

  double value(const VariableIndex& index, int node, int var,
               int t = -1) const;
};

// Attaches a raw primal vector to the model: recomputes the objective,
// per-node contributions, and residual metrics. The caller supplies the
// claimed status; metrics are always recomputed locally.
Solution map_solution(const ModelGraph& graph, const VariableIndex& index,
                      const SparseLP& lp, std::vector<double> x,
                      SolveStatus status);

// Fixed-format MPS (sections NAME, ROWS, COLUMNS, RHS, BOUNDS, ENDATA;
// objective row OBJ; minimization). Numbers use the shortest decimal that
// parses back to the identical double, so emit/parse round-trips exactly.
std::string emit_mps(const SparseLP& lp);

// Sidecar name map: tab-separated (mangled, kind, block, item, t).
std::string emit_name_map(const SparseLP& lp);

// Mangled names used in emitted MPS files: "C"/"R" plus a base-36 id.
std::string mps_col_name(int j);
std::string mps_row_name(int r);
// Inverse of mps_col_name; -1 when the name does not have that shape.
int mps_col_id(std::string_view name);

// Reads the fixed-format subset written by emit_mps (tolerant of general
// whitespace-aligned files). RANGES and other unsupported sections error.
SparseLP parse_mps(const std::string& text);

} // namespace hubopt
