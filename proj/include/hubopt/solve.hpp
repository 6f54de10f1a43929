#pragma once

#include <string>
#include <vector>

#include "hubopt/lp.hpp"

namespace hubopt {

struct SimplexConfig {
  double feas_tol = 1e-7;
  double opt_tol = 1e-7;
  int64_t max_iterations = -1; // -1 selects 50 * (rows + cols)
  enum class Pricing { Dantzig, Devex } pricing = Pricing::Devex;
  int bland_threshold = 1000;  // degenerate pivots before Bland's rule
  size_t max_nonzeros = 2'000'000;
  int max_dense_rows = 8192;   // dense basis factorization guard
  int refactor_interval = 64;
  bool scale = true;
};

// Bounded-variable primal revised simplex with a composite two-phase
// start, dense LU basis factorization with product-form updates, and
// power-of-two equilibration scaling. Deterministic for a fixed config.
Solution solve_simplex(const SparseLP& lp, const SimplexConfig& cfg = {});

struct ExternalSolverConfig {
  // Command template; "{mps}" and "{sol}" expand to the problem and
  // solution file paths. Overridable globally via HUBOPT_EXTERNAL_SOLVER.
  std::string command;
  double timeout_seconds = 600.0;
};

// Writes MPS into workdir, runs the external command, and reads back a
// "name value" per-line solution file (a line "=infeasible=" or
// "=unbounded=" conveys status). Residuals are recomputed locally.
Solution solve_external(const SparseLP& lp, const ExternalSolverConfig& cfg,
                        const std::string& workdir);

struct FeasibilityViolation {
  enum class Kind : uint8_t { Row, LowerBound, UpperBound } kind;
  int index = -1;      // row or column
  double amount = 0.0; // how far beyond the bound or right-hand side
  std::string label;   // human-readable row/column name when available
};

// Independent verifier: walks the triplets directly and reports every row
// or bound violated beyond `tolerance`. Empty result means feasible.
std::vector<FeasibilityViolation> check_feasibility(
    const SparseLP& lp, std::span<const double> x, double tolerance);

} // namespace hubopt
