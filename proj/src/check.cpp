#include <cmath>

#include "hubopt/solve.hpp"

namespace hubopt {

std::vector<FeasibilityViolation> check_feasibility(
    const SparseLP& lp, std::span<const double> x, double tolerance) {
  if (x.size() != static_cast<size_t>(lp.ncols))
    throw Error("check_feasibility: point has " + std::to_string(x.size()) +
                " entries, problem has " + std::to_string(lp.ncols) +
                " columns");
  if (!(tolerance >= 0.0))
    throw Error("check_feasibility: tolerance must be non-negative");

  std::vector<FeasibilityViolation> out;
  for (int j = 0; j < lp.ncols; ++j) {
    double v = x[j];
    if (!std::isfinite(v)) {
      out.push_back({FeasibilityViolation::Kind::LowerBound, j, kInf,
                     lp.col_label(j) + " is not finite"});
      continue;
    }
    if (v < lp.lb[j] - tolerance)
      out.push_back({FeasibilityViolation::Kind::LowerBound, j, lp.lb[j] - v,
                     lp.col_label(j)});
    if (v > lp.ub[j] + tolerance)
      out.push_back({FeasibilityViolation::Kind::UpperBound, j, v - lp.ub[j],
                     lp.col_label(j)});
  }

  std::vector<double> activity(lp.nrows(), 0.0);
  for (size_t k = 0; k < lp.nnz(); ++k)
    activity[lp.a_row[k]] += lp.a_val[k] * x[lp.a_col[k]];
  for (int r = 0; r < lp.nrows(); ++r) {
    double gap = activity[r] - lp.rhs[r];
    double amount = 0.0;
    switch (lp.sense[r]) {
      case Sense::Eq: amount = std::abs(gap); break;
      case Sense::Le: amount = gap; break;
      case Sense::Ge: amount = -gap; break;
    }
    if (amount > tolerance)
      out.push_back(
          {FeasibilityViolation::Kind::Row, r, amount, lp.row_label(r)});
  }
  return out;
}

} // namespace hubopt
