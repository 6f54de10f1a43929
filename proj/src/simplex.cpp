#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>

#include "hubopt/solve.hpp"

namespace hubopt {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kPivotTol = 1e-9;
constexpr double kDegenTol = 1e-10;

// Nearest power of two to 1/magnitude, for exact equilibration.
double pow2_scale(double maxabs) {
  if (maxabs <= 0.0 || !std::isfinite(maxabs)) return 1.0;
  int exp = 0;
  std::frexp(maxabs, &exp); // maxabs = f * 2^exp, f in [0.5, 1)
  return std::ldexp(1.0, -exp + 1);
}

enum class VStat : uint8_t { AtLower, AtUpper, Basic, FreeZero };

class Simplex {
 public:
  Simplex(const SparseLP& lp, const SimplexConfig& cfg) : lp_(lp), cfg_(cfg) {}

  Solution run() {
    guard();
    if (lp_.ncols == 0) return empty_columns();
    setup();
    if (bound_order_broken_) return plain_status(SolveStatus::Infeasible);
    if (m_ == 0) return pure_bounds();

    refresh();
    int64_t max_iter = cfg_.max_iterations >= 0
                           ? cfg_.max_iterations
                           : 100 + 50ll * (m_ + n_);
    int stall = 0;
    bool bland = false;
    int audits = 0;

    for (iterations_ = 0;; ++iterations_) {
      if (iterations_ > max_iter) return finish(SolveStatus::IterationLimit);

      double viol = max_violation();
      if (phase1_ && viol <= cfg_.feas_tol) enter_phase2();
      else if (!phase1_ && viol > 10.0 * cfg_.feas_tol) {
        // Numerical drift made a basic value leave its range: refactorize
        // and, if it persists, fall back to phase 1.
        refresh();
        if (max_violation() > 10.0 * cfg_.feas_tol) {
          phase1_ = true;
          weights_.assign(ntot_, 1.0);
        }
      }

      price();
      if (entering_ < 0) {
        if (phase1_) {
          if (viol > cfg_.feas_tol) return infeasible_certificate();
          enter_phase2();
          continue;
        }
        // Re-verify optimality against a fresh factorization to rule out
        // drift in the product-form updates.
        if (audits++ < 3 && !etas_.empty()) {
          refresh();
          price();
          if (entering_ >= 0) goto pivoting;
        }
        return finish(SolveStatus::Optimal);
      }
    pivoting:
      if (bland) choose_bland_entering();

      if (!ratio_test(bland)) {
        if (phase1_) { // cannot happen with a bounded phase-1 objective
          refresh();
          if (!ratio_test(bland)) return finish(SolveStatus::Error);
        } else {
          return unbounded_certificate();
        }
      }

      bool degenerate = step();
      if (degenerate) {
        if (++stall > cfg_.bland_threshold) bland = true;
      } else {
        stall = 0;
        bland = false;
      }
    }
  }

 private:
  void guard() {
    if (lp_.nnz() > cfg_.max_nonzeros)
      throw Error("simplex: problem has " + std::to_string(lp_.nnz()) +
                  " nonzeros, above the embedded guard of " +
                  std::to_string(cfg_.max_nonzeros) +
                  "; use the external solver bridge (solve_external)");
    if (lp_.nrows() > cfg_.max_dense_rows)
      throw Error("simplex: " + std::to_string(lp_.nrows()) +
                  " rows exceed the dense-basis guard of " +
                  std::to_string(cfg_.max_dense_rows) +
                  "; use the external solver bridge (solve_external)");
    if (!(cfg_.feas_tol > 0.0) || !(cfg_.opt_tol > 0.0))
      throw Error("simplex: tolerances must be positive");
    for (double v : lp_.a_val)
      if (!std::isfinite(v)) throw Error("simplex: non-finite coefficient");
    for (double v : lp_.c)
      if (!std::isfinite(v)) throw Error("simplex: non-finite cost");
    for (double v : lp_.rhs)
      if (!std::isfinite(v)) throw Error("simplex: non-finite right-hand side");
  }

  void setup() {
    m_ = lp_.nrows();
    n_ = lp_.ncols;
    ntot_ = n_ + m_;

    row_scale_.assign(m_, 1.0);
    col_scale_.assign(n_, 1.0);
    if (cfg_.scale && m_ > 0) {
      std::vector<double> rmax(m_, 0.0);
      for (size_t k = 0; k < lp_.nnz(); ++k)
        rmax[lp_.a_row[k]] = std::max(rmax[lp_.a_row[k]],
                                      std::abs(lp_.a_val[k]));
      for (int r = 0; r < m_; ++r) row_scale_[r] = pow2_scale(rmax[r]);
      std::vector<double> cmax(n_, 0.0);
      for (size_t k = 0; k < lp_.nnz(); ++k)
        cmax[lp_.a_col[k]] =
            std::max(cmax[lp_.a_col[k]],
                     std::abs(lp_.a_val[k]) * row_scale_[lp_.a_row[k]]);
      for (int j = 0; j < n_; ++j) col_scale_[j] = pow2_scale(cmax[j]);
    }

    // Compressed columns of the scaled structural matrix.
    start_.assign(n_ + 1, 0);
    for (size_t k = 0; k < lp_.nnz(); ++k) ++start_[lp_.a_col[k] + 1];
    for (int j = 0; j < n_; ++j) start_[j + 1] += start_[j];
    rows_.resize(lp_.nnz());
    vals_.resize(lp_.nnz());
    {
      std::vector<int> fill(start_.begin(), start_.end() - 1);
      for (size_t k = 0; k < lp_.nnz(); ++k) {
        int j = lp_.a_col[k];
        int slot = fill[j]++;
        rows_[slot] = lp_.a_row[k];
        vals_[slot] = lp_.a_val[k] * row_scale_[lp_.a_row[k]] * col_scale_[j];
      }
    }

    lb_.resize(ntot_);
    ub_.resize(ntot_);
    cost_.assign(ntot_, 0.0);
    for (int j = 0; j < n_; ++j) {
      lb_[j] = lp_.lb[j] / col_scale_[j];
      ub_[j] = lp_.ub[j] / col_scale_[j];
      cost_[j] = lp_.c[j] * col_scale_[j];
      if (lb_[j] > ub_[j]) bound_order_broken_ = true;
    }
    b_.resize(m_);
    for (int r = 0; r < m_; ++r) {
      b_[r] = lp_.rhs[r] * row_scale_[r];
      int sl = n_ + r;
      switch (lp_.sense[r]) {
        case Sense::Eq: lb_[sl] = 0.0; ub_[sl] = 0.0; break;
        case Sense::Le: lb_[sl] = 0.0; ub_[sl] = kInf; break;
        case Sense::Ge: lb_[sl] = -kInf; ub_[sl] = 0.0; break;
      }
    }

    vstat_.assign(ntot_, VStat::AtLower);
    x_.assign(ntot_, 0.0);
    for (int j = 0; j < ntot_; ++j) {
      if (std::isfinite(lb_[j])) {
        vstat_[j] = VStat::AtLower;
        x_[j] = lb_[j];
      } else if (std::isfinite(ub_[j])) {
        vstat_[j] = VStat::AtUpper;
        x_[j] = ub_[j];
      } else {
        vstat_[j] = VStat::FreeZero;
        x_[j] = 0.0;
      }
    }
    basis_.resize(m_);
    for (int r = 0; r < m_; ++r) {
      basis_[r] = n_ + r;
      vstat_[n_ + r] = VStat::Basic;
    }
    phase1_ = true;
    weights_.assign(ntot_, 1.0);
  }

  // Dense copy of (scaled) column j, logical columns included.
  void column(int j, VectorXd& out) const {
    out.setZero(m_);
    if (j >= n_) {
      out[j - n_] = 1.0;
      return;
    }
    for (int k = start_[j]; k < start_[j + 1]; ++k) out[rows_[k]] = vals_[k];
  }

  void factorize() {
    MatrixXd B(m_, m_);
    B.setZero();
    for (int p = 0; p < m_; ++p) {
      int j = basis_[p];
      if (j >= n_) {
        B(j - n_, p) = 1.0;
      } else {
        for (int k = start_[j]; k < start_[j + 1]; ++k)
          B(rows_[k], p) = vals_[k];
      }
    }
    lu_.compute(B);
    etas_.clear();
  }

  void ftran(VectorXd& v) const {
    v = lu_.solve(v);
    for (const auto& [p, w] : etas_) {
      double t = v[p] / w[p];
      if (t != 0.0) {
        v -= t * w;
        v[p] = t;
      } else {
        v[p] = 0.0;
      }
    }
  }

  void btran(VectorXd& v) const {
    for (auto it = etas_.rbegin(); it != etas_.rend(); ++it) {
      const auto& [p, w] = *it;
      double dot = w.dot(v);
      v[p] -= (dot - v[p]) / w[p];
    }
    v = lu_.transpose().solve(v);
  }

  // Recomputes basic values from the current nonbasic point.
  void refresh() {
    factorize();
    VectorXd rhs = b_;
    for (int j = 0; j < ntot_; ++j) {
      if (vstat_[j] == VStat::Basic || x_[j] == 0.0) continue;
      if (j >= n_) {
        rhs[j - n_] -= x_[j];
      } else {
        for (int k = start_[j]; k < start_[j + 1]; ++k)
          rhs[rows_[k]] -= vals_[k] * x_[j];
      }
    }
    ftran(rhs);
    for (int p = 0; p < m_; ++p) x_[basis_[p]] = rhs[p];
  }

  double max_violation() const {
    double v = 0.0;
    for (int p = 0; p < m_; ++p) {
      int j = basis_[p];
      v = std::max(v, lb_[j] - x_[j]);
      v = std::max(v, x_[j] - ub_[j]);
    }
    return std::max(v, 0.0);
  }

  void enter_phase2() {
    phase1_ = false;
    weights_.assign(ntot_, 1.0);
  }

  double phase_cost(int j) const {
    if (!phase1_) return cost_[j];
    if (vstat_[j] != VStat::Basic) return 0.0;
    if (x_[j] < lb_[j] - kDegenTol) return -1.0;
    if (x_[j] > ub_[j] + kDegenTol) return 1.0;
    return 0.0;
  }

  // Prices every nonbasic column; sets entering_ (or -1) and enter_dir_.
  void price() {
    VectorXd cb(m_);
    for (int p = 0; p < m_; ++p) cb[p] = phase_cost(basis_[p]);
    y_ = cb;
    btran(y_);

    entering_ = -1;
    double best = 0.0;
    for (int j = 0; j < ntot_; ++j) {
      if (vstat_[j] == VStat::Basic) continue;
      if (lb_[j] == ub_[j]) continue; // fixed
      double d = reduced_cost(j);
      int dir = 0;
      if (vstat_[j] == VStat::AtLower && d < -cfg_.opt_tol) dir = +1;
      else if (vstat_[j] == VStat::AtUpper && d > cfg_.opt_tol) dir = -1;
      else if (vstat_[j] == VStat::FreeZero && std::abs(d) > cfg_.opt_tol)
        dir = d < 0 ? +1 : -1;
      if (dir == 0) continue;
      double score = cfg_.pricing == SimplexConfig::Pricing::Devex
                         ? d * d / weights_[j]
                         : std::abs(d);
      if (score > best) {
        best = score;
        entering_ = j;
        enter_dir_ = dir;
        enter_d_ = d;
      }
    }
  }

  double reduced_cost(int j) const {
    double d = phase1_ ? 0.0 : cost_[j];
    if (j >= n_) return d - y_[j - n_];
    for (int k = start_[j]; k < start_[j + 1]; ++k)
      d -= y_[rows_[k]] * vals_[k];
    return d;
  }

  void choose_bland_entering() {
    entering_ = -1;
    for (int j = 0; j < ntot_; ++j) {
      if (vstat_[j] == VStat::Basic || lb_[j] == ub_[j]) continue;
      double d = reduced_cost(j);
      if (vstat_[j] == VStat::AtLower && d < -cfg_.opt_tol) {
        entering_ = j; enter_dir_ = +1; enter_d_ = d; return;
      }
      if (vstat_[j] == VStat::AtUpper && d > cfg_.opt_tol) {
        entering_ = j; enter_dir_ = -1; enter_d_ = d; return;
      }
      if (vstat_[j] == VStat::FreeZero && std::abs(d) > cfg_.opt_tol) {
        entering_ = j; enter_dir_ = d < 0 ? +1 : -1; enter_d_ = d; return;
      }
    }
  }

  // Bounded-variable ratio test with phase-1 piecewise targets. Returns
  // false when the step is unblocked (unbounded direction).
  bool ratio_test(bool bland) {
    w_.resize(m_);
    column(entering_, w_);
    ftran(w_);

    double best_t = kInf;
    leave_pos_ = -1;
    double best_piv = 0.0;

    // The entering variable's own opposite bound.
    double span = ub_[entering_] - lb_[entering_];
    if (std::isfinite(span)) best_t = span;

    for (int p = 0; p < m_; ++p) {
      double wp = w_[p];
      if (std::abs(wp) <= kPivotTol) continue;
      int j = basis_[p];
      double rate = -enter_dir_ * wp; // d x_Bp / d t
      double v = x_[j];
      double target;
      if (rate > 0.0) {
        if (v < lb_[j] - kDegenTol) target = lb_[j];
        else if (v <= ub_[j] + kDegenTol) target = ub_[j];
        else continue; // already above: moving up has no breakpoint
        if (!std::isfinite(target)) continue;
      } else {
        if (v > ub_[j] + kDegenTol) target = ub_[j];
        else if (v >= lb_[j] - kDegenTol) target = lb_[j];
        else continue;
        if (!std::isfinite(target)) continue;
      }
      double t = (target - v) / rate;
      if (t < 0.0) t = 0.0;
      if (t > best_t + kDegenTol) continue;
      bool take;
      if (leave_pos_ < 0 || t < best_t - kDegenTol) take = true;
      else if (bland) take = j < basis_[leave_pos_];
      else take = std::abs(wp) > best_piv;
      if (take) {
        best_t = std::min(best_t, t);
        leave_pos_ = p;
        leave_target_ = target;
        best_piv = std::abs(wp);
      }
    }

    step_t_ = best_t;
    return std::isfinite(best_t);
  }

  // Applies the chosen step; returns whether it was degenerate.
  bool step() {
    bool degenerate = step_t_ <= kDegenTol;
    double delta = enter_dir_ * step_t_;

    if (leave_pos_ < 0) {
      // Bound flip: the entering variable crosses to its other bound.
      for (int p = 0; p < m_; ++p) {
        if (w_[p] == 0.0) continue;
        x_[basis_[p]] -= delta * w_[p];
      }
      x_[entering_] = enter_dir_ > 0 ? ub_[entering_] : lb_[entering_];
      vstat_[entering_] =
          enter_dir_ > 0 ? VStat::AtUpper : VStat::AtLower;
      return false;
    }

    int leaving = basis_[leave_pos_];
    for (int p = 0; p < m_; ++p) {
      if (w_[p] == 0.0) continue;
      x_[basis_[p]] -= delta * w_[p];
    }
    x_[entering_] = nonbasic_value(entering_) + delta;
    x_[leaving] = leave_target_;
    vstat_[leaving] =
        (leave_target_ == ub_[leaving] && lb_[leaving] != ub_[leaving])
            ? VStat::AtUpper
            : VStat::AtLower;
    vstat_[entering_] = VStat::Basic;
    basis_[leave_pos_] = entering_;

    if (cfg_.pricing == SimplexConfig::Pricing::Devex) update_devex();

    etas_.emplace_back(leave_pos_, w_);
    if (static_cast<int>(etas_.size()) >= cfg_.refactor_interval) refresh();
    return degenerate;
  }

  double nonbasic_value(int j) const {
    switch (vstat_[j]) {
      case VStat::AtLower: return lb_[j];
      case VStat::AtUpper: return ub_[j];
      default: return x_[j];
    }
  }

  void update_devex() {
    double wp = w_[leave_pos_];
    if (std::abs(wp) <= kPivotTol) return;
    double gq = weights_[entering_];
    VectorXd rho = VectorXd::Zero(m_);
    rho[leave_pos_] = 1.0;
    btran(rho);
    double ratio = gq / (wp * wp);
    for (int j = 0; j < ntot_; ++j) {
      if (vstat_[j] == VStat::Basic || j == entering_) continue;
      double alpha = j >= n_ ? rho[j - n_] : 0.0;
      if (j < n_)
        for (int k = start_[j]; k < start_[j + 1]; ++k)
          alpha += rho[rows_[k]] * vals_[k];
      if (alpha != 0.0)
        weights_[j] = std::max(weights_[j], alpha * alpha * ratio);
    }
    weights_[entering_] = std::max(ratio, 1.0);
    double wmax = 0.0;
    for (double g : weights_) wmax = std::max(wmax, g);
    if (wmax > 1e12) weights_.assign(ntot_, 1.0);
  }

  Solution empty_columns() {
    Solution sol;
    sol.status = SolveStatus::Optimal;
    for (int r = 0; r < lp_.nrows(); ++r) {
      double g = -lp_.rhs[r];
      bool ok = lp_.sense[r] == Sense::Eq  ? std::abs(g) <= cfg_.feas_tol
                : lp_.sense[r] == Sense::Le ? g <= cfg_.feas_tol
                                            : g >= -cfg_.feas_tol;
      if (!ok) sol.status = SolveStatus::Infeasible;
    }
    sol.objective = lp_.c0;
    return sol;
  }

  Solution plain_status(SolveStatus st) {
    Solution sol;
    sol.status = st;
    sol.x.assign(lp_.ncols, 0.0);
    return sol;
  }

  Solution pure_bounds() {
    Solution sol;
    sol.x.assign(n_, 0.0);
    sol.status = SolveStatus::Optimal;
    for (int j = 0; j < n_; ++j) {
      double c = lp_.c[j];
      double v;
      if (c > 0.0) v = lp_.lb[j];
      else if (c < 0.0) v = lp_.ub[j];
      else v = std::isfinite(lp_.lb[j]) ? lp_.lb[j]
              : std::isfinite(lp_.ub[j]) ? lp_.ub[j] : 0.0;
      if (!std::isfinite(v)) {
        sol.status = SolveStatus::Unbounded;
        sol.ray.assign(n_, 0.0);
        sol.ray[j] = c < 0.0 ? 1.0 : -1.0;
        v = 0.0;
      }
      sol.x[j] = v;
    }
    sol.objective = lp_.c0;
    for (int j = 0; j < n_; ++j) sol.objective += lp_.c[j] * sol.x[j];
    return sol;
  }

  Solution infeasible_certificate() {
    Solution sol = finish(SolveStatus::Infeasible);
    sol.ray.assign(m_, 0.0);
    for (int r = 0; r < m_; ++r) sol.ray[r] = y_[r] * row_scale_[r];
    sol.detail = "phase-1 optimum left " + std::to_string(max_violation()) +
                 " scaled infeasibility";
    return sol;
  }

  Solution unbounded_certificate() {
    Solution sol = finish(SolveStatus::Unbounded);
    sol.ray.assign(n_, 0.0);
    if (entering_ < n_) sol.ray[entering_] = enter_dir_ * col_scale_[entering_];
    for (int p = 0; p < m_; ++p) {
      int j = basis_[p];
      if (j < n_ && std::abs(w_[p]) > kPivotTol)
        sol.ray[j] = -enter_dir_ * w_[p] * col_scale_[j];
    }
    sol.detail = "unbounded direction from column " +
                 (entering_ < n_ ? lp_.col_label(entering_)
                                 : "logical#" + std::to_string(entering_ - n_));
    return sol;
  }

  Solution finish(SolveStatus st) {
    Solution sol;
    sol.status = st;
    sol.iterations = iterations_;
    sol.x.resize(n_);
    for (int j = 0; j < n_; ++j) sol.x[j] = x_[j] * col_scale_[j];
    sol.objective = lp_.c0;
    for (int j = 0; j < n_; ++j) sol.objective += lp_.c[j] * sol.x[j];

    std::vector<double> activity(m_, 0.0);
    for (size_t k = 0; k < lp_.nnz(); ++k)
      activity[lp_.a_row[k]] += lp_.a_val[k] * sol.x[lp_.a_col[k]];
    for (int r = 0; r < m_; ++r) {
      double g = activity[r] - lp_.rhs[r];
      double viol = lp_.sense[r] == Sense::Eq  ? std::abs(g)
                    : lp_.sense[r] == Sense::Le ? std::max(0.0, g)
                                                : std::max(0.0, -g);
      sol.max_row_residual = std::max(sol.max_row_residual, viol);
    }
    for (int j = 0; j < n_; ++j) {
      sol.max_bound_violation =
          std::max(sol.max_bound_violation, lp_.lb[j] - sol.x[j]);
      sol.max_bound_violation =
          std::max(sol.max_bound_violation, sol.x[j] - lp_.ub[j]);
    }
    sol.max_bound_violation = std::max(sol.max_bound_violation, 0.0);
    return sol;
  }

  const SparseLP& lp_;
  const SimplexConfig& cfg_;

  int m_ = 0, n_ = 0, ntot_ = 0;
  bool bound_order_broken_ = false;
  std::vector<int> start_, rows_;
  std::vector<double> vals_;
  std::vector<double> row_scale_, col_scale_;
  std::vector<double> lb_, ub_, cost_, x_;
  VectorXd b_;
  std::vector<int> basis_;
  std::vector<VStat> vstat_;
  std::vector<double> weights_;

  Eigen::PartialPivLU<MatrixXd> lu_;
  std::vector<std::pair<int, VectorXd>> etas_;

  bool phase1_ = true;
  int64_t iterations_ = 0;
  VectorXd y_, w_;
  int entering_ = -1;
  int enter_dir_ = 0;
  double enter_d_ = 0.0;
  int leave_pos_ = -1;
  double leave_target_ = 0.0;
  double step_t_ = 0.0;
};

} // namespace

Solution solve_simplex(const SparseLP& lp, const SimplexConfig& cfg) {
  return Simplex(lp, cfg).run();
}

} // namespace hubopt
