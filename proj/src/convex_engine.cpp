#include "treedual/convex_engine.hpp"

#include <cassert>
#include <cmath>
#include <memory>
#include <vector>

namespace treedual {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kFeasTol = 1e-8;
constexpr double kStrictTol = 1e-9;   // Phase-I strictness threshold
constexpr double kPrimalReg = 1e-12;
constexpr double kDualReg = 1e-12;
constexpr double kDivergence = 1e13;
constexpr double kMuFloor = 1e-11;
constexpr int kMaxInner = 100;
constexpr int kNewtonBudget = 40000;

struct Objective {
  std::function<double(const VectorXd&)> value;
  std::function<VectorXd(const VectorXd&)> gradient;
  std::function<MatrixXd(const VectorXd&)> hessian;  // null => zero Hessian
};

Objective linear_objective(VectorXd c) {
  Objective obj;
  auto cost = std::make_shared<VectorXd>(std::move(c));
  obj.value = [cost](const VectorXd& x) { return cost->dot(x); };
  obj.gradient = [cost](const VectorXd&) { return *cost; };
  obj.hessian = nullptr;
  return obj;
}

struct EqualitySystem {
  MatrixXd A;              // independent rows only
  VectorXd b;
  MatrixXd A_full;
  VectorXd b_full;
  VectorXd least_squares;  // min-norm solution of the full system
  bool consistent = true;
};

// Greedy row selection by orthogonalization; rows that are (numerically)
// linear combinations of earlier rows are dropped. Consistency of dropped
// rows is captured by the least-squares residual of the full system.
EqualitySystem reduce_equalities(const MatrixXd& A, const VectorXd& b, int n) {
  EqualitySystem sys;
  sys.A_full = A;
  sys.b_full = b;
  if (A.rows() == 0) {
    sys.A = MatrixXd(0, n);
    sys.b = VectorXd(0);
    sys.least_squares = VectorXd::Zero(n);
    return sys;
  }
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
  sys.least_squares = cod.solve(b);
  const double resid = (A * sys.least_squares - b).lpNorm<Eigen::Infinity>();
  sys.consistent = resid <= kFeasTol * (1.0 + b.lpNorm<Eigen::Infinity>());

  std::vector<int> keep;
  MatrixXd basis(A.rows(), n);  // orthonormal rows of the selected set
  int rank = 0;
  for (int r = 0; r < A.rows(); ++r) {
    VectorXd row = A.row(r);
    const double scale = row.norm();
    if (scale <= 1e-14) continue;  // all-zero row
    VectorXd resid_row = row;
    for (int k = 0; k < rank; ++k) {
      resid_row -= basis.row(k).dot(row) * basis.row(k).transpose();
    }
    if (resid_row.norm() > 1e-10 * (1.0 + scale)) {
      basis.row(rank++) = resid_row.normalized();
      keep.push_back(r);
    }
  }
  sys.A.resize(rank, n);
  sys.b.resize(rank);
  for (int k = 0; k < rank; ++k) {
    sys.A.row(k) = A.row(keep[k]);
    sys.b[k] = b[keep[k]];
  }
  return sys;
}

std::vector<int> barrier_indices(const VectorXd& lower) {
  std::vector<int> bar;
  for (int i = 0; i < lower.size(); ++i) {
    if (std::isfinite(lower[i])) bar.push_back(i);
  }
  return bar;
}

enum class CenterOutcome { converged, early_stop, stalled, iteration_cap, diverged, non_finite };

struct RunState {
  VectorXd x;
  VectorXd multipliers;  // equality multipliers from the last Newton solve
  int newton_steps = 0;
};

class BarrierRun {
 public:
  BarrierRun(const Objective& obj, const EqualitySystem& sys,
             const VectorXd& lower)
      : obj_(obj), sys_(sys), lower_(lower), bar_(barrier_indices(lower)) {}

  double merit(const VectorXd& x, double mu) const {
    for (int i : bar_) {
      if (!(x[i] > lower_[i])) return kInf;
    }
    double v = obj_.value(x);
    if (std::isnan(v)) return kInf;
    for (int i : bar_) v -= mu * std::log(x[i] - lower_[i]);
    return v;
  }

  CenterOutcome center(RunState& st, double mu, double ctol,
                       const std::function<bool(const VectorXd&)>& stop_early) {
    const int n = static_cast<int>(st.x.size());
    const int m = static_cast<int>(sys_.A.rows());
    const double b_scale = 1.0 + (m ? sys_.b.lpNorm<Eigen::Infinity>() : 0.0);
    for (int it = 0; it < kMaxInner; ++it) {
      if (st.newton_steps >= kNewtonBudget) return CenterOutcome::iteration_cap;
      VectorXd g = obj_.gradient(st.x);
      MatrixXd H = obj_.hessian ? obj_.hessian(st.x) : MatrixXd::Zero(n, n);
      for (int i : bar_) {
        const double s = st.x[i] - lower_[i];
        g[i] -= mu / s;
        H(i, i) += mu / (s * s);
      }
      if (!g.allFinite() || !H.allFinite()) return CenterOutcome::non_finite;
      H.diagonal().array() += kPrimalReg;

      MatrixXd K = MatrixXd::Zero(n + m, n + m);
      K.topLeftCorner(n, n) = H;
      if (m > 0) {
        K.topRightCorner(n, m) = sys_.A.transpose();
        K.bottomLeftCorner(m, n) = sys_.A;
        K.bottomRightCorner(m, m).diagonal().setConstant(-kDualReg);
      }
      VectorXd rhs(n + m);
      rhs.head(n) = -g;
      if (m > 0) rhs.tail(m) = sys_.b - sys_.A * st.x;

      VectorXd sol = K.partialPivLu().solve(rhs);
      if (!sol.allFinite()) {
        sol = K.fullPivLu().solve(rhs);
        if (!sol.allFinite()) return CenterOutcome::non_finite;
      }
      const VectorXd dx = sol.head(n);
      if (m > 0) st.multipliers = sol.tail(m);
      ++st.newton_steps;

      const double decrement2 = dx.dot(H * dx);
      const double eq_resid = m ? rhs.tail(m).lpNorm<Eigen::Infinity>() : 0.0;
      if (0.5 * decrement2 <= ctol && eq_resid <= kFeasTol * b_scale) {
        return CenterOutcome::converged;
      }

      double alpha = 1.0;
      for (int i : bar_) {
        if (dx[i] < 0.0) {
          alpha = std::min(alpha, -0.99 * (st.x[i] - lower_[i]) / dx[i]);
        }
      }
      const double phi0 = merit(st.x, mu);
      const double slope = g.dot(dx);
      while (alpha >= 1e-16) {
        const double trial = merit(st.x + alpha * dx, mu);
        if (trial <= phi0 + 0.25 * alpha * slope) break;
        alpha *= 0.5;
      }
      if (alpha < 1e-16) return CenterOutcome::stalled;
      st.x += alpha * dx;

      const double fval = obj_.value(st.x);
      if (std::isnan(fval)) return CenterOutcome::non_finite;
      if (fval < -kDivergence * value_scale_ ||
          st.x.lpNorm<Eigen::Infinity>() > kDivergence) {
        return CenterOutcome::diverged;
      }
      if (stop_early && stop_early(st.x)) return CenterOutcome::early_stop;
    }
    return CenterOutcome::iteration_cap;
  }

  SolveResult run(VectorXd x0, double tol,
                  const std::function<bool(const VectorXd&)>& stop_early) {
    RunState st;
    st.x = std::move(x0);
    st.multipliers = VectorXd::Zero(sys_.A.rows());
    value_scale_ = 1.0 + std::abs(obj_.value(st.x));

    SolveResult res;
    const int m_bar = static_cast<int>(bar_.size());
    bool budget_hit = false;
    bool early = false;
#ifndef NDEBUG
    double prev_value = kInf;
#endif
    const double mu_final =
        m_bar == 0 ? 0.0 : std::max(0.5 * tol / m_bar, kMuFloor);
    double mu = m_bar == 0 ? 0.0 : std::max(1.0, mu_final);
    for (;;) {
      const double ctol = m_bar == 0 ? std::min(tol, 1e-10) : mu;
      const CenterOutcome out = center(st, mu, ctol, stop_early);
      if (out == CenterOutcome::diverged) {
        res.status = SolveStatus::unbounded;
        res.x = st.x;
        res.value = -kInf;
        res.newton_steps = st.newton_steps;
        return res;
      }
      if (out == CenterOutcome::non_finite) {
        res.status = SolveStatus::numerical_failure;
        res.x = st.x;
        res.newton_steps = st.newton_steps;
        return res;
      }
      if (out == CenterOutcome::early_stop) {
        early = true;
        break;
      }
      if (out == CenterOutcome::iteration_cap && st.newton_steps >= kNewtonBudget) {
        budget_hit = true;
        break;
      }
#ifndef NDEBUG
      // The true objective improves monotonically along the barrier path.
      const double cur = obj_.value(st.x);
      assert(cur <= prev_value + 1e-7 * (1.0 + std::abs(prev_value)));
      prev_value = cur;
#endif
      if (m_bar == 0 || mu <= mu_final) break;
      mu = std::max(mu * 0.1, mu_final);
    }

    res.x = st.x;
    res.value = obj_.value(st.x);
    res.newton_steps = st.newton_steps;

    // KKT certificate at the final iterate. With bound multipliers defined
    // as s := grad f + A^T y, stationarity holds identically; what remains
    // is primal feasibility, the sign of s, stationarity on free
    // coordinates and the complementarity gap.
    VectorXd shat = obj_.gradient(st.x);
    if (sys_.A.rows() > 0) shat += sys_.A.transpose() * st.multipliers;
    double r_free = 0.0, r_sign = 0.0, gap = 0.0;
    std::vector<char> barriered(st.x.size(), 0);
    for (int i : bar_) barriered[i] = 1;
    for (int i = 0; i < st.x.size(); ++i) {
      if (barriered[i]) {
        r_sign = std::max(r_sign, -std::min(0.0, shat[i]));
        gap += std::max(0.0, shat[i]) * (st.x[i] - lower_[i]);
      } else {
        r_free = std::max(r_free, std::abs(shat[i]));
      }
    }
    const double r_primal =
        sys_.A_full.rows() > 0
            ? (sys_.A_full * st.x - sys_.b_full).lpNorm<Eigen::Infinity>()
            : 0.0;
    res.kkt_residual = std::max({r_primal, r_free, r_sign, gap});
    res.status = budget_hit ? SolveStatus::iteration_limit : SolveStatus::optimal;
    if (early) res.status = SolveStatus::optimal;
    return res;
  }

 private:
  const Objective& obj_;
  const EqualitySystem& sys_;
  const VectorXd& lower_;
  std::vector<int> bar_;
  double value_scale_ = 1.0;
};

// Projects `x` onto the equality manifold (min-norm correction). Returns
// false when the corrected point leaves the strict interior.
bool project_to_equalities(const EqualitySystem& sys, const VectorXd& lower,
                           VectorXd& x) {
  if (sys.A.rows() > 0) {
    const VectorXd r = sys.b - sys.A * x;
    if (r.lpNorm<Eigen::Infinity>() > 0.0) {
      x += sys.A.completeOrthogonalDecomposition().solve(r);
    }
  }
  for (int i = 0; i < lower.size(); ++i) {
    if (std::isfinite(lower[i]) && !(x[i] > lower[i])) return false;
  }
  return true;
}

bool usable_start(const EqualitySystem& sys, const VectorXd& lower,
                  const std::optional<VectorXd>& start, int n, VectorXd& out) {
  if (!start || start->size() != n || !start->allFinite()) return false;
  VectorXd x = *start;
  if (sys.A_full.rows() > 0) {
    const double resid = (sys.A_full * x - sys.b_full).lpNorm<Eigen::Infinity>();
    if (resid > 1e-4 * (1.0 + sys.b_full.lpNorm<Eigen::Infinity>())) return false;
  }
  if (!project_to_equalities(sys, lower, x)) return false;
  out = std::move(x);
  return true;
}

struct PhaseOneResult {
  std::optional<VectorXd> x;
  bool hard_failure = false;
};

// Finds a strictly feasible point of {A x = b, x >= lower} by minimizing a
// uniform bound-violation margin t. Strict feasibility is declared when the
// optimal margin is negative; t* > kStrictTol certifies infeasibility.
PhaseOneResult phase_one(const EqualitySystem& sys, const VectorXd& lower, int n) {
  PhaseOneResult result;
  const std::vector<int> bar = barrier_indices(lower);
  VectorXd x_ls = sys.least_squares;
  if (bar.empty()) {
    result.x = x_ls;
    return result;
  }
  double worst = -kInf;
  for (int i : bar) worst = std::max(worst, lower[i] - x_ls[i]);
  if (worst < -1e-3) {
    // The least-squares point is already comfortably interior.
    result.x = x_ls;
    return result;
  }

  const int nb = static_cast<int>(bar.size());
  const int nl = n + 1 + nb + 1;  // x, t, q (bound slacks), q_t (t >= -1)
  const int m = static_cast<int>(sys.A.rows());
  MatrixXd A(m + nb + 1, nl);
  A.setZero();
  VectorXd b(m + nb + 1);
  A.topLeftCorner(m, n) = sys.A;
  b.head(m) = sys.b;
  for (int k = 0; k < nb; ++k) {
    A(m + k, bar[k]) = 1.0;
    A(m + k, n) = 1.0;
    A(m + k, n + 1 + k) = -1.0;
    b[m + k] = lower[bar[k]];
  }
  A(m + nb, n) = 1.0;
  A(m + nb, nl - 1) = -1.0;
  b[m + nb] = -1.0;

  VectorXd lo = VectorXd::Constant(nl, -kInf);
  for (int k = 0; k < nb; ++k) lo[n + 1 + k] = 0.0;
  lo[nl - 1] = 0.0;

  VectorXd x0(nl);
  const double t0 = std::max(0.0, worst) + 1.0;
  x0.head(n) = x_ls;
  x0[n] = t0;
  for (int k = 0; k < nb; ++k) x0[n + 1 + k] = x_ls[bar[k]] + t0 - lower[bar[k]];
  x0[nl - 1] = t0 + 1.0;

  VectorXd cost = VectorXd::Zero(nl);
  cost[n] = 1.0;
  const Objective obj = linear_objective(cost);
  const EqualitySystem lifted = reduce_equalities(A, b, nl);
  if (!lifted.consistent) {
    // Cannot happen for a consistent base system; defensive.
    return result;
  }
  BarrierRun run(obj, lifted, lo);
  const auto stop = [n](const VectorXd& z) { return z[n] < -1e-3; };
  SolveResult sol = run.run(x0, 1e-10, stop);
  if (sol.status != SolveStatus::optimal) {
    result.hard_failure = true;
    return result;
  }
  const double t_star = sol.x[n];
  if (t_star > kStrictTol) return result;  // infeasible
  VectorXd cand = sol.x.head(n);
  for (int i : bar) {
    if (!(cand[i] > lower[i])) return result;
  }
  result.x = std::move(cand);
  return result;
}

SolveResult solve_impl(const Objective& obj, const MatrixXd& eq_matrix,
                       const VectorXd& eq_rhs, const VectorXd& lower, int n,
                       double tol, const std::optional<VectorXd>& start) {
  SolveResult res;
  const EqualitySystem sys = reduce_equalities(eq_matrix, eq_rhs, n);
  if (!sys.consistent) {
    res.status = SolveStatus::infeasible;
    return res;
  }
  VectorXd x0;
  if (!usable_start(sys, lower, start, n, x0)) {
    const PhaseOneResult p1 = phase_one(sys, lower, n);
    if (p1.hard_failure) {
      res.status = SolveStatus::numerical_failure;
      return res;
    }
    if (!p1.x) {
      res.status = SolveStatus::infeasible;
      return res;
    }
    x0 = *p1.x;
  }
  if (!std::isfinite(obj.value(x0))) {
    res.status = SolveStatus::numerical_failure;
    return res;
  }
  BarrierRun run(obj, sys, lower);
  return run.run(std::move(x0), tol, nullptr);
}

}  // namespace

std::string to_string(SolveStatus status) {
  switch (status) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::infeasible: return "infeasible";
    case SolveStatus::unbounded: return "unbounded";
    case SolveStatus::iteration_limit: return "iteration_limit";
    case SolveStatus::numerical_failure: return "numerical_failure";
  }
  return "unknown";
}

SolveResult solve_lp(const LinearProgram& lp, double tol,
                     const std::optional<Eigen::VectorXd>& start) {
  const int n = static_cast<int>(lp.objective.size());
  if (lp.lower.size() != n ||
      (lp.eq_matrix.rows() > 0 && lp.eq_matrix.cols() != n) ||
      lp.eq_matrix.rows() != lp.eq_rhs.size()) {
    throw std::invalid_argument("inconsistent linear program dimensions");
  }
  const Objective obj = linear_objective(lp.objective);
  return solve_impl(obj, lp.eq_matrix, lp.eq_rhs, lp.lower, n, tol, start);
}

SolveResult solve_convex(const SmoothConvexProgram& program, double tol,
                         const std::optional<Eigen::VectorXd>& start) {
  const int n = program.dimension;
  if (n <= 0 || !program.value || !program.gradient || !program.hessian ||
      program.lower.size() != n ||
      (program.eq_matrix.rows() > 0 && program.eq_matrix.cols() != n) ||
      program.eq_matrix.rows() != program.eq_rhs.size()) {
    throw std::invalid_argument("inconsistent convex program");
  }
  Objective obj{program.value, program.gradient, program.hessian};
  return solve_impl(obj, program.eq_matrix, program.eq_rhs, program.lower, n,
                    tol, start);
}

}  // namespace treedual
