#include "treedual/primal.hpp"

#include <cmath>
#include <memory>

namespace treedual {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kHoldingsReg = 1e-10;  // pins holdings along null price moves

struct Layout {
  std::vector<int> c_var, h_var, w_var;
  int total = 0;
};

Layout make_layout(const MarketModel& model) {
  Layout lay;
  const int n = model.size();
  const int d = model.num_assets();
  lay.c_var.assign(n, -1);
  lay.h_var.assign(n, -1);
  lay.w_var.assign(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (model.node(i).dkappa > 0.0) lay.c_var[i] = next++;
  }
  for (int i = 0; i < n; ++i) {
    if (!model.is_terminal(i)) {
      lay.h_var[i] = next;
      next += d;
    }
  }
  for (int i = 0; i < n; ++i) lay.w_var[i] = next++;
  lay.total = next;
  return lay;
}

// Wealth recursion as equality rows over (c, H, w):
//   w_root + c_root dk_root = x
//   w_m + c_m dk_m - H_parent . dS_m - w_parent = 0
void wealth_rows(const MarketModel& model, const Layout& lay, double x,
                 MatrixXd& A, VectorXd& b) {
  const int n = model.size();
  const int d = model.num_assets();
  A = MatrixXd::Zero(n, lay.total);
  b = VectorXd::Zero(n);
  const auto inc = price_increments(model);
  for (int i = 0; i < n; ++i) {
    A(i, lay.w_var[i]) = 1.0;
    if (lay.c_var[i] >= 0) A(i, lay.c_var[i]) = model.node(i).dkappa;
    if (const auto parent = model.node(i).parent) {
      A(i, lay.w_var[*parent]) = -1.0;
      for (int k = 0; k < d; ++k) {
        A(i, lay.h_var[*parent] + k) = -inc[i][k];
      }
    } else {
      b[i] = x;
    }
  }
}

}  // namespace

PrimalProgram build_primal_program(const MarketModel& model,
                                   const UtilityField& utility, double x) {
  if (!(x > 0.0)) throw std::invalid_argument("initial capital must be positive");
  const Layout lay = make_layout(model);
  const int n = model.size();

  PrimalProgram out;
  out.consumption_var = lay.c_var;
  out.holdings_var = lay.h_var;
  out.wealth_var = lay.w_var;

  SmoothConvexProgram& p = out.program;
  p.dimension = lay.total;
  wealth_rows(model, lay, x, p.eq_matrix, p.eq_rhs);
  p.lower = VectorXd::Constant(lay.total, -kInf);
  for (int i = 0; i < n; ++i) {
    if (lay.c_var[i] >= 0) p.lower[lay.c_var[i]] = 0.0;
    p.lower[lay.w_var[i]] = 0.0;
  }

  // Shared description of objective terms. Minimization form: negated
  // expected utility plus a tiny holdings regularizer.
  struct Term {
    int var;
    int node;
    double weight;  // p_n dkappa_n
  };
  auto terms = std::make_shared<std::vector<Term>>();
  for (int i = 0; i < n; ++i) {
    if (lay.c_var[i] >= 0) {
      terms->push_back({lay.c_var[i], i, model.node(i).prob * model.node(i).dkappa});
    }
  }
  auto h_range = std::make_shared<std::pair<int, int>>(0, 0);
  int h_lo = lay.total, h_hi = 0;
  for (int i = 0; i < n; ++i) {
    if (lay.h_var[i] >= 0) {
      h_lo = std::min(h_lo, lay.h_var[i]);
      h_hi = std::max(h_hi, lay.h_var[i] + model.num_assets());
    }
  }
  if (h_lo > h_hi) h_lo = h_hi = 0;
  *h_range = {h_lo, h_hi};
  auto field = std::make_shared<UtilityField>(utility);

  p.value = [terms, field, h_range](const VectorXd& v) {
    double acc = 0.0;
    for (const Term& t : *terms) acc -= t.weight * field->evaluate(t.node, v[t.var]);
    const auto [lo, hi] = *h_range;
    acc += 0.5 * kHoldingsReg * v.segment(lo, hi - lo).squaredNorm();
    return acc;
  };
  p.gradient = [terms, field, h_range](const VectorXd& v) {
    VectorXd g = VectorXd::Zero(v.size());
    for (const Term& t : *terms) {
      g[t.var] = -t.weight * field->marginal(t.node, v[t.var]);
    }
    const auto [lo, hi] = *h_range;
    g.segment(lo, hi - lo) += kHoldingsReg * v.segment(lo, hi - lo);
    return g;
  };
  p.hessian = [terms, field, h_range](const VectorXd& v) {
    MatrixXd h = MatrixXd::Zero(v.size(), v.size());
    for (const Term& t : *terms) {
      h(t.var, t.var) = -t.weight * field->marginal_derivative(t.node, v[t.var]);
    }
    const auto [lo, hi] = *h_range;
    for (int i = lo; i < hi; ++i) h(i, i) += kHoldingsReg;
    return h;
  };
  return out;
}

Eigen::VectorXd primal_start(const MarketModel& model,
                             const PrimalProgram& program, double x,
                             double consumption_fraction) {
  if (!(consumption_fraction > 0.0) || !(consumption_fraction < 1.0)) {
    throw std::invalid_argument("consumption fraction must lie in (0, 1)");
  }
  const int n = model.size();
  VectorXd v = VectorXd::Zero(program.program.dimension);
  const double rate =
      consumption_fraction * x / std::max(model.max_path_clock(), 1e-12);
  VectorXd c = VectorXd::Zero(n);
  for (int i = 0; i < n; ++i) {
    if (program.consumption_var[i] >= 0) {
      c[i] = rate;
      v[program.consumption_var[i]] = rate;
    }
  }
  const auto w =
      wealth_process(model, x, MatrixXd::Zero(n, model.num_assets()),
                     ConsumptionPlan{c});
  for (int i = 0; i < n; ++i) v[program.wealth_var[i]] = w.post[i];
  return v;
}

bool is_admissible(const MarketModel& model, const ConsumptionPlan& plan,
                   double x, double tol) {
  if (plan.rate.size() != model.size()) {
    throw std::invalid_argument("plan must have one rate per node");
  }
  if (plan.rate.minCoeff() < 0.0) return false;
  const int n = model.size();
  const int d = model.num_assets();

  // Variables [H (inner nodes x d), w (n), eps, s (n), s0]; maximize the
  // uniform wealth floor eps, capped at one.
  std::vector<int> h_var(n, -1);
  int next = 0;
  for (int i = 0; i < n; ++i) {
    if (!model.is_terminal(i)) {
      h_var[i] = next;
      next += d;
    }
  }
  const int w0 = next;
  const int eps = w0 + n;
  const int s0 = eps + 1;
  const int slack0 = s0 + 1;
  const int nv = slack0 + n;

  LinearProgram lp;
  lp.eq_matrix = MatrixXd::Zero(2 * n + 1, nv);
  lp.eq_rhs = VectorXd::Zero(2 * n + 1);
  const auto inc = price_increments(model);
  for (int i = 0; i < n; ++i) {
    lp.eq_matrix(i, w0 + i) = 1.0;
    if (const auto parent = model.node(i).parent) {
      lp.eq_matrix(i, w0 + *parent) = -1.0;
      for (int k = 0; k < d; ++k) lp.eq_matrix(i, h_var[*parent] + k) = -inc[i][k];
      lp.eq_rhs[i] = -plan.rate[i] * model.node(i).dkappa;
    } else {
      lp.eq_rhs[i] = x - plan.rate[i] * model.node(i).dkappa;
    }
    lp.eq_matrix(n + i, w0 + i) = 1.0;
    lp.eq_matrix(n + i, eps) = -1.0;
    lp.eq_matrix(n + i, slack0 + i) = -1.0;
  }
  lp.eq_matrix(2 * n, eps) = 1.0;
  lp.eq_matrix(2 * n, s0) = 1.0;
  lp.eq_rhs[2 * n] = 1.0;

  lp.lower = VectorXd::Constant(nv, -kInf);
  lp.lower[s0] = 0.0;
  for (int i = 0; i < n; ++i) lp.lower[slack0 + i] = 0.0;
  lp.objective = VectorXd::Zero(nv);
  lp.objective[eps] = -1.0;

  const SolveResult res = solve_lp(lp, 1e-9);
  if (res.status == SolveStatus::unbounded) {
    // A dominating strategy pushes every wealth up without limit.
    return true;
  }
  if (res.status != SolveStatus::optimal) throw SolveFailure(res.status);
  return -res.value >= -tol * (1.0 + x);
}

double deflator_budget(const MarketModel& model, const ConsumptionPlan& plan,
                       const NupbrReport* nupbr) {
  if (plan.rate.size() != model.size()) {
    throw std::invalid_argument("plan must have one rate per node");
  }
  NupbrReport local;
  if (nupbr == nullptr) {
    local = check_nupbr(model);
    nupbr = &local;
  }
  if (!nupbr->holds) {
    throw NupbrError("deflator budget undefined: market admits unbounded profit");
  }
  const auto polytope = build_polytope(model);
  VectorXd reward(model.size());
  for (int i = 0; i < model.size(); ++i) {
    reward[i] = model.node(i).prob * model.node(i).dkappa * plan.rate[i];
  }
  const auto out = maximize_over_polytope(model, polytope, reward, 1e-9,
                                          nupbr->witness->z);
  if (out.status != SolveStatus::optimal) throw SolveFailure(out.status);
  return out.value;
}

PrimalSolution solve_primal(const MarketModel& model,
                            const UtilityField& utility, double x, double tol,
                            const NupbrReport* nupbr, double start_fraction) {
  NupbrReport local;
  if (nupbr == nullptr) {
    local = check_nupbr(model);
    nupbr = &local;
  }
  if (!nupbr->holds) {
    throw NupbrError("market admits unbounded profit; no optimizer exists");
  }

  const PrimalProgram prog = build_primal_program(model, utility, x);
  const VectorXd start = primal_start(model, prog, x, start_fraction);
  const SolveResult res = solve_convex(prog.program, tol, start);
  if (res.status == SolveStatus::unbounded) {
    throw SolveFailure(res.status);  // value function not finite
  }
  if (res.status != SolveStatus::optimal) throw SolveFailure(res.status);

  const int n = model.size();
  const int d = model.num_assets();
  PrimalSolution sol;
  sol.plan.rate = VectorXd::Zero(n);
  sol.holdings = MatrixXd::Zero(n, d);
  for (int i = 0; i < n; ++i) {
    if (prog.consumption_var[i] >= 0) sol.plan.rate[i] = res.x[prog.consumption_var[i]];
    if (prog.holdings_var[i] >= 0) {
      for (int k = 0; k < d; ++k) sol.holdings(i, k) = res.x[prog.holdings_var[i] + k];
    }
  }
  sol.wealth = wealth_process(model, x, sol.holdings, sol.plan);

  double value = 0.0;
  for (int i = 0; i < n; ++i) {
    const Node& nd = model.node(i);
    if (nd.dkappa > 0.0) {
      value += nd.prob * nd.dkappa * utility.evaluate(i, sol.plan.rate[i]);
    }
  }
  sol.value = value;
  return sol;
}

}  // namespace treedual
