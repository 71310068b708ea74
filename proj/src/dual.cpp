#include "treedual/dual.hpp"

#include <cmath>
#include <memory>

namespace treedual {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

DualProgram build_dual_program(const MarketModel& model,
                               const UtilityField& utility, double y,
                               double z_floor) {
  if (!(y > 0.0)) throw std::invalid_argument("dual variable must be positive");
  if (z_floor < 0.0) throw std::invalid_argument("z floor must be nonnegative");
  const auto polytope = build_polytope(model);
  const int n = model.size();

  DualProgram out;
  SmoothConvexProgram& p = out.program;
  p.dimension = n;
  p.eq_matrix = polytope.eq_matrix;
  p.eq_rhs = polytope.eq_rhs;
  p.lower = VectorXd::Constant(n, z_floor);

  struct Term {
    int node;
    double weight;  // p_n dkappa_n
  };
  auto terms = std::make_shared<std::vector<Term>>();
  for (int i = 0; i < n; ++i) {
    const Node& nd = model.node(i);
    if (nd.dkappa > 0.0) terms->push_back({i, nd.prob * nd.dkappa});
  }
  auto field = std::make_shared<UtilityField>(utility);

  p.value = [terms, field, y](const VectorXd& z) {
    double acc = 0.0;
    for (const Term& t : *terms) acc += t.weight * field->conjugate(t.node, y * z[t.node]);
    return acc;
  };
  p.gradient = [terms, field, y, n](const VectorXd& z) {
    VectorXd g = VectorXd::Zero(n);
    for (const Term& t : *terms) {
      g[t.node] = t.weight * y * field->conjugate_derivative(t.node, y * z[t.node]);
    }
    return g;
  };
  p.hessian = [terms, field, y, n](const VectorXd& z) {
    MatrixXd h = MatrixXd::Zero(n, n);
    for (const Term& t : *terms) {
      h(t.node, t.node) =
          -t.weight * y * y * field->inverse_marginal_derivative(t.node, y * z[t.node]);
    }
    return h;
  };
  return out;
}

DualSolution solve_dual(const MarketModel& model, const UtilityField& utility,
                        double y, double tol, double z_floor,
                        const NupbrReport* nupbr,
                        const std::optional<VectorXd>& start) {
  NupbrReport local;
  if (nupbr == nullptr) {
    local = check_nupbr(model);
    nupbr = &local;
  }
  if (!nupbr->holds) {
    throw NupbrError("market admits unbounded profit; dual domain is empty");
  }

  const DualProgram prog = build_dual_program(model, utility, y, z_floor);
  std::optional<VectorXd> x0 = start;
  if (!x0) {
    const VectorXd& witness = nupbr->witness->z;
    if (witness.minCoeff() > z_floor) x0 = witness;
    // otherwise leave Phase-I to find a floor-respecting point
  }
  const SolveResult res = solve_convex(prog.program, tol, x0);
  if (res.status == SolveStatus::infeasible) {
    throw NupbrError("no deflator above the requested floor");
  }
  if (res.status != SolveStatus::optimal) throw SolveFailure(res.status);

  DualSolution sol;
  sol.zhat = res.x;
  sol.yhat = VectorXd::Zero(model.size());
  double value = 0.0;
  for (int i = 0; i < model.size(); ++i) {
    const Node& nd = model.node(i);
    if (nd.dkappa > 0.0) {
      sol.yhat[i] = y * res.x[i];
      value += nd.prob * nd.dkappa * utility.conjugate(i, sol.yhat[i]);
    }
  }
  sol.value = value;
  return sol;
}

bool dual_domain_member(const MarketModel& model, const VectorXd& Y, double y,
                        double tol, const NupbrReport* nupbr) {
  if (Y.size() != model.size()) {
    throw std::invalid_argument("Y must have one entry per node");
  }
  if (!(y > 0.0)) throw std::invalid_argument("dual variable must be positive");
  for (int i = 0; i < model.size(); ++i) {
    if (model.node(i).dkappa > 0.0 && Y[i] < 0.0) return false;
  }
  NupbrReport local;
  if (nupbr == nullptr) {
    local = check_nupbr(model);
    nupbr = &local;
  }
  if (!nupbr->holds) {
    throw NupbrError("dual domain is empty without a deflator");
  }

  const auto polytope = build_polytope(model);
  const int n = model.size();
  std::vector<int> clocked;
  for (int i = 0; i < n; ++i) {
    if (model.node(i).dkappa > 0.0) clocked.push_back(i);
  }
  const int nc = static_cast<int>(clocked.size());
  const int base_rows = static_cast<int>(polytope.eq_matrix.rows());

  // Variables [z (n), t (n), eps, s0, s (nc)]; maximize the smallest
  // domination margin y z - Y over clocked nodes, capped for boundedness.
  const int vt = n;
  const int veps = 2 * n;
  const int vs0 = veps + 1;
  const int vs = vs0 + 1;
  const int nv = vs + nc;
  const double y_cap = 1.0 + Y.lpNorm<Eigen::Infinity>();

  LinearProgram lp;
  lp.eq_matrix = MatrixXd::Zero(base_rows + n + 1 + nc, nv);
  lp.eq_rhs = VectorXd::Zero(base_rows + n + 1 + nc);
  lp.eq_matrix.topLeftCorner(base_rows, n) = polytope.eq_matrix;
  lp.eq_rhs.head(base_rows) = polytope.eq_rhs;
  for (int i = 0; i < n; ++i) {
    lp.eq_matrix(base_rows + i, i) = 1.0;
    lp.eq_matrix(base_rows + i, vt + i) = 1.0;
    lp.eq_rhs[base_rows + i] = polytope.upper[i] + 1.0;
  }
  lp.eq_matrix(base_rows + n, veps) = 1.0;
  lp.eq_matrix(base_rows + n, vs0) = 1.0;
  lp.eq_rhs[base_rows + n] = y_cap;
  for (int k = 0; k < nc; ++k) {
    const int node = clocked[k];
    lp.eq_matrix(base_rows + n + 1 + k, node) = y;
    lp.eq_matrix(base_rows + n + 1 + k, veps) = -1.0;
    lp.eq_matrix(base_rows + n + 1 + k, vs + k) = -1.0;
    lp.eq_rhs[base_rows + n + 1 + k] = Y[node];
  }
  lp.lower = VectorXd::Zero(nv);
  lp.lower[veps] = -kInf;
  lp.objective = VectorXd::Zero(nv);
  lp.objective[veps] = -1.0;

  // Interior warm start from the witness.
  const VectorXd& w = nupbr->witness->z;
  VectorXd x0(nv);
  x0.head(n) = w;
  for (int i = 0; i < n; ++i) x0[vt + i] = polytope.upper[i] + 1.0 - w[i];
  double min_margin = kInf;
  for (int k = 0; k < nc; ++k) {
    min_margin = std::min(min_margin, y * w[clocked[k]] - Y[clocked[k]]);
  }
  const double eps0 = std::min(y_cap - 1.0, min_margin - 1.0);
  x0[veps] = eps0;
  x0[vs0] = y_cap - eps0;
  for (int k = 0; k < nc; ++k) {
    x0[vs + k] = y * w[clocked[k]] - Y[clocked[k]] - eps0;
  }

  const SolveResult res = solve_lp(lp, 1e-9, x0);
  if (res.status != SolveStatus::optimal) throw SolveFailure(res.status);
  return -res.value >= -tol * (1.0 + Y.lpNorm<Eigen::Infinity>()) * (1.0 + y);
}

}  // namespace treedual
