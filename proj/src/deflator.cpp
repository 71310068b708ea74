#include "treedual/deflator.hpp"

#include <cmath>

namespace treedual {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kStrictness = 1e-9;

// The LP encodings below bound z by upper(n) + 1 instead of upper(n). The
// true set already satisfies z <= 1/prob, so the relaxation never cuts or
// extends it; it only keeps the bound slack strictly positive even on
// degenerate trees (single-child chains attain z = 1/prob exactly).
VectorXd relaxed_upper(const DeflatorPolytope& polytope) {
  return polytope.upper.array() + 1.0;
}

}  // namespace

DeflatorPolytope build_polytope(const MarketModel& model) {
  const int n = model.size();
  const int d = model.num_assets();
  const auto inner = model.non_terminal_nodes();
  const int rows = 1 + static_cast<int>(inner.size()) * (1 + d);

  DeflatorPolytope polytope;
  polytope.num_nodes = n;
  polytope.eq_matrix = MatrixXd::Zero(rows, n);
  polytope.eq_rhs = VectorXd::Zero(rows);
  polytope.upper.resize(n);
  for (int i = 0; i < n; ++i) polytope.upper[i] = 1.0 / model.node(i).prob;

  polytope.eq_matrix(0, model.root()) = 1.0;
  polytope.eq_rhs[0] = 1.0;
  int r = 1;
  for (int i : inner) {
    polytope.eq_matrix(r, i) = -1.0;
    for (int c : model.children(i)) {
      polytope.eq_matrix(r, c) = model.conditional_prob(c);
    }
    ++r;
    for (int k = 0; k < d; ++k) {
      for (int c : model.children(i)) {
        const double ds = model.node(c).prices[k] - model.node(i).prices[k];
        polytope.eq_matrix(r, c) = model.conditional_prob(c) * ds;
      }
      ++r;
    }
  }
  return polytope;
}

NupbrReport check_nupbr(const MarketModel& model, double tol) {
  const DeflatorPolytope polytope = build_polytope(model);
  const int n = model.size();
  const int base_rows = static_cast<int>(polytope.eq_matrix.rows());

  // Variables [z (n), eps, s (n), t (n)] with
  //   z_i - eps - s_i = 0   and   z_i + t_i = upper_i + 1.
  // Maximizing eps yields the largest uniform floor under the polytope;
  // z stays free so that the search space always has interior points.
  const int nv = 3 * n + 1;
  LinearProgram lp;
  lp.eq_matrix = MatrixXd::Zero(base_rows + 2 * n, nv);
  lp.eq_rhs = VectorXd::Zero(base_rows + 2 * n);
  lp.eq_matrix.topLeftCorner(base_rows, n) = polytope.eq_matrix;
  lp.eq_rhs.head(base_rows) = polytope.eq_rhs;
  const VectorXd cap = relaxed_upper(polytope);
  for (int i = 0; i < n; ++i) {
    lp.eq_matrix(base_rows + i, i) = 1.0;
    lp.eq_matrix(base_rows + i, n) = -1.0;
    lp.eq_matrix(base_rows + i, n + 1 + i) = -1.0;
    lp.eq_matrix(base_rows + n + i, i) = 1.0;
    lp.eq_matrix(base_rows + n + i, 2 * n + 1 + i) = 1.0;
    lp.eq_rhs[base_rows + n + i] = cap[i];
  }
  lp.lower = VectorXd::Constant(nv, -kInf);
  for (int i = 0; i < 2 * n; ++i) lp.lower[n + 1 + i] = 0.0;
  lp.objective = VectorXd::Zero(nv);
  lp.objective[n] = -1.0;

  const SolveResult res = solve_lp(lp, tol);
  NupbrReport report;
  if (res.status == SolveStatus::infeasible) {
    return report;  // no deflator candidates at all
  }
  if (res.status != SolveStatus::optimal) throw SolveFailure(res.status);

  const double eps_star = -res.value;
  report.eps_star = std::max(0.0, eps_star);
  report.holds = eps_star > kStrictness;
  if (report.holds) {
    report.witness = Deflator{res.x.head(n)};
  }
  return report;
}

bool is_deflator(const MarketModel& model, const VectorXd& z, double tol) {
  if (z.size() != model.size()) return false;
  for (int i = 0; i < z.size(); ++i) {
    if (!(z[i] > 0.0)) return false;
  }
  if (std::abs(z[model.root()] - 1.0) > tol) return false;
  for (int i : model.non_terminal_nodes()) {
    double mart = -z[i];
    Eigen::VectorXd orth = Eigen::VectorXd::Zero(model.num_assets());
    for (int c : model.children(i)) {
      const double w = model.conditional_prob(c);
      mart += w * z[c];
      orth += w * z[c] * (model.node(c).prices - model.node(i).prices);
    }
    if (std::abs(mart) > tol) return false;
    if (orth.lpNorm<Eigen::Infinity>() > tol * (1.0 + model.node(i).prices.lpNorm<Eigen::Infinity>())) {
      return false;
    }
  }
  return true;
}

Deflator convex_combine(const std::vector<Deflator>& deflators,
                        const std::vector<double>& weights) {
  if (deflators.empty() || deflators.size() != weights.size()) {
    throw std::invalid_argument("convex_combine: need one weight per deflator");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw std::invalid_argument("convex_combine: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("convex_combine: weights must sum to one");
  }
  const auto size = deflators.front().z.size();
  VectorXd z = VectorXd::Zero(size);
  for (size_t k = 0; k < deflators.size(); ++k) {
    if (deflators[k].z.size() != size) {
      throw std::invalid_argument("convex_combine: deflator size mismatch");
    }
    z += weights[k] * deflators[k].z;
  }
  return Deflator{std::move(z)};
}

PolytopeMax maximize_over_polytope(const MarketModel& model,
                                   const DeflatorPolytope& polytope,
                                   const VectorXd& node_reward, double tol,
                                   const std::optional<VectorXd>& warm) {
  const int n = polytope.num_nodes;
  if (node_reward.size() != n) {
    throw std::invalid_argument("node_reward must have one entry per node");
  }
  const int base_rows = static_cast<int>(polytope.eq_matrix.rows());

  // Variables [z (n), t (n)] with z >= 0 (closure members) and the relaxed
  // cap z_i + t_i = upper_i + 1 keeping the LP bounded.
  const int nv = 2 * n;
  LinearProgram lp;
  lp.eq_matrix = MatrixXd::Zero(base_rows + n, nv);
  lp.eq_rhs = VectorXd::Zero(base_rows + n);
  lp.eq_matrix.topLeftCorner(base_rows, n) = polytope.eq_matrix;
  lp.eq_rhs.head(base_rows) = polytope.eq_rhs;
  const VectorXd cap = relaxed_upper(polytope);
  for (int i = 0; i < n; ++i) {
    lp.eq_matrix(base_rows + i, i) = 1.0;
    lp.eq_matrix(base_rows + i, n + i) = 1.0;
    lp.eq_rhs[base_rows + i] = cap[i];
  }
  lp.lower = VectorXd::Zero(nv);
  lp.objective = VectorXd::Zero(nv);
  lp.objective.head(n) = -node_reward;

  std::optional<VectorXd> start;
  if (warm && warm->size() == n) {
    VectorXd x0(nv);
    x0.head(n) = *warm;
    x0.tail(n) = cap - *warm;
    start = std::move(x0);
  }
  const SolveResult res = solve_lp(lp, tol, start);
  PolytopeMax out;
  out.status = res.status;
  if (res.status == SolveStatus::optimal) {
    out.value = -res.value;
    out.z = res.x.head(n);
  }
  return out;
}

}  // namespace treedual
