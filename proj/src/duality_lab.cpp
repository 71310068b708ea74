#include "treedual/duality_lab.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace treedual {

namespace {

using Eigen::VectorXd;

// Golden-section maximization of a unimodal function on [a, b].
double golden_max(const std::function<double(double)>& f, double a, double b,
                  int iters = 48) {
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = f(c), fd = f(d);
  for (int k = 0; k < iters; ++k) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = f(d);
    }
  }
  return std::max(fc, fd);
}

// sup of a concave function over (0, inf), seeded by a positive grid. The
// bracket expands geometrically past the grid ends when the maximum sits on
// the boundary of the scanned range.
double refine_sup(const std::function<double(double)>& f,
                  const std::vector<double>& grid) {
  int k = 0;
  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> values(grid.size());
  for (size_t i = 0; i < grid.size(); ++i) {
    values[i] = f(grid[i]);
    if (values[i] > best) {
      best = values[i];
      k = static_cast<int>(i);
    }
  }
  const double ratio = 1.6;
  double lo, hi;
  if (k > 0) {
    lo = grid[k - 1];
  } else {
    lo = grid[0];
    double fl = values[0];
    for (int it = 0; it < 200; ++it) {
      const double cand = lo / ratio;
      const double fc = f(cand);
      if (fc <= fl) break;
      lo = cand;
      fl = fc;
    }
    lo /= ratio;
  }
  if (k + 1 < static_cast<int>(grid.size())) {
    hi = grid[k + 1];
  } else {
    hi = grid.back();
    double fh = values.back();
    for (int it = 0; it < 200; ++it) {
      const double cand = hi * ratio;
      const double fc = f(cand);
      if (fc <= fh) break;
      hi = cand;
      fh = fc;
    }
    hi *= ratio;
  }
  return std::max(best, golden_max(f, lo, hi));
}

}  // namespace

ValueFunctions::ValueFunctions(const MarketModel& model,
                               const UtilityField& utility, double solver_tol)
    : model_(model), utility_(utility), tol_(solver_tol) {
  report_ = check_nupbr(model_);
  if (!report_.holds) {
    throw NupbrError("value functions undefined: market admits unbounded profit");
  }
}

double ValueFunctions::u(double x) const {
  auto it = u_cache_.find(x);
  if (it != u_cache_.end()) return it->second;
  const double value = solve_primal(model_, utility_, x, tol_, &report_).value;
  u_cache_.emplace(x, value);
  return value;
}

double ValueFunctions::v(double y) const {
  auto it = v_cache_.find(y);
  if (it != v_cache_.end()) return it->second;
  const double value = solve_dual(model_, utility_, y, tol_, 0.0, &report_).value;
  v_cache_.emplace(y, value);
  return value;
}

double ValueFunctions::u_prime(double x) const {
  const double h = 1e-4 * x;
  return (u(x + h) - u(x - h)) / (2.0 * h);
}

double ValueFunctions::v_prime(double y) const {
  const double h = 1e-4 * y;
  return (v(y + h) - v(y - h)) / (2.0 * h);
}

ConjugacyReport verify_conjugacy(const MarketModel& model,
                                 const UtilityField& utility,
                                 const std::vector<double>& x_grid,
                                 const std::vector<double>& y_grid,
                                 double tol_conj, double solver_tol) {
  const ValueFunctions vf(model, utility, solver_tol);
  ConjugacyReport report;
  report.tolerance = tol_conj;

  for (double y : y_grid) {
    const auto f = [&](double x) { return vf.u(x) - x * y; };
    const double transformed = refine_sup(f, x_grid);
    const double direct = vf.v(y);
    report.v_side.push_back(
        {y, direct, transformed, std::abs(direct - transformed)});
  }
  for (double x : x_grid) {
    const auto f = [&](double y) { return -(vf.v(y) + x * y); };
    const double transformed = -refine_sup(f, y_grid);
    const double direct = vf.u(x);
    report.u_side.push_back(
        {x, direct, transformed, std::abs(direct - transformed)});
  }
  for (const auto& row : report.v_side) {
    report.max_residual = std::max(report.max_residual, row.residual);
  }
  for (const auto& row : report.u_side) {
    report.max_residual = std::max(report.max_residual, row.residual);
  }
  report.pass = report.max_residual <= tol_conj;
  return report;
}

DualityReport verify_dual_relations(const ValueFunctions& vf, double x,
                                    double tol) {
  const MarketModel& model = vf.model();
  const UtilityField& utility = vf.utility();
  DualityReport rep;
  rep.x = x;
  rep.y = vf.u_prime(x);
  rep.u_value = vf.u(x);
  rep.v_value = vf.v(rep.y);

  const auto primal =
      solve_primal(model, utility, x, vf.solver_tol(), &vf.nupbr());
  const auto dual =
      solve_dual(model, utility, rep.y, vf.solver_tol(), 0.0, &vf.nupbr());
  rep.consumption = primal.plan.rate;
  rep.yhat = dual.yhat;
  rep.marginal_utility = VectorXd::Zero(model.size());

  double product = 0.0;
  for (int i = 0; i < model.size(); ++i) {
    const Node& nd = model.node(i);
    if (nd.dkappa <= 0.0) continue;
    const double marginal = utility.marginal(i, primal.plan.rate[i]);
    rep.marginal_utility[i] = marginal;
    const double resid =
        std::abs(dual.yhat[i] - marginal) / (1.0 + std::abs(marginal));
    rep.max_marginal_residual = std::max(rep.max_marginal_residual, resid);
    product += nd.prob * nd.dkappa * primal.plan.rate[i] * dual.yhat[i];
  }
  rep.product_residual = std::abs(product - x * rep.y) / (x * rep.y);
  rep.fenchel_residual = std::abs(rep.v_value - (rep.u_value - x * rep.y)) /
                         (1.0 + std::abs(rep.u_value) + x * rep.y);

  rep.checks.push_back({"marginal-utility-match", 0.0,
                        rep.max_marginal_residual, tol,
                        rep.max_marginal_residual <= tol});
  rep.checks.push_back({"pairing-equals-xy", product, rep.product_residual,
                        tol, rep.product_residual <= tol});
  rep.checks.push_back({"fenchel-tightness", rep.v_value, rep.fenchel_residual,
                        tol, rep.fenchel_residual <= tol});
  rep.pass = true;
  for (const auto& line : rep.checks) rep.pass = rep.pass && line.pass;
  return rep;
}

BipolarReport verify_bipolar(const MarketModel& model, int samples,
                             unsigned seed, double tol) {
  const auto nupbr = check_nupbr(model);
  if (!nupbr.holds) {
    throw NupbrError("bipolar check needs a market without unbounded profit");
  }
  const auto polytope = build_polytope(model);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const int n = model.size();
  auto random_plan = [&]() {
    VectorXd c = VectorXd::Zero(n);
    for (int i = 0; i < n; ++i) {
      if (model.node(i).dkappa > 0.0) c[i] = 2.0 * unit(rng);
    }
    return c;
  };
  auto budget_of = [&](const VectorXd& c) {
    return deflator_budget(model, ConsumptionPlan{c}, &nupbr);
  };
  auto random_member = [&]() {
    VectorXd reward(n);
    for (int i = 0; i < n; ++i) reward[i] = unit(rng) - 0.25;
    const auto out = maximize_over_polytope(model, polytope, reward, 1e-9,
                                            nupbr.witness->z);
    if (out.status != SolveStatus::optimal) throw SolveFailure(out.status);
    return out.z;
  };
  auto pairing = [&](const VectorXd& c, const VectorXd& Y) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) {
      acc += model.node(i).prob * model.node(i).dkappa * c[i] * Y[i];
    }
    return acc;
  };

  BipolarReport rep;
  rep.samples = samples;
  rep.inadmissible_detected = true;

  // Dual-domain samples: polytope vertices, the witness, and solid-hull
  // shrinkages of both.
  std::vector<VectorXd> duals;
  duals.push_back(nupbr.witness->z);
  for (int k = 0; k < std::max(3, samples / 4); ++k) {
    duals.push_back(random_member());
  }
  const size_t members = duals.size();
  for (size_t k = 0; k < members; ++k) {
    VectorXd shrunk = duals[k];
    for (int i = 0; i < n; ++i) shrunk[i] *= unit(rng);
    duals.push_back(shrunk);
  }

  for (int s = 0; s < samples; ++s) {
    VectorXd c = random_plan();
    const double beta = budget_of(c);
    if (beta > 1e-12) {
      const double theta = 0.05 + 0.95 * unit(rng);
      c *= theta / beta;  // scaled plan has deflator budget theta <= 1
    }

    for (const auto& Y : duals) {
      rep.max_pairing = std::max(rep.max_pairing, pairing(c, Y));
    }

    // A plan violating the budget against some dual element must be
    // rejected by the admissibility LP.
    const VectorXd c_bad = 2.5 * c;
    if (budget_of(c_bad) > 1.0 + 1e-9) {
      if (is_admissible(model, ConsumptionPlan{c_bad}, 1.0)) {
        rep.inadmissible_detected = false;
      }
    }

    // sup over deflators vs sup over the sampled dual elements, for this c:
    // the argmax vertex of the budget LP is itself a dual element, so the
    // two suprema coincide on finite trees.
    VectorXd reward(n);
    for (int i = 0; i < n; ++i) {
      reward[i] = model.node(i).prob * model.node(i).dkappa * c[i];
    }
    const auto best = maximize_over_polytope(model, polytope, reward, 1e-9,
                                             nupbr.witness->z);
    if (best.status != SolveStatus::optimal) throw SolveFailure(best.status);
    double sampled_sup = pairing(c, best.z);
    for (const auto& Y : duals) sampled_sup = std::max(sampled_sup, pairing(c, Y));
    rep.cons_gap = std::max(rep.cons_gap, std::abs(best.value - sampled_sup));
  }

  rep.pass = rep.max_pairing <= 1.0 + tol && rep.inadmissible_detected &&
             rep.cons_gap <= 1e-6;
  return rep;
}

}  // namespace treedual
