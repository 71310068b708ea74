#pragma once

#include <optional>

#include "treedual/convex_engine.hpp"
#include "treedual/deflator.hpp"
#include "treedual/market_tree.hpp"
#include "treedual/preferences.hpp"

namespace treedual {

/// Minimizer of the conjugate-utility functional over the closed deflator
/// set, scaled by the dual variable y.
struct DualSolution {
  double value = 0.0;      ///< v(y)
  Eigen::VectorXd yhat;    ///< y * zhat on dkappa > 0 nodes, zero elsewhere
  Eigen::VectorXd zhat;    ///< optimizing closure element, all nodes
};

struct DualProgram {
  SmoothConvexProgram program;  // variables are the node densities z
};

/// Objective E[sum_n V(n, y z_n) dkappa_n] over the deflator polytope with
/// z >= z_floor. The default floor 0 realizes the closure; a positive floor
/// restricts the search to strictly positive densities.
DualProgram build_dual_program(const MarketModel& model,
                               const UtilityField& utility, double y,
                               double z_floor = 0.0);

/// Solves the dual problem at y > 0. Throws NupbrError when no deflator
/// exists; propagates solver breakdowns as SolveFailure. An optional start
/// overrides the witness-based default (restart tests).
DualSolution solve_dual(const MarketModel& model, const UtilityField& utility,
                        double y, double tol = 1e-8, double z_floor = 0.0,
                        const NupbrReport* nupbr = nullptr,
                        const std::optional<Eigen::VectorXd>& start = {});

/// True iff some closure element z dominates Y/y on every dkappa > 0 node
/// (the solid hull of the scaled deflator set). Nodes with dkappa == 0 do
/// not constrain membership.
bool dual_domain_member(const MarketModel& model, const Eigen::VectorXd& Y,
                        double y, double tol = 1e-9,
                        const NupbrReport* nupbr = nullptr);

}  // namespace treedual
