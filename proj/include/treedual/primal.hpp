#pragma once

#include <optional>

#include "treedual/convex_engine.hpp"
#include "treedual/deflator.hpp"
#include "treedual/market_tree.hpp"
#include "treedual/preferences.hpp"

namespace treedual {

/// Optimal consumption-investment solution for a given initial capital.
struct PrimalSolution {
  double value = 0.0;        ///< optimal expected utility u(x)
  ConsumptionPlan plan;      ///< optimal consumption, zero where dkappa == 0
  Eigen::MatrixXd holdings;  ///< optimal strategy (rows of terminal nodes zero)
  WealthProcess wealth;
};

/// Joint (consumption, holdings, wealth) program for maximizing expected
/// utility of consumption from capital x; exposed so that callers can probe
/// the objective callbacks or supply custom starts.
struct PrimalProgram {
  SmoothConvexProgram program;
  std::vector<int> consumption_var;  ///< node -> variable index, -1 if dkappa == 0
  std::vector<int> holdings_var;     ///< node -> first of d indices, -1 if terminal
  std::vector<int> wealth_var;       ///< node -> post-consumption wealth index
};

PrimalProgram build_primal_program(const MarketModel& model,
                                   const UtilityField& utility, double x);

/// Strictly feasible default start: zero holdings and a uniform small
/// consumption rate spending at most half the capital along any path.
Eigen::VectorXd primal_start(const MarketModel& model,
                             const PrimalProgram& program, double x,
                             double consumption_fraction = 0.5);

/// Decides x-admissibility of c: does some strategy H keep post-consumption
/// wealth nonnegative at every node? Pure LP feasibility; models with
/// dominating strategies (arbitrages) finance every plan.
bool is_admissible(const MarketModel& model, const ConsumptionPlan& plan,
                   double x, double tol = 1e-7);

/// sup over the closed deflator set of E[sum_n c_n z_n dkappa_n]; the plan
/// is x-admissible iff this does not exceed x. Requires the
/// no-unbounded-profit condition.
double deflator_budget(const MarketModel& model, const ConsumptionPlan& plan,
                       const NupbrReport* nupbr = nullptr);

/// Solves the consumption-investment problem at capital x > 0. Throws
/// NupbrError when the market admits unbounded profits and SolveFailure on
/// solver breakdown. `nupbr` may pass a precomputed check for reuse;
/// `start_fraction` tunes the interior starting plan (restart tests).
PrimalSolution solve_primal(const MarketModel& model,
                            const UtilityField& utility, double x,
                            double tol = 1e-8,
                            const NupbrReport* nupbr = nullptr,
                            double start_fraction = 0.5);

}  // namespace treedual
