#pragma once

#include <optional>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "treedual/convex_engine.hpp"
#include "treedual/market_tree.hpp"

namespace treedual {

/// Raised when an operation requires the no-unbounded-profit condition and
/// the model fails it, or when an internal solve for it breaks down.
struct NupbrError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised when a solver returns a status that the caller cannot interpret
/// (iteration limit, numerical failure).
struct SolveFailure : std::runtime_error {
  explicit SolveFailure(SolveStatus s)
      : std::runtime_error("solver failure: " + to_string(s)), status(s) {}
  SolveStatus status;
};

/// Node-indexed density z with z(root) = 1. Strictly positive members make
/// every admissible wealth process a martingale after deflation; z >= 0
/// points are closure elements only.
struct Deflator {
  Eigen::VectorXd z;
};

/// Linear description of the closed deflator set:
///   z(root) = 1,
///   sum_children (p_m/p_n) z_m = z_n              (one row per inner node)
///   sum_children (p_m/p_n) z_m (S_m - S_n) = 0    (d rows per inner node)
/// together with the implied bound z(n) <= 1/prob(n). The set is a compact
/// convex polytope; membership is decided by linear residuals.
struct DeflatorPolytope {
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::VectorXd upper;  // 1 / prob(n)
  int num_nodes = 0;
};

struct NupbrReport {
  bool holds = false;
  double eps_star = 0.0;
  std::optional<Deflator> witness;
};

DeflatorPolytope build_polytope(const MarketModel& model);

/// Decides no-unbounded-profit-with-bounded-risk by maximizing the smallest
/// node value of z over the closed deflator set. The condition holds iff the
/// optimum exceeds 1e-9, in which case the maximizer is a strictly positive
/// witness deflator.
NupbrReport check_nupbr(const MarketModel& model, double tol = 1e-8);

/// True iff z satisfies all deflator constraints within `tol` and is
/// strictly positive.
bool is_deflator(const MarketModel& model, const Eigen::VectorXd& z,
                 double tol = 1e-9);

/// Convex combination of deflators; weights must be strictly positive and
/// sum to one. The result is again a deflator (the constraints are linear).
Deflator convex_combine(const std::vector<Deflator>& deflators,
                        const std::vector<double>& weights);

struct PolytopeMax {
  SolveStatus status = SolveStatus::numerical_failure;
  double value = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd z;
};

/// Maximizes reward . z over the closed deflator set (z >= 0). `warm` may
/// supply an interior point (for instance the NUPBR witness).
PolytopeMax maximize_over_polytope(const MarketModel& model,
                                   const DeflatorPolytope& polytope,
                                   const Eigen::VectorXd& node_reward,
                                   double tol = 1e-8,
                                   const std::optional<Eigen::VectorXd>& warm = {});

}  // namespace treedual
