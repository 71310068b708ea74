#pragma once

#include <functional>
#include <limits>
#include <optional>
#include <string>

#include <Eigen/Dense>

namespace treedual {

enum class SolveStatus {
  optimal,
  infeasible,
  unbounded,
  iteration_limit,
  numerical_failure,
};

std::string to_string(SolveStatus status);

/// Linear program in the form
///   minimize  objective . x
///   s.t.      eq_matrix x = eq_rhs,   x >= lower componentwise,
/// where lower entries equal to -infinity mark free coordinates. Inequalities
/// other than bounds are expressed by the caller through slack variables.
struct LinearProgram {
  Eigen::VectorXd objective;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::VectorXd lower;
};

/// Smooth convex program
///   minimize  value(x)
///   s.t.      eq_matrix x = eq_rhs,   x_i > lower_i for barrier coordinates.
///
/// `value` must be finite (and convex) on the open domain
/// {x : x_i > lower_i for all barrier coordinates}; gradient and hessian are
/// evaluated only there. Entries of `lower` equal to -infinity mark free
/// coordinates.
struct SmoothConvexProgram {
  int dimension = 0;
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  std::function<Eigen::MatrixXd(const Eigen::VectorXd&)> hessian;
  Eigen::MatrixXd eq_matrix;
  Eigen::VectorXd eq_rhs;
  Eigen::VectorXd lower;
};

struct SolveResult {
  SolveStatus status = SolveStatus::numerical_failure;
  double value = std::numeric_limits<double>::quiet_NaN();
  Eigen::VectorXd x;
  double kkt_residual = std::numeric_limits<double>::quiet_NaN();
  int newton_steps = 0;
};

/// Log-barrier interior-point solve of an LP. When `start` is supplied and
/// is strictly feasible it is used directly, otherwise a Phase-I problem is
/// solved first. Infeasibility is declared when the Phase-I margin cannot be
/// pushed below 1e-9.
SolveResult solve_lp(const LinearProgram& lp, double tol = 1e-8,
                     const std::optional<Eigen::VectorXd>& start = {});

/// Log-barrier Newton solve of a smooth convex program; same Phase-I and
/// start-handling contract as solve_lp. The barrier parameter follows the
/// schedule mu <- mu/10 from mu = 1 until the estimated gap
/// (#barrier terms * mu) drops below tol.
SolveResult solve_convex(const SmoothConvexProgram& program, double tol = 1e-8,
                         const std::optional<Eigen::VectorXd>& start = {});

}  // namespace treedual
