#pragma once

#include <string>

#include <Eigen/Dense>

#include "treedual/market_tree.hpp"

namespace treedual {

enum class UtilityKind { log, power };

/// Node-dependent utility field of log or power (CRRA) type with strictly
/// positive per-node weights w(n):
///
///   log:    U(n, x) = w(n) * ln x
///   power:  U(n, x) = w(n) * x^p / p,   p in (-inf, 0) or (0, 1)
///
/// Both families are strictly concave, strictly increasing, continuously
/// differentiable on (0, inf) and have infinite marginal utility at 0 and
/// vanishing marginal utility at infinity. Values at the boundary follow the
/// extended-real conventions: U(n, 0) is the limit from the right (possibly
/// -inf) and the conjugate at y = 0 is sup_x U(n, x) (possibly +inf).
class UtilityField {
 public:
  static UtilityField log_field(int num_nodes);
  static UtilityField power_field(int num_nodes, double exponent);

  /// Reads the "utility" key of a scenario document. Missing key defaults to
  /// log utility with unit weights. Weight maps are keyed by node id.
  static UtilityField from_scenario(const std::string& scenario_text,
                                    const MarketModel& model);

  UtilityField with_weights(Eigen::VectorXd weights) const;

  UtilityKind kind() const { return kind_; }
  double exponent() const { return p_; }
  int num_nodes() const { return static_cast<int>(weights_.size()); }
  const Eigen::VectorXd& weights() const { return weights_; }

  /// U(n, x) for x >= 0, extended-real valued.
  double evaluate(int node, double x) const;

  /// U'(n, x), x > 0.
  double marginal(int node, double x) const;

  /// U''(n, x), x > 0 (strictly negative).
  double marginal_derivative(int node, double x) const;

  /// I(n, y) = (U')^{-1}(n, y), y > 0.
  double inverse_marginal(int node, double y) const;

  /// dI/dy (n, y), y > 0 (strictly negative).
  double inverse_marginal_derivative(int node, double y) const;

  /// Convex conjugate V(n, y) = sup_{x>0} (U(n, x) - x y), y >= 0.
  double conjugate(int node, double y) const;

  /// V'(n, y) = -I(n, y), y > 0.
  double conjugate_derivative(int node, double y) const;

  /// sup_x U(n, x): +inf for log and p in (0,1), 0 for p < 0.
  double sup_value(int node) const;

 private:
  UtilityField(UtilityKind kind, double p, Eigen::VectorXd weights);

  UtilityKind kind_;
  double p_;
  Eigen::VectorXd weights_;
};

}  // namespace treedual
