#include "treedual/preferences.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

namespace treedual {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

UtilityField::UtilityField(UtilityKind kind, double p, Eigen::VectorXd weights)
    : kind_(kind), p_(p), weights_(std::move(weights)) {
  if (kind_ == UtilityKind::power) {
    if (!(p_ < 1.0) || p_ == 0.0) {
      throw ScenarioError("power utility exponent must lie in (-inf,0) or (0,1)");
    }
  }
  for (int i = 0; i < weights_.size(); ++i) {
    if (!(weights_[i] > 0.0)) {
      throw ScenarioError("utility weights must be strictly positive");
    }
  }
}

UtilityField UtilityField::log_field(int num_nodes) {
  return UtilityField(UtilityKind::log, 0.0, Eigen::VectorXd::Ones(num_nodes));
}

UtilityField UtilityField::power_field(int num_nodes, double exponent) {
  return UtilityField(UtilityKind::power, exponent,
                      Eigen::VectorXd::Ones(num_nodes));
}

UtilityField UtilityField::with_weights(Eigen::VectorXd weights) const {
  return UtilityField(kind_, p_, std::move(weights));
}

UtilityField UtilityField::from_scenario(const std::string& scenario_text,
                                         const MarketModel& model) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(scenario_text);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("invalid JSON: ") + e.what());
  }
  if (!doc.contains("utility")) return log_field(model.size());
  const auto& u = doc.at("utility");
  try {
    const std::string kind = u.at("kind").get<std::string>();
    UtilityField field = log_field(model.size());
    if (kind == "power") {
      field = power_field(model.size(), u.at("p").get<double>());
    } else if (kind != "log") {
      throw ScenarioError("utility kind must be \"log\" or \"power\"");
    }
    if (u.contains("weights")) {
      Eigen::VectorXd w = Eigen::VectorXd::Ones(model.size());
      for (const auto& [key, value] : u.at("weights").items()) {
        w[model.index_of_id(std::stoi(key))] = value.get<double>();
      }
      field = field.with_weights(std::move(w));
    }
    return field;
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("utility schema violation: ") + e.what());
  }
}

double UtilityField::evaluate(int node, double x) const {
  const double w = weights_[node];
  if (x < 0.0) return -kInf;
  if (kind_ == UtilityKind::log) {
    return x == 0.0 ? -kInf : w * std::log(x);
  }
  if (x == 0.0) return p_ > 0.0 ? 0.0 : -kInf;
  return w * std::pow(x, p_) / p_;
}

double UtilityField::marginal(int node, double x) const {
  const double w = weights_[node];
  if (kind_ == UtilityKind::log) return w / x;
  return w * std::pow(x, p_ - 1.0);
}

double UtilityField::marginal_derivative(int node, double x) const {
  const double w = weights_[node];
  if (kind_ == UtilityKind::log) return -w / (x * x);
  return w * (p_ - 1.0) * std::pow(x, p_ - 2.0);
}

double UtilityField::inverse_marginal(int node, double y) const {
  const double w = weights_[node];
  if (kind_ == UtilityKind::log) return w / y;
  return std::pow(y / w, 1.0 / (p_ - 1.0));
}

double UtilityField::inverse_marginal_derivative(int node, double y) const {
  const double w = weights_[node];
  if (kind_ == UtilityKind::log) return -w / (y * y);
  return std::pow(y / w, (2.0 - p_) / (p_ - 1.0)) / (w * (p_ - 1.0));
}

double UtilityField::conjugate(int node, double y) const {
  const double w = weights_[node];
  if (y < 0.0) return kInf;
  if (y == 0.0) return sup_value(node);
  if (kind_ == UtilityKind::log) {
    return w * (-std::log(y / w) - 1.0);
  }
  const double r = p_ / (p_ - 1.0);
  return std::pow(w, 1.0 / (1.0 - p_)) * ((1.0 - p_) / p_) * std::pow(y, r);
}

double UtilityField::conjugate_derivative(int node, double y) const {
  return -inverse_marginal(node, y);
}

double UtilityField::sup_value(int node) const {
  (void)node;
  if (kind_ == UtilityKind::log || p_ > 0.0) return kInf;
  return 0.0;
}

}  // namespace treedual
