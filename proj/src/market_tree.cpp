#include "treedual/market_tree.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

#include <json.hpp>

namespace treedual {

namespace {

constexpr double kProbTol = 1e-9;

std::string node_label(int id) {
  return "node " + std::to_string(id);
}

}  // namespace

MarketModel::MarketModel(int num_assets, double clock_bound,
                         const std::vector<int>& ids,
                         const std::vector<std::optional<int>>& parent_ids,
                         const std::vector<double>& probs,
                         const std::vector<Eigen::VectorXd>& prices,
                         const std::vector<double>& dkappas)
    : num_assets_(num_assets), clock_bound_(clock_bound) {
  const size_t n = ids.size();
  if (n == 0) throw ScenarioError("scenario has no nodes");
  if (num_assets_ <= 0) throw ScenarioError("asset count must be positive");
  if (!(clock_bound_ > 0.0)) throw ScenarioError("clock bound must be positive");
  if (parent_ids.size() != n || probs.size() != n || prices.size() != n ||
      dkappas.size() != n) {
    throw ScenarioError("inconsistent node field lengths");
  }

  // Map file ids to input positions and find the root.
  std::vector<std::pair<int, size_t>> by_id;
  by_id.reserve(n);
  int root_pos = -1;
  for (size_t i = 0; i < n; ++i) {
    by_id.emplace_back(ids[i], i);
    if (!parent_ids[i].has_value()) {
      if (root_pos >= 0) throw ScenarioError("more than one root node");
      root_pos = static_cast<int>(i);
    }
  }
  if (root_pos < 0) throw ScenarioError("no root node (every node has a parent)");
  std::sort(by_id.begin(), by_id.end());
  for (size_t i = 1; i < n; ++i) {
    if (by_id[i].first == by_id[i - 1].first) {
      throw ScenarioError("duplicate node id " + std::to_string(by_id[i].first));
    }
  }
  auto position_of_id = [&](int id) -> size_t {
    auto it = std::lower_bound(by_id.begin(), by_id.end(),
                               std::make_pair(id, size_t{0}));
    if (it == by_id.end() || it->first != id) {
      throw ScenarioError("unknown parent id " + std::to_string(id));
    }
    return it->second;
  };

  // Children lists in input order, then breadth-first renumbering.
  std::vector<std::vector<size_t>> kids(n);
  for (size_t i = 0; i < n; ++i) {
    if (parent_ids[i].has_value()) {
      kids[position_of_id(*parent_ids[i])].push_back(i);
    }
  }
  std::vector<int> dense_of_pos(n, -1);
  std::deque<size_t> queue{static_cast<size_t>(root_pos)};
  std::vector<size_t> order;
  order.reserve(n);
  while (!queue.empty()) {
    size_t pos = queue.front();
    queue.pop_front();
    dense_of_pos[pos] = static_cast<int>(order.size());
    order.push_back(pos);
    for (size_t child : kids[pos]) queue.push_back(child);
  }
  if (order.size() != n) {
    throw ScenarioError("unreachable nodes in scenario (orphan or cycle)");
  }

  nodes_.resize(n);
  for (size_t d = 0; d < n; ++d) {
    size_t pos = order[d];
    Node& nd = nodes_[d];
    nd.id = ids[pos];
    nd.prob = probs[pos];
    nd.prices = prices[pos];
    nd.dkappa = dkappas[pos];
    if (parent_ids[pos].has_value()) {
      int pdense = dense_of_pos[position_of_id(*parent_ids[pos])];
      nd.parent = pdense;
      nd.time = nodes_[pdense].time + 1;
      nodes_[pdense].children.push_back(static_cast<int>(d));
    } else {
      nd.parent = std::nullopt;
      nd.time = 0;
    }
    horizon_ = std::max(horizon_, nd.time);
    id_to_index_.emplace_back(nd.id, static_cast<int>(d));
  }
  std::sort(id_to_index_.begin(), id_to_index_.end());

  validate();
}

void MarketModel::validate() const {
  const Node& root = nodes_[0];
  if (std::abs(root.prob - 1.0) > kProbTol) {
    throw ScenarioError("root probability must be 1");
  }
  for (const Node& nd : nodes_) {
    if (!(nd.prob > 0.0)) {
      throw ScenarioError("nonpositive probability at " + node_label(nd.id));
    }
    if (nd.dkappa < 0.0) {
      throw ScenarioError("negative dkappa at " + node_label(nd.id));
    }
    if (nd.prices.size() != num_assets_) {
      throw ScenarioError("price vector of wrong length at " + node_label(nd.id));
    }
    if (!nd.children.empty()) {
      double mass = 0.0;
      for (int c : nd.children) mass += nodes_[c].prob;
      if (std::abs(mass - nd.prob) > kProbTol * (1.0 + nd.prob)) {
        std::ostringstream msg;
        msg << "probability mass mismatch at " << node_label(nd.id)
            << ": children sum to " << mass << ", expected " << nd.prob;
        throw ScenarioError(msg.str());
      }
    }
  }
  if (max_path_clock() > clock_bound_ * (1.0 + 1e-12) + 1e-12) {
    throw ScenarioError("path clock mass exceeds the clock bound");
  }
  bool any_clock = false;
  for (const Node& nd : nodes_) any_clock = any_clock || nd.dkappa > 0.0;
  if (!any_clock) {
    throw ScenarioError("total clock mass is zero on every path");
  }
}

int MarketModel::index_of_id(int id) const {
  auto it = std::lower_bound(id_to_index_.begin(), id_to_index_.end(),
                             std::make_pair(id, -1));
  if (it == id_to_index_.end() || it->first != id) {
    throw ScenarioError("unknown node id " + std::to_string(id));
  }
  return it->second;
}

std::vector<int> MarketModel::leaves() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (is_terminal(i)) out.push_back(i);
  }
  return out;
}

std::vector<int> MarketModel::non_terminal_nodes() const {
  std::vector<int> out;
  for (int i = 0; i < size(); ++i) {
    if (!is_terminal(i)) out.push_back(i);
  }
  return out;
}

double MarketModel::conditional_prob(int child) const {
  const Node& c = nodes_[child];
  if (!c.parent.has_value()) return 1.0;
  return c.prob / nodes_[*c.parent].prob;
}

double MarketModel::conditional_expectation(int node,
                                            const Eigen::VectorXd& f) const {
  double acc = 0.0;
  for (int c : nodes_[node].children) acc += conditional_prob(c) * f[c];
  return acc;
}

double MarketModel::clock_expectation(const Eigen::VectorXd& f) const {
  double acc = 0.0;
  for (int i = 0; i < size(); ++i) {
    acc += nodes_[i].prob * nodes_[i].dkappa * f[i];
  }
  return acc;
}

double MarketModel::max_path_clock() const {
  // path clock accumulated along the breadth-first order
  std::vector<double> acc(nodes_.size(), 0.0);
  double best = 0.0;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    const Node& nd = nodes_[i];
    acc[i] = nd.dkappa + (nd.parent ? acc[*nd.parent] : 0.0);
    if (nd.children.empty()) best = std::max(best, acc[i]);
  }
  return best;
}

double MarketModel::total_clock_mass() const {
  double acc = 0.0;
  for (const Node& nd : nodes_) acc += nd.prob * nd.dkappa;
  return acc;
}

MarketModel parse_scenario(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("invalid JSON: ") + e.what());
  }
  try {
    if (!doc.is_object()) throw ScenarioError("scenario must be a JSON object");
    if (!doc.contains("assets") || !doc.contains("clock_bound") ||
        !doc.contains("nodes")) {
      throw ScenarioError("scenario needs keys: assets, clock_bound, nodes");
    }
    const int d = doc.at("assets").get<int>();
    const double bound = doc.at("clock_bound").get<double>();
    const auto& arr = doc.at("nodes");
    if (!arr.is_array()) throw ScenarioError("\"nodes\" must be an array");

    std::vector<int> ids;
    std::vector<std::optional<int>> parents;
    std::vector<double> probs;
    std::vector<Eigen::VectorXd> prices;
    std::vector<double> dkappas;
    for (const auto& item : arr) {
      ids.push_back(item.at("id").get<int>());
      if (item.contains("parent") && !item.at("parent").is_null()) {
        parents.emplace_back(item.at("parent").get<int>());
      } else {
        parents.emplace_back(std::nullopt);
      }
      probs.push_back(item.at("prob").get<double>());
      const auto& pv = item.at("prices");
      Eigen::VectorXd s(pv.size());
      for (size_t k = 0; k < pv.size(); ++k) s[static_cast<int>(k)] = pv.at(k).get<double>();
      prices.push_back(std::move(s));
      dkappas.push_back(item.at("dkappa").get<double>());
    }
    return MarketModel(d, bound, ids, parents, probs, prices, dkappas);
  } catch (const nlohmann::json::exception& e) {
    throw ScenarioError(std::string("scenario schema violation: ") + e.what());
  }
}

std::vector<Eigen::VectorXd> price_increments(const MarketModel& model) {
  std::vector<Eigen::VectorXd> inc(model.size());
  inc[0] = Eigen::VectorXd::Zero(model.num_assets());
  for (int i = 1; i < model.size(); ++i) {
    const Node& nd = model.node(i);
    inc[i] = nd.prices - model.node(*nd.parent).prices;
  }
  return inc;
}

WealthProcess wealth_process(const MarketModel& model, double x,
                             const Eigen::MatrixXd& holdings,
                             const ConsumptionPlan& plan) {
  if (holdings.rows() != model.size() || holdings.cols() != model.num_assets()) {
    throw std::invalid_argument("holdings must be (nodes x assets)");
  }
  if (plan.rate.size() != model.size()) {
    throw std::invalid_argument("consumption plan must have one rate per node");
  }
  WealthProcess w;
  w.pre.resize(model.size());
  w.post.resize(model.size());
  const auto inc = price_increments(model);
  for (int i = 0; i < model.size(); ++i) {
    const Node& nd = model.node(i);
    if (!nd.parent) {
      w.pre[i] = x;
    } else {
      const int p = *nd.parent;
      w.pre[i] = w.post[p] + holdings.row(p).dot(inc[i]);
    }
    w.post[i] = w.pre[i] - plan.rate[i] * nd.dkappa;
  }
  return w;
}

}  // namespace treedual
