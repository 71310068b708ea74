#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace treedual {

/// Raised on malformed or inconsistent scenario input.
struct ScenarioError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One node of the event tree.
///
/// Probabilities are unconditional path probabilities, so expectations are
/// plain weighted sums over nodes. `dkappa` is the consumption-clock
/// increment charged at this node; nodes with dkappa == 0 carry no
/// consumption decision.
struct Node {
  int id = 0;                  ///< node id as written in the scenario file
  int time = 0;                ///< stage index; the root sits at stage 0
  std::optional<int> parent;   ///< dense index of the parent node
  double prob = 0.0;           ///< unconditional probability, > 0
  Eigen::VectorXd prices;      ///< discounted asset prices at this node
  double dkappa = 0.0;         ///< clock increment, >= 0
  std::vector<int> children;   ///< dense indices of the children
};

/// Nonnegative consumption rate, one entry per node (dense index order).
struct ConsumptionPlan {
  Eigen::VectorXd rate;
};

/// Wealth of a portfolio along the tree. `pre` is wealth before the node's
/// consumption is charged, `post` after (post = pre - c * dkappa).
struct WealthProcess {
  Eigen::VectorXd pre;
  Eigen::VectorXd post;
};

/// Validated finite-state market: event tree, probabilities, d asset price
/// processes and the consumption clock. Immutable after construction and
/// safe to share across threads.
///
/// Nodes are stored in breadth-first order, so a parent always precedes its
/// children and stage levels are contiguous. The root has dense index 0.
class MarketModel {
 public:
  /// Builds and fully validates a model from parsed scenario fields.
  /// `parents` holds file ids (negative = root marker handled by caller as
  /// std::nullopt). Throws ScenarioError on any invariant violation.
  MarketModel(int num_assets, double clock_bound,
              const std::vector<int>& ids,
              const std::vector<std::optional<int>>& parent_ids,
              const std::vector<double>& probs,
              const std::vector<Eigen::VectorXd>& prices,
              const std::vector<double>& dkappas);

  int size() const { return static_cast<int>(nodes_.size()); }
  int num_assets() const { return num_assets_; }
  double clock_bound() const { return clock_bound_; }
  int horizon() const { return horizon_; }

  const Node& node(int i) const { return nodes_[i]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<int>& children(int i) const { return nodes_[i].children; }
  bool is_terminal(int i) const { return nodes_[i].children.empty(); }
  int root() const { return 0; }

  /// Dense index of the node with the given file id.
  int index_of_id(int id) const;

  std::vector<int> leaves() const;
  std::vector<int> non_terminal_nodes() const;

  /// p(child) / p(parent).
  double conditional_prob(int child) const;

  /// E[f_child | node] = sum over children of (p_m / p_n) f_m.
  double conditional_expectation(int node, const Eigen::VectorXd& f) const;

  /// E[sum_n f_n dkappa_n] = sum_n p_n f_n dkappa_n.
  double clock_expectation(const Eigen::VectorXd& f) const;

  /// Largest root-to-leaf sum of dkappa.
  double max_path_clock() const;

  /// Total clock weight sum_n p_n dkappa_n.
  double total_clock_mass() const;

 private:
  int num_assets_ = 0;
  double clock_bound_ = 0.0;
  int horizon_ = 0;
  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> id_to_index_;  // sorted by id

  void validate() const;
};

/// Parses a JSON scenario document (see README for the schema) into a
/// validated MarketModel. Throws ScenarioError on schema violations,
/// probability mass mismatches, negative clock increments, clock bound
/// violations or zero total clock mass.
MarketModel parse_scenario(const std::string& text);

/// Price increments S(child) - S(parent), indexed by child node. The root
/// entry is the zero vector.
std::vector<Eigen::VectorXd> price_increments(const MarketModel& model);

/// Runs the self-financing wealth recursion for initial capital x, holdings
/// H (one row per node; rows of terminal nodes are ignored) and consumption
/// plan c. No admissibility check is performed here.
WealthProcess wealth_process(const MarketModel& model, double x,
                             const Eigen::MatrixXd& holdings,
                             const ConsumptionPlan& plan);

}  // namespace treedual
