#include "random_trees.hpp"

#include <algorithm>
#include <vector>

namespace treedual::testing {

namespace {

// Dyadic building blocks keep all tree arithmetic exact in doubles.
const std::vector<std::vector<double>> kSplits2 = {
    {0.5, 0.5}, {0.25, 0.75}, {0.625, 0.375}};
const std::vector<std::vector<double>> kSplits3 = {
    {0.25, 0.25, 0.5}, {0.5, 0.25, 0.25}, {0.125, 0.375, 0.5}};
const std::vector<double> kMoves = {0.25, 0.5, 1.0, 2.0};
const std::vector<double> kRatios = {0.5, 1.0, 2.0};

double pick(std::mt19937_64& rng, const std::vector<double>& values) {
  std::uniform_int_distribution<size_t> d(0, values.size() - 1);
  return values[d(rng)];
}

int pick_int(std::mt19937_64& rng, int lo, int hi) {
  std::uniform_int_distribution<int> d(lo, hi);
  return d(rng);
}

// One-period increments for `branch` children over `d` assets such that a
// strictly positive martingale weighting exists (zero lies in the relative
// interior of the increment hull).
std::vector<Eigen::VectorXd> safe_increments(std::mt19937_64& rng, int d,
                                             int branch) {
  std::vector<Eigen::VectorXd> inc(branch, Eigen::VectorXd::Zero(d));
  if (branch == 1) return inc;  // single child: no move
  if (d == 1) {
    inc[0][0] = pick(rng, kMoves);
    inc[1][0] = -pick(rng, kMoves);
    for (int m = 2; m < branch; ++m) {
      const int sign = pick_int(rng, 0, 2) - 1;
      inc[m][0] = sign * pick(rng, kMoves);
    }
    return inc;
  }
  // d == 2
  auto draw2 = [&](Eigen::VectorXd& v) {
    v[0] = (pick_int(rng, 0, 1) ? 1.0 : -1.0) * pick(rng, kMoves);
    v[1] = (pick_int(rng, 0, 1) ? 1.0 : -1.0) * pick(rng, kMoves);
  };
  if (branch == 2) {
    draw2(inc[0]);
    inc[1] = -pick(rng, kRatios) * inc[0];
    return inc;
  }
  draw2(inc[0]);
  draw2(inc[1]);
  inc[2] = -(pick(rng, kRatios) * inc[0] + pick(rng, kRatios) * inc[1]);
  return inc;
}

}  // namespace

MarketModel random_tree(std::mt19937_64& rng, const RandomTreeOptions& options) {
  const int stages = pick_int(rng, 1, options.max_stages);
  const int d = pick_int(rng, 1, options.max_assets);

  std::vector<int> ids, times;
  std::vector<std::optional<int>> parents;
  std::vector<double> probs, dkappas;
  std::vector<Eigen::VectorXd> prices;

  Eigen::VectorXd s0 = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < d; ++k) s0[k] = pick(rng, {1.0, 2.0, 4.0});
  ids.push_back(0);
  times.push_back(0);
  parents.emplace_back(std::nullopt);
  probs.push_back(1.0);
  prices.push_back(s0);
  dkappas.push_back(pick(rng, {0.0, 0.25, 0.5}));

  std::bernoulli_distribution corrupt(options.arbitrage_probability);
  const bool implant = corrupt(rng);
  std::vector<int> frontier = {0};
  std::vector<std::pair<int, int>> inner_spans;  // (first child index, branch)

  for (int t = 1; t <= stages; ++t) {
    std::vector<int> next;
    for (int parent : frontier) {
      const int branch = pick_int(rng, 1, options.max_branch);
      auto inc = safe_increments(rng, d, branch);
      const std::vector<double> split =
          branch == 1 ? std::vector<double>{1.0}
          : branch == 2 ? kSplits2[pick_int(rng, 0, static_cast<int>(kSplits2.size()) - 1)]
                        : kSplits3[pick_int(rng, 0, static_cast<int>(kSplits3.size()) - 1)];
      inner_spans.emplace_back(static_cast<int>(ids.size()), branch);
      for (int m = 0; m < branch; ++m) {
        ids.push_back(static_cast<int>(ids.size()));
        times.push_back(t);
        parents.emplace_back(parent);
        probs.push_back(probs[parent] * split[m]);
        prices.push_back(prices[parent] + inc[m]);
        dkappas.push_back(pick(rng, {0.0, 0.25, 0.5}));
        next.push_back(static_cast<int>(ids.size()) - 1);
      }
    }
    frontier = std::move(next);
  }

  if (implant && !inner_spans.empty()) {
    // Shift one family of increments by a common drift: afterwards every
    // child move has a strictly positive component in the drift direction,
    // which is a one-period arbitrage. Descendant increments change too,
    // but the tree keeps at least this one arbitrage node either way.
    const auto [first_child, branch] =
        inner_spans[pick_int(rng, 0, static_cast<int>(inner_spans.size()) - 1)];
    Eigen::VectorXd drift = Eigen::VectorXd::Zero(d);
    drift[0] = 8.0;
    for (int m = 0; m < branch; ++m) {
      prices[first_child + m] += drift;
    }
  }

  bool any_clock = false;
  for (double dk : dkappas) any_clock = any_clock || dk > 0.0;
  if (!any_clock) dkappas[0] = 0.5;

  // Clock bound: exact max path sum.
  std::vector<double> acc(ids.size(), 0.0);
  double bound = 0.0;
  for (size_t i = 0; i < ids.size(); ++i) {
    acc[i] = dkappas[i] + (parents[i] ? acc[*parents[i]] : 0.0);
    bound = std::max(bound, acc[i]);
  }

  return MarketModel(d, bound, ids, parents, probs, prices, dkappas);
}

}  // namespace treedual::testing
