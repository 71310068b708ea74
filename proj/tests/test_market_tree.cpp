#include <doctest.h>

#include <random>

#include "support/fixtures.hpp"
#include "support/random_trees.hpp"
#include "treedual/market_tree.hpp"

using namespace treedual;
using treedual::testing::load_scenario;
using treedual::testing::random_tree;

namespace {

std::string two_period_binomial() {
  return R"({
    "assets": 1, "clock_bound": 1.0,
    "nodes": [
      {"id": 0, "parent": null, "prob": 1.0, "prices": [1.0], "dkappa": 0.0},
      {"id": 1, "parent": 0, "prob": 0.5, "prices": [2.0], "dkappa": 0.5},
      {"id": 2, "parent": 0, "prob": 0.5, "prices": [0.5], "dkappa": 0.5},
      {"id": 3, "parent": 1, "prob": 0.25, "prices": [4.0], "dkappa": 0.5},
      {"id": 4, "parent": 1, "prob": 0.25, "prices": [1.0], "dkappa": 0.5},
      {"id": 5, "parent": 2, "prob": 0.25, "prices": [1.0], "dkappa": 0.5},
      {"id": 6, "parent": 2, "prob": 0.25, "prices": [0.25], "dkappa": 0.5}
    ]
  })";
}

}  // namespace

TEST_CASE("bin1 parses into the smallest nondegenerate tree") {
  const auto sc = load_scenario("bin1");
  const MarketModel& m = sc.model;
  CHECK(m.size() == 3);
  CHECK(m.num_assets() == 1);
  CHECK(m.horizon() == 1);
  CHECK(m.node(0).time == 0);
  CHECK(m.node(0).prob == doctest::Approx(1.0));
  CHECK(m.is_terminal(1));
  CHECK(m.is_terminal(2));
  CHECK(m.children(0).size() == 2);
  CHECK(m.max_path_clock() == doctest::Approx(1.0));
}

TEST_CASE("probability mass mismatch is rejected") {
  const std::string bad = R"({
    "assets": 1, "clock_bound": 1.0,
    "nodes": [
      {"id": 0, "parent": null, "prob": 1.0, "prices": [1.0], "dkappa": 0.0},
      {"id": 1, "parent": 0, "prob": 0.5, "prices": [2.0], "dkappa": 1.0},
      {"id": 2, "parent": 0, "prob": 0.6, "prices": [0.5], "dkappa": 1.0}
    ]
  })";
  CHECK_THROWS_WITH_AS(parse_scenario(bad),
                       doctest::Contains("probability mass mismatch"),
                       ScenarioError);
}

TEST_CASE("two-period binomial with half-unit clock steps") {
  const MarketModel m = parse_scenario(two_period_binomial());
  CHECK(m.size() == 7);
  CHECK(m.horizon() == 2);
  CHECK(m.max_path_clock() == doctest::Approx(1.0));
}

TEST_CASE("scenario validation failures") {
  SUBCASE("negative dkappa") {
    const std::string bad = R"({
      "assets": 1, "clock_bound": 1.0,
      "nodes": [
        {"id": 0, "parent": null, "prob": 1.0, "prices": [1.0], "dkappa": -0.5}
      ]
    })";
    CHECK_THROWS_WITH_AS(parse_scenario(bad), doctest::Contains("negative dkappa"),
                         ScenarioError);
  }
  SUBCASE("clock bound exceeded") {
    const std::string bad = R"({
      "assets": 1, "clock_bound": 0.5,
      "nodes": [
        {"id": 0, "parent": null, "prob": 1.0, "prices": [1.0], "dkappa": 1.0}
      ]
    })";
    CHECK_THROWS_WITH_AS(parse_scenario(bad), doctest::Contains("clock bound"),
                         ScenarioError);
  }
  SUBCASE("zero clock mass") {
    const std::string bad = R"({
      "assets": 1, "clock_bound": 1.0,
      "nodes": [
        {"id": 0, "parent": null, "prob": 1.0, "prices": [1.0], "dkappa": 0.0},
        {"id": 1, "parent": 0, "prob": 1.0, "prices": [1.0], "dkappa": 0.0}
      ]
    })";
    CHECK_THROWS_WITH_AS(parse_scenario(bad), doctest::Contains("clock mass"),
                         ScenarioError);
  }
  SUBCASE("duplicate ids") {
    const std::string bad = R"({
      "assets": 1, "clock_bound": 1.0,
      "nodes": [
        {"id": 0, "parent": null, "prob": 1.0, "prices": [1.0], "dkappa": 1.0},
        {"id": 0, "parent": 0, "prob": 1.0, "prices": [1.0], "dkappa": 0.0}
      ]
    })";
    CHECK_THROWS_AS(parse_scenario(bad), ScenarioError);
  }
  SUBCASE("two roots") {
    const std::string bad = R"({
      "assets": 1, "clock_bound": 1.0,
      "nodes": [
        {"id": 0, "parent": null, "prob": 1.0, "prices": [1.0], "dkappa": 1.0},
        {"id": 1, "parent": null, "prob": 1.0, "prices": [1.0], "dkappa": 0.0}
      ]
    })";
    CHECK_THROWS_WITH_AS(parse_scenario(bad), doctest::Contains("root"),
                         ScenarioError);
  }
  SUBCASE("schema violation: missing prob") {
    const std::string bad = R"({
      "assets": 1, "clock_bound": 1.0,
      "nodes": [{"id": 0, "parent": null, "prices": [1.0], "dkappa": 1.0}]
    })";
    CHECK_THROWS_AS(parse_scenario(bad), ScenarioError);
  }
}

TEST_CASE("price increments") {
  SUBCASE("bin1 edges") {
    const auto sc = load_scenario("bin1");
    const auto inc = price_increments(sc.model);
    CHECK(inc[1][0] == doctest::Approx(1.0));
    CHECK(inc[2][0] == doctest::Approx(-0.5));
  }
  SUBCASE("constant-price tree has zero increments") {
    const auto sc = load_scenario("singlepath");
    const auto inc = price_increments(sc.model);
    for (int i = 1; i < sc.model.size(); ++i) {
      CHECK(inc[i].lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
    }
  }
  SUBCASE("two assets, one constant") {
    const std::string text = R"({
      "assets": 2, "clock_bound": 1.0,
      "nodes": [
        {"id": 0, "parent": null, "prob": 1.0, "prices": [1.0, 3.0], "dkappa": 0.0},
        {"id": 1, "parent": 0, "prob": 0.5, "prices": [2.0, 3.0], "dkappa": 1.0},
        {"id": 2, "parent": 0, "prob": 0.5, "prices": [0.5, 3.0], "dkappa": 1.0}
      ]
    })";
    const MarketModel m = parse_scenario(text);
    const auto inc = price_increments(m);
    CHECK(inc[1][1] == 0.0);
    CHECK(inc[2][1] == 0.0);
    CHECK(inc[1][0] == doctest::Approx(1.0));
  }
}

TEST_CASE("wealth recursion on bin1") {
  const auto sc = load_scenario("bin1");
  const MarketModel& m = sc.model;
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(3, 1);
  ConsumptionPlan zero{Eigen::VectorXd::Zero(3)};

  SUBCASE("no trading, no consumption") {
    const auto w = wealth_process(m, 1.0, H, zero);
    for (int i = 0; i < 3; ++i) {
      CHECK(w.pre[i] == doctest::Approx(1.0));
      CHECK(w.post[i] == doctest::Approx(1.0));
    }
  }
  SUBCASE("one share held") {
    H(0, 0) = 1.0;
    const auto w = wealth_process(m, 1.0, H, zero);
    CHECK(w.pre[1] == doctest::Approx(2.0));
    CHECK(w.pre[2] == doctest::Approx(0.5));
  }
  SUBCASE("consume one unit at the leaves") {
    Eigen::VectorXd c(3);
    c << 0.0, 1.0, 1.0;
    const auto w = wealth_process(m, 1.0, H, ConsumptionPlan{c});
    CHECK(w.post[1] == doctest::Approx(0.0));
    CHECK(w.post[2] == doctest::Approx(0.0));
  }
}

TEST_CASE("conditional expectations tower over two stages") {
  const auto sc = load_scenario("threestage");
  const MarketModel& m = sc.model;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  Eigen::VectorXd f(m.size());
  for (int i = 0; i < m.size(); ++i) f[i] = u(rng);

  // One-shot expectation over the grandchildren of the root vs the tower.
  double one_shot = 0.0;
  for (int c : m.children(m.root())) {
    for (int g : m.children(c)) one_shot += m.node(g).prob * f[g];
  }
  Eigen::VectorXd inner = Eigen::VectorXd::Zero(m.size());
  for (int c : m.children(m.root())) {
    inner[c] = m.conditional_expectation(c, f);
  }
  const double towered = m.conditional_expectation(m.root(), inner);
  CHECK(std::abs(one_shot - towered) <= 1e-12);

  // Children mass identity at every inner node.
  for (int i : m.non_terminal_nodes()) {
    double lhs = 0.0;
    for (int c : m.children(i)) lhs += m.node(c).prob * f[c];
    const double rhs = m.node(i).prob * m.conditional_expectation(i, f);
    CHECK(std::abs(lhs - rhs) <= 1e-12);
  }
}

TEST_CASE("wealth recursion is affine in (x, H, c)") {
  const auto sc = load_scenario("threestage");
  const MarketModel& m = sc.model;
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto draw = [&] {
    Eigen::MatrixXd H(m.size(), 1);
    Eigen::VectorXd c(m.size());
    for (int i = 0; i < m.size(); ++i) {
      H(i, 0) = u(rng);
      c[i] = std::abs(u(rng));
    }
    return std::make_pair(H, c);
  };
  for (int probe = 0; probe < 5; ++probe) {
    auto [H1, c1] = draw();
    auto [H2, c2] = draw();
    const double x1 = 1.0 + std::abs(u(rng)), x2 = 0.5 + std::abs(u(rng));
    const double a = u(rng), b = u(rng);
    const auto w1 = wealth_process(m, x1, H1, ConsumptionPlan{c1});
    const auto w2 = wealth_process(m, x2, H2, ConsumptionPlan{c2});
    const auto wc = wealth_process(m, a * x1 + b * x2, a * H1 + b * H2,
                                   ConsumptionPlan{a * c1 + b * c2});
    const Eigen::VectorXd expect_pre = a * w1.pre + b * w2.pre;
    const Eigen::VectorXd expect_post = a * w1.post + b * w2.post;
    CHECK((wc.pre - expect_pre).lpNorm<Eigen::Infinity>() <= 1e-12);
    CHECK((wc.post - expect_post).lpNorm<Eigen::Infinity>() <= 1e-12);
  }
}

TEST_CASE("random trees validate and respect their clock bounds") {
  std::mt19937_64 rng(2024);
  treedual::testing::RandomTreeOptions opt;
  opt.arbitrage_probability = 0.3;
  for (int k = 0; k < 25; ++k) {
    const MarketModel m = random_tree(rng, opt);
    CHECK(m.max_path_clock() <= m.clock_bound() + 1e-12);
    CHECK(m.total_clock_mass() > 0.0);
    CHECK(m.node(m.root()).prob == doctest::Approx(1.0));
  }
}
