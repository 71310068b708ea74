#include <doctest.h>

#include <cmath>
#include <random>

#include "support/fixtures.hpp"
#include "treedual/preferences.hpp"

using namespace treedual;

namespace {

// Brute-force conjugate: maximize U(x) - x y over a log-spaced grid with a
// golden-section polish. Used as an oracle against the closed forms.
double conjugate_by_search(const UtilityField& u, int node, double y) {
  double best_x = 1.0, best = -std::numeric_limits<double>::infinity();
  for (int k = -400; k <= 400; ++k) {
    const double x = std::pow(10.0, k / 25.0);
    const double v = u.evaluate(node, x) - x * y;
    if (v > best) {
      best = v;
      best_x = x;
    }
  }
  double lo = best_x / std::pow(10.0, 1.0 / 25.0);
  double hi = best_x * std::pow(10.0, 1.0 / 25.0);
  const double phi = 0.5 * (std::sqrt(5.0) - 1.0);
  double a = lo, b = hi;
  double c = b - phi * (b - a), d = a + phi * (b - a);
  for (int it = 0; it < 200; ++it) {
    const double fc = u.evaluate(node, c) - c * y;
    const double fd = u.evaluate(node, d) - d * y;
    if (fc > fd) {
      b = d;
    } else {
      a = c;
    }
    c = b - phi * (b - a);
    d = a + phi * (b - a);
  }
  const double xm = 0.5 * (a + b);
  return u.evaluate(node, xm) - xm * y;
}

}  // namespace

TEST_CASE("utility values") {
  const auto log1 = UtilityField::log_field(1);
  CHECK(log1.evaluate(0, 1.0) == doctest::Approx(0.0));
  CHECK(log1.evaluate(0, 0.0) == -std::numeric_limits<double>::infinity());

  const auto pow_half = UtilityField::power_field(1, 0.5);
  CHECK(pow_half.evaluate(0, 4.0) == doctest::Approx(4.0));
  CHECK(pow_half.evaluate(0, 0.0) == 0.0);

  Eigen::VectorXd w(1);
  w << 2.0;
  const auto log_w2 = UtilityField::log_field(1).with_weights(w);
  CHECK(log_w2.evaluate(0, std::exp(1.0)) == doctest::Approx(2.0));

  const auto pow_neg = UtilityField::power_field(1, -1.0);
  CHECK(pow_neg.evaluate(0, 0.0) == -std::numeric_limits<double>::infinity());
  CHECK(pow_neg.evaluate(0, 2.0) == doctest::Approx(-0.5));
}

TEST_CASE("marginals and their inverses") {
  const auto log1 = UtilityField::log_field(1);
  CHECK(log1.marginal(0, 2.0) == doctest::Approx(0.5));
  CHECK(log1.inverse_marginal(0, 0.5) == doctest::Approx(2.0));

  const auto pow_half = UtilityField::power_field(1, 0.5);
  CHECK(pow_half.marginal(0, 4.0) == doctest::Approx(0.5));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> ux(0.01, 100.0);
  std::uniform_real_distribution<double> uw(0.1, 10.0);
  std::uniform_real_distribution<double> up(-3.0, 0.95);
  for (int k = 0; k < 100; ++k) {
    double p = up(rng);
    if (std::abs(p) < 0.05) p = 0.5;
    Eigen::VectorXd w(1);
    w << uw(rng);
    const auto u = UtilityField::power_field(1, p).with_weights(w);
    const double x = ux(rng);
    CHECK(u.inverse_marginal(0, u.marginal(0, x)) ==
          doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("inada behaviour at the extremes") {
  const auto log1 = UtilityField::log_field(1);
  const auto pow_half = UtilityField::power_field(1, 0.5);
  const auto pow_neg = UtilityField::power_field(1, -1.0);
  for (const auto* u : {&log1, &pow_half, &pow_neg}) {
    CHECK(u->marginal(0, 1e-8) >= 1e4 * (1.0 - 1e-12));
    CHECK(u->marginal(0, 1e8) <= 1e-4 * (1.0 + 1e-12));
  }
}

TEST_CASE("conjugate closed forms") {
  const auto log1 = UtilityField::log_field(1);
  CHECK(log1.conjugate(0, 1.0) == doctest::Approx(-1.0));

  const auto pow_half = UtilityField::power_field(1, 0.5);
  CHECK(pow_half.conjugate(0, 1.0) == doctest::Approx(1.0));

  // Fenchel touching point: V(U'(x)) = U(x) - x U'(x).
  for (double x : {0.3, 1.0, 2.5, 7.0}) {
    for (const auto* u : {&log1, &pow_half}) {
      const double y = u->marginal(0, x);
      CHECK(u->conjugate(0, y) ==
            doctest::Approx(u->evaluate(0, x) - x * y).epsilon(1e-12));
    }
  }
}

TEST_CASE("conjugate values at zero follow the suprema") {
  const auto log1 = UtilityField::log_field(1);
  const auto pow_half = UtilityField::power_field(1, 0.5);
  const auto pow_neg = UtilityField::power_field(1, -1.0);
  CHECK(log1.conjugate(0, 0.0) == std::numeric_limits<double>::infinity());
  CHECK(pow_half.conjugate(0, 0.0) == std::numeric_limits<double>::infinity());
  CHECK(pow_neg.conjugate(0, 0.0) == 0.0);
}

TEST_CASE("conjugate agrees with brute-force maximization") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> uy(0.05, 20.0);
  std::uniform_real_distribution<double> uw(0.25, 4.0);
  const double ps[] = {0.5, 0.25, -0.5, -2.0};
  for (int k = 0; k < 40; ++k) {
    Eigen::VectorXd w(1);
    w << uw(rng);
    const double y = uy(rng);
    UtilityField u = (k % 2 == 0)
                         ? UtilityField::log_field(1).with_weights(w)
                         : UtilityField::power_field(1, ps[k % 4]).with_weights(w);
    const double closed = u.conjugate(0, y);
    const double searched = conjugate_by_search(u, 0, y);
    CHECK(closed == doctest::Approx(searched).epsilon(1e-6));
  }
}

TEST_CASE("Fenchel-Young inequality with equality at the touching point") {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> ux(0.02, 50.0);
  std::uniform_real_distribution<double> uy(0.02, 50.0);
  std::uniform_real_distribution<double> uw(0.25, 4.0);
  int equality_hits = 0;
  for (int k = 0; k < 10000; ++k) {
    Eigen::VectorXd w(1);
    w << uw(rng);
    UtilityField u = (k % 3 == 0)
                         ? UtilityField::log_field(1).with_weights(w)
                         : UtilityField::power_field(1, k % 3 == 1 ? 0.5 : -1.0)
                               .with_weights(w);
    const double x = ux(rng);
    const double y = (k % 5 == 0) ? u.marginal(0, x) : uy(rng);
    const double lhs = u.evaluate(0, x) - x * y;
    const double rhs = u.conjugate(0, y);
    CHECK(lhs <= rhs + 1e-9 * (1.0 + std::abs(rhs)));
    if (std::abs(y - u.marginal(0, x)) <= 1e-12 * y) {
      CHECK(lhs == doctest::Approx(rhs).epsilon(1e-9));
      ++equality_hits;
    }
  }
  CHECK(equality_hits >= 1000);
}

TEST_CASE("strict concavity via midpoints") {
  const auto log1 = UtilityField::log_field(1);
  const auto pow_half = UtilityField::power_field(1, 0.5);
  const auto pow_neg = UtilityField::power_field(1, -1.5);
  for (const auto* u : {&log1, &pow_half, &pow_neg}) {
    for (double a : {0.1, 0.7, 2.0}) {
      for (double b : {0.4, 1.3, 9.0}) {
        if (a == b) continue;
        const double mid = u->evaluate(0, 0.5 * (a + b));
        const double chord = 0.5 * (u->evaluate(0, a) + u->evaluate(0, b));
        CHECK(mid > chord);
      }
    }
  }
}

TEST_CASE("utility parsing from scenario documents") {
  const auto sc = treedual::testing::load_scenario("threestage");
  CHECK(sc.utility.kind() == UtilityKind::log);
  CHECK(sc.utility.weights()[sc.model.index_of_id(0)] == doctest::Approx(1.0));
  CHECK(sc.utility.weights()[sc.model.index_of_id(14)] ==
        doctest::Approx(0.669921875));

  const auto tri = treedual::testing::load_scenario("trinomial");
  CHECK(tri.utility.kind() == UtilityKind::power);
  CHECK(tri.utility.exponent() == doctest::Approx(0.5));

  CHECK_THROWS_AS(UtilityField::power_field(1, 1.5), ScenarioError);
  CHECK_THROWS_AS(UtilityField::power_field(1, 0.0), ScenarioError);
}
