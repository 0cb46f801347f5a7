#include <catch2/catch_amalgamated.hpp>

#include <gum/distribution.hpp>
#include <gum/quadrature.hpp>
#include <gum/rng.hpp>
#include <gum/stats.hpp>
#include <gum/targets.hpp>

#include <cmath>
#include <vector>

using namespace gum;
using namespace gum::targets;

namespace {

// Independent oracle: the defining integral of the per-round target,
// evaluated in quantile space without the closed-form shortcuts.
double target_oracle(double alpha, const Distribution& d) {
  auto bp = d.quantile_breakpoints();
  return integrate_with_breakpoints(
      [&](double x) { return d.quantile(x) * std::pow(x, 1.0 / alpha - 1.0); },
      0.0, 1.0, bp, 1e-12);
}

}  // namespace

TEST_CASE("fair floors of the three-player transfer example") {
  auto d1 = Distribution::uniform(2.0, 14.0);
  auto d2 = Distribution::uniform(5.0, 11.0);
  auto d3 = Distribution::point(8.0);

  REQUIRE(std::abs(fair_floor(d1, 3) - 11.0 / 3.0) < 1e-12);
  REQUIRE(std::abs(fair_floor(d2, 3) - 19.0 / 6.0) < 1e-12);
  REQUIRE(std::abs(fair_floor(d3, 3) - 8.0 / 3.0) < 1e-12);

  REQUIRE(std::abs(fair_floor_by_quadrature(d1, 3) - 11.0 / 3.0) < 1e-9);
  REQUIRE(std::abs(fair_floor_by_quadrature(d2, 3) - 19.0 / 6.0) < 1e-9);
  REQUIRE(std::abs(fair_floor_by_quadrature(d3, 3) - 8.0 / 3.0) < 1e-9);

  REQUIRE_THROWS_AS(fair_floor(d1, 0), std::invalid_argument);
}

TEST_CASE("fair floor equals expected max over n for iid copies") {
  for (int n : {1, 2, 3, 5, 8}) {
    auto b = Distribution::binary(0.3, 1.0);
    REQUIRE(std::abs(fair_floor(b, n) * n - expected_max_iid(b, n)) < 1e-12);
    auto u = Distribution::uniform(0.0, 1.0);
    REQUIRE(std::abs(fair_floor(u, n) - 1.0 / (n + 1.0)) < 1e-12);
  }
}

TEST_CASE("per-round target matches its defining integral") {
  std::vector<Distribution> ds{
      Distribution::uniform(0.0, 1.0),
      Distribution::uniform(2.0, 14.0),
      Distribution::binary(0.3, 1.0),
      Distribution::binary(0.25, 12.0, 4.0),
      Distribution::discrete({{4.0, 0.25}, {8.0, 0.25}, {12.0, 0.5}}),
      Distribution::point(8.0),
      split(Distribution::uniform(2.0, 14.0), 2),
  };
  for (const auto& d : ds) {
    for (double a : {0.2, 1.0 / 3.0, 0.5, 0.75, 1.0}) {
      INFO(d.to_string() << " alpha=" << a);
      REQUIRE(std::abs(per_round_target(a, d) - target_oracle(a, d)) < 1e-8);
    }
  }
}

TEST_CASE("per-round target hand values") {
  REQUIRE(std::abs(per_round_target(1.0 / 3.0, Distribution::uniform(2.0, 14.0)) -
                   11.0 / 3.0) < 1e-12);
  REQUIRE(std::abs(per_round_target(0.5, Distribution::uniform(0.0, 1.0)) - 1.0 / 3.0) <
          1e-12);
  REQUIRE(std::abs(per_round_target(0.5, Distribution::binary(0.3, 1.0)) - 0.255) <
          1e-12);
  auto disc = Distribution::discrete({{4.0, 0.25}, {8.0, 0.25}, {12.0, 0.5}});
  REQUIRE(std::abs(per_round_target(0.5, disc) - 5.375) < 1e-12);
  // Full weight recovers the mean, zero weight guarantees nothing.
  for (const auto& d : {Distribution::uniform(2.0, 14.0), disc}) {
    REQUIRE(std::abs(per_round_target(1.0, d) - d.expectation()) < 1e-12);
    REQUIRE(per_round_target(0.0, d) == 0.0);
  }
  REQUIRE_THROWS_AS(per_round_target(1.5, disc), std::invalid_argument);
  REQUIRE_THROWS_AS(per_round_target(-0.1, disc), std::invalid_argument);
}

TEST_CASE("equal weights recover the fair floor") {
  for (const auto& d : {Distribution::uniform(2.0, 14.0),
                        Distribution::binary(0.3, 1.0),
                        Distribution::discrete({{1.0, 0.5}, {3.0, 0.5}})}) {
    for (int n : {2, 3, 4, 7}) {
      REQUIRE(std::abs(n * per_round_target(1.0 / n, d) - expected_max_iid(d, n)) <
              1e-10);
    }
  }
}

TEST_CASE("total target scales linearly in the horizon") {
  auto d = Distribution::uniform(2.0, 14.0);
  REQUIRE(std::abs(total_target(0.25, d, 4.0) - 11.6) < 1e-10);
  REQUIRE(total_target(0.25, d, 0.0) == 0.0);
  REQUIRE_THROWS_AS(total_target(0.25, d, -1.0), std::invalid_argument);
}

TEST_CASE("splitting identity for the listed pairs") {
  std::vector<Distribution> ds{
      Distribution::uniform(0.0, 1.0),
      Distribution::uniform(2.0, 14.0),
      Distribution::binary(0.3, 1.0),
  };
  const std::pair<int, int> pairs[] = {{1, 2}, {1, 3}, {2, 3}, {2, 5}, {3, 5}};
  for (const auto& d : ds) {
    for (auto [k, n] : pairs) {
      INFO(d.to_string() << " k=" << k << " n=" << n);
      const double whole = per_round_target(static_cast<double>(k) / n, d);
      const double pieces = k * per_round_target(1.0 / n, split(d, k));
      REQUIRE(std::abs(whole - pieces) < 1e-6);
    }
  }
}

TEST_CASE("max of k split copies has the base mean") {
  Rng r(55);
  auto d = Distribution::uniform(2.0, 14.0);
  auto s = split(d, 3);
  RunningStat st;
  for (int i = 0; i < 100000; ++i) {
    double m = 0.0;
    for (int k = 0; k < 3; ++k) m = std::max(m, s.sample(r));
    st.add(m);
  }
  REQUIRE(std::abs(st.mean - d.expectation()) < 4.0 * st.std_error());
}

TEST_CASE("feasibility accepts targets from admissible weights") {
  std::vector<FeasibilityPlayer> players{
      {0.5, Distribution::uniform(2.0, 14.0)},
      {0.3, Distribution::uniform(5.0, 11.0)},
      {0.2, Distribution::point(8.0)},
  };
  std::vector<double> targets;
  for (const auto& p : players) targets.push_back(per_round_target(p.alpha, p.prior));
  auto res = ntu_feasible_mixture(players, targets);
  REQUIRE(res.feasible);
  REQUIRE(res.achieved.size() == 3);
  double share_sum = 0.0;
  for (const auto& c : res.mixture) {
    share_sum += c.share;
    REQUIRE(c.direction.size() == 3);
    REQUIRE(c.utilities.size() == 3);
  }
  REQUIRE(std::abs(share_sum - 1.0) < 1e-6);
  for (std::size_t i = 0; i < 3; ++i) {
    REQUIRE(res.achieved[i] >= targets[i] - 1e-6);
  }
}

TEST_CASE("feasibility accepts the fair-floor vector with room to spare") {
  std::vector<FeasibilityPlayer> players{
      {1.0 / 3.0, Distribution::uniform(2.0, 14.0)},
      {1.0 / 3.0, Distribution::uniform(5.0, 11.0)},
      {1.0 / 3.0, Distribution::point(8.0)},
  };
  std::vector<double> targets{11.0 / 3.0, 19.0 / 6.0, 8.0 / 3.0};
  auto res = ntu_feasible_mixture(players, targets);
  REQUIRE(res.feasible);
  REQUIRE(res.slack > 0.0);
}

TEST_CASE("feasibility rejects targets beyond the welfare frontier") {
  // Two point masses: any policy splits one good, so (3, 2.1) is out of reach.
  std::vector<FeasibilityPlayer> players{
      {0.5, Distribution::point(3.0)},
      {0.5, Distribution::point(5.0)},
  };
  std::vector<double> targets{3.0, 2.1};
  auto res = ntu_feasible_mixture(players, targets);
  REQUIRE_FALSE(res.feasible);
  REQUIRE(res.margin < 0.0);
  REQUIRE(res.certificate.size() == 2);
  // The certificate really separates: welfare under direction w falls short
  // of the weighted target. With atoms this is a finite max.
  const double w1 = res.certificate[0], w2 = res.certificate[1];
  const double welfare = std::max(3.0 * w1, 5.0 * w2);
  const double want = 3.0 * w1 + 2.1 * w2;
  REQUIRE(welfare < want - 1e-9);
}

TEST_CASE("feasibility flags the tight symmetric boundary") {
  std::vector<FeasibilityPlayer> players{
      {1.0 / 3.0, Distribution::uniform(0.0, 1.0)},
      {1.0 / 3.0, Distribution::uniform(0.0, 1.0)},
      {1.0 / 3.0, Distribution::uniform(0.0, 1.0)},
  };
  // Sum of targets equals E[max of 3] = 3/4 exactly: the frontier.
  std::vector<double> tight{0.25, 0.25, 0.25};
  auto res = ntu_feasible_mixture(players, tight);
  REQUIRE(std::abs(res.margin) < 0.02);

  std::vector<double> inside{0.24, 0.24, 0.24};
  REQUIRE(ntu_feasible_mixture(players, inside).feasible);

  std::vector<double> outside{0.27, 0.27, 0.27};
  auto bad = ntu_feasible_mixture(players, outside);
  REQUIRE_FALSE(bad.feasible);
  REQUIRE(bad.margin < 0.0);
}

TEST_CASE("feasibility validates its inputs") {
  std::vector<FeasibilityPlayer> players{{0.5, Distribution::point(3.0)}};
  std::vector<double> two{1.0, 2.0};
  REQUIRE_THROWS_AS(ntu_feasible_mixture(players, two), std::invalid_argument);
  std::vector<double> one{1.0};
  REQUIRE_THROWS_AS(ntu_feasible_mixture(players, one, 0), std::invalid_argument);
  REQUIRE_THROWS_AS(ntu_feasible_mixture({}, {}), std::invalid_argument);
}
