#include <catch2/catch_amalgamated.hpp>

#include <gum/distribution.hpp>
#include <gum/ntu.hpp>
#include <gum/rng.hpp>

#include <cmath>
#include <vector>

using namespace gum;

namespace {

const std::vector<Distribution> kTrio{
    Distribution::uniform(2.0, 14.0),
    Distribution::uniform(5.0, 11.0),
    Distribution::point(8.0),
};
const AllocationRule kScaled = LinearScaled{{0.84, 0.96, 1.0}};
const std::vector<double> kThirds{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};

NtuConfig example_config(long long periods) {
  NtuConfig cfg;
  cfg.rule = kScaled;
  cfg.priors = kTrio;
  cfg.alphas = kThirds;
  cfg.periods = periods;
  cfg.mode = BudgetMode::kExample;
  return cfg;
}

}  // namespace

TEST_CASE("pair budgets in both modes") {
  const double T = 1e4;
  const double unit = std::sqrt(T) * std::log(T);
  // Worked-example coefficients on the sqrt(T) log T scale.
  REQUIRE(std::abs(ntu_budget(1.0 / 3.0, 1.0 / 3.0, T, 11.0, BudgetMode::kExample) /
                       unit - 4.03) < 0.005);
  REQUIRE(std::abs(ntu_budget(1.0 / 3.0, 1.0 / 3.0, T, 8.0, BudgetMode::kExample) /
                       unit - 2.93) < 0.005);
  REQUIRE(std::abs(ntu_budget(1.0 / 3.0, 1.0 / 3.0, T, 14.0, BudgetMode::kExample) /
                       unit - 5.13) < 0.005);

  // Definition mode: alpha_i sqrt(T) ln(T / alpha_j) Sens_j, exactly.
  const double want = 0.25 * std::sqrt(100.0) * std::log(100.0 / 0.5) * 7.0;
  REQUIRE(std::abs(ntu_budget(0.25, 0.5, 100.0, 7.0, BudgetMode::kDefinition) - want) <
          1e-12);

  REQUIRE_THROWS_AS(ntu_budget(0.5, 0.5, 1.0, 1.0, BudgetMode::kDefinition),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ntu_budget(0.0, 0.5, 10.0, 1.0, BudgetMode::kDefinition),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(ntu_budget(0.5, 0.5, 10.0, -1.0, BudgetMode::kDefinition),
                    std::invalid_argument);
}

TEST_CASE("martingale tail bound and its simplified form") {
  // With definition budgets the raw tail never exceeds the simplified bound:
  // the exponents differ by a perfect square.
  for (double T : {10.0, 100.0, 1e4, 1e6}) {
    for (double ai : {0.2, 1.0 / 3.0, 0.6, 1.0}) {
      for (double aj : {0.2, 1.0 / 3.0, 0.6, 1.0}) {
        const double sens = 14.0;
        const double B = ntu_budget(ai, aj, T, sens, BudgetMode::kDefinition);
        auto b = azuma_bound(B, T, 1.0, sens, ai, aj);
        INFO("T=" << T << " ai=" << ai << " aj=" << aj);
        REQUIRE(b.raw <= b.simplified + 1e-15);
        REQUIRE(b.raw >= 0.0);
      }
    }
  }
  // Degenerate reporters have zero-variance ledgers: no crossing, ever.
  auto b = azuma_bound(1.0, 100.0, 0.0, 8.0, 0.5, 0.5);
  REQUIRE(b.raw == 0.0);
  REQUIRE_THROWS_AS(azuma_bound(-1.0, 100.0, 1.0, 8.0, 0.5, 0.5),
                    std::invalid_argument);
}

TEST_CASE("guarantee floor pieces for the worked example") {
  const double T = 1e4;
  const double unit = std::sqrt(T) * std::log(T);
  const double per_round[3] = {11.0 / 3.0, 19.0 / 6.0, 8.0 / 3.0};
  const double dev_coeff[3] = {10.26, 8.06, 5.86};
  for (int i = 0; i < 3; ++i) {
    auto g = make_guarantee_inputs(1.0 / 3.0, kTrio[i], T);
    std::vector<double> others{1.0 / 3.0, 1.0 / 3.0};
    auto f = ntu_guarantee_floor(g, BudgetMode::kExample, others);
    INFO("player " << i);
    REQUIRE(std::abs(f.per_round - per_round[i]) < 1e-10);
    REQUIRE(std::abs(f.deviation_coefficient - dev_coeff[i]) < 0.01);
    REQUIRE(std::abs(f.deviation - f.deviation_coefficient * unit) < 1e-9);
    REQUIRE(std::abs(f.value - (T * f.per_round - f.deviation - f.exclusion)) < 1e-9);
  }
  // The degenerate player cannot be excluded: no constant loss term.
  auto g3 = make_guarantee_inputs(1.0 / 3.0, kTrio[2], T);
  REQUIRE(g3.sour == 0.0);
  std::vector<double> others{1.0 / 3.0, 1.0 / 3.0};
  REQUIRE(ntu_guarantee_floor(g3, BudgetMode::kExample, others).exclusion == 0.0);
  // Continuous players pay range * exp(Sour^2 / (2 alpha^2)).
  auto g1 = make_guarantee_inputs(1.0 / 3.0, kTrio[0], T);
  auto f1 = ntu_guarantee_floor(g1, BudgetMode::kExample, others);
  REQUIRE(std::abs(f1.exclusion - 14.0 * std::exp(4.5)) < 1e-9);

  // Example mode without opponent weights cannot price the forfeits.
  REQUIRE_THROWS_AS(ntu_guarantee_floor(g1, BudgetMode::kExample),
                    std::invalid_argument);
  // Definition mode needs no opponents and uses ln(T/alpha).
  auto fd = ntu_guarantee_floor(g1);
  REQUIRE(std::abs(fd.deviation - std::sqrt(T) * std::log(3.0 * T) * 14.0) < 1e-9);
}

TEST_CASE("mechanism construction validates shapes") {
  NtuConfig cfg = example_config(100);
  REQUIRE_NOTHROW(NtuMechanism(cfg));

  NtuConfig bad = cfg;
  bad.alphas = {0.5, 0.5};
  REQUIRE_THROWS_AS(NtuMechanism(bad), std::invalid_argument);
  bad = cfg;
  bad.sens = {1.0, 1.0};
  REQUIRE_THROWS_AS(NtuMechanism(bad), std::invalid_argument);
  bad = cfg;
  bad.priors = {Distribution::point(1.0)};
  bad.alphas = {1.0};
  bad.rule = LinearScaled{{1.0}};
  REQUIRE_THROWS_AS(NtuMechanism(bad), std::invalid_argument);

  NtuMechanism mech(cfg);
  REQUIRE(mech.players() == 3);
  REQUIRE(mech.round() == 0);
  // Budgets are symmetric in this example except for the absorbed scale.
  const double unit = std::sqrt(100.0) * std::log(100.0);
  REQUIRE(std::abs(mech.budgets()[0][1] - std::log(3.0) / 3.0 * unit * 11.0) < 1e-9);
  REQUIRE(std::abs(mech.budgets()[1][0] - std::log(3.0) / 3.0 * unit * 14.0) < 1e-9);
  REQUIRE(mech.budgets()[0][0] == 0.0);
  // Anticipations against priors only, frozen at construction.
  REQUIRE(std::abs(mech.base_anticipations()[1] - 16658.0 / 5103.0) < 1e-9);
}

TEST_CASE("truthful play keeps every ledger inside its budget") {
  NtuConfig cfg = example_config(400);
  Rng rng(2026);
  NtuMechanism::RoundResult rr;
  for (int rep = 0; rep < 60; ++rep) {
    NtuMechanism mech(cfg);
    std::vector<double> reports(3);
    for (int t = 0; t < 400; ++t) {
      for (int i = 0; i < 3; ++i) reports[i] = kTrio[i].sample(rng);
      mech.run_round(reports, rng, rr);
      REQUIRE(rr.newly_excluded.empty());
    }
    REQUIRE(mech.exclusion_mask() == 0);
  }
}

TEST_CASE("ledgers accrue the per-round externalities") {
  NtuConfig cfg = example_config(50);
  NtuMechanism mech(cfg);
  Rng rng(7);
  NtuMechanism::RoundResult rr;
  GammaMatrix expect(3, std::vector<double>(3, 0.0));
  std::vector<double> reports(3);
  for (int t = 0; t < 50; ++t) {
    for (int i = 0; i < 3; ++i) reports[i] = kTrio[i].sample(rng);
    mech.run_round(reports, rng, rr);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        if (i != j) expect[i][j] += mech.last_gamma()[i][j];
      }
    }
  }
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      REQUIRE(std::abs(mech.cumulative()[i][j] - expect[i][j]) < 1e-9);
    }
  }
  REQUIRE(mech.round() == 50);
  REQUIRE_THROWS_AS(mech.run_round(reports, rng, rr), std::out_of_range);
}

TEST_CASE("a constant-max reporter drains a pair budget and is excluded") {
  // Reporting the top of the support every round imposes -1580/567 per round
  // on the third column; the crossing time is the budget over that rate.
  NtuConfig cfg = example_config(10000);
  NtuMechanism mech(cfg);
  Rng rng(99);
  NtuMechanism::RoundResult rr;
  const double drain13 = 1580.0 / 567.0;
  const double drain12 = 16658.0 / 5103.0;
  const long long k13 = static_cast<long long>(mech.budgets()[0][2] / drain13) + 1;
  const long long k12 = static_cast<long long>(mech.budgets()[0][1] / drain12) + 1;
  REQUIRE(k13 < k12);  // the third column crosses first

  std::vector<double> reports{14.0, 0.0, 8.0};
  long long t = 0;
  while (!mech.excluded(0)) {
    reports[1] = kTrio[1].sample(rng);
    mech.run_round(reports, rng, rr);
    ++t;
    REQUIRE(t <= k13);
  }
  REQUIRE(t == k13);
  REQUIRE(mech.exclusion_round(0) == k13 - 1);
  REQUIRE(rr.newly_excluded == std::vector<std::size_t>{0});
  // The replacement report is a prior draw, not the manipulated value.
  REQUIRE(rr.effective[0] < 14.0);
  REQUIRE(rr.effective[0] >= 2.0);

  // Frozen payer ledger: further rounds leave row 0 untouched.
  auto frozen = mech.cumulative()[0];
  for (int more = 0; more < 50; ++more) {
    reports[1] = kTrio[1].sample(rng);
    mech.run_round(reports, rng, rr);
  }
  REQUIRE(mech.cumulative()[0] == frozen);
  REQUIRE(mech.exclusion_mask() == 1);
}

TEST_CASE("beyond exclusion the excluded player's reports are redrawn") {
  // A starving budget forces the crossing in the very first round.
  NtuConfig cfg;
  cfg.rule = LinearScaled{{1.0, 1.0}};
  cfg.priors = {Distribution::uniform(0.0, 1.0), Distribution::uniform(0.0, 1.0)};
  cfg.alphas = {0.01, 0.9};
  cfg.periods = 4;
  NtuMechanism mech(cfg);
  REQUIRE(mech.budgets()[0][1] < 0.1);

  Rng rng(5);
  NtuMechanism::RoundResult rr;
  std::vector<double> reports{1.0, 0.4};
  mech.run_round(reports, rng, rr);
  REQUIRE(rr.newly_excluded == std::vector<std::size_t>{0});
  REQUIRE(mech.exclusion_round(0) == 0);
  REQUIRE(rr.effective[0] < 1.0);

  // Subsequent rounds ignore the submitted report entirely.
  reports[0] = 1.0;
  mech.run_round(reports, rng, rr);
  REQUIRE(rr.effective[0] < 1.0);
  REQUIRE_FALSE(mech.excluded(1));
}
