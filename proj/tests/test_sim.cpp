#include <catch2/catch_amalgamated.hpp>

#include <gum/sim.hpp>

#include <cmath>
#include <vector>

using namespace gum;

namespace {

ExperimentConfig tu_example() {
  ExperimentConfig cfg;
  cfg.mechanism = MechanismKind::kTu;
  cfg.players = {
      {1.0 / 3.0, Distribution::uniform(2.0, 14.0), Truthful{}, {}, {}},
      {1.0 / 3.0, Distribution::uniform(5.0, 11.0), Truthful{}, {}, {}},
      {1.0 / 3.0, Distribution::point(8.0), Truthful{}, {}, {}},
  };
  cfg.rule = LinearScaled{{1.0, 1.0, 1.0}};
  cfg.periods = 50;
  cfg.seed = 777;
  cfg.reps = 400;
  return cfg;
}

ExperimentConfig ntu_example() {
  ExperimentConfig cfg;
  cfg.mechanism = MechanismKind::kNtu;
  cfg.players = {
      {1.0 / 3.0, Distribution::uniform(2.0, 14.0), Truthful{}, {}, {}},
      {1.0 / 3.0, Distribution::uniform(5.0, 11.0), Truthful{}, {}, {}},
      {1.0 / 3.0, Distribution::point(8.0), Truthful{}, {}, {}},
  };
  cfg.rule = LinearScaled{{0.84, 0.96, 1.0}};
  cfg.periods = 300;
  cfg.budgets = BudgetMode::kExample;
  cfg.seed = 888;
  cfg.reps = 200;
  return cfg;
}

}  // namespace

TEST_CASE("pair ledger indexing is row-major without the diagonal") {
  REQUIRE(pair_index(0, 1, 3) == 0);
  REQUIRE(pair_index(0, 2, 3) == 1);
  REQUIRE(pair_index(1, 0, 3) == 2);
  REQUIRE(pair_index(1, 2, 3) == 3);
  REQUIRE(pair_index(2, 0, 3) == 4);
  REQUIRE(pair_index(2, 1, 3) == 5);
}

TEST_CASE("experiments are reproducible and seed-sensitive") {
  ExperimentConfig cfg = tu_example();
  cfg.periods = 10;
  cfg.reps = 16;
  auto a = run_experiment(cfg);
  auto b = run_experiment(cfg);
  REQUIRE(a.mean_total == b.mean_total);
  REQUIRE(a.se_total == b.se_total);
  REQUIRE(a.mean_welfare == b.mean_welfare);

  auto c = run_experiment(cfg, 778, 16);
  REQUIRE(c.seed == 778);
  REQUIRE(a.mean_total != c.mean_total);
}

TEST_CASE("parallel aggregation matches a sequential replay") {
  ExperimentConfig cfg = tu_example();
  cfg.periods = 8;
  cfg.reps = 12;
  auto sum = run_experiment(cfg);

  auto p = detail_sim::prepare(cfg);
  detail_sim::RepOutcome out;
  RunningStat st0;
  for (int r = 0; r < cfg.reps; ++r) {
    detail_sim::run_rep(p, cfg, static_cast<std::uint64_t>(r), out, nullptr, nullptr);
    st0.add(out.total[0]);
  }
  REQUIRE(sum.mean_total[0] == st0.mean);
  REQUIRE(std::abs(sum.se_total[0] - st0.std_error()) < 1e-15);
}

TEST_CASE("truthful transfer mechanism hits the anticipated means") {
  auto sum = run_experiment(tu_example());
  REQUIRE(sum.kappa == std::vector<double>{0.0, 0.0, 0.0});
  const double want[3] = {79.0 / 16.0, 3.0, 2.0};
  for (int i = 0; i < 3; ++i) {
    INFO("player " << i);
    REQUIRE(std::abs(sum.mean_per_round[i] - want[i]) <
            4.0 * sum.se_per_round[i] + 1e-9);
  }
  // The degenerate player's realized utility is constant round by round.
  REQUIRE(sum.se_per_round[2] < 1e-12);
  REQUIRE(std::abs(sum.mean_welfare / 50.0 - 9.9375) <
          4.0 * sum.se_welfare / 50.0 + 1e-9);
  REQUIRE(sum.exclusions == std::vector<long long>{0, 0, 0});
}

TEST_CASE("strict balance shifts every interim level by the surplus share") {
  ExperimentConfig cfg = tu_example();
  cfg.balance = Balance::kStrict;
  auto sum = run_experiment(cfg);
  // kappa = fair floor - anticipated + equal surplus share.
  REQUIRE(std::abs(sum.kappa[0] + 9.0 / 8.0) < 1e-9);
  REQUIRE(std::abs(sum.kappa[1] - 5.0 / 16.0) < 1e-9);
  REQUIRE(std::abs(sum.kappa[2] - 13.0 / 16.0) < 1e-9);
  REQUIRE(std::abs(sum.kappa[0] + sum.kappa[1] + sum.kappa[2]) < 1e-9);
  const double want[3] = {3.8125, 3.3125, 2.8125};
  for (int i = 0; i < 3; ++i) {
    REQUIRE(std::abs(sum.mean_per_round[i] - want[i]) <
            4.0 * sum.se_per_round[i] + 1e-9);
  }
}

TEST_CASE("a unilateral constant deviation cannot help and hurts only itself") {
  ExperimentConfig cfg = tu_example();
  cfg.players[0].strategy = Constant{5.0};
  auto sum = run_experiment(cfg);
  // Truthful players keep their interim levels no matter what rival 1 files.
  REQUIRE(std::abs(sum.mean_per_round[1] - 3.0) < 4.0 * sum.se_per_round[1] + 1e-9);
  REQUIRE(std::abs(sum.mean_per_round[2] - 2.0) < 1e-9);
  // The deviator gives up ground against its truthful anticipated level.
  REQUIRE(sum.mean_per_round[0] < 79.0 / 16.0 - 4.0 * sum.se_per_round[0]);
}

TEST_CASE("scaled reports stay inside the support and the run completes") {
  ExperimentConfig cfg = tu_example();
  cfg.periods = 20;
  cfg.reps = 50;
  cfg.players[1].strategy = Scaled{1.4};
  bool saw_row = false;
  run_trace(cfg, 0, [&](const TraceRow& row) {
    saw_row = true;
    REQUIRE(row.reports[1] <= 11.0);
    REQUIRE(row.reports[1] >= 5.0);
    REQUIRE(row.payments.size() == 3);
    REQUIRE(std::abs(row.payments[0] + row.payments[1] + row.payments[2]) < 1e-9);
  });
  REQUIRE(saw_row);
  REQUIRE_NOTHROW(run_experiment(cfg));
}

TEST_CASE("transfer traces expose rounds, winners, and balanced payments") {
  ExperimentConfig cfg = tu_example();
  cfg.periods = 30;
  long long rounds = 0;
  run_trace(cfg, 3, [&](const TraceRow& row) {
    ++rounds;
    REQUIRE(row.round == rounds);
    REQUIRE(row.winner < 3);
    REQUIRE(row.cum_pairs.size() == 6);
    REQUIRE(row.exclusion_mask == 0);
  });
  REQUIRE(rounds == 30);
}

TEST_CASE("truthful budgeted mechanism tracks the prior anticipations") {
  auto sum = run_experiment(ntu_example());
  const double want[3] = {270947.0 / 71442.0, 16658.0 / 5103.0, 1580.0 / 567.0};
  for (int i = 0; i < 3; ++i) {
    INFO("player " << i);
    REQUIRE(std::abs(sum.mean_per_round[i] - want[i]) <
            4.0 * sum.se_per_round[i] + 1e-9);
  }
  REQUIRE(sum.exclusions == std::vector<long long>{0, 0, 0});
  REQUIRE(sum.kappa.empty());
  REQUIRE(sum.budgets.size() == 3);
  REQUIRE(sum.budgets[0][1] > 0.0);
}

TEST_CASE("budgeted traces flag exclusions of a persistent manipulator") {
  ExperimentConfig cfg = ntu_example();
  cfg.periods = 220;
  cfg.reps = 10;
  cfg.players[0].strategy = Constant{99.0};  // clamped to the support top
  auto sum = run_experiment(cfg);
  REQUIRE(sum.exclusions[0] == 10);
  REQUIRE(sum.exclusions[1] == 0);
  REQUIRE(sum.exclusions[2] == 0);

  std::uint64_t last_mask = 0;
  bool masks_monotone = true;
  run_trace(cfg, 0, [&](const TraceRow& row) {
    REQUIRE(row.payments.empty());
    if ((row.exclusion_mask & last_mask) != last_mask) masks_monotone = false;
    last_mask = row.exclusion_mask;
  });
  REQUIRE(masks_monotone);
  REQUIRE(last_mask == 1);
}

TEST_CASE("trajectory thinning records the requested rounds") {
  ExperimentConfig cfg = ntu_example();
  cfg.periods = 100;
  cfg.reps = 3;
  cfg.trajectory_stride = 40;
  auto sum = run_experiment(cfg);
  REQUIRE(sum.trajectory_rounds == std::vector<long long>{40, 80, 100});
  REQUIRE(sum.trajectory.size() == 3);
  for (const auto& row : sum.trajectory) REQUIRE(row.size() == 6);
}

TEST_CASE("configuration validation rejects malformed experiments") {
  ExperimentConfig cfg = tu_example();
  cfg.players[0].weight = 0.9;  // sum now exceeds 1
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);

  cfg = tu_example();
  cfg.reps = 0;
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);

  cfg = tu_example();
  cfg.rule = TopL{2, {0.4, 0.3, 0.3}};
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);

  cfg = tu_example();
  cfg.rule = LinearScaled{{1.0, 1.0}};
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);

  cfg = tu_example();
  cfg.players[0].strategy = AdversaryVs{0, 33};  // targets itself
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);

  cfg = tu_example();
  cfg.players[0].strategy = AdversaryVs{2, 33};
  cfg.players[1].strategy = AdversaryVs{0, 33};  // inconsistent targets
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);

  cfg = ntu_example();
  cfg.periods = 1;  // budgets need at least two rounds
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);

  cfg = ntu_example();
  cfg.players[1].weight = 0.0;  // budget weights must be positive under NTU
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);

  cfg = tu_example();
  cfg.order = {0, 0, 1};
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);

  cfg = tu_example();
  cfg.constants = {1.0};
  REQUIRE_THROWS_AS(run_experiment(cfg), std::invalid_argument);
}

TEST_CASE("adversaries against point-mass priors change nothing") {
  ExperimentConfig cfg;
  cfg.mechanism = MechanismKind::kTu;
  cfg.players = {
      {0.4, Distribution::point(3.0), Truthful{}, {}, {}},
      {0.3, Distribution::point(5.0), Truthful{}, {}, {}},
      {0.3, Distribution::point(8.0), Truthful{}, {}, {}},
  };
  cfg.rule = LinearScaled{{1.0, 1.0, 1.0}};
  cfg.periods = 12;
  cfg.reps = 8;
  auto truthful = run_experiment(cfg);
  auto attacked = adversary_best_response(cfg, 2, 9);
  // Degenerate reports admit no manipulation: identical outcomes, bit for bit.
  REQUIRE(attacked.summary.mean_total == truthful.mean_total);
  REQUIRE(attacked.mean_total >= attacked.guarantee - 4.0 * attacked.se_total - 1e-6);
  REQUIRE(std::abs(attacked.mean_total - 12.0 * 8.0) < 1e-6);
}

TEST_CASE("transfer guarantees hold against the grid adversary") {
  ExperimentConfig cfg = tu_example();
  cfg.periods = 25;
  cfg.reps = 200;
  cfg.balance = Balance::kStrict;
  const double floors[3] = {11.0 / 3.0, 19.0 / 6.0, 8.0 / 3.0};
  for (std::size_t target = 0; target < 3; ++target) {
    auto rep = adversary_best_response(cfg, target, 17);
    INFO("target " << target << " mean " << rep.mean_total << " guarantee "
                   << rep.guarantee);
    REQUIRE(std::abs(rep.guarantee - 25.0 * (floors[target] + 7.0 / 48.0)) < 1e-6);
    REQUIRE(rep.mean_total >= rep.guarantee - 4.0 * rep.se_total - 1e-6);
  }
  REQUIRE_THROWS_AS(adversary_best_response(cfg, 7, 17), std::invalid_argument);
  REQUIRE_THROWS_AS(adversary_best_response(cfg, 0, 1), std::invalid_argument);
}

TEST_CASE("budget guarantees hold against the grid adversary") {
  ExperimentConfig cfg = ntu_example();
  cfg.periods = 400;
  cfg.reps = 60;
  auto rep = adversary_best_response(cfg, 0, 17);
  REQUIRE(rep.mean_total >= rep.guarantee - 4.0 * rep.se_total - 1e-6);
  // The attackers burn their own ledgers: at least one ends excluded in most
  // replications, and the degenerate seat never can.
  REQUIRE(rep.summary.exclusions[1] > 0);
  REQUIRE(rep.summary.exclusions[2] == 0);
}
