#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <exception>
#include <functional>
#include <map>
#include <optional>
#include <stdexcept>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "gum/allocation.hpp"
#include "gum/distribution.hpp"
#include "gum/ntu.hpp"
#include "gum/rng.hpp"
#include "gum/stats.hpp"
#include "gum/targets.hpp"
#include "gum/tu.hpp"

namespace gum {

// Per-player reporting behavior. Constant and Scaled reports are clamped to
// the reporter's support hull. AdversaryVs is special: one target is chosen
// and the adversary controls every other player jointly (their own declared
// strategies are ignored for that run), picking reports each round by grid
// search to minimize the target's current-round expected utility plus the
// externality directed at the target. The search is myopic by design; it
// gives a lower bound on adversarial power, not an exhaustive worst case.
struct Truthful {
  bool operator==(const Truthful&) const = default;
};
struct Constant {
  double v = 0.0;
  bool operator==(const Constant&) const = default;
};
struct Scaled {
  double c = 1.0;
  bool operator==(const Scaled&) const = default;
};
struct AdversaryVs {
  std::size_t target = 0;
  int grid = 33;
  bool operator==(const AdversaryVs&) const = default;
};
using Strategy = std::variant<Truthful, Constant, Scaled, AdversaryVs>;

struct PlayerSpec {
  double weight = 0.0;
  Distribution prior;
  Strategy strategy = Truthful{};
  std::optional<double> sour;  // overrides the guarantee-floor default
  std::optional<double> sens;
  bool operator==(const PlayerSpec&) const = default;
};

enum class MechanismKind { kTu, kNtu };

struct ExperimentConfig {
  MechanismKind mechanism = MechanismKind::kTu;
  std::vector<PlayerSpec> players;
  AllocationRule rule;                // must cover players.size() slots
  long long periods = 1;
  BudgetMode budgets = BudgetMode::kDefinition;
  Balance balance = Balance::kConstantsOnly;
  std::vector<double> constants;      // c_i; empty means zeros
  std::vector<std::size_t> order;     // reveal order; empty means ascending
  std::uint64_t seed = 12345;
  int reps = 1;
  double tol = 1e-10;
  int trajectory_stride = 0;          // record rep-0 ledgers every k rounds
  bool operator==(const ExperimentConfig&) const = default;
};

// Flattened index of ordered pair (i, j), i != j, row-major with the diagonal
// removed: n*(n-1) slots.
inline std::size_t pair_index(std::size_t i, std::size_t j, std::size_t n) {
  return i * (n - 1) + (j < i ? j : j - 1);
}

struct TraceRow {
  long long round = 0;  // 1-based
  std::size_t winner = 0;
  std::vector<double> reports;     // effective reports this round
  std::vector<double> cum_pairs;   // cumulative ledgers, pair_index layout
  std::vector<double> payments;    // transfers this round (empty under NTU)
  std::uint64_t exclusion_mask = 0;
};

struct SimSummary {
  MechanismKind mechanism = MechanismKind::kTu;
  std::uint64_t seed = 0;
  int reps = 0;
  long long periods = 0;
  std::vector<double> mean_total;      // per player, over replications
  std::vector<double> se_total;
  std::vector<double> mean_per_round;  // mean_total / periods
  std::vector<double> se_per_round;
  std::vector<long long> exclusions;   // replications that ended excluded
  double mean_welfare = 0.0;           // sum of player totals
  double se_welfare = 0.0;
  std::vector<double> kappa;           // TU constants actually applied
  GammaMatrix budgets;                 // NTU exclusion budgets
  // Rep-0 ledger snapshots (pair_index layout), thinned by trajectory_stride.
  std::vector<long long> trajectory_rounds;
  std::vector<std::vector<double>> trajectory;
};

namespace detail_sim {

struct Prepared {
  std::size_t n = 0;
  std::vector<Distribution> priors;
  std::vector<double> weights;
  AllocationRule rule;
  std::vector<double> kappa;  // resolved TU constants
  std::vector<double> base;   // anticipated payoffs, empty prefix
  bool has_adversary = false;
  std::size_t target = 0;
  int grid = 0;
  std::vector<std::vector<double>> adv_grids;  // report grid per player; empty at target
  NtuConfig ntu;
};

inline Prepared prepare(const ExperimentConfig& cfg) {
  Prepared p;
  p.n = cfg.players.size();
  if (p.n < 2) throw std::invalid_argument("experiment: need at least two players");
  if (cfg.reps < 1) throw std::invalid_argument("experiment: reps must be >= 1");
  if (cfg.periods < 1) throw std::invalid_argument("experiment: periods must be >= 1");
  double wsum = 0.0;
  for (const auto& pl : cfg.players) {
    if (!(pl.weight >= 0.0)) throw std::invalid_argument("experiment: negative weight");
    wsum += pl.weight;
    p.priors.push_back(pl.prior);
    p.weights.push_back(pl.weight);
  }
  if (wsum > 1.0 + 1e-9) throw std::invalid_argument("experiment: weights sum above 1");
  if (rule_players(cfg.rule) != p.n) {
    throw std::invalid_argument("experiment: rule covers a different player count");
  }
  validate_rule(cfg.rule);
  if (std::holds_alternative<TopL>(cfg.rule)) {
    throw std::invalid_argument("experiment: multi-good rules are not simulated");
  }
  p.rule = cfg.rule;
  if (!cfg.constants.empty() && cfg.constants.size() != p.n) {
    throw std::invalid_argument("experiment: constants size mismatch");
  }
  if (!cfg.order.empty()) {
    if (cfg.order.size() != p.n) {
      throw std::invalid_argument("experiment: order size mismatch");
    }
    auto check = cfg.order;
    std::sort(check.begin(), check.end());
    for (std::size_t k = 0; k < p.n; ++k) {
      if (check[k] != k) throw std::invalid_argument("experiment: order is not a permutation");
    }
  }

  // One adversary target at most; it controls every non-target seat.
  for (std::size_t i = 0; i < p.n; ++i) {
    if (const auto* adv = std::get_if<AdversaryVs>(&cfg.players[i].strategy)) {
      if (adv->target >= p.n) throw std::invalid_argument("experiment: adversary target out of range");
      if (adv->target == i) throw std::invalid_argument("experiment: adversary cannot target itself");
      if (adv->grid < 2) throw std::invalid_argument("experiment: adversary grid must be >= 2");
      if (p.has_adversary && (p.target != adv->target || p.grid != adv->grid)) {
        throw std::invalid_argument("experiment: conflicting adversary declarations");
      }
      p.has_adversary = true;
      p.target = adv->target;
      p.grid = adv->grid;
    }
  }
  if (p.has_adversary) {
    p.adv_grids.resize(p.n);
    for (std::size_t j = 0; j < p.n; ++j) {
      if (j == p.target) continue;
      const double lo = p.priors[j].support_lo(), hi = p.priors[j].support_hi();
      if (lo == hi) {
        p.adv_grids[j] = {lo};
      } else {
        for (int g = 0; g < p.grid; ++g) {
          p.adv_grids[j].push_back(lo + (hi - lo) * g / (p.grid - 1.0));
        }
      }
    }
  }

  if (cfg.mechanism == MechanismKind::kTu) {
    if (cfg.balance == Balance::kStrict) {
      std::vector<double> c = cfg.constants;
      if (c.empty()) c = proportional_surplus_split(p.priors, p.weights);
      p.kappa = balanced_constants(cfg.rule, p.priors, c, cfg.tol);
    } else {
      p.kappa = cfg.constants.empty() ? std::vector<double>(p.n, 0.0) : cfg.constants;
    }
    p.base = anticipations(cfg.rule, p.priors, cfg.tol);
  } else {
    if (cfg.periods < 2) throw std::invalid_argument("experiment: ntu needs periods >= 2");
    for (double w : p.weights) {
      if (!(w > 0.0)) throw std::invalid_argument("experiment: ntu weights must be positive");
    }
    p.ntu.rule = cfg.rule;
    p.ntu.priors = p.priors;
    p.ntu.alphas = p.weights;
    bool any_sens = false;
    for (const auto& pl : cfg.players) any_sens = any_sens || pl.sens.has_value();
    if (any_sens) {
      for (const auto& pl : cfg.players) {
        p.ntu.sens.push_back(pl.sens.value_or(pl.prior.support_hi()));
      }
    }
    p.ntu.periods = cfg.periods;
    p.ntu.mode = cfg.budgets;
    p.ntu.order = cfg.order;
    p.ntu.tol = cfg.tol;
    NtuMechanism probe(p.ntu);  // surfaces budget/weight errors before any run
    p.base = probe.base_anticipations();
  }
  return p;
}

// Joint adversary reports minimizing the target's anticipated payoff, given
// which players are currently excluded (their reports are redrawn by the
// mechanism, so the objective integrates them over their priors). The search
// is deterministic: first strict minimum wins. The minimized objective
// 2 M_t(combo) - M_t(empty) shares its argmin with M_t(combo).
inline std::vector<double> adversary_combo(const Prepared& p, std::uint64_t excluded_mask,
                                           double tol, detail_alloc::Scratch& sc) {
  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < p.n; ++j) {
    if (j != p.target && !(excluded_mask >> j & 1)) active.push_back(j);
  }
  std::vector<double> combo(p.n, 0.0);
  for (std::size_t j = 0; j < p.n; ++j) combo[j] = p.priors[j].support_lo();
  if (active.empty()) return combo;
  std::vector<std::size_t> idx(active.size(), 0);
  std::vector<std::optional<double>> revealed(p.n);
  double best = 0.0;
  bool first = true;
  std::vector<std::size_t> best_idx = idx;
  while (true) {
    for (std::size_t k = 0; k < active.size(); ++k) {
      revealed[active[k]] = p.adv_grids[active[k]][idx[k]];
    }
    const double m = anticipated_payoff(p.rule, p.priors, revealed, p.target, tol, &sc);
    if (first || m < best) {
      best = m;
      best_idx = idx;
      first = false;
    }
    std::size_t c = 0;
    while (c < active.size() && ++idx[c] == p.adv_grids[active[c]].size()) {
      idx[c] = 0;
      ++c;
    }
    if (c == active.size()) break;
  }
  for (std::size_t k = 0; k < active.size(); ++k) {
    combo[active[k]] = p.adv_grids[active[k]][best_idx[k]];
  }
  return combo;
}

struct RepOutcome {
  std::vector<double> total;
  std::vector<std::uint8_t> excluded;
};

// One full replication. All randomness comes from the replication substream
// in a fixed order (true values ascending, then mechanism internals), so the
// outcome depends only on (config, seed, rep index). `sink`, when non-null,
// receives a row after every round; `record` collects thinned rep-0 ledgers.
inline void run_rep(const Prepared& p, const ExperimentConfig& cfg, std::uint64_t rep,
                    RepOutcome& out,
                    const std::function<void(const TraceRow&)>* sink,
                    SimSummary* record) {
  const std::size_t n = p.n;
  Rng rng(cfg.seed, rep);
  out.total.assign(n, 0.0);
  out.excluded.assign(n, 0);

  std::optional<NtuMechanism> mech;
  if (cfg.mechanism == MechanismKind::kNtu) mech.emplace(p.ntu);

  TuScratch sc;
  GammaMatrix gamma;
  std::vector<double> y;
  std::vector<double> values(n), reports(n);
  std::vector<double> cum(n * (n - 1), 0.0);
  std::map<std::uint64_t, std::vector<double>> combo_cache;
  NtuMechanism::RoundResult rr;
  TraceRow row;
  const bool tracing = sink != nullptr || (record != nullptr && cfg.trajectory_stride > 0);

  for (long long t = 1; t <= cfg.periods; ++t) {
    for (std::size_t i = 0; i < n; ++i) values[i] = p.priors[i].sample(rng);
    if (p.has_adversary) {
      const std::uint64_t mask = mech ? mech->exclusion_mask() : 0;
      auto it = combo_cache.find(mask);
      if (it == combo_cache.end()) {
        it = combo_cache.emplace(mask, adversary_combo(p, mask, cfg.tol, sc.alloc)).first;
      }
      reports = it->second;
      reports[p.target] = values[p.target];
    } else {
      for (std::size_t i = 0; i < n; ++i) {
        const double lo = p.priors[i].support_lo(), hi = p.priors[i].support_hi();
        if (const auto* con = std::get_if<Constant>(&cfg.players[i].strategy)) {
          reports[i] = std::clamp(con->v, lo, hi);
        } else if (const auto* s = std::get_if<Scaled>(&cfg.players[i].strategy)) {
          reports[i] = std::clamp(s->c * values[i], lo, hi);
        } else {
          reports[i] = values[i];
        }
      }
    }

    std::size_t winner;
    if (mech) {
      mech->run_round(reports, rng, rr);
      winner = rr.winner;
      out.total[winner] += values[winner];
    } else {
      externality_matrix_into(gamma, p.rule, p.priors, reports, cfg.order, cfg.tol,
                              &p.base, &sc);
      payments_from_externalities_into(y, gamma, p.kappa);
      winner = allocate(p.rule, reports, p.priors, rng);
      out.total[winner] += values[winner];
      for (std::size_t i = 0; i < n; ++i) out.total[i] += y[i];
      if (tracing) {
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            if (i != j) cum[pair_index(i, j, n)] += gamma[i][j];
          }
        }
      }
    }

    if (tracing) {
      const std::vector<double>* cum_src = &cum;
      std::vector<double> ntu_cum;
      if (mech) {
        const GammaMatrix& c2 = mech->cumulative();
        ntu_cum.resize(n * (n - 1));
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            if (i != j) ntu_cum[pair_index(i, j, n)] = c2[i][j];
          }
        }
        cum_src = &ntu_cum;
      }
      if (sink) {
        row.round = t;
        row.winner = winner;
        row.reports = mech ? rr.effective : reports;
        row.cum_pairs = *cum_src;
        row.payments = mech ? std::vector<double>{} : y;
        row.exclusion_mask = mech ? mech->exclusion_mask() : 0;
        (*sink)(row);
      }
      if (record && cfg.trajectory_stride > 0 &&
          (t % cfg.trajectory_stride == 0 || t == cfg.periods)) {
        record->trajectory_rounds.push_back(t);
        record->trajectory.push_back(*cum_src);
      }
    }
  }
  if (mech) {
    for (std::size_t i = 0; i < n; ++i) out.excluded[i] = mech->excluded(i) ? 1 : 0;
  }
}

}  // namespace detail_sim

// Runs the configured mechanism for cfg.reps independent replications and
// aggregates. Bit-reproducible for fixed (config, seed, reps): replication r
// uses substream (seed, r) and the reduction walks replications in order, so
// the thread count never changes the result.
inline SimSummary run_experiment(const ExperimentConfig& cfg) {
  const detail_sim::Prepared p = detail_sim::prepare(cfg);
  const std::size_t n = p.n;
  const int reps = cfg.reps;

  SimSummary sum;
  sum.mechanism = cfg.mechanism;
  sum.seed = cfg.seed;
  sum.reps = reps;
  sum.periods = cfg.periods;
  if (cfg.mechanism == MechanismKind::kTu) {
    sum.kappa = p.kappa;
  } else {
    sum.budgets = NtuMechanism(p.ntu).budgets();
  }

  std::vector<detail_sim::RepOutcome> slots(reps);
  unsigned hw = std::thread::hardware_concurrency();
  const std::size_t nthreads =
      std::min<std::size_t>(std::max(1u, hw), static_cast<std::size_t>(reps));
  std::vector<std::exception_ptr> errors(nthreads);
  auto work = [&](std::size_t tid) {
    try {
      for (int r = static_cast<int>(tid); r < reps; r += static_cast<int>(nthreads)) {
        detail_sim::run_rep(p, cfg, static_cast<std::uint64_t>(r), slots[r], nullptr,
                            r == 0 ? &sum : nullptr);
      }
    } catch (...) {
      errors[tid] = std::current_exception();
    }
  };
  if (nthreads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t tid = 0; tid < nthreads; ++tid) pool.emplace_back(work, tid);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  std::vector<RunningStat> per_player(n);
  RunningStat welfare;
  sum.exclusions.assign(n, 0);
  for (int r = 0; r < reps; ++r) {
    double w = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      per_player[i].add(slots[r].total[i]);
      w += slots[r].total[i];
      sum.exclusions[i] += slots[r].excluded[i];
    }
    welfare.add(w);
  }
  const double T = static_cast<double>(cfg.periods);
  for (std::size_t i = 0; i < n; ++i) {
    sum.mean_total.push_back(per_player[i].mean);
    sum.se_total.push_back(per_player[i].std_error());
    sum.mean_per_round.push_back(per_player[i].mean / T);
    sum.se_per_round.push_back(per_player[i].std_error() / T);
  }
  sum.mean_welfare = welfare.mean;
  sum.se_welfare = welfare.std_error();
  return sum;
}

inline SimSummary run_experiment(ExperimentConfig cfg, std::uint64_t seed, int reps) {
  cfg.seed = seed;
  cfg.reps = reps;
  return run_experiment(cfg);
}

// Single replication with a full per-round trace, for the CLI trace writer.
inline void run_trace(const ExperimentConfig& cfg, std::uint64_t rep,
                      const std::function<void(const TraceRow&)>& sink) {
  const detail_sim::Prepared p = detail_sim::prepare(cfg);
  detail_sim::RepOutcome out;
  detail_sim::run_rep(p, cfg, rep, out, &sink, nullptr);
}

struct AdversaryReport {
  SimSummary summary;
  std::size_t target = 0;
  double mean_total = 0.0;  // target's mean total utility under attack
  double se_total = 0.0;
  double guarantee = 0.0;   // applicable floor on the total
  double margin_sigmas = 0.0;
};

// Worst-case certification: every non-target seat is handed to the myopic
// grid adversary, the target plays truthfully, and the target's mean total
// utility is compared against the mechanism's guarantee. TU guarantee is
// T * (anticipated payoff + constant), which interim constancy makes exact;
// NTU uses the budgeted-mechanism floor.
inline AdversaryReport adversary_best_response(ExperimentConfig cfg, std::size_t target,
                                               int grid = 33) {
  if (target >= cfg.players.size()) {
    throw std::invalid_argument("adversary_best_response: target out of range");
  }
  if (grid < 2) throw std::invalid_argument("adversary_best_response: grid must be >= 2");
  for (std::size_t i = 0; i < cfg.players.size(); ++i) {
    cfg.players[i].strategy =
        i == target ? Strategy{Truthful{}} : Strategy{AdversaryVs{target, grid}};
  }
  const detail_sim::Prepared p = detail_sim::prepare(cfg);

  AdversaryReport rep;
  rep.target = target;
  if (cfg.mechanism == MechanismKind::kTu) {
    rep.guarantee = static_cast<double>(cfg.periods) * (p.base[target] + p.kappa[target]);
  } else {
    GuaranteeInputs g = make_guarantee_inputs(cfg.players[target].weight,
                                              cfg.players[target].prior,
                                              static_cast<double>(cfg.periods));
    if (cfg.players[target].sour) g.sour = *cfg.players[target].sour;
    if (cfg.players[target].sens) g.sens = *cfg.players[target].sens;
    std::vector<double> others;
    for (std::size_t i = 0; i < cfg.players.size(); ++i) {
      if (i != target) others.push_back(cfg.players[i].weight);
    }
    rep.guarantee = ntu_guarantee_floor(g, cfg.budgets, others).value;
  }
  rep.summary = run_experiment(cfg);
  rep.mean_total = rep.summary.mean_total[target];
  rep.se_total = rep.summary.se_total[target];
  rep.margin_sigmas = rep.se_total > 0.0
                          ? (rep.mean_total - rep.guarantee) / rep.se_total
                          : (rep.mean_total >= rep.guarantee ? 1e300 : -1e300);
  return rep;
}

}  // namespace gum
