#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "gum/allocation.hpp"
#include "gum/distribution.hpp"
#include "gum/targets.hpp"
#include "gum/tu.hpp"

namespace gum {

// Two readings of the pair budget coexist: the definition-style formula and
// the reading that reproduces the worked example's printed constants.
enum class BudgetMode { kDefinition, kExample };

// Budget of the cumulative externality player i may impose on player j before
// exclusion. Grows like sqrt(T) log T, so truthful (mean-zero) ledgers stay
// inside it with high probability while persistent manipulation cannot.
inline double ntu_budget(double alpha_i, double alpha_j, double periods,
                         double sens_j, BudgetMode mode) {
  if (!(periods >= 2.0)) {
    throw std::invalid_argument("ntu_budget: need at least two periods");
  }
  if (!(alpha_i > 0.0 && alpha_i <= 1.0) || !(alpha_j > 0.0 && alpha_j <= 1.0)) {
    throw std::invalid_argument("ntu_budget: weights must lie in (0,1]");
  }
  if (!(sens_j >= 0.0)) {
    throw std::invalid_argument("ntu_budget: negative sensitivity");
  }
  const double rt = std::sqrt(periods);
  switch (mode) {
    case BudgetMode::kDefinition:
      return alpha_i * rt * std::log(periods / alpha_j) * sens_j;
    case BudgetMode::kExample:
      return alpha_i * rt * std::log(periods) * std::log(1.0 / alpha_j) * sens_j;
  }
  return 0.0;
}

struct AzumaBound {
  double raw = 0.0;         // exp(-B^2 / (2 T Sour^2 Sens^2))
  double simplified = 0.0;  // (alpha_j / T) exp(Sour^2 / (2 alpha_i^2))
};

// Chance that a truthful player's cumulative pair ledger ever dips below -B,
// via the martingale tail bound. Zero-variance reporters never cross.
inline AzumaBound azuma_bound(double budget, double periods, double sour_i,
                              double sens_j, double alpha_i, double alpha_j) {
  if (!(budget > 0.0) || !(periods > 0.0) || !(alpha_i > 0.0) || !(alpha_j > 0.0)) {
    throw std::invalid_argument("azuma_bound: nonpositive argument");
  }
  AzumaBound b;
  b.simplified = alpha_j / periods * std::exp(sour_i * sour_i / (2.0 * alpha_i * alpha_i));
  const double scale = sour_i * sens_j;
  b.raw = scale == 0.0
              ? 0.0
              : std::exp(-budget * budget / (2.0 * periods * scale * scale));
  return b;
}

struct GuaranteeInputs {
  double alpha = 0.0;
  Distribution prior;
  double periods = 0.0;
  double sour = 0.0;   // per-round externality the player can cause, scale
  double sens = 0.0;   // per-round externality the player absorbs, scale
  double range = 0.0;  // worst per-round payoff swing
};

// Defaults for the i.i.d. repeated game: Sour 1 (0 for a degenerate prior,
// whose reports carry no information), Sens and range both the top of the
// support (per-round payoff lives in [0, hi]).
inline GuaranteeInputs make_guarantee_inputs(double alpha, Distribution prior,
                                             double periods) {
  GuaranteeInputs g;
  g.alpha = alpha;
  g.periods = periods;
  g.sour = prior.is_degenerate() ? 0.0 : 1.0;
  g.sens = prior.support_hi();
  g.range = prior.support_hi();
  g.prior = std::move(prior);
  return g;
}

struct FloorBreakdown {
  double per_round = 0.0;   // ideal per-round target
  double deviation = 0.0;   // forfeited incoming virtual payments
  double exclusion = 0.0;   // loss if the player's own ledger ever crosses
  double value = 0.0;       // periods * per_round - deviation - exclusion
  double deviation_coefficient = 0.0;  // deviation / (sqrt(T) ln T)
};

// Total-utility floor a truthful player can guarantee under the budgeted
// mechanism. Definition mode bounds the forfeit term by sqrt(T) ln(T/alpha) *
// Sens; example mode sums the actual incoming budgets, which needs the
// opponents' weights. The exclusion term vanishes for Sour = 0 (the ledger is
// then deterministically zero and never crosses).
inline FloorBreakdown ntu_guarantee_floor(const GuaranteeInputs& g,
                                          BudgetMode mode = BudgetMode::kDefinition,
                                          std::span<const double> other_alphas = {}) {
  if (!(g.alpha > 0.0 && g.alpha <= 1.0)) {
    throw std::invalid_argument("guarantee floor: weight must lie in (0,1]");
  }
  if (!(g.periods >= 2.0)) {
    throw std::invalid_argument("guarantee floor: need at least two periods");
  }
  FloorBreakdown f;
  f.per_round = targets::per_round_target(g.alpha, g.prior);
  const double rt = std::sqrt(g.periods), lt = std::log(g.periods);
  if (mode == BudgetMode::kDefinition) {
    f.deviation = rt * std::log(g.periods / g.alpha) * g.sens;
  } else {
    if (other_alphas.empty()) {
      throw std::invalid_argument(
          "guarantee floor: example mode needs the opponents' weights");
    }
    for (double aj : other_alphas) {
      f.deviation += ntu_budget(aj, g.alpha, g.periods, g.sens, BudgetMode::kExample);
    }
  }
  f.deviation_coefficient = f.deviation / (rt * lt);
  f.exclusion = g.sour == 0.0
                    ? 0.0
                    : g.range * std::exp(g.sour * g.sour / (2.0 * g.alpha * g.alpha));
  f.value = g.periods * f.per_round - f.deviation - f.exclusion;
  return f;
}

// ---------------------------------------------------------------------------
// The repeated transfer-free mechanism with ledgers and exclusion.
// ---------------------------------------------------------------------------

struct NtuConfig {
  AllocationRule rule;
  std::vector<Distribution> priors;
  std::vector<double> alphas;          // budget weights, in (0,1]
  std::vector<double> sens;            // empty: support tops
  long long periods = 2;
  BudgetMode mode = BudgetMode::kDefinition;
  std::vector<std::size_t> order;      // reveal order; empty: ascending
  double tol = 1e-10;
};

class NtuMechanism {
 public:
  struct RoundResult {
    std::size_t winner = 0;
    std::vector<double> effective;             // reports after replacements
    std::vector<std::size_t> newly_excluded;
  };

  explicit NtuMechanism(NtuConfig cfg) : cfg_(std::move(cfg)) {
    n_ = cfg_.priors.size();
    if (n_ < 2) throw std::invalid_argument("ntu mechanism: need two players");
    if (rule_players(cfg_.rule) != n_ || cfg_.alphas.size() != n_) {
      throw std::invalid_argument("ntu mechanism: size mismatch");
    }
    validate_rule(cfg_.rule);
    if (cfg_.sens.empty()) {
      for (const auto& d : cfg_.priors) cfg_.sens.push_back(d.support_hi());
    } else if (cfg_.sens.size() != n_) {
      throw std::invalid_argument("ntu mechanism: sens size mismatch");
    }
    budget_.assign(n_, std::vector<double>(n_, 0.0));
    cum_.assign(n_, std::vector<double>(n_, 0.0));
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = 0; j < n_; ++j) {
        if (i != j) {
          budget_[i][j] =
              ntu_budget(cfg_.alphas[i], cfg_.alphas[j],
                         static_cast<double>(cfg_.periods), cfg_.sens[j], cfg_.mode);
        }
      }
    }
    excluded_round_.assign(n_, -1);
    base_ = anticipations(cfg_.rule, cfg_.priors, cfg_.tol, &sc_.alloc);
  }

  // One round: previously excluded players' reports are replaced by fresh
  // prior draws, externalities of the round accrue for active payers only,
  // new crossings take effect immediately (their reports are replaced before
  // allocation), then the good is allocated.
  void run_round(std::span<const double> reports, Rng& rng, RoundResult& out) {
    if (round_ >= cfg_.periods) {
      throw std::out_of_range("ntu mechanism: past the horizon");
    }
    if (reports.size() != n_) {
      throw std::invalid_argument("ntu mechanism: report count mismatch");
    }
    out.effective.assign(reports.begin(), reports.end());
    for (std::size_t i = 0; i < n_; ++i) {
      if (excluded_round_[i] >= 0) out.effective[i] = cfg_.priors[i].sample(rng);
    }
    externality_matrix_into(gamma_, cfg_.rule, cfg_.priors, out.effective,
                            cfg_.order, cfg_.tol, &base_, &sc_);
    for (std::size_t i = 0; i < n_; ++i) {
      if (excluded_round_[i] >= 0) continue;  // frozen payer ledger
      for (std::size_t j = 0; j < n_; ++j) {
        if (i != j) cum_[i][j] += gamma_[i][j];
      }
    }
    out.newly_excluded.clear();
    for (std::size_t i = 0; i < n_; ++i) {
      if (excluded_round_[i] >= 0) continue;
      for (std::size_t j = 0; j < n_; ++j) {
        if (i != j && cum_[i][j] < -budget_[i][j]) {
          excluded_round_[i] = round_;
          out.newly_excluded.push_back(i);
          break;
        }
      }
    }
    for (std::size_t i : out.newly_excluded) {
      out.effective[i] = cfg_.priors[i].sample(rng);
    }
    out.winner = allocate(cfg_.rule, out.effective, cfg_.priors, rng);
    ++round_;
  }

  const NtuConfig& config() const { return cfg_; }
  std::size_t players() const { return n_; }
  long long round() const { return round_; }
  const GammaMatrix& budgets() const { return budget_; }
  const GammaMatrix& cumulative() const { return cum_; }
  const GammaMatrix& last_gamma() const { return gamma_; }
  const std::vector<double>& base_anticipations() const { return base_; }
  bool excluded(std::size_t i) const { return excluded_round_[i] >= 0; }
  // Round in which i was excluded, or -1 while active.
  long long exclusion_round(std::size_t i) const { return excluded_round_[i]; }
  // Bitmask of excluded players, low bit = player 0.
  std::uint64_t exclusion_mask() const {
    std::uint64_t m = 0;
    for (std::size_t i = 0; i < n_; ++i) {
      if (excluded_round_[i] >= 0) m |= std::uint64_t{1} << i;
    }
    return m;
  }

 private:
  NtuConfig cfg_;
  std::size_t n_ = 0;
  long long round_ = 0;
  GammaMatrix budget_, cum_, gamma_;
  std::vector<long long> excluded_round_;
  std::vector<double> base_;
  TuScratch sc_;
};

}  // namespace gum
