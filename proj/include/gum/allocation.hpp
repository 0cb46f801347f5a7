#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <variant>
#include <vector>

#include "gum/distribution.hpp"
#include "gum/quadrature.hpp"
#include "gum/rng.hpp"

namespace gum {

// Weight-driven rule: player i's score is U_i^(1/alpha_i) where U_i is the
// smoothed CDF level of their report. Unrevealed truthful players therefore
// carry scores U^(1/alpha) with U uniform on (0,1), independent of everything
// else. alpha_i = 0 means a permanent score of zero.
struct QuantilePower {
  std::vector<double> alphas;
  bool operator==(const QuantilePower&) const = default;
};

// Efficiency-style rule: score is coeff_i * report_i, highest score wins.
struct LinearScaled {
  std::vector<double> coeffs;
  bool operator==(const LinearScaled&) const = default;
};

// Several identical goods per round: the `goods` highest quantile-power
// scores each receive one.
struct TopL {
  int goods = 1;
  std::vector<double> alphas;
  bool operator==(const TopL&) const = default;
};

using AllocationRule = std::variant<QuantilePower, LinearScaled, TopL>;

inline std::size_t rule_players(const AllocationRule& rule) {
  return std::visit(
      [](const auto& r) -> std::size_t {
        if constexpr (requires { r.alphas; }) {
          return r.alphas.size();
        } else {
          return r.coeffs.size();
        }
      },
      rule);
}

inline void validate_rule(const AllocationRule& rule) {
  if (rule_players(rule) == 0) {
    throw std::invalid_argument("allocation rule names no players");
  }
  std::visit(
      [](const auto& r) {
        if constexpr (requires { r.alphas; }) {
          for (double a : r.alphas) {
            if (!(a >= 0.0 && a <= 1.0)) {
              throw std::invalid_argument("allocation weight outside [0,1]");
            }
          }
          if constexpr (requires { r.goods; }) {
            if (r.goods < 1) {
              throw std::invalid_argument("goods per round must be >= 1");
            }
          }
        } else {
          for (double c : r.coeffs) {
            if (!(c >= 0.0) || !std::isfinite(c)) {
              throw std::invalid_argument("scaling coefficient must be finite and >= 0");
            }
          }
        }
      },
      rule);
}

// Realized scores for one round. Quantile-based rules consume one smoothed
// CDF draw per player whose report sits on an atom; LinearScaled consumes
// none. Players are processed in index order so streams replay exactly.
inline void allocation_scores(const AllocationRule& rule,
                              std::span<const double> reports,
                              std::span<const Distribution> priors, Rng& rng,
                              std::vector<double>& out) {
  const std::size_t n = reports.size();
  if (rule_players(rule) != n || priors.size() != n) {
    throw std::invalid_argument("allocation_scores: size mismatch");
  }
  out.resize(n);
  std::visit(
      [&](const auto& r) {
        if constexpr (requires { r.alphas; }) {
          for (std::size_t j = 0; j < n; ++j) {
            const double u = priors[j].smoothed_cdf_sample(reports[j], rng);
            out[j] = r.alphas[j] <= 0.0 ? 0.0 : std::pow(u, 1.0 / r.alphas[j]);
          }
        } else {
          for (std::size_t j = 0; j < n; ++j) {
            out[j] = r.coeffs[j] * reports[j];
          }
        }
      },
      rule);
}

// Index of the max score, ties broken uniformly. Randomness is consumed only
// when a tie actually occurs.
inline std::size_t argmax_tiebreak(std::span<const double> scores, Rng& rng) {
  std::size_t best = 0, ties = 1;
  for (std::size_t j = 1; j < scores.size(); ++j) {
    if (scores[j] > scores[best]) {
      best = j;
      ties = 1;
    } else if (scores[j] == scores[best]) {
      ++ties;
    }
  }
  if (ties == 1) return best;
  std::uint64_t pick = rng.below(ties);
  for (std::size_t j = 0; j < scores.size(); ++j) {
    if (scores[j] == scores[best]) {
      if (pick == 0) return j;
      --pick;
    }
  }
  return best;  // unreachable
}

// Single-good winner. Throws for TopL; use allocate_multi there.
inline std::size_t allocate(const AllocationRule& rule,
                            std::span<const double> reports,
                            std::span<const Distribution> priors, Rng& rng) {
  if (std::holds_alternative<TopL>(rule)) {
    throw std::invalid_argument("allocate: rule hands out several goods");
  }
  static thread_local std::vector<double> scores;
  allocation_scores(rule, reports, priors, rng, scores);
  return argmax_tiebreak(scores, rng);
}

// Winners of every good this round, ascending index order. Boundary ties are
// resolved by a uniform draw over the tied set.
inline std::vector<std::size_t> allocate_multi(const AllocationRule& rule,
                                               std::span<const double> reports,
                                               std::span<const Distribution> priors,
                                               Rng& rng) {
  const auto* top = std::get_if<TopL>(&rule);
  if (!top) return {allocate(rule, reports, priors, rng)};
  std::vector<double> scores;
  allocation_scores(rule, reports, priors, rng, scores);
  const std::size_t n = scores.size();
  const std::size_t ell = std::min<std::size_t>(static_cast<std::size_t>(top->goods), n);
  std::vector<double> sorted(scores);
  std::nth_element(sorted.begin(), sorted.begin() + (ell - 1), sorted.end(),
                   std::greater<double>{});
  const double cutoff = sorted[ell - 1];
  std::vector<std::size_t> winners, tied;
  for (std::size_t j = 0; j < n; ++j) {
    if (scores[j] > cutoff) {
      winners.push_back(j);
    } else if (scores[j] == cutoff) {
      tied.push_back(j);
    }
  }
  std::size_t need = ell - winners.size();
  for (std::size_t k = 0; k < need; ++k) {
    const std::size_t r = k + static_cast<std::size_t>(rng.below(tied.size() - k));
    std::swap(tied[k], tied[r]);
    winners.push_back(tied[k]);
  }
  std::sort(winners.begin(), winners.end());
  return winners;
}

// ---------------------------------------------------------------------------
// Anticipated payoffs: E[value_i * 1{i wins}] with some reports revealed and
// the rest drawn fresh from the priors.
// ---------------------------------------------------------------------------

namespace detail_alloc {

// Law of one opponent's score, reduced to the four shapes the two single-good
// rules can produce. lt/eq give P(S < s) and P(S = s).
struct ScoreVar {
  enum class Kind { Point, Power, PowerSlice, ScaledPrior };
  Kind kind = Kind::Point;
  double a = 0.0;              // Point: location. Power/PowerSlice: weight.
  double lo = 0.0, hi = 1.0;   // PowerSlice: smoothed-CDF window of the report
  double c = 1.0;              // ScaledPrior: coefficient
  const Distribution* dist = nullptr;

  double lt(double s) const {
    switch (kind) {
      case Kind::Point:
        return s > a ? 1.0 : 0.0;
      case Kind::Power:
        if (s <= 0.0) return 0.0;
        return s >= 1.0 ? 1.0 : std::pow(s, a);
      case Kind::PowerSlice: {
        if (s <= 0.0) return 0.0;
        const double u = s >= 1.0 ? 1.0 : std::pow(s, a);
        return std::clamp((u - lo) / (hi - lo), 0.0, 1.0);
      }
      case Kind::ScaledPrior:
        return dist->cdf_left(s / c);
    }
    return 0.0;
  }

  double eq(double s) const {
    switch (kind) {
      case Kind::Point:
        return s == a ? 1.0 : 0.0;
      case Kind::ScaledPrior: {
        const double x = s / c;
        return dist->cdf(x) - dist->cdf_left(x);
      }
      default:
        return 0.0;
    }
  }

  // Scores where lt has a kink or jump; the win probability is smooth in
  // between.
  void score_breakpoints(std::vector<double>& out) const {
    switch (kind) {
      case Kind::Point:
        out.push_back(a);
        break;
      case Kind::Power:
        out.push_back(1.0);
        break;
      case Kind::PowerSlice:
        out.push_back(std::pow(lo, 1.0 / a));
        out.push_back(std::pow(hi, 1.0 / a));
        break;
      case Kind::ScaledPrior:
        for (double v : dist->value_breakpoints()) out.push_back(c * v);
        break;
    }
  }
};

inline ScoreVar make_score_var(const AllocationRule& rule,
                               std::span<const Distribution> priors,
                               std::size_t j,
                               const std::optional<double>& report) {
  ScoreVar v;
  if (const auto* ls = std::get_if<LinearScaled>(&rule)) {
    const double c = ls->coeffs[j];
    if (report) {
      v.kind = ScoreVar::Kind::Point;
      v.a = c * *report;
    } else if (c == 0.0) {
      v.kind = ScoreVar::Kind::Point;
      v.a = 0.0;
    } else {
      v.kind = ScoreVar::Kind::ScaledPrior;
      v.c = c;
      v.dist = &priors[j];
    }
    return v;
  }
  const auto& alphas = std::holds_alternative<QuantilePower>(rule)
                           ? std::get<QuantilePower>(rule).alphas
                           : std::get<TopL>(rule).alphas;
  const double alpha = alphas[j];
  if (alpha <= 0.0) {
    v.kind = ScoreVar::Kind::Point;
    v.a = 0.0;
    return v;
  }
  if (!report) {
    v.kind = ScoreVar::Kind::Power;
    v.a = alpha;
    return v;
  }
  const double l = priors[j].cdf_left(*report);
  const double r = priors[j].cdf(*report);
  if (l == r) {
    v.kind = ScoreVar::Kind::Point;
    v.a = std::pow(l, 1.0 / alpha);
    return v;
  }
  v.kind = ScoreVar::Kind::PowerSlice;
  v.a = alpha;
  v.lo = l;
  v.hi = r;
  return v;
}

// Reusable buffers so the per-round hot path does not allocate.
struct Scratch {
  std::vector<ScoreVar> vars;
  std::vector<double> sbp;  // score-space breakpoints
  std::vector<double> ubp;  // quantile-space breakpoints
  std::vector<double> tie_eq, tie_lt;
};

// P(score s beats every opponent). Opponents with an atom exactly at s share
// the good evenly with us, hence the subset sum: each tied subset T
// contributes (prod eq)(prod lt of the rest)/(|T|+1).
inline double win_probability(const std::vector<ScoreVar>& others, double s,
                              Scratch& sc) {
  double base = 1.0;
  sc.tie_eq.clear();
  sc.tie_lt.clear();
  for (const auto& v : others) {
    const double e = v.eq(s);
    if (e > 0.0) {
      sc.tie_eq.push_back(e);
      sc.tie_lt.push_back(v.lt(s));
    } else {
      base *= v.lt(s);
      if (base == 0.0) return 0.0;  // some opponent is surely above s
    }
  }
  const std::size_t m = sc.tie_eq.size();
  if (m == 0) return base;
  if (m > 25) throw std::runtime_error("win_probability: too many tied atoms");
  double p = 0.0;
  for (std::uint32_t mask = 0; mask < (1u << m); ++mask) {
    double term = 1.0;
    int k = 0;
    for (std::size_t t = 0; t < m; ++t) {
      if (mask & (1u << t)) {
        term *= sc.tie_eq[t];
        ++k;
      } else {
        term *= sc.tie_lt[t];
      }
    }
    p += term / (k + 1);
  }
  return base * p;
}

}  // namespace detail_alloc

// Expected utility E[V_i * 1{i wins}] of `player` under `rule`, conditioning
// on the revealed reports (engaged optionals) and integrating everyone else,
// including player i if unrevealed, over their priors. Revealed reports are
// treated as true values. Independence of the per-player scores reduces every
// case to a single quantile-axis integral with known breakpoints.
inline double anticipated_payoff(const AllocationRule& rule,
                                 std::span<const Distribution> priors,
                                 std::span<const std::optional<double>> reports,
                                 std::size_t player, double tol = 1e-12,
                                 detail_alloc::Scratch* scratch = nullptr) {
  using detail_alloc::ScoreVar;
  using detail_alloc::win_probability;
  static thread_local detail_alloc::Scratch fallback;
  detail_alloc::Scratch& sc = scratch ? *scratch : fallback;

  const std::size_t n = priors.size();
  if (rule_players(rule) != n || reports.size() != n || player >= n) {
    throw std::invalid_argument("anticipated_payoff: size mismatch");
  }
  if (std::holds_alternative<TopL>(rule)) {
    throw std::invalid_argument(
        "anticipated_payoff: only single-good rules are supported");
  }

  sc.vars.clear();
  for (std::size_t j = 0; j < n; ++j) {
    if (j != player) {
      sc.vars.push_back(detail_alloc::make_score_var(rule, priors, j, reports[j]));
    }
  }
  sc.sbp.clear();
  for (const auto& v : sc.vars) v.score_breakpoints(sc.sbp);

  const Distribution& d = priors[player];

  if (const auto* ls = std::get_if<LinearScaled>(&rule)) {
    const double c = ls->coeffs[player];
    if (reports[player]) {
      const double v = *reports[player];
      return v * win_probability(sc.vars, c * v, sc);
    }
    if (c == 0.0) {
      return d.expectation() * win_probability(sc.vars, 0.0, sc);
    }
    sc.ubp = d.quantile_breakpoints();
    const double lo = d.support_lo(), hi = d.support_hi();
    for (double s : sc.sbp) {
      const double x = s / c;
      if (x > lo && x < hi) {
        sc.ubp.push_back(d.cdf_left(x));
        sc.ubp.push_back(d.cdf(x));
      }
    }
    return integrate_with_breakpoints(
        [&](double u) {
          const double v = d.quantile(u);
          return v * win_probability(sc.vars, c * v, sc);
        },
        0.0, 1.0, sc.ubp, tol);
  }

  const double alpha = std::get<QuantilePower>(rule).alphas[player];
  if (reports[player]) {
    const double v = *reports[player];
    if (alpha <= 0.0) return v * win_probability(sc.vars, 0.0, sc);
    const double l = d.cdf_left(v), r = d.cdf(v);
    if (l == r) {
      return v * win_probability(sc.vars, std::pow(l, 1.0 / alpha), sc);
    }
    // Report sits on an atom: the smoothed CDF level is uniform on [l, r].
    sc.ubp.clear();
    for (double s : sc.sbp) {
      if (s > 0.0 && s < 1.0) sc.ubp.push_back(std::pow(s, alpha));
    }
    const double mass = integrate_with_breakpoints(
        [&](double u) {
          return win_probability(sc.vars, std::pow(u, 1.0 / alpha), sc);
        },
        l, r, sc.ubp, tol);
    return v * mass / (r - l);
  }
  if (alpha <= 0.0) {
    return d.expectation() * win_probability(sc.vars, 0.0, sc);
  }
  // Value and score are driven by the same uniform level u.
  sc.ubp = d.quantile_breakpoints();
  for (double s : sc.sbp) {
    if (s > 0.0 && s < 1.0) sc.ubp.push_back(std::pow(s, alpha));
  }
  return integrate_with_breakpoints(
      [&](double u) {
        return d.quantile(u) * win_probability(sc.vars, std::pow(u, 1.0 / alpha), sc);
      },
      0.0, 1.0, sc.ubp, tol);
}

}  // namespace gum
