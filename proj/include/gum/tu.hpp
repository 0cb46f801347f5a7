#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "gum/allocation.hpp"
#include "gum/distribution.hpp"
#include "gum/targets.hpp"

namespace gum {

using GammaMatrix = std::vector<std::vector<double>>;

struct TuScratch {
  std::vector<std::optional<double>> revealed;
  std::vector<double> m_prev, m_next;
  std::vector<std::size_t> order;
  detail_alloc::Scratch alloc;
};

// Everyone's anticipated payoff before any report is revealed. Constant per
// (rule, priors); worth caching by the caller of per-round code.
inline std::vector<double> anticipations(const AllocationRule& rule,
                                         std::span<const Distribution> priors,
                                         double tol = 1e-12,
                                         detail_alloc::Scratch* scratch = nullptr) {
  const std::size_t n = priors.size();
  std::vector<std::optional<double>> nobody(n);
  std::vector<double> m(n);
  for (std::size_t j = 0; j < n; ++j) {
    m[j] = anticipated_payoff(rule, priors, nobody, j, tol, scratch);
  }
  return m;
}

// Pairwise externalities of one round of reports, revealed one player at a
// time. Entry [i][j], i != j, is the move of j's anticipated payoff caused by
// i's report landing on top of the already-revealed prefix:
//
//   gamma[i][j] = M_j(prefix + i's report) - M_j(prefix)
//
// The diagonal [i][i] stores i's own reveal increment (not an externality, but
// it makes M telescope: sum of column j plus nothing else = M_j(all reports) -
// M_j(nothing)). Under a truthful prior each gamma[i][j] has zero mean
// conditional on the prefix.
//
// `order` is the reveal order (default ascending index); `base` is a cached
// anticipations() vector to avoid recomputing the empty-prefix payoffs.
inline void externality_matrix_into(GammaMatrix& gamma,
                                    const AllocationRule& rule,
                                    std::span<const Distribution> priors,
                                    std::span<const double> reports,
                                    std::span<const std::size_t> order = {},
                                    double tol = 1e-12,
                                    const std::vector<double>* base = nullptr,
                                    TuScratch* scratch = nullptr) {
  static thread_local TuScratch fallback;
  TuScratch& sc = scratch ? *scratch : fallback;
  const std::size_t n = priors.size();
  if (reports.size() != n || rule_players(rule) != n) {
    throw std::invalid_argument("externality_matrix: size mismatch");
  }
  sc.order.assign(n, 0);
  if (order.empty()) {
    std::iota(sc.order.begin(), sc.order.end(), std::size_t{0});
  } else {
    if (order.size() != n) {
      throw std::invalid_argument("externality_matrix: order size mismatch");
    }
    sc.order.assign(order.begin(), order.end());
    auto check = sc.order;
    std::sort(check.begin(), check.end());
    for (std::size_t k = 0; k < n; ++k) {
      if (check[k] != k) {
        throw std::invalid_argument("externality_matrix: order is not a permutation");
      }
    }
  }

  gamma.resize(n);
  for (auto& row : gamma) {
    row.assign(n, 0.0);
  }
  sc.revealed.assign(n, std::nullopt);
  if (base) {
    sc.m_prev = *base;
  } else {
    sc.m_prev.resize(n);
    for (std::size_t j = 0; j < n; ++j) {
      sc.m_prev[j] = anticipated_payoff(rule, priors, sc.revealed, j, tol, &sc.alloc);
    }
  }
  sc.m_next.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t i = sc.order[k];
    sc.revealed[i] = reports[i];
    for (std::size_t j = 0; j < n; ++j) {
      // The last reveal's own increment is still needed for the diagonal.
      sc.m_next[j] = anticipated_payoff(rule, priors, sc.revealed, j, tol, &sc.alloc);
      gamma[i][j] = sc.m_next[j] - sc.m_prev[j];
    }
    std::swap(sc.m_prev, sc.m_next);
  }
}

inline GammaMatrix externality_matrix(const AllocationRule& rule,
                                      std::span<const Distribution> priors,
                                      std::span<const double> reports,
                                      std::span<const std::size_t> order = {},
                                      double tol = 1e-12,
                                      const std::vector<double>* base = nullptr,
                                      TuScratch* scratch = nullptr) {
  GammaMatrix g;
  externality_matrix_into(g, rule, priors, reports, order, tol, base, scratch);
  return g;
}

// y_i = (externalities i imposes) - (externalities imposed on i) + kappa_i.
// The diagonal is excluded on both sides. With kappa = 0 the payments sum to
// zero exactly (each off-diagonal entry appears once with each sign).
inline void payments_from_externalities_into(std::vector<double>& y,
                                             const GammaMatrix& gamma,
                                             std::span<const double> kappa = {}) {
  const std::size_t n = gamma.size();
  if (!kappa.empty() && kappa.size() != n) {
    throw std::invalid_argument("payments: kappa size mismatch");
  }
  y.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      y[i] += gamma[i][j] - gamma[j][i];
    }
    if (!kappa.empty()) y[i] += kappa[i];
  }
}

inline std::vector<double> payments_from_externalities(
    const GammaMatrix& gamma, std::span<const double> kappa = {}) {
  std::vector<double> y;
  payments_from_externalities_into(y, gamma, kappa);
  return y;
}

// Whether the per-player constants kappa must sum to zero (so payments do) or
// are taken as-is.
enum class Balance { kConstantsOnly, kStrict };

// tau_i tops player i up from their anticipated payoff to the equal-split
// floor of an all-i world: tau_i = fair_floor(D_i, n) - M_i(empty).
inline std::vector<double> floor_offsets(const AllocationRule& rule,
                                         std::span<const Distribution> priors,
                                         double tol = 1e-12) {
  const std::size_t n = priors.size();
  std::vector<double> tau = anticipations(rule, priors, tol);
  for (std::size_t i = 0; i < n; ++i) {
    tau[i] = targets::fair_floor(priors[i], static_cast<int>(n)) - tau[i];
  }
  return tau;
}

// Group surplus: best expected welfare minus the sum of fair floors.
// Nonnegative whenever the floors come from the fair-floor construction.
inline double welfare_surplus(std::span<const Distribution> priors) {
  const std::size_t n = priors.size();
  double s = expected_max(priors);
  for (const auto& d : priors) {
    s -= targets::fair_floor(d, static_cast<int>(n));
  }
  return s;
}

// Split the surplus in proportion to `weights` (equal shares when empty).
inline std::vector<double> proportional_surplus_split(
    std::span<const Distribution> priors, std::span<const double> weights = {}) {
  const std::size_t n = priors.size();
  const double surplus = welfare_surplus(priors);
  std::vector<double> c(n, 0.0);
  if (weights.empty()) {
    for (auto& v : c) v = surplus / static_cast<double>(n);
    return c;
  }
  if (weights.size() != n) {
    throw std::invalid_argument("surplus split: weight count mismatch");
  }
  double wsum = 0.0;
  for (double w : weights) {
    if (w < 0.0) throw std::invalid_argument("surplus split: negative weight");
    wsum += w;
  }
  for (std::size_t i = 0; i < n; ++i) {
    c[i] = wsum > 0.0 ? surplus * weights[i] / wsum : surplus / static_cast<double>(n);
  }
  return c;
}

// kappa = tau + c under the strict budget-balance reading. The precondition
// sum(fair floors) + sum(c) = sum(anticipated payoffs) holds when the rule is
// welfare-efficient for the priors; otherwise the sums are named in the error.
inline std::vector<double> balanced_constants(const AllocationRule& rule,
                                              std::span<const Distribution> priors,
                                              std::span<const double> c = {},
                                              double tol = 1e-12) {
  const std::size_t n = priors.size();
  if (!c.empty() && c.size() != n) {
    throw std::invalid_argument("balanced_constants: c size mismatch");
  }
  std::vector<double> m = anticipations(rule, priors, tol);
  std::vector<double> kappa(n, 0.0);
  double target_sum = 0.0, m_sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double floor_i = targets::fair_floor(priors[i], static_cast<int>(n));
    const double ci = c.empty() ? 0.0 : c[i];
    kappa[i] = floor_i - m[i] + ci;
    target_sum += floor_i + ci;
    m_sum += m[i];
  }
  if (std::abs(target_sum - m_sum) > 1e-9) {
    std::ostringstream os;
    os << "balanced_constants: floors+constants sum to " << target_sum
       << " but anticipated payoffs sum to " << m_sum
       << "; pick constants summing to the surplus of an efficient rule";
    throw std::invalid_argument(os.str());
  }
  return kappa;
}

// Expected utility of truthful player i given one fixed profile of opponent
// reports: E over V_i of (win indicator * V_i + y_i). Single quantile-axis
// integral; y_i is re-derived at every node from the externality matrix.
inline double interim_expected_utility(const AllocationRule& rule,
                                       std::span<const Distribution> priors,
                                       std::span<const double> opponent_reports,
                                       std::size_t player,
                                       std::span<const double> kappa = {},
                                       std::span<const std::size_t> order = {},
                                       double tol = 1e-11) {
  const std::size_t n = priors.size();
  if (opponent_reports.size() != n) {
    throw std::invalid_argument("interim: report vector must have one slot per player");
  }
  const Distribution& d = priors[player];
  TuScratch sc;
  GammaMatrix gamma;
  std::vector<double> y;
  std::vector<double> reports(opponent_reports.begin(), opponent_reports.end());
  std::vector<std::optional<double>> all(n);
  const std::vector<double> base = anticipations(rule, priors, tol, &sc.alloc);

  auto value_of = [&](double v) {
    reports[player] = v;
    externality_matrix_into(gamma, rule, priors, reports, order, tol, &base, &sc);
    payments_from_externalities_into(y, gamma, kappa);
    for (std::size_t j = 0; j < n; ++j) all[j] = reports[j];
    const double alloc = anticipated_payoff(rule, priors, all, player, tol, &sc.alloc);
    return alloc + y[player];
  };

  // Breakpoints: quantile levels where the win regions against any opponent's
  // fixed score or support edge change shape.
  std::vector<double> bp = d.quantile_breakpoints();
  auto add_value_break = [&](double v) {
    const double lo = d.support_lo(), hi = d.support_hi();
    if (v > lo && v < hi) {
      bp.push_back(d.cdf_left(v));
      bp.push_back(d.cdf(v));
    }
  };
  if (const auto* ls = std::get_if<LinearScaled>(&rule)) {
    const double ci = ls->coeffs[player];
    if (ci > 0.0) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == player) continue;
        add_value_break(ls->coeffs[j] * opponent_reports[j] / ci);
        for (double vb : priors[j].value_breakpoints()) {
          add_value_break(ls->coeffs[j] * vb / ci);
        }
      }
    }
  } else if (const auto* qp = std::get_if<QuantilePower>(&rule)) {
    const double ai = qp->alphas[player];
    if (ai > 0.0) {
      for (std::size_t j = 0; j < n; ++j) {
        if (j == player) continue;
        const double aj = qp->alphas[j];
        if (aj <= 0.0) continue;
        for (double lvl : {priors[j].cdf_left(opponent_reports[j]),
                           priors[j].cdf(opponent_reports[j])}) {
          // opponent score lvl^(1/aj); our u crosses it at (lvl^(1/aj))^ai
          if (lvl > 0.0 && lvl < 1.0) bp.push_back(std::pow(lvl, ai / aj));
        }
      }
    }
  }
  return integrate_with_breakpoints(
      [&](double u) { return value_of(d.quantile(u)); }, 0.0, 1.0, bp, tol);
}

struct InterimReport {
  double min_value = 0.0;
  double max_value = 0.0;
  double spread = 0.0;
  std::vector<double> values;  // one per opponent grid combination
};

// Sweeps every opponent over an evenly spaced grid across their support hull
// (degenerate priors contribute a single point) and reports the interim
// utility extremes. A tiny spread certifies that opponents cannot move
// player i's truthful expected utility.
inline InterimReport interim_utility_verify(const AllocationRule& rule,
                                            std::span<const Distribution> priors,
                                            std::size_t player,
                                            std::span<const double> kappa = {},
                                            int grid_points = 21,
                                            std::span<const std::size_t> order = {},
                                            double tol = 1e-11) {
  const std::size_t n = priors.size();
  if (grid_points < 1) throw std::invalid_argument("interim: grid_points < 1");
  std::vector<std::vector<double>> grids(n);
  for (std::size_t j = 0; j < n; ++j) {
    if (j == player) continue;
    const double lo = priors[j].support_lo(), hi = priors[j].support_hi();
    if (lo == hi || grid_points == 1) {
      grids[j] = {0.5 * (lo + hi)};
    } else {
      for (int g = 0; g < grid_points; ++g) {
        grids[j].push_back(lo + (hi - lo) * g / (grid_points - 1.0));
      }
    }
  }
  InterimReport rep;
  std::vector<double> reports(n, 0.0);
  std::vector<std::size_t> idx(n, 0);
  bool first = true;
  while (true) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != player) reports[j] = grids[j][idx[j]];
    }
    const double u = interim_expected_utility(rule, priors, reports, player,
                                              kappa, order, tol);
    rep.values.push_back(u);
    if (first || u < rep.min_value) rep.min_value = u;
    if (first || u > rep.max_value) rep.max_value = u;
    first = false;
    std::size_t c = 0;
    while (c < n && (c == player || ++idx[c] == grids[c].size())) {
      if (c != player) idx[c] = 0;
      ++c;
    }
    if (c == n) break;
  }
  rep.spread = rep.max_value - rep.min_value;
  return rep;
}

}  // namespace gum
