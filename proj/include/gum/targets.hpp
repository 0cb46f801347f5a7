#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "gum/distribution.hpp"
#include "gum/lp.hpp"
#include "gum/quadrature.hpp"

namespace gum::targets {

// Equal share of the best outcome among n exchangeable players:
// E[max of n i.i.d. draws] / n. Closed form per family.
inline double fair_floor(const Distribution& d, int n) {
  if (n < 1) throw std::invalid_argument("fair_floor: n must be >= 1");
  return expected_max_iid(d, n) / static_cast<double>(n);
}

// Same quantity by direct quantile-axis quadrature (independent route, used to
// cross-check the closed forms): E[max_n]/n = (1/n) int_0^1 q(u^(1/n)) du.
inline double fair_floor_by_quadrature(const Distribution& d, int n,
                                       double tol = 1e-11) {
  if (n < 1) throw std::invalid_argument("fair_floor: n must be >= 1");
  std::vector<double> bp = d.quantile_breakpoints();
  for (auto& u : bp) u = detail::ipow(u, n);
  const double nn = n;
  return integrate_with_breakpoints(
             [&](double u) { return d.quantile(std::pow(u, 1.0 / nn)); }, 0.0,
             1.0, bp, tol) /
         nn;
}

// Per-round utility a weight-alpha player can be guaranteed under the
// quantile-power allocation rule:
//
//   int_0^1 quantile(D, x) x^(1/alpha - 1) dx  =  alpha int_0^1 quantile(D, t^alpha) dt
//
// (substitute x = t^alpha; the right form has a bounded integrand for every
// alpha in (0,1], which is what the quadrature path evaluates). Closed forms
// for the uniform/point/binary/discrete families. By construction
// n * per_round_target(1/n, D) = E[max of n i.i.d. D].
inline double per_round_target(double alpha, const Distribution& d,
                               double tol = 1e-11) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw std::invalid_argument("per_round_target: weight outside [0,1]");
  }
  if (alpha == 0.0) return 0.0;
  using U = Distribution;
  return d.raw_visit([&](const auto& v) -> double {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, U::Uniform>) {
      return alpha * (v.lo + (v.hi - v.lo) / (1.0 + alpha));
    } else if constexpr (std::is_same_v<T, U::PointMass>) {
      return alpha * v.v;
    } else if constexpr (std::is_same_v<T, U::Binary>) {
      const double miss = std::pow(1.0 - v.p, 1.0 / alpha);
      return alpha * (v.lo * miss + v.hi * (1.0 - miss));
    } else if constexpr (std::is_same_v<T, U::Discrete>) {
      double s = 0.0, prev = 0.0;
      for (std::size_t i = 0; i < v.values.size(); ++i) {
        const double c = std::pow(v.cum[i], 1.0 / alpha);
        s += v.values[i] * (c - prev);
        prev = c;
      }
      return alpha * s;
    } else {
      std::vector<double> bp = d.quantile_breakpoints();
      for (auto& u : bp) u = std::pow(u, 1.0 / alpha);
      return alpha * integrate_with_breakpoints(
                         [&](double t) {
                           return d.quantile(std::pow(t, alpha));
                         },
                         0.0, 1.0, bp, tol / std::max(alpha, 0.1));
    }
  });
}

// Total guaranteed utility over `periods` i.i.d. rounds.
inline double total_target(double alpha, const Distribution& d, double periods) {
  if (periods < 0.0) throw std::invalid_argument("total_target: negative horizon");
  return periods * per_round_target(alpha, d);
}

// ---------------------------------------------------------------------------
// Single-round feasibility of a target utility vector without transfers.
// ---------------------------------------------------------------------------

struct FeasibilityPlayer {
  double alpha;  // carried for provenance; the verdict depends on priors+targets
  Distribution prior;
};

// One allocation policy in the certifying mixture: give the good to
// argmax_i direction[i] * v_i (ties split evenly). The all-zero direction
// withholds the good.
struct MixtureComponent {
  std::vector<double> direction;
  double share;
  std::vector<double> utilities;  // expected utility vector of this policy
};

struct FeasibilityResult {
  bool feasible = false;
  std::vector<MixtureComponent> mixture;  // nonempty iff feasible
  std::vector<double> achieved;           // utility vector of the mixture
  std::vector<double> certificate;        // separating direction iff infeasible
  double margin = 0.0;        // min over directions of E[max_i w_i V_i] - <w, targets>
  double slack = 0.0;         // best uniform slack of the mixture LP
  double discretization_error = 0.0;  // max within-bucket value spread
};

namespace detail_feas {

struct Atoms {
  std::vector<double> value;
  std::vector<double> prob;
  double spread = 0.0;  // max within-bucket value range
};

// True iff the quantile function is a finite step function (so the
// discretization below is exact). Splitting preserves this.
inline bool is_atomic(const Distribution& d) {
  using U = Distribution;
  return d.raw_visit([](const auto& v) -> bool {
    using T = std::decay_t<decltype(v)>;
    if constexpr (std::is_same_v<T, U::Uniform>) {
      return v.lo == v.hi;
    } else if constexpr (std::is_same_v<T, U::Split>) {
      return is_atomic(*v.base);
    } else {
      return true;
    }
  });
}

inline Atoms bucketize(const Distribution& d, int buckets) {
  Atoms a;
  const auto qb = d.quantile_breakpoints();
  if (is_atomic(d) && static_cast<int>(qb.size()) < buckets) {
    // Finitely many atoms: one bucket per quantile step, exact.
    double prev = 0.0;
    std::vector<double> cuts(qb.begin(), qb.end());
    cuts.push_back(1.0);
    for (double c : cuts) {
      if (c > prev) {
        a.value.push_back(d.quantile(0.5 * (prev + c)));
        a.prob.push_back(c - prev);
        prev = c;
      }
    }
    return a;
  }
  for (int i = 0; i < buckets; ++i) {
    const double u0 = static_cast<double>(i) / buckets;
    const double u1 = static_cast<double>(i + 1) / buckets;
    const double mass = u1 - u0;
    std::vector<double> inner;
    for (double q : qb) {
      if (q > u0 && q < u1) inner.push_back(q);
    }
    const double mean = integrate_with_breakpoints(
                            [&](double u) { return d.quantile(u); }, u0, u1,
                            inner, 1e-12) /
                        mass;
    a.value.push_back(mean);
    a.prob.push_back(mass);
    a.spread = std::max(a.spread, d.quantile(u1) - d.quantile(u0));
  }
  return a;
}

// Expected utility vector of the argmax-by-direction policy over the product
// of discretized priors (exact on the discretization, ties split evenly).
inline std::vector<double> policy_utilities(const std::vector<Atoms>& atoms,
                                            const std::vector<double>& w) {
  const std::size_t n = atoms.size();
  std::vector<double> util(n, 0.0);
  std::vector<std::size_t> idx(n, 0);
  while (true) {
    double p = 1.0, best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p *= atoms[i].prob[idx[i]];
      best = std::max(best, w[i] * atoms[i].value[idx[i]]);
    }
    if (best > 0.0) {
      int ties = 0;
      for (std::size_t i = 0; i < n; ++i) {
        if (w[i] * atoms[i].value[idx[i]] == best) ++ties;
      }
      for (std::size_t i = 0; i < n; ++i) {
        if (w[i] * atoms[i].value[idx[i]] == best) {
          util[i] += p * atoms[i].value[idx[i]] / ties;
        }
      }
    }
    std::size_t c = 0;
    while (c < n && ++idx[c] == atoms[c].value.size()) idx[c++] = 0;
    if (c == n) break;
  }
  return util;
}

inline double support_value(const std::vector<Atoms>& atoms,
                            const std::vector<double>& w) {
  const std::size_t n = atoms.size();
  std::vector<std::size_t> idx(n, 0);
  double h = 0.0;
  while (true) {
    double p = 1.0, best = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      p *= atoms[i].prob[idx[i]];
      best = std::max(best, w[i] * atoms[i].value[idx[i]]);
    }
    h += p * best;
    std::size_t c = 0;
    while (c < n && ++idx[c] == atoms[c].value.size()) idx[c++] = 0;
    if (c == n) break;
  }
  return h;
}

// Directions on the probability simplex: a barycentric grid (all compositions
// of `steps` into n parts). Enough faces for the tiny LPs this feeds.
inline std::vector<std::vector<double>> direction_grid(std::size_t n, int steps) {
  std::vector<std::vector<double>> out;
  std::vector<int> comp(n, 0);
  auto rec = [&](auto&& self, std::size_t pos, int left) -> void {
    if (pos + 1 == n) {
      comp[pos] = left;
      std::vector<double> w(n);
      for (std::size_t i = 0; i < n; ++i) {
        w[i] = static_cast<double>(comp[i]) / steps;
      }
      out.push_back(std::move(w));
      return;
    }
    for (int k = 0; k <= left; ++k) {
      comp[pos] = k;
      self(self, pos + 1, left - k);
    }
  };
  rec(rec, 0, steps);
  return out;
}

}  // namespace detail_feas

// Can some (possibly randomized) single-round allocation give every player at
// least their target in expectation? Continuous priors are discretized to at
// most `buckets` quantile buckets (conditional means); `discretization_error`
// reports the max within-bucket value spread, and verdicts within that error
// of the frontier lean feasible. Feasible results carry an explicit mixture of
// weighted-argmax policies; infeasible ones carry a separating direction w with
// E[max_i w_i V_i] < <w, targets>.
inline FeasibilityResult ntu_feasible_mixture(
    const std::vector<FeasibilityPlayer>& players,
    const std::vector<double>& targets, int buckets = 64) {
  using namespace detail_feas;
  const std::size_t n = players.size();
  if (n == 0 || targets.size() != n) {
    throw std::invalid_argument("ntu_feasible_mixture: bad inputs");
  }
  if (buckets < 1 || buckets > 64) {
    throw std::invalid_argument("ntu_feasible_mixture: buckets must be in [1,64]");
  }
  std::vector<Atoms> atoms;
  FeasibilityResult res;
  for (const auto& p : players) {
    atoms.push_back(bucketize(p.prior, buckets));
    res.discretization_error = std::max(res.discretization_error, atoms.back().spread);
  }

  const int steps = n <= 2 ? 64 : (n == 3 ? 16 : 6);
  auto dirs = direction_grid(n, steps);
  dirs.push_back(std::vector<double>(n, 0.0));  // withhold-the-good policy
  std::vector<std::vector<double>> utils;
  utils.reserve(dirs.size());
  for (const auto& w : dirs) utils.push_back(policy_utilities(atoms, w));

  // LP: maximize slack t with sum_k lambda_k u_k >= targets + t, sum lambda = 1.
  // Columns: lambda (K), t+, t-, surplus s_i.
  const std::size_t K = utils.size();
  std::vector<std::vector<double>> A(n + 1, std::vector<double>(K + 2 + n, 0.0));
  std::vector<double> b(n + 1, 0.0), c(K + 2 + n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t k = 0; k < K; ++k) A[i][k] = utils[k][i];
    A[i][K] = -1.0;      // t+
    A[i][K + 1] = 1.0;   // t-
    A[i][K + 2 + i] = -1.0;
    b[i] = targets[i];
  }
  for (std::size_t k = 0; k < K; ++k) A[n][k] = 1.0;
  b[n] = 1.0;
  c[K] = -1.0;
  c[K + 1] = 1.0;
  const auto lp = gum::detail::solve_lp(A, b, c);
  if (!lp.ok) throw std::runtime_error("ntu_feasible_mixture: LP solve failed");
  res.slack = -lp.objective;

  // Margin check from the dual side: search directions for a separator.
  double margin = 1e300;
  std::vector<double> best_w;
  for (const auto& w : dirs) {
    double sw = 0.0;
    for (double x : w) sw += x;
    if (sw < 1e-12) continue;
    double g = support_value(atoms, w);
    double dot = 0.0;
    for (std::size_t i = 0; i < n; ++i) dot += w[i] * targets[i];
    g = (g - dot) / sw;  // normalize so margins are comparable
    if (g < margin) {
      margin = g;
      best_w = w;
    }
  }
  res.margin = margin;

  const double tol = std::max(1e-9, res.discretization_error);
  if (res.slack >= -tol) {
    res.feasible = true;
    res.achieved.assign(n, 0.0);
    for (std::size_t k = 0; k < K; ++k) {
      if (lp.x[k] > 1e-9) {
        MixtureComponent mc;
        mc.direction = dirs[k];
        mc.share = lp.x[k];
        mc.utilities = utils[k];
        for (std::size_t i = 0; i < n; ++i) {
          res.achieved[i] += lp.x[k] * utils[k][i];
        }
        res.mixture.push_back(std::move(mc));
      }
    }
  } else {
    res.feasible = false;
    res.certificate = best_w;
  }
  return res;
}

}  // namespace gum::targets
