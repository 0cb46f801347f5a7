#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "gum/quadrature.hpp"
#include "gum/rng.hpp"

namespace gum {

namespace detail {

// x^k for integer k >= 0 by repeated multiplication; bitwise deterministic.
inline double ipow(double x, int k) {
  double r = 1.0;
  double b = x;
  for (int e = k; e > 0; e >>= 1) {
    if (e & 1) r *= b;
    b *= b;
  }
  return r;
}

// Shortest decimal representation that parses back to the same double.
inline std::string shortest_repr(double x) {
  char buf[40];
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, x);
    if (std::strtod(buf, nullptr) == x) break;
  }
  return buf;
}

}  // namespace detail

// Value distribution of a single player. Supports are finite with minimum >= 0.
// Four literal families (uniform, point, binary, discrete) plus a lazy
// splitting wrapper: the k-fold split of D is the distribution whose maximum
// over k independent copies is distributed as D, i.e. CDF F^(1/k). Splits of
// point/binary/discrete distributions stay in their family; splits of anything
// else are represented as (base, k) without densification.
class Distribution {
 public:
  struct Uniform {
    double lo, hi;
  };
  struct PointMass {
    double v;
  };
  struct Binary {
    double p, hi, lo;  // value hi with probability p, else lo
  };
  struct Discrete {
    std::vector<double> values;  // strictly ascending
    std::vector<double> probs;   // positive, sums to 1
    std::vector<double> cum;     // running sums, cum.back() == 1
  };
  struct Split {
    std::shared_ptr<const Distribution> base;
    int k;
  };

 private:
  // Constrained so copies and moves never funnel into the variant.
  template <class T,
            class = std::enable_if_t<!std::is_same_v<std::decay_t<T>, Distribution>>>
  explicit Distribution(T&& t) : v_(std::forward<T>(t)) {}

  static void require(bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  }

  // Defined before any use so the deduced return type is available below.
  template <class... Fs>
  decltype(auto) visit(Fs&&... fs) const {
    struct overload : Fs... {
      using Fs::operator()...;
    };
    return std::visit(overload{std::forward<Fs>(fs)...}, v_);
  }

 public:
  // Default is a point mass at 0 so the type can sit in aggregates.
  Distribution() : v_(PointMass{0.0}) {}

  static Distribution uniform(double lo, double hi) {
    require(std::isfinite(lo) && std::isfinite(hi) && lo < hi,
            "uniform: need lo < hi, both finite");
    require(lo >= 0.0, "uniform: support must be nonnegative");
    return Distribution(Uniform{lo, hi});
  }

  static Distribution point(double v) {
    require(std::isfinite(v) && v >= 0.0, "point: need finite value >= 0");
    return Distribution(PointMass{v});
  }

  static Distribution binary(double p, double hi, double lo = 0.0) {
    require(p >= 0.0 && p <= 1.0, "binary: probability outside [0,1]");
    require(std::isfinite(hi) && std::isfinite(lo) && lo < hi,
            "binary: need lo < hi, both finite");
    require(lo >= 0.0, "binary: support must be nonnegative");
    return Distribution(Binary{p, hi, lo});
  }

  static Distribution discrete(std::vector<std::pair<double, double>> atoms) {
    require(!atoms.empty(), "discrete: no atoms");
    std::sort(atoms.begin(), atoms.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    Discrete d;
    double total = 0.0;
    for (std::size_t i = 0; i < atoms.size(); ++i) {
      auto [v, p] = atoms[i];
      require(std::isfinite(v) && v >= 0.0, "discrete: need finite values >= 0");
      require(p > 0.0 && p <= 1.0, "discrete: atom probability outside (0,1]");
      require(i == 0 || v > atoms[i - 1].first,
              "discrete: values must be strictly ascending");
      d.values.push_back(v);
      d.probs.push_back(p);
      total += p;
    }
    require(std::abs(total - 1.0) <= 1e-9, "discrete: probabilities must sum to 1");
    double run = 0.0;
    for (auto& p : d.probs) {
      p /= total;
      run += p;
      d.cum.push_back(run);
    }
    d.cum.back() = 1.0;
    return Distribution(std::move(d));
  }

  // ----- support -----

  double support_lo() const {
    return visit([](const Uniform& u) { return u.lo; },
                 [](const PointMass& p) { return p.v; },
                 [](const Binary& b) { return b.p >= 1.0 ? b.hi : b.lo; },
                 [](const Discrete& d) { return d.values.front(); },
                 [](const Split& s) { return s.base->support_lo(); });
  }

  double support_hi() const {
    return visit([](const Uniform& u) { return u.hi; },
                 [](const PointMass& p) { return p.v; },
                 [](const Binary& b) { return b.p <= 0.0 ? b.lo : b.hi; },
                 [](const Discrete& d) { return d.values.back(); },
                 [](const Split& s) { return s.base->support_hi(); });
  }

  bool is_degenerate() const { return support_lo() == support_hi(); }

  // ----- CDF and quantile -----

  // F(x) = P(V <= x)
  double cdf(double x) const {
    return visit(
        [&](const Uniform& u) {
          return std::clamp((x - u.lo) / (u.hi - u.lo), 0.0, 1.0);
        },
        [&](const PointMass& p) { return x >= p.v ? 1.0 : 0.0; },
        [&](const Binary& b) {
          if (x < b.lo) return 0.0;
          if (x < b.hi) return 1.0 - b.p;
          return 1.0;
        },
        [&](const Discrete& d) {
          auto it = std::upper_bound(d.values.begin(), d.values.end(), x);
          if (it == d.values.begin()) return 0.0;
          return d.cum[static_cast<std::size_t>(it - d.values.begin()) - 1];
        },
        [&](const Split& s) {
          return std::pow(s.base->cdf(x), 1.0 / static_cast<double>(s.k));
        });
  }

  // F(x-) = P(V < x)
  double cdf_left(double x) const {
    return visit(
        [&](const Uniform& u) {
          return std::clamp((x - u.lo) / (u.hi - u.lo), 0.0, 1.0);
        },
        [&](const PointMass& p) { return x > p.v ? 1.0 : 0.0; },
        [&](const Binary& b) {
          if (x <= b.lo) return 0.0;
          if (x <= b.hi) return 1.0 - b.p;
          return 1.0;
        },
        [&](const Discrete& d) {
          auto it = std::lower_bound(d.values.begin(), d.values.end(), x);
          if (it == d.values.begin()) return 0.0;
          return d.cum[static_cast<std::size_t>(it - d.values.begin()) - 1];
        },
        [&](const Split& s) {
          return std::pow(s.base->cdf_left(x), 1.0 / static_cast<double>(s.k));
        });
  }

  // Generalized inverse CDF, q(u) = inf{x : F(x) >= u}, with q(0) = support_lo.
  double quantile(double u) const {
    u = std::clamp(u, 0.0, 1.0);
    return visit(
        [&](const Uniform& un) { return un.lo + u * (un.hi - un.lo); },
        [&](const PointMass& p) { return p.v; },
        [&](const Binary& b) { return u <= 1.0 - b.p ? b.lo : b.hi; },
        [&](const Discrete& d) {
          auto it = std::lower_bound(d.cum.begin(), d.cum.end(), u);
          if (it == d.cum.end()) return d.values.back();
          return d.values[static_cast<std::size_t>(it - d.cum.begin())];
        },
        [&](const Split& s) {
          return s.base->quantile(detail::ipow(u, s.k));
        });
  }

  // Smoothed CDF draw: maps v to a point of [F(v-), F(v)], uniformly randomized
  // across an atom's jump, so that smoothed_cdf_sample(sample()) ~ Uniform(0,1).
  // v outside the support interval is rejected.
  double smoothed_cdf_sample(double v, Rng& rng) const {
    if (!(v >= support_lo() && v <= support_hi())) {
      throw std::domain_error("smoothed_cdf_sample: value outside support");
    }
    const double l = cdf_left(v), r = cdf(v);
    return l == r ? l : l + (r - l) * rng.uniform01();
  }

  double sample(Rng& rng) const { return quantile(rng.uniform01()); }

  // ----- moments -----

  double expectation() const {
    return visit(
        [](const Uniform& u) { return 0.5 * (u.lo + u.hi); },
        [](const PointMass& p) { return p.v; },
        [](const Binary& b) { return b.lo + b.p * (b.hi - b.lo); },
        [](const Discrete& d) {
          double s = 0.0;
          for (std::size_t i = 0; i < d.values.size(); ++i)
            s += d.values[i] * d.probs[i];
          return s;
        },
        [&](const Split&) {
          const auto bp = quantile_breakpoints();
          return integrate_with_breakpoints(
              [&](double u) { return quantile(u); }, 0.0, 1.0, bp, 1e-11);
        });
  }

  // ----- transforms -----

  // Pushforward under multiplication by c >= 0.
  Distribution scaled(double c) const {
    require(std::isfinite(c) && c >= 0.0, "scale: factor must be >= 0");
    if (c == 0.0) return point(0.0);
    return visit(
        [&](const Uniform& u) { return uniform(c * u.lo, c * u.hi); },
        [&](const PointMass& p) { return point(c * p.v); },
        [&](const Binary& b) { return binary(b.p, c * b.hi, c * b.lo); },
        [&](const Discrete& d) {
          std::vector<std::pair<double, double>> atoms;
          for (std::size_t i = 0; i < d.values.size(); ++i)
            atoms.emplace_back(c * d.values[i], d.probs[i]);
          return discrete(std::move(atoms));
        },
        [&](const Split& s) {
          Distribution r(Split{
              std::make_shared<Distribution>(s.base->scaled(c)), s.k});
          return r;
        });
  }

  // Interior quantile levels where q jumps (atom boundaries). Integrands of the
  // form u -> g(quantile(u)) are smooth between consecutive levels.
  std::vector<double> quantile_breakpoints() const {
    return visit(
        [](const Uniform&) { return std::vector<double>{}; },
        [](const PointMass&) { return std::vector<double>{}; },
        [](const Binary& b) { return std::vector<double>{1.0 - b.p}; },
        [](const Discrete& d) {
          std::vector<double> v(d.cum.begin(), d.cum.end() - 1);
          return v;
        },
        [](const Split& s) {
          std::vector<double> v = s.base->quantile_breakpoints();
          for (auto& u : v) u = std::pow(u, 1.0 / static_cast<double>(s.k));
          return v;
        });
  }

  // Support endpoints and atom locations; the CDF is smooth between them.
  std::vector<double> value_breakpoints() const {
    return visit(
        [](const Uniform& u) { return std::vector<double>{u.lo, u.hi}; },
        [](const PointMass& p) { return std::vector<double>{p.v}; },
        [](const Binary& b) { return std::vector<double>{b.lo, b.hi}; },
        [](const Discrete& d) { return d.values; },
        [](const Split& s) { return s.base->value_breakpoints(); });
  }

  // ----- literals -----

  // Round-trips with parse(): uniform:lo,hi | point:v | binary:p,hi[,lo] |
  // discrete:v1:p1;v2:p2;... | split:k:<base literal>
  std::string to_string() const {
    using detail::shortest_repr;
    return visit(
        [](const Uniform& u) {
          return "uniform:" + shortest_repr(u.lo) + "," + shortest_repr(u.hi);
        },
        [](const PointMass& p) { return "point:" + shortest_repr(p.v); },
        [](const Binary& b) {
          std::string s = "binary:" + shortest_repr(b.p) + "," + shortest_repr(b.hi);
          if (b.lo != 0.0) s += "," + shortest_repr(b.lo);
          return s;
        },
        [](const Discrete& d) {
          std::string s = "discrete:";
          for (std::size_t i = 0; i < d.values.size(); ++i) {
            if (i) s += ";";
            s += shortest_repr(d.values[i]) + ":" + shortest_repr(d.probs[i]);
          }
          return s;
        },
        [](const Split& s) {
          return "split:" + std::to_string(s.k) + ":" + s.base->to_string();
        });
  }

  static Distribution parse(std::string_view text);

  bool operator==(const Distribution& o) const {
    if (v_.index() != o.v_.index()) return false;
    return visit(
        [&](const Uniform& u) {
          const auto& w = std::get<Uniform>(o.v_);
          return u.lo == w.lo && u.hi == w.hi;
        },
        [&](const PointMass& p) { return p.v == std::get<PointMass>(o.v_).v; },
        [&](const Binary& b) {
          const auto& w = std::get<Binary>(o.v_);
          return b.p == w.p && b.hi == w.hi && b.lo == w.lo;
        },
        [&](const Discrete& d) {
          const auto& w = std::get<Discrete>(o.v_);
          return d.values == w.values && d.probs == w.probs;
        },
        [&](const Split& s) {
          const auto& w = std::get<Split>(o.v_);
          return s.k == w.k && *s.base == *w.base;
        });
  }

  template <class V>
  decltype(auto) raw_visit(V&& v) const {
    return std::visit(std::forward<V>(v), v_);
  }

  friend Distribution split(const Distribution& d, int k);

 private:
  std::variant<Uniform, PointMass, Binary, Discrete, Split> v_;
};

// k-fold split: the distribution whose max over k i.i.d. copies is D.
// Closed form (same family) for point/binary/discrete; wrapper otherwise.
inline Distribution split(const Distribution& d, int k) {
  if (k < 1) throw std::invalid_argument("split: k must be >= 1");
  if (k == 1) return d;
  using U = Distribution;
  return d.visit(
      [&](const U::Uniform&) {
        return U(U::Split{std::make_shared<U>(d), k});
      },
      [&](const U::PointMass& p) { return U::point(p.v); },
      [&](const U::Binary& b) {
        return U::binary(1.0 - std::pow(1.0 - b.p, 1.0 / static_cast<double>(k)),
                         b.hi, b.lo);
      },
      [&](const U::Discrete& dd) {
        std::vector<std::pair<double, double>> atoms;
        double prev = 0.0;
        for (std::size_t i = 0; i < dd.values.size(); ++i) {
          const double c = std::pow(dd.cum[i], 1.0 / static_cast<double>(k));
          if (c > prev) atoms.emplace_back(dd.values[i], c - prev);
          prev = c;
        }
        return U::discrete(std::move(atoms));
      },
      [&](const U::Split& s) {
        // Split of a split composes: (F^(1/k1))^(1/k2) = F^(1/(k1 k2)).
        return U(U::Split{s.base, s.k * k});
      });
}

inline Distribution scale(const Distribution& d, double c) { return d.scaled(c); }

inline Distribution Distribution::parse(std::string_view text) {
  auto fail = [&]() -> Distribution {
    throw std::invalid_argument("bad distribution literal: " + std::string(text));
  };
  auto num = [&](std::string_view s) {
    char* end = nullptr;
    std::string tmp(s);
    const double x = std::strtod(tmp.c_str(), &end);
    if (end != tmp.c_str() + tmp.size() || tmp.empty()) fail();
    return x;
  };
  auto split_on = [](std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    while (true) {
      const auto pos = s.find(sep);
      if (pos == std::string_view::npos) {
        parts.push_back(s);
        return parts;
      }
      parts.push_back(s.substr(0, pos));
      s.remove_prefix(pos + 1);
    }
  };

  const auto colon = text.find(':');
  if (colon == std::string_view::npos) fail();
  const std::string_view kind = text.substr(0, colon);
  const std::string_view rest = text.substr(colon + 1);

  if (kind == "uniform") {
    const auto p = split_on(rest, ',');
    if (p.size() != 2) fail();
    return uniform(num(p[0]), num(p[1]));
  }
  if (kind == "point") {
    return point(num(rest));
  }
  if (kind == "binary") {
    const auto p = split_on(rest, ',');
    if (p.size() != 2 && p.size() != 3) fail();
    return binary(num(p[0]), num(p[1]), p.size() == 3 ? num(p[2]) : 0.0);
  }
  if (kind == "discrete") {
    std::vector<std::pair<double, double>> atoms;
    for (const auto part : split_on(rest, ';')) {
      const auto vp = split_on(part, ':');
      if (vp.size() != 2) fail();
      atoms.emplace_back(num(vp[0]), num(vp[1]));
    }
    return discrete(std::move(atoms));
  }
  if (kind == "split") {
    const auto pos = rest.find(':');
    if (pos == std::string_view::npos) fail();
    const double kf = num(rest.substr(0, pos));
    const int k = static_cast<int>(kf);
    if (k < 1 || kf != k) fail();
    return split(parse(rest.substr(pos + 1)), k);
  }
  return fail();
}

// ----- expected maxima -----

// E[max_i V_i] over an independent profile; exact piecewise quadrature of
// 1 - prod_i F_i on the value axis with breakpoints at atoms and endpoints.
inline double expected_max(std::span<const Distribution> profile,
                           double tol = 1e-10) {
  if (profile.empty()) throw std::invalid_argument("expected_max: empty profile");
  double hi = 0.0;
  std::vector<double> bp;
  for (const auto& d : profile) {
    hi = std::max(hi, d.support_hi());
    for (double b : d.value_breakpoints()) bp.push_back(b);
  }
  if (hi == 0.0) return 0.0;
  return integrate_with_breakpoints(
      [&](double x) {
        double f = 1.0;
        for (const auto& d : profile) f *= d.cdf(x);
        return 1.0 - f;
      },
      0.0, hi, bp, tol);
}

// E[max of n i.i.d. copies of d], closed form where the family admits one.
inline double expected_max_iid(const Distribution& d, int n) {
  if (n < 1) throw std::invalid_argument("expected_max_iid: n must be >= 1");
  using U = Distribution;
  const double nn = n;
  return d.raw_visit(
      [&](const auto& v) -> double {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, U::Uniform>) {
          return v.lo + (v.hi - v.lo) * nn / (nn + 1.0);
        } else if constexpr (std::is_same_v<T, U::PointMass>) {
          return v.v;
        } else if constexpr (std::is_same_v<T, U::Binary>) {
          const double miss = std::pow(1.0 - v.p, nn);
          return v.hi * (1.0 - miss) + v.lo * miss;
        } else if constexpr (std::is_same_v<T, U::Discrete>) {
          double s = 0.0, prev = 0.0;
          for (std::size_t i = 0; i < v.values.size(); ++i) {
            const double c = detail::ipow(v.cum[i], n);
            s += v.values[i] * (c - prev);
            prev = c;
          }
          return s;
        } else {
          // Split wrapper: E[max_n] = int_0^1 q(u^(1/n)) du on the quantile axis.
          std::vector<double> bp = d.quantile_breakpoints();
          for (auto& u : bp) u = detail::ipow(u, n);
          return integrate_with_breakpoints(
              [&](double u) {
                return d.quantile(std::pow(u, 1.0 / nn));
              },
              0.0, 1.0, bp, 1e-11);
        }
      });
}

}  // namespace gum
