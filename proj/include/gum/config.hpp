#pragma once

#include <cctype>
#include <cstdlib>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "gum/distribution.hpp"
#include "gum/sim.hpp"

namespace gum {

// One problem found in a config file. `code` is machine-checkable; `line` is
// 1-based (0 for whole-file problems).
struct Diagnostic {
  std::string code;
  int line = 0;
  std::string message;
};

class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(std::vector<Diagnostic> diags)
      : std::runtime_error(format(diags)), diags_(std::move(diags)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diags_; }

 private:
  static std::string format(const std::vector<Diagnostic>& ds) {
    std::ostringstream os;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (i) os << "\n";
      os << "line " << ds[i].line << ": " << ds[i].code << ": " << ds[i].message;
    }
    return os.str();
  }

  std::vector<Diagnostic> diags_;
};

namespace detail_cfg {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) {
    s.remove_prefix(1);
  }
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    if (pos == std::string_view::npos) {
      out.push_back(s);
      return out;
    }
    out.push_back(s.substr(0, pos));
    s.remove_prefix(pos + 1);
  }
}

// Plain double or a fraction "a/b". The whole token must be consumed.
inline bool parse_number(std::string_view s, double& out) {
  s = trim(s);
  if (s.empty()) return false;
  const auto slash = s.find('/');
  if (slash != std::string_view::npos) {
    double a, b;
    if (!parse_number(s.substr(0, slash), a) || !parse_number(s.substr(slash + 1), b) ||
        b == 0.0) {
      return false;
    }
    out = a / b;
    return true;
  }
  std::string buf(s);
  char* end = nullptr;
  out = std::strtod(buf.c_str(), &end);
  return end == buf.c_str() + buf.size();
}

inline bool parse_integer(std::string_view s, long long& out) {
  s = trim(s);
  if (s.empty()) return false;
  std::string buf(s);
  char* end = nullptr;
  out = std::strtoll(buf.c_str(), &end, 10);
  return end == buf.c_str() + buf.size();
}

inline bool parse_number_list(std::string_view s, std::vector<double>& out) {
  out.clear();
  for (auto tok : split(s, ',')) {
    double v;
    if (!parse_number(tok, v)) return false;
    out.push_back(v);
  }
  return true;
}

inline std::string join_numbers(const std::vector<double>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) s += ",";
    s += detail::shortest_repr(xs[i]);
  }
  return s;
}

}  // namespace detail_cfg

// Parses the flat key/value experiment format:
//
//   # comment
//   mechanism = tu            tu | ntu
//   T = 10000                 rounds per replication
//   reps = 1000
//   seed = 12345
//   tol = 1e-10
//   budgets = definition      definition | example   (ntu budget sizing)
//   balance = constants       constants | strict     (tu constant handling)
//   rule = argmax             argmax | scaled:c,... | quantile[:a,...] | top:l[:a,...]
//   constants = 0,1/4,0       optional per-player constants
//   order = 1,2,3             optional 1-based reveal order
//   grid = 33                 adversary grid resolution
//   stride = 100              rep-0 ledger recording interval
//   player weight=1/3 prior=uniform:2,14 strategy=truthful [sour=1] [sens=14]
//
// Numbers accept fractions a/b. Strategies: truthful | constant:v | scaled:c
// | adversary:k (1-based target). `argmax` is scaled with all-one
// coefficients; bare `quantile` and `top` take the player weights as their
// exponents. Later duplicate keys win. All diagnostics are collected before
// throwing, each with its code and line.
inline ExperimentConfig parse_config(std::string_view text) {
  using namespace detail_cfg;
  ExperimentConfig cfg;
  std::vector<Diagnostic> diags;
  auto fail = [&](std::string code, int line, std::string msg) {
    diags.push_back({std::move(code), line, std::move(msg)});
  };

  std::string rule_spec = "argmax";
  int rule_line = 0;
  bool have_order = false;
  std::vector<double> order_raw;
  int order_line = 0;
  long long grid = 33;
  std::vector<std::pair<std::size_t, int>> adversary_targets;  // (player, line)

  int lineno = 0;
  for (auto raw : split(text, '\n')) {
    ++lineno;
    auto hash = raw.find('#');
    if (hash != std::string_view::npos) raw = raw.substr(0, hash);
    const auto line = trim(raw);
    if (line.empty()) continue;

    if (line.substr(0, 6) == "player" &&
        (line.size() == 6 || std::isspace(static_cast<unsigned char>(line[6])))) {
      PlayerSpec pl;
      bool have_prior = false;
      std::istringstream toks{std::string(line.substr(6))};
      std::string tok;
      bool ok = true;
      while (toks >> tok) {
        const auto eq = tok.find('=');
        if (eq == std::string::npos) {
          fail("BAD_VALUE", lineno, "player token '" + tok + "' is not key=value");
          ok = false;
          continue;
        }
        const std::string key = tok.substr(0, eq);
        const std::string val = tok.substr(eq + 1);
        if (key == "weight") {
          if (!parse_number(val, pl.weight) || pl.weight < 0.0) {
            fail("BAD_VALUE", lineno, "weight '" + val + "' is not a nonnegative number");
            ok = false;
          }
        } else if (key == "prior") {
          try {
            pl.prior = Distribution::parse(val);
            have_prior = true;
          } catch (const std::invalid_argument& e) {
            fail("BAD_DISTRIBUTION", lineno, std::string(e.what()));
            ok = false;
          }
        } else if (key == "strategy") {
          if (val == "truthful") {
            pl.strategy = Truthful{};
          } else if (val.rfind("constant:", 0) == 0) {
            Constant c;
            if (!parse_number(val.substr(9), c.v)) {
              fail("BAD_STRATEGY", lineno, "constant needs a numeric report");
              ok = false;
            }
            pl.strategy = c;
          } else if (val.rfind("scaled:", 0) == 0) {
            Scaled s;
            if (!parse_number(val.substr(7), s.c)) {
              fail("BAD_STRATEGY", lineno, "scaled needs a numeric factor");
              ok = false;
            }
            pl.strategy = s;
          } else if (val.rfind("adversary:", 0) == 0) {
            long long k;
            if (!parse_integer(val.substr(10), k) || k < 1) {
              fail("BAD_STRATEGY", lineno, "adversary needs a 1-based target index");
              ok = false;
            } else {
              pl.strategy = AdversaryVs{static_cast<std::size_t>(k - 1), 33};
              adversary_targets.emplace_back(cfg.players.size(), lineno);
            }
          } else {
            fail("BAD_STRATEGY", lineno, "unknown strategy '" + val + "'");
            ok = false;
          }
        } else if (key == "sour") {
          double v;
          if (!parse_number(val, v) || v < 0.0) {
            fail("BAD_VALUE", lineno, "sour '" + val + "' is not a nonnegative number");
            ok = false;
          } else {
            pl.sour = v;
          }
        } else if (key == "sens") {
          double v;
          if (!parse_number(val, v) || v < 0.0) {
            fail("BAD_VALUE", lineno, "sens '" + val + "' is not a nonnegative number");
            ok = false;
          } else {
            pl.sens = v;
          }
        } else {
          fail("UNKNOWN_KEY", lineno, "unknown player key '" + key + "'");
          ok = false;
        }
      }
      if (ok && !have_prior) {
        fail("BAD_DISTRIBUTION", lineno, "player needs a prior");
        ok = false;
      }
      if (ok) cfg.players.push_back(std::move(pl));
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      fail("BAD_VALUE", lineno, "expected 'key = value'");
      continue;
    }
    const std::string key{trim(line.substr(0, eq))};
    const std::string val{trim(line.substr(eq + 1))};
    if (key == "mechanism") {
      if (val == "tu") {
        cfg.mechanism = MechanismKind::kTu;
      } else if (val == "ntu") {
        cfg.mechanism = MechanismKind::kNtu;
      } else {
        fail("BAD_MECHANISM", lineno, "mechanism must be tu or ntu, got '" + val + "'");
      }
    } else if (key == "T") {
      long long t;
      if (!parse_integer(val, t) || t < 1) {
        fail("BAD_VALUE", lineno, "T must be a positive integer");
      } else {
        cfg.periods = t;
      }
    } else if (key == "reps") {
      long long r;
      if (!parse_integer(val, r) || r < 1 || r > 100000000) {
        fail("BAD_VALUE", lineno, "reps must be a positive integer");
      } else {
        cfg.reps = static_cast<int>(r);
      }
    } else if (key == "seed") {
      long long s;
      if (!parse_integer(val, s) || s < 0) {
        fail("BAD_VALUE", lineno, "seed must be a nonnegative integer");
      } else {
        cfg.seed = static_cast<std::uint64_t>(s);
      }
    } else if (key == "tol") {
      double t;
      if (!parse_number(val, t) || !(t > 0.0)) {
        fail("BAD_VALUE", lineno, "tol must be positive");
      } else {
        cfg.tol = t;
      }
    } else if (key == "budgets") {
      if (val == "definition") {
        cfg.budgets = BudgetMode::kDefinition;
      } else if (val == "example") {
        cfg.budgets = BudgetMode::kExample;
      } else {
        fail("BAD_VALUE", lineno, "budgets must be definition or example");
      }
    } else if (key == "balance") {
      if (val == "constants") {
        cfg.balance = Balance::kConstantsOnly;
      } else if (val == "strict") {
        cfg.balance = Balance::kStrict;
      } else {
        fail("BAD_VALUE", lineno, "balance must be constants or strict");
      }
    } else if (key == "rule") {
      rule_spec = val;
      rule_line = lineno;
    } else if (key == "constants") {
      if (!parse_number_list(val, cfg.constants)) {
        fail("BAD_VALUE", lineno, "constants must be a comma list of numbers");
      }
    } else if (key == "order") {
      if (!parse_number_list(val, order_raw)) {
        fail("BAD_ORDER", lineno, "order must be a comma list of 1-based indices");
      } else {
        have_order = true;
        order_line = lineno;
      }
    } else if (key == "grid") {
      long long g;
      if (!parse_integer(val, g) || g < 2) {
        fail("BAD_VALUE", lineno, "grid must be an integer >= 2");
      } else {
        grid = g;
      }
    } else if (key == "stride") {
      long long s;
      if (!parse_integer(val, s) || s < 0) {
        fail("BAD_VALUE", lineno, "stride must be a nonnegative integer");
      } else {
        cfg.trajectory_stride = static_cast<int>(s);
      }
    } else {
      fail("UNKNOWN_KEY", lineno, "unknown key '" + key + "'");
    }
  }

  const std::size_t n = cfg.players.size();
  if (n == 0) {
    fail("NO_PLAYERS", 0, "config declares no players");
  }
  double wsum = 0.0;
  for (const auto& pl : cfg.players) wsum += pl.weight;
  if (wsum > 1.0 + 1e-9) {
    fail("WEIGHT_SUM", 0,
         "weights sum to " + detail::shortest_repr(wsum) + ", must be <= 1");
  }
  for (auto [idx, ln] : adversary_targets) {
    auto& adv = std::get<AdversaryVs>(cfg.players[idx].strategy);
    adv.grid = static_cast<int>(grid);
    if (adv.target >= n) {
      fail("BAD_STRATEGY", ln, "adversary target is out of range");
    }
  }
  if (have_order) {
    cfg.order.clear();
    std::vector<bool> seen(n, false);
    bool ok = order_raw.size() == n;
    for (double x : order_raw) {
      const long long k = static_cast<long long>(x);
      if (!ok || static_cast<double>(k) != x || k < 1 || k > static_cast<long long>(n) ||
          seen[static_cast<std::size_t>(k - 1)]) {
        ok = false;
        break;
      }
      seen[static_cast<std::size_t>(k - 1)] = true;
      cfg.order.push_back(static_cast<std::size_t>(k - 1));
    }
    if (!ok) {
      fail("BAD_ORDER", order_line, "order must be a permutation of 1.." +
                                        std::to_string(n));
      cfg.order.clear();
    }
  }
  if (!cfg.constants.empty() && cfg.constants.size() != n) {
    fail("BAD_VALUE", 0, "constants must list one value per player");
  }

  // The rule can only be materialized once the player count is known.
  if (n > 0) {
    using detail_cfg::parse_number_list;
    std::vector<double> weights;
    for (const auto& pl : cfg.players) weights.push_back(pl.weight);
    std::vector<double> xs;
    if (rule_spec == "argmax") {
      cfg.rule = LinearScaled{std::vector<double>(n, 1.0)};
    } else if (rule_spec.rfind("scaled:", 0) == 0) {
      if (!parse_number_list(rule_spec.substr(7), xs) || xs.size() != n) {
        fail("BAD_RULE", rule_line, "scaled rule needs one coefficient per player");
      } else {
        cfg.rule = LinearScaled{xs};
      }
    } else if (rule_spec == "quantile") {
      cfg.rule = QuantilePower{weights};
    } else if (rule_spec.rfind("quantile:", 0) == 0) {
      if (!parse_number_list(rule_spec.substr(9), xs) || xs.size() != n) {
        fail("BAD_RULE", rule_line, "quantile rule needs one exponent per player");
      } else {
        cfg.rule = QuantilePower{xs};
      }
    } else if (rule_spec.rfind("top:", 0) == 0) {
      const auto parts = detail_cfg::split(rule_spec, ':');
      long long ell = 0;
      if (parts.size() < 2 || parts.size() > 3 || !parse_integer(parts[1], ell) ||
          ell < 1) {
        fail("BAD_RULE", rule_line, "top rule needs a positive good count");
      } else if (parts.size() == 3) {
        if (!parse_number_list(parts[2], xs) || xs.size() != n) {
          fail("BAD_RULE", rule_line, "top rule needs one exponent per player");
        } else {
          cfg.rule = TopL{static_cast<int>(ell), xs};
        }
      } else {
        cfg.rule = TopL{static_cast<int>(ell), weights};
      }
    } else {
      fail("BAD_RULE", rule_line, "unknown rule '" + rule_spec + "'");
    }
    try {
      if (rule_players(cfg.rule) == n) validate_rule(cfg.rule);
    } catch (const std::invalid_argument& e) {
      fail("BAD_RULE", rule_line, e.what());
    }
  }

  if (!diags.empty()) throw ConfigError(std::move(diags));
  return cfg;
}

// Canonical text for a config; parse_config(serialize_config(c)) == c.
// Adversary grid resolutions are stored in the shared `grid` key, so mixed
// resolutions across adversary seats cannot be expressed (the runner rejects
// them anyway).
inline std::string serialize_config(const ExperimentConfig& cfg) {
  using detail_cfg::join_numbers;
  std::ostringstream os;
  os << "mechanism = " << (cfg.mechanism == MechanismKind::kTu ? "tu" : "ntu") << "\n";
  os << "T = " << cfg.periods << "\n";
  os << "reps = " << cfg.reps << "\n";
  os << "seed = " << cfg.seed << "\n";
  os << "tol = " << detail::shortest_repr(cfg.tol) << "\n";
  os << "budgets = "
     << (cfg.budgets == BudgetMode::kDefinition ? "definition" : "example") << "\n";
  os << "balance = "
     << (cfg.balance == Balance::kConstantsOnly ? "constants" : "strict") << "\n";
  if (const auto* ls = std::get_if<LinearScaled>(&cfg.rule)) {
    os << "rule = scaled:" << join_numbers(ls->coeffs) << "\n";
  } else if (const auto* qp = std::get_if<QuantilePower>(&cfg.rule)) {
    os << "rule = quantile:" << join_numbers(qp->alphas) << "\n";
  } else if (const auto* top = std::get_if<TopL>(&cfg.rule)) {
    os << "rule = top:" << top->goods << ":" << join_numbers(top->alphas) << "\n";
  }
  if (!cfg.constants.empty()) {
    os << "constants = " << join_numbers(cfg.constants) << "\n";
  }
  if (!cfg.order.empty()) {
    os << "order = ";
    for (std::size_t i = 0; i < cfg.order.size(); ++i) {
      if (i) os << ",";
      os << cfg.order[i] + 1;
    }
    os << "\n";
  }
  for (const auto& pl : cfg.players) {
    if (const auto* adv = std::get_if<AdversaryVs>(&pl.strategy)) {
      os << "grid = " << adv->grid << "\n";
      break;
    }
  }
  if (cfg.trajectory_stride > 0) os << "stride = " << cfg.trajectory_stride << "\n";
  for (const auto& pl : cfg.players) {
    os << "player weight=" << detail::shortest_repr(pl.weight)
       << " prior=" << pl.prior.to_string() << " strategy=";
    if (std::holds_alternative<Truthful>(pl.strategy)) {
      os << "truthful";
    } else if (const auto* con = std::get_if<Constant>(&pl.strategy)) {
      os << "constant:" << detail::shortest_repr(con->v);
    } else if (const auto* s = std::get_if<Scaled>(&pl.strategy)) {
      os << "scaled:" << detail::shortest_repr(s->c);
    } else if (const auto* adv = std::get_if<AdversaryVs>(&pl.strategy)) {
      os << "adversary:" << adv->target + 1;
    }
    if (pl.sour) os << " sour=" << detail::shortest_repr(*pl.sour);
    if (pl.sens) os << " sens=" << detail::shortest_repr(*pl.sens);
    os << "\n";
  }
  return os.str();
}

}  // namespace gum
