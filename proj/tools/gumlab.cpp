// gumlab: command-line workbench for the guaranteed-utility mechanisms
// library. Subcommands cover target values, the worked transfer and
// transfer-free examples, the threshold ODE, and the Monte Carlo harness.

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "gum/allocation.hpp"
#include "gum/config.hpp"
#include "gum/distribution.hpp"
#include "gum/ntu.hpp"
#include "gum/poa.hpp"
#include "gum/rng.hpp"
#include "gum/sim.hpp"
#include "gum/stats.hpp"
#include "gum/targets.hpp"
#include "gum/tu.hpp"

namespace {

// Every number the tool prints goes through this: 12 significant digits.
std::string fmt(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", x);
  return buf;
}

double fmt_round(double x) { return std::strtod(fmt(x).c_str(), nullptr); }

std::uint64_t env_seed_or(std::uint64_t fallback) {
  const char* s = std::getenv("GUMLAB_SEED");
  if (!s || !*s) return fallback;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (*end != '\0') {
    throw gum::ConfigError({{"BAD_VALUE", 0, "GUMLAB_SEED is not an integer"}});
  }
  return v;
}

// Precedence: --seed, then the config file's seed, then GUMLAB_SEED, then
// the built-in default.
std::uint64_t resolve_seed(const std::optional<std::uint64_t>& cli_seed,
                           const std::optional<std::uint64_t>& config_seed) {
  if (cli_seed) return *cli_seed;
  if (config_seed) return *config_seed;
  return env_seed_or(12345);
}

struct LoadedConfig {
  gum::ExperimentConfig cfg;
  bool seed_named = false;  // whether the file itself sets a seed
};

LoadedConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw gum::ConfigError({{"NO_FILE", 0, "cannot open config '" + path + "'"}});
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string text = ss.str();
  LoadedConfig lc;
  lc.cfg = gum::parse_config(text);
  for (auto line : gum::detail_cfg::split(text, '\n')) {
    const auto t = gum::detail_cfg::trim(line);
    if (t.rfind("seed", 0) == 0 && t.find('=') != std::string_view::npos) {
      lc.seed_named = true;
      break;
    }
  }
  return lc;
}

// Seed for a config-file command: --seed, then an explicit seed in the file,
// then GUMLAB_SEED, then the parser default already in cfg.
std::uint64_t config_seed(const std::optional<std::uint64_t>& cli_seed,
                          const LoadedConfig& lc) {
  if (cli_seed) return *cli_seed;
  if (lc.seed_named) return lc.cfg.seed;
  return env_seed_or(lc.cfg.seed);
}

// Output sink: file when --out is given, stdout otherwise.
class Out {
 public:
  explicit Out(const std::string& path) {
    if (!path.empty()) {
      file_.open(path);
      if (!file_) throw std::runtime_error("cannot write '" + path + "'");
    }
  }
  std::ostream& stream() { return file_.is_open() ? file_ : std::cout; }

 private:
  std::ofstream file_;
};

// The worked three-player transfer example: equal weights, efficient argmax.
gum::ExperimentConfig tu_example_config() {
  gum::ExperimentConfig cfg;
  cfg.mechanism = gum::MechanismKind::kTu;
  cfg.players = {
      {1.0 / 3.0, gum::Distribution::uniform(2, 14), gum::Truthful{}, {}, {}},
      {1.0 / 3.0, gum::Distribution::uniform(5, 11), gum::Truthful{}, {}, {}},
      {1.0 / 3.0, gum::Distribution::point(8), gum::Truthful{}, {}, {}},
  };
  cfg.rule = gum::LinearScaled{{1.0, 1.0, 1.0}};
  cfg.periods = 1;
  return cfg;
}

// The transfer-free variant: tilted linear rule, example-mode budgets.
gum::ExperimentConfig ntu_example_config() {
  gum::ExperimentConfig cfg = tu_example_config();
  cfg.mechanism = gum::MechanismKind::kNtu;
  cfg.rule = gum::LinearScaled{{0.84, 0.96, 1.0}};
  cfg.budgets = gum::BudgetMode::kExample;
  cfg.periods = 10000;
  return cfg;
}

void cmd_floor(const std::string& dist, int n, const std::string& method) {
  const gum::Distribution d = gum::Distribution::parse(dist);
  const double v = method == "quadrature"
                       ? gum::targets::fair_floor_by_quadrature(d, n)
                       : gum::targets::fair_floor(d, n);
  std::cout << fmt(v) << "\n";
}

void cmd_phi(double alpha, const std::string& dist) {
  std::cout << fmt(gum::targets::per_round_target(
                   alpha, gum::Distribution::parse(dist)))
            << "\n";
}

void cmd_fstar(double alpha, const std::string& dist, long long periods) {
  std::cout << fmt(gum::targets::total_target(
                   alpha, gum::Distribution::parse(dist),
                   static_cast<double>(periods)))
            << "\n";
}

// Region of the worked transfer table that a report profile falls into.
int transfer_case(double v1, double v2) {
  if (v1 >= 11.0) return 5;
  if (v1 > 8.0) return v1 >= v2 ? 3 : 4;
  return v2 <= 8.0 ? 1 : 2;
}

void cmd_tu_example(const std::string& out_path, int sweep) {
  if (sweep < 2) throw std::runtime_error("tu-example: sweep must be >= 2");
  const gum::ExperimentConfig cfg = tu_example_config();
  std::vector<gum::Distribution> priors;
  for (const auto& p : cfg.players) priors.push_back(p.prior);
  Out out(out_path);
  out.stream() << "case,v1,v2,v3,y1,y2,y3\n";
  gum::GammaMatrix gamma;
  std::vector<double> y;
  for (double v2 : {6.5, 9.5}) {
    for (int k = 0; k < sweep; ++k) {
      const double v1 = 2.0 + 12.0 * k / (sweep - 1.0);
      const std::vector<double> reports{v1, v2, 8.0};
      gum::externality_matrix_into(gamma, cfg.rule, priors, reports);
      gum::payments_from_externalities_into(y, gamma);
      out.stream() << transfer_case(v1, v2) << "," << fmt(v1) << "," << fmt(v2)
                   << ",8," << fmt(y[0]) << "," << fmt(y[1]) << "," << fmt(y[2])
                   << "\n";
    }
  }
}

void cmd_tu_verify(const std::string& config_path, int grid, bool strict) {
  gum::ExperimentConfig cfg =
      config_path.empty() ? tu_example_config() : load_config(config_path).cfg;
  cfg.mechanism = gum::MechanismKind::kTu;
  if (strict) cfg.balance = gum::Balance::kStrict;
  const auto prep = gum::detail_sim::prepare(cfg);
  std::cout << "player,constant,min,max,spread\n";
  for (std::size_t i = 0; i < prep.n; ++i) {
    const auto rep = gum::interim_utility_verify(cfg.rule, prep.priors, i,
                                                 prep.kappa, grid, cfg.order);
    std::cout << i + 1 << "," << fmt(prep.base[i] + prep.kappa[i]) << ","
              << fmt(rep.min_value) << "," << fmt(rep.max_value) << ","
              << fmt(rep.spread) << "\n";
  }
}

void cmd_ntu_example(const std::string& out_path) {
  const gum::ExperimentConfig cfg = ntu_example_config();
  std::vector<gum::Distribution> priors;
  for (const auto& p : cfg.players) priors.push_back(p.prior);
  gum::GammaMatrix gamma;

  auto lib_gamma = [&](int i, int j, double v1, double v2) {
    const std::vector<double> reports{v1, v2, 8.0};
    gum::externality_matrix_into(gamma, cfg.rule, priors, reports);
    return gamma[i][j];
  };
  auto linspace = [](double a, double b, int k) {
    std::vector<double> xs;
    for (int t = 0; t < k; ++t) xs.push_back(a + (b - a) * t / (k - 1.0));
    return xs;
  };

  struct Row {
    const char* pair;
    const char* region;
    const char* expression;
    int i, j;
    std::function<double(double, double)> closed;
    std::vector<std::pair<double, double>> points;
  };
  std::vector<Row> rows;
  const auto low1 = linspace(2.0, 9.4, 9);     // 0.84 v1 <= 8
  const auto mid1 = linspace(9.6, 12.5, 9);    // 8 < 0.84 v1 < 10.56
  const auto high1 = linspace(12.63, 14.0, 9); // 0.84 v1 >= 10.56
  auto cross = [](const std::vector<double>& a, const std::vector<double>& b) {
    std::vector<std::pair<double, double>> pts;
    for (double x : a) {
      for (double y : b) pts.emplace_back(x, y);
    }
    return pts;
  };
  const std::vector<double> v2_any{7.0};
  const std::vector<double> v2_low = linspace(5.0, 8.2, 5);
  const std::vector<double> v2_high = linspace(8.5, 11.0, 5);
  const std::vector<double> v2_full = linspace(5.0, 11.0, 5);

  rows.push_back({"1->2", "0.84v1<=8", "5266/5103", 0, 1,
                  [](double, double) { return 5266.0 / 5103.0; },
                  cross(low1, v2_any)});
  rows.push_back({"1->2", "8<0.84v1<10.56", "(121/12-16658/5103)-(49/768)v1^2",
                  0, 1,
                  [](double v1, double) {
                    return 121.0 / 12.0 - 16658.0 / 5103.0 -
                           49.0 / 768.0 * v1 * v1;
                  },
                  cross(mid1, v2_any)});
  rows.push_back({"1->2", "0.84v1>=10.56", "-16658/5103", 0, 1,
                  [](double, double) { return -16658.0 / 5103.0; },
                  cross(high1, v2_any)});
  rows.push_back({"1->3", "0.84v1<=8", "940/567", 0, 2,
                  [](double, double) { return 940.0 / 567.0; },
                  cross(low1, v2_any)});
  rows.push_back({"1->3", "0.84v1>8", "-1580/567", 0, 2,
                  [](double, double) { return -1580.0 / 567.0; },
                  cross(mid1, v2_any)});
  {
    std::vector<std::pair<double, double>> pts;
    for (double v1 : mid1) pts.emplace_back(v1, 0.875 * v1 * 0.9);
    rows.push_back({"2->1", "8<=0.84v1<10.56 & 0.96v2<=0.84v1",
                    "(11v1-(7/8)v1^2)/6", 1, 0,
                    [](double v1, double) {
                      return (11.0 * v1 - 0.875 * v1 * v1) / 6.0;
                    },
                    pts});
  }
  {
    std::vector<std::pair<double, double>> pts;
    for (double v1 : mid1) pts.emplace_back(v1, 0.5 * (0.875 * v1 + 11.0));
    rows.push_back({"2->1", "8<=0.84v1<10.56 & 0.96v2>0.84v1",
                    "(5v1-(7/8)v1^2)/6", 1, 0,
                    [](double v1, double) {
                      return (5.0 * v1 - 0.875 * v1 * v1) / 6.0;
                    },
                    pts});
  }
  {
    auto pts = cross(low1, v2_full);
    for (auto p : cross(high1, v2_full)) pts.push_back(p);
    rows.push_back({"2->1", "otherwise", "0", 1, 0,
                    [](double, double) { return 0.0; }, pts});
  }
  rows.push_back({"2->3", "0.84v1<=8 & 0.96v2<=8", "32/9", 1, 2,
                  [](double, double) { return 32.0 / 9.0; },
                  cross(low1, v2_low)});
  rows.push_back({"2->3", "0.84v1<=8 & 0.96v2>8", "-40/9", 1, 2,
                  [](double, double) { return -40.0 / 9.0; },
                  cross(low1, v2_high)});
  rows.push_back({"2->3", "0.84v1>8", "0", 1, 2,
                  [](double, double) { return 0.0; },
                  cross(mid1, v2_full)});

  Out out(out_path);
  out.stream() << "pair,region,expression,value_at_first_point,max_abs_diff\n";
  for (const auto& r : rows) {
    double worst = 0.0;
    double first = 0.0;
    bool first_set = false;
    for (auto [v1, v2] : r.points) {
      const double lib = lib_gamma(r.i, r.j, v1, v2);
      if (!first_set) {
        first = lib;
        first_set = true;
      }
      worst = std::max(worst, std::abs(lib - r.closed(v1, v2)));
    }
    out.stream() << r.pair << "," << r.region << "," << r.expression << ","
                 << fmt(first) << "," << fmt(worst) << "\n";
  }
}

void cmd_ntu_run(const std::string& config_path, long long periods_override,
                 const std::optional<std::uint64_t>& seed, long long rep,
                 int stride, const std::string& out_path) {
  gum::ExperimentConfig cfg;
  if (config_path.empty()) {
    cfg = ntu_example_config();
    cfg.periods = 1000;
    cfg.seed = resolve_seed(seed, std::nullopt);
  } else {
    const LoadedConfig lc = load_config(config_path);
    cfg = lc.cfg;
    cfg.seed = config_seed(seed, lc);
  }
  cfg.mechanism = gum::MechanismKind::kNtu;
  if (periods_override > 0) cfg.periods = periods_override;
  const std::size_t n = cfg.players.size();
  Out out(out_path);
  out.stream() << "t,winner";
  for (std::size_t i = 1; i <= n; ++i) out.stream() << ",r" << i;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= n; ++j) {
      if (i != j) out.stream() << ",cum_" << i << "_" << j;
    }
  }
  out.stream() << ",excluded\n";
  gum::run_trace(cfg, static_cast<std::uint64_t>(rep),
                 [&](const gum::TraceRow& row) {
                   if (stride > 1 && row.round % stride != 0 &&
                       row.round != cfg.periods) {
                     return;
                   }
                   out.stream() << row.round << "," << row.winner + 1;
                   for (double r : row.reports) out.stream() << "," << fmt(r);
                   for (double c : row.cum_pairs) out.stream() << "," << fmt(c);
                   out.stream() << ",";
                   bool any = false;
                   for (std::size_t i = 0; i < n; ++i) {
                     if (row.exclusion_mask >> i & 1) {
                       if (any) out.stream() << ";";
                       out.stream() << i + 1;
                       any = true;
                     }
                   }
                   out.stream() << "\n";
                 });
}

void cmd_poa_curve(double lambda, double step, int stride,
                   const std::string& out_path) {
  const auto curve = gum::poa::integrate_threshold_ode(lambda, step, stride);
  Out out(out_path);
  out.stream() << "x,y\n";
  for (auto [x, y] : curve.samples) {
    out.stream() << fmt(x) << "," << fmt(y) << "\n";
  }
  std::cerr << (curve.status == gum::poa::OdeCurve::Status::kReachedOne
                    ? "reached_one y_end="
                    : "hit_zero x_stop=")
            << fmt(curve.status == gum::poa::OdeCurve::Status::kReachedOne
                       ? curve.y_end
                       : curve.x_stop)
            << "\n";
}

void cmd_simulate(const std::string& config_path, const std::string& out_path,
                  const std::optional<std::uint64_t>& seed, long long reps,
                  long long periods, int stride) {
  const LoadedConfig lc = load_config(config_path);
  gum::ExperimentConfig cfg = lc.cfg;
  cfg.seed = config_seed(seed, lc);
  if (reps > 0) cfg.reps = static_cast<int>(reps);
  if (periods > 0) cfg.periods = periods;
  if (stride >= 0) cfg.trajectory_stride = stride;
  const gum::SimSummary s = gum::run_experiment(cfg);

  nlohmann::json j;
  j["mechanism"] = s.mechanism == gum::MechanismKind::kTu ? "tu" : "ntu";
  j["seed"] = s.seed;
  j["reps"] = s.reps;
  j["periods"] = s.periods;
  nlohmann::json players = nlohmann::json::array();
  for (std::size_t i = 0; i < s.mean_total.size(); ++i) {
    players.push_back({{"mean_total", fmt_round(s.mean_total[i])},
                       {"se_total", fmt_round(s.se_total[i])},
                       {"mean_per_round", fmt_round(s.mean_per_round[i])},
                       {"se_per_round", fmt_round(s.se_per_round[i])},
                       {"excluded_reps", s.exclusions[i]}});
  }
  j["players"] = players;
  j["welfare"] = {{"mean", fmt_round(s.mean_welfare)},
                  {"se", fmt_round(s.se_welfare)}};
  if (!s.kappa.empty()) {
    nlohmann::json k = nlohmann::json::array();
    for (double x : s.kappa) k.push_back(fmt_round(x));
    j["kappa"] = k;
  }
  if (!s.budgets.empty()) {
    nlohmann::json b = nlohmann::json::array();
    for (const auto& row : s.budgets) {
      nlohmann::json r = nlohmann::json::array();
      for (double x : row) r.push_back(fmt_round(x));
      b.push_back(r);
    }
    j["budgets"] = b;
  }
  if (!s.trajectory_rounds.empty()) {
    j["trajectory"]["rounds"] = s.trajectory_rounds;
    nlohmann::json rowsj = nlohmann::json::array();
    for (const auto& row : s.trajectory) {
      nlohmann::json r = nlohmann::json::array();
      for (double x : row) r.push_back(fmt_round(x));
      rowsj.push_back(r);
    }
    j["trajectory"]["cum_pairs"] = rowsj;
  }
  Out out(out_path);
  out.stream() << j.dump(2) << "\n";
}

// Normal-approximation upper tail of a chi-square statistic.
double chi2_tail(double stat, double df) {
  if (df <= 0.0) return 1.0;
  const double c = 2.0 / (9.0 * df);
  const double z = (std::cbrt(stat / df) - (1.0 - c)) / std::sqrt(c);
  return 0.5 * std::erfc(z / std::sqrt(2.0));
}

int cmd_lemma_check(const std::vector<std::string>& profiles_arg,
                    long long samples, const std::optional<std::uint64_t>& seed,
                    double significance) {
  std::vector<std::vector<double>> profiles;
  if (profiles_arg.empty()) {
    profiles = {{1.0 / 3, 1.0 / 3, 1.0 / 3}, {0.5, 0.25, 0.25}, {0.6, 0.3, 0.1}};
  } else {
    for (const auto& s : profiles_arg) {
      std::vector<double> w;
      if (!gum::detail_cfg::parse_number_list(s, w) || w.size() < 2) {
        throw gum::ConfigError(
            {{"BAD_VALUE", 0, "profile '" + s + "' is not a weight list"}});
      }
      profiles.push_back(std::move(w));
    }
  }
  const std::uint64_t master = resolve_seed(seed, std::nullopt);
  bool all_ok = true;
  std::cout << "profile,item,player,statistic,p_value,pass\n";
  for (std::size_t pi = 0; pi < profiles.size(); ++pi) {
    const auto& alphas = profiles[pi];
    const std::size_t n = alphas.size();
    double asum = 0.0;
    for (double a : alphas) asum += a;
    if (std::abs(asum - 1.0) > 1e-9) {
      throw gum::ConfigError(
          {{"WEIGHT_SUM", 0, "lemma profiles must have weights summing to 1"}});
    }
    // The level draws feed the real scoring machinery: reports from
    // Uniform(0,1) priors have smoothed CDF equal to themselves.
    std::vector<gum::Distribution> priors(n, gum::Distribution::uniform(0, 1));
    const gum::AllocationRule rule = gum::QuantilePower{alphas};
    gum::Rng rng(master, pi);
    std::vector<double> reports(n), scores;
    std::vector<std::vector<double>> maxima(n);  // item 1 transforms
    const int bins = 20;
    std::vector<std::vector<long long>> count(n, std::vector<long long>(bins, 0));
    std::vector<std::vector<long long>> wins(n, std::vector<long long>(bins, 0));
    for (long long s = 0; s < samples; ++s) {
      for (std::size_t i = 0; i < n; ++i) reports[i] = rng.uniform01();
      gum::allocation_scores(rule, reports, priors, rng, scores);
      const std::size_t w = gum::argmax_tiebreak(scores, rng);
      for (std::size_t i = 0; i < n; ++i) {
        double m = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
          if (j != i) m = std::max(m, scores[j]);
        }
        maxima[i].push_back(std::pow(m, 1.0 - alphas[i]));
        int b = static_cast<int>(reports[i] * bins);
        b = std::min(b, bins - 1);
        ++count[i][b];
        if (w == i) ++wins[i][b];
      }
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double d = gum::ks_statistic_uniform(maxima[i]);
      const double p =
          gum::kolmogorov_tail(std::sqrt(static_cast<double>(samples)) * d);
      const bool ok = p >= significance;
      all_ok = all_ok && ok;
      std::cout << pi + 1 << ",max_is_uniform_power," << i + 1 << "," << fmt(d)
                << "," << fmt(p) << "," << (ok ? "pass" : "FAIL") << "\n";

      // Conditional win frequency per level bin, merged so each group's
      // expected win and loss counts are at least 5.
      const double inv = 1.0 / alphas[i];
      double stat = 0.0;
      int groups = 0;
      double ge = 0.0, gv = 0.0, go = 0.0, gc = 0.0;
      for (int b = 0; b < bins; ++b) {
        const double lo = static_cast<double>(b) / bins;
        const double hi = static_cast<double>(b + 1) / bins;
        const double pbar =
            alphas[i] * (std::pow(hi, inv) - std::pow(lo, inv)) / (hi - lo);
        const double c = static_cast<double>(count[i][b]);
        ge += c * pbar;
        gv += c * pbar * (1.0 - pbar);
        go += static_cast<double>(wins[i][b]);
        gc += c;
        const bool flush =
            (ge >= 5.0 && gc - ge >= 5.0) || b == bins - 1;
        if (flush && gv > 0.0) {
          stat += (go - ge) * (go - ge) / gv;
          ++groups;
          ge = gv = go = gc = 0.0;
        }
      }
      const double p2 = chi2_tail(stat, static_cast<double>(groups));
      const bool ok2 = p2 >= significance;
      all_ok = all_ok && ok2;
      std::cout << pi + 1 << ",win_given_level," << i + 1 << "," << fmt(stat)
                << "," << fmt(p2) << "," << (ok2 ? "pass" : "FAIL") << "\n";
    }
  }
  return all_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"guaranteed-utility mechanisms workbench"};
  app.require_subcommand(1);
  int exit_code = 0;

  // floor
  std::string f_dist;
  int f_n = 2;
  std::string f_method = "closed";
  auto* floor_cmd = app.add_subcommand(
      "floor", "Fair floor: expected max of n i.i.d. draws over n");
  floor_cmd->add_option("--dist", f_dist, "distribution literal")->required();
  floor_cmd->add_option("--n", f_n, "number of players")
      ->required()
      ->check(CLI::PositiveNumber);
  floor_cmd->add_option("--method", f_method, "closed or quadrature")
      ->check(CLI::IsMember({"closed", "quadrature"}));
  floor_cmd->callback([&] { cmd_floor(f_dist, f_n, f_method); });

  // phi
  double p_alpha = 0.5;
  std::string p_dist;
  auto* phi_cmd = app.add_subcommand(
      "phi", "Per-round target utility of weight alpha against a prior");
  phi_cmd->add_option("--alpha", p_alpha, "weight in [0,1]")->required();
  phi_cmd->add_option("--dist", p_dist, "distribution literal")->required();
  phi_cmd->callback([&] { cmd_phi(p_alpha, p_dist); });

  // fstar
  double fs_alpha = 0.5;
  std::string fs_dist;
  long long fs_T = 1;
  auto* fstar_cmd =
      app.add_subcommand("fstar", "Total target utility over T rounds");
  fstar_cmd->add_option("--alpha", fs_alpha, "weight in [0,1]")->required();
  fstar_cmd->add_option("--dist", fs_dist, "distribution literal")->required();
  fstar_cmd->add_option("--T", fs_T, "rounds")->check(CLI::PositiveNumber);
  fstar_cmd->callback([&] { cmd_fstar(fs_alpha, fs_dist, fs_T); });

  // tu-example
  std::string te_out;
  int te_sweep = 200;
  auto* te_cmd = app.add_subcommand(
      "tu-example", "Transfer table of the worked three-player example (CSV)");
  te_cmd->add_option("--out", te_out, "output file (default stdout)");
  te_cmd->add_option("--sweep", te_sweep, "points per v1 sweep");
  te_cmd->callback([&] { cmd_tu_example(te_out, te_sweep); });

  // tu-verify
  std::string tv_config;
  int tv_grid = 21;
  bool tv_strict = false;
  auto* tv_cmd = app.add_subcommand(
      "tu-verify", "Interim constancy report for a transfer mechanism");
  tv_cmd->add_option("--config", tv_config, "experiment config file");
  tv_cmd->add_option("--grid", tv_grid, "opponent grid points")
      ->check(CLI::PositiveNumber);
  tv_cmd->add_flag("--strict", tv_strict, "use strict budget balance");
  tv_cmd->callback([&] { cmd_tu_verify(tv_config, tv_grid, tv_strict); });

  // ntu-example
  std::string ne_out;
  auto* ne_cmd = app.add_subcommand(
      "ntu-example",
      "Virtual-payment tables of the transfer-free example (CSV)");
  ne_cmd->add_option("--out", ne_out, "output file (default stdout)");
  ne_cmd->callback([&] { cmd_ntu_example(ne_out); });

  // ntu-run
  std::string nr_config, nr_out;
  long long nr_T = 0, nr_rep = 0;
  int nr_stride = 1;
  std::optional<std::uint64_t> nr_seed;
  auto* nr_cmd = app.add_subcommand(
      "ntu-run", "Trace one replication of the budgeted mechanism (CSV)");
  nr_cmd->add_option("--config", nr_config, "experiment config file");
  nr_cmd->add_option("--T", nr_T, "override round count");
  nr_cmd->add_option("--rep", nr_rep, "replication index");
  nr_cmd->add_option("--stride", nr_stride, "emit every k-th round")
      ->check(CLI::PositiveNumber);
  nr_cmd->add_option("--seed", nr_seed, "master seed");
  nr_cmd->add_option("--out", nr_out, "output file (default stdout)");
  nr_cmd->callback(
      [&] { cmd_ntu_run(nr_config, nr_T, nr_seed, nr_rep, nr_stride, nr_out); });

  // poa curve / critical
  auto* poa_cmd = app.add_subcommand("poa", "Threshold ODE of the scaling limit");
  poa_cmd->require_subcommand(1);
  double pc_lambda = 1.2;
  double pc_step = 1e-4;
  int pc_stride = 1;
  std::string pc_out;
  auto* curve_cmd = poa_cmd->add_subcommand("curve", "Integrate y(x) (CSV x,y)");
  curve_cmd->add_option("--lambda", pc_lambda, "consumption coefficient > 1")
      ->required();
  curve_cmd->add_option("--step", pc_step, "integration step");
  curve_cmd->add_option("--stride", pc_stride, "emit every k-th step")
      ->check(CLI::PositiveNumber);
  curve_cmd->add_option("--out", pc_out, "output file (default stdout)");
  curve_cmd->callback(
      [&] { cmd_poa_curve(pc_lambda, pc_step, pc_stride, pc_out); });
  double cr_tol = 1e-4, cr_step = 1e-4;
  auto* crit_cmd =
      poa_cmd->add_subcommand("critical", "Largest lambda that survives to x=1");
  crit_cmd->add_option("--tol", cr_tol, "bisection tolerance");
  crit_cmd->add_option("--step", cr_step, "integration step");
  crit_cmd->callback(
      [&] { std::cout << fmt(gum::poa::critical_lambda(cr_tol, cr_step)) << "\n"; });

  // simulate
  std::string sim_config, sim_out;
  std::optional<std::uint64_t> sim_seed;
  long long sim_reps = 0, sim_T = 0;
  int sim_stride = -1;
  auto* sim_cmd = app.add_subcommand(
      "simulate", "Monte Carlo experiment from a config file (JSON summary)");
  sim_cmd->add_option("--config", sim_config, "experiment config file")
      ->required();
  sim_cmd->add_option("--out", sim_out, "output file (default stdout)");
  sim_cmd->add_option("--seed", sim_seed, "master seed");
  sim_cmd->add_option("--reps", sim_reps, "override replication count");
  sim_cmd->add_option("--T", sim_T, "override round count");
  sim_cmd->add_option("--stride", sim_stride, "override ledger stride");
  sim_cmd->callback([&] {
    cmd_simulate(sim_config, sim_out, sim_seed, sim_reps, sim_T, sim_stride);
  });

  // lemma-check
  std::vector<std::string> lc_profiles;
  long long lc_samples = 100000;
  std::optional<std::uint64_t> lc_seed;
  double lc_sig = 0.01;
  auto* lc_cmd = app.add_subcommand(
      "lemma-check", "Distributional checks for the scoring rule (CSV)");
  lc_cmd->add_option("--profile", lc_profiles,
                     "weight list like 1/3,1/3,1/3 (repeatable)");
  lc_cmd->add_option("--samples", lc_samples, "draws per profile")
      ->check(CLI::PositiveNumber);
  lc_cmd->add_option("--seed", lc_seed, "master seed");
  lc_cmd->add_option("--significance", lc_sig, "rejection level");
  lc_cmd->callback([&] {
    exit_code = cmd_lemma_check(lc_profiles, lc_samples, lc_seed, lc_sig);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  } catch (const gum::ConfigError& e) {
    std::cerr << "config error:\n" << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    // Bad literals and out-of-range arguments are usage errors, not crashes.
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return exit_code;
}
