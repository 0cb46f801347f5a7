#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace gum::detail {

struct LpResult {
  bool ok = false;        // optimum found (problems here are always bounded)
  double objective = 0.0;
  std::vector<double> x;
};

// Dense two-phase primal simplex for tiny LPs:
//   minimize c.x  subject to  A x = b, x >= 0.
// Bland's rule, so it cannot cycle; fine for the few-dozen-variable
// feasibility programs this library builds. Rows with negative b are flipped.
class Simplex {
 public:
  LpResult solve(std::vector<std::vector<double>> A, std::vector<double> b,
                 std::vector<double> c) {
    const std::size_t m = A.size();
    const std::size_t n = c.size();
    for (std::size_t r = 0; r < m; ++r) {
      if (b[r] < 0.0) {
        b[r] = -b[r];
        for (auto& v : A[r]) v = -v;
      }
    }
    // Tableau with artificial basis appended: columns [0,n) real, [n,n+m) artificial.
    tab_.assign(m, std::vector<double>(n + m + 1, 0.0));
    basis_.assign(m, 0);
    for (std::size_t r = 0; r < m; ++r) {
      for (std::size_t j = 0; j < n; ++j) tab_[r][j] = A[r][j];
      tab_[r][n + r] = 1.0;
      tab_[r].back() = b[r];
      basis_[r] = n + r;
    }
    // Phase 1: minimize sum of artificials.
    std::vector<double> c1(n + m, 0.0);
    for (std::size_t j = n; j < n + m; ++j) c1[j] = 1.0;
    if (!optimize(c1, n + m)) return {};
    if (phase_objective(c1) > 1e-7) return {};  // constraints inconsistent
    drive_out_artificials(n);
    // Phase 2 on real columns only.
    std::vector<double> c2(c);
    c2.resize(n + m, 0.0);
    for (std::size_t j = n; j < n + m; ++j) c2[j] = 1e30;  // keep artificials out
    if (!optimize(c2, n)) return {};
    LpResult res;
    res.ok = true;
    res.x.assign(n, 0.0);
    for (std::size_t r = 0; r < tab_.size(); ++r) {
      if (basis_[r] < n) res.x[basis_[r]] = tab_[r].back();
    }
    res.objective = 0.0;
    for (std::size_t j = 0; j < n; ++j) res.objective += c[j] * res.x[j];
    return res;
  }

 private:
  static constexpr double kEps = 1e-9;

  double phase_objective(const std::vector<double>& c) const {
    double v = 0.0;
    for (std::size_t r = 0; r < tab_.size(); ++r) v += c[basis_[r]] * tab_[r].back();
    return v;
  }

  // Reduced cost of column j under costs c.
  double reduced_cost(const std::vector<double>& c, std::size_t j) const {
    double d = c[j];
    for (std::size_t r = 0; r < tab_.size(); ++r) d -= c[basis_[r]] * tab_[r][j];
    return d;
  }

  bool optimize(const std::vector<double>& c, std::size_t ncols) {
    const std::size_t m = tab_.size();
    for (std::size_t iter = 0; iter < 10000; ++iter) {
      std::size_t enter = ncols;
      for (std::size_t j = 0; j < ncols; ++j) {  // Bland: first improving column
        if (reduced_cost(c, j) < -kEps) {
          enter = j;
          break;
        }
      }
      if (enter == ncols) return true;  // optimal
      std::size_t leave = m;
      double best = 0.0;
      for (std::size_t r = 0; r < m; ++r) {
        if (tab_[r][enter] > kEps) {
          const double ratio = tab_[r].back() / tab_[r][enter];
          if (leave == m || ratio < best - 1e-12 ||
              (ratio < best + 1e-12 && basis_[r] < basis_[leave])) {
            leave = r;
            best = ratio;
          }
        }
      }
      if (leave == m) return false;  // unbounded; cannot happen for our programs
      pivot(leave, enter);
    }
    return false;
  }

  void pivot(std::size_t r, std::size_t j) {
    const double p = tab_[r][j];
    for (auto& v : tab_[r]) v /= p;
    for (std::size_t i = 0; i < tab_.size(); ++i) {
      if (i == r) continue;
      const double f = tab_[i][j];
      if (f == 0.0) continue;
      for (std::size_t k = 0; k < tab_[i].size(); ++k) tab_[i][k] -= f * tab_[r][k];
    }
    basis_[r] = j;
  }

  void drive_out_artificials(std::size_t n) {
    for (std::size_t r = 0; r < tab_.size(); ++r) {
      if (basis_[r] < n) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (std::abs(tab_[r][j]) > 1e-7) {
          pivot(r, j);
          break;
        }
      }
    }
  }

  std::vector<std::vector<double>> tab_;
  std::vector<std::size_t> basis_;
};

inline LpResult solve_lp(const std::vector<std::vector<double>>& A,
                         const std::vector<double>& b,
                         const std::vector<double>& c) {
  return Simplex().solve(A, b, c);
}

}  // namespace gum::detail
