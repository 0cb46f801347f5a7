#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace gum {

namespace detail {

// Adaptive Simpson with Richardson correction. `whole` is the Simpson estimate
// over [a,b] with midpoint values already computed. Depth cap keeps pathological
// integrands from recursing forever; at the cap the best estimate is returned.
template <class F>
double simpson_rec(const F& f, double a, double fa, double b, double fb, double m,
                   double fm, double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0 || std::abs(delta) <= 15.0 * tol) {
    return left + right + delta / 15.0;
  }
  return simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1) +
         simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
}

}  // namespace detail

// Integral of f over [a,b] to absolute tolerance tol.
template <class F>
double integrate(const F& f, double a, double b, double tol = 1e-10,
                 int max_depth = 48) {
  if (!(b > a)) return 0.0;
  const double m = 0.5 * (a + b);
  const double fa = f(a), fb = f(b), fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return detail::simpson_rec(f, a, fa, b, fb, m, fm, whole, tol, max_depth);
}

// Integral over [a,b] split at the given interior breakpoints (any order, may
// contain duplicates or points outside [a,b]; both are ignored). Use when the
// integrand has known kinks or jumps: adaptive Simpson converges fast on each
// smooth piece but can silently lose a discontinuity that hides between probes.
template <class F>
double integrate_with_breakpoints(const F& f, double a, double b,
                                  std::span<const double> interior,
                                  double tol = 1e-10) {
  if (!(b > a)) return 0.0;
  std::vector<double> pts;
  pts.reserve(interior.size() + 2);
  pts.push_back(a);
  for (double p : interior) {
    if (p > a && p < b) pts.push_back(p);
  }
  pts.push_back(b);
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end(),
                        [](double x, double y) { return y - x < 1e-15; }),
            pts.end());
  double total = 0.0;
  const double piece_tol = tol / static_cast<double>(pts.size());
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    total += integrate(f, pts[i], pts[i + 1], piece_tol);
  }
  return total;
}

}  // namespace gum
