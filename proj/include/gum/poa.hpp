#pragma once

#include <cmath>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gum::poa {

// The consumption curve y(x) solves -y' = lambda (1 - e^{y'/y}), y(0) = 1.
// For 0 < y < lambda the slope is the unique negative root z of
// g(z) = z - lambda expm1(z/y); z = 0 is always a root but corresponds to
// never allocating, so it is rejected. g is concave with g(-lambda) < 0, so
// bisection on [-lambda, 0] converges to the negative root.
inline std::optional<double> implicit_slope(double y, double lambda) {
  if (!(lambda > 0.0) || !(y > 0.0)) {
    throw std::invalid_argument("implicit_slope: need y > 0 and lambda > 0");
  }
  if (y >= lambda) return std::nullopt;
  double lo = -lambda, hi = 0.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double g = mid - lambda * std::expm1(mid / y);
    (g < 0.0 ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

namespace detail {

// Slope extended through the floor: the root tends to -lambda as y -> 0+.
// Keeps Runge-Kutta stage evaluations defined when a stage overshoots.
inline double slope_ext(double y, double lambda) {
  if (y <= 1e-12) return -lambda;
  if (y >= lambda) {
    throw std::runtime_error("threshold ode: curve rose above lambda");
  }
  return *implicit_slope(y, lambda);
}

}  // namespace detail

struct OdeCurve {
  enum class Status { kReachedOne, kHitZero };
  Status status = Status::kReachedOne;
  double lambda = 0.0;
  double step = 0.0;    // actual step used (1 / round(1/h))
  double y_end = 0.0;   // y(1), or the floor value when it was hit
  double x_stop = 1.0;  // 1, or the interpolated floor crossing
  std::vector<std::pair<double, double>> samples;
};

// Classic fourth-order integration with the implicit slope recomputed at
// every stage. Integration stops at x = 1 (ReachedOne) or when y dives under
// the 1e-9 floor (HitZero; x_stop interpolated linearly inside the fatal
// step). sample_stride > 0 records every stride-th point plus both ends.
inline OdeCurve integrate_threshold_ode(double lambda, double h = 1e-4,
                                        int sample_stride = 0) {
  if (!(lambda > 1.0)) {
    throw std::invalid_argument("threshold ode: lambda must exceed 1");
  }
  if (!(h > 0.0 && h <= 1e-3)) {
    throw std::invalid_argument("threshold ode: step must lie in (0, 1e-3]");
  }
  constexpr double kFloor = 1e-9;
  const long long steps = std::llround(1.0 / h);
  const double dx = 1.0 / static_cast<double>(steps);
  OdeCurve curve;
  curve.lambda = lambda;
  curve.step = dx;
  double y = 1.0;
  if (sample_stride > 0) curve.samples.emplace_back(0.0, y);
  for (long long s = 0; s < steps; ++s) {
    const double x = static_cast<double>(s) * dx;
    const double k1 = detail::slope_ext(y, lambda);
    const double k2 = detail::slope_ext(y + 0.5 * dx * k1, lambda);
    const double k3 = detail::slope_ext(y + 0.5 * dx * k2, lambda);
    const double k4 = detail::slope_ext(y + dx * k3, lambda);
    const double y_next = y + dx / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if (y_next <= kFloor) {
      curve.status = OdeCurve::Status::kHitZero;
      curve.y_end = kFloor;
      curve.x_stop = x + dx * (y - kFloor) / (y - y_next);
      if (sample_stride > 0) curve.samples.emplace_back(curve.x_stop, kFloor);
      return curve;
    }
    y = y_next;
    if (sample_stride > 0 && ((s + 1) % sample_stride == 0 || s + 1 == steps)) {
      curve.samples.emplace_back(static_cast<double>(s + 1) * dx, y);
    }
  }
  curve.status = OdeCurve::Status::kReachedOne;
  curve.y_end = y;
  curve.x_stop = 1.0;
  return curve;
}

// Threshold coefficient: largest lambda whose curve still reaches x = 1.
// Bisection on the classification, verified against a halved step.
inline double critical_lambda(double tol = 1e-4, double h = 1e-4) {
  if (!(tol >= 1e-5)) {
    throw std::invalid_argument("critical_lambda: tolerance below 1e-5");
  }
  auto locate = [&](double step) {
    double lo = 1.05, hi = 1.6;
    if (integrate_threshold_ode(lo, step).status != OdeCurve::Status::kReachedOne ||
        integrate_threshold_ode(hi, step).status != OdeCurve::Status::kHitZero) {
      throw std::runtime_error("critical_lambda: bracket failure");
    }
    while (hi - lo > 0.5 * tol) {
      const double mid = 0.5 * (lo + hi);
      if (integrate_threshold_ode(mid, step).status == OdeCurve::Status::kReachedOne) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  const double coarse = locate(h);
  const double fine = locate(0.5 * h);
  if (std::abs(coarse - fine) > tol) {
    throw std::runtime_error("critical_lambda: estimate unstable under step halving");
  }
  return fine;
}

}  // namespace gum::poa
