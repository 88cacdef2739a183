#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "errors.hpp"

namespace corner_sgd {

// Evaluation of E_{a,b}(-x) for 1 < a < 2, b > 0, x >= 0.
enum class MLMethod { automatic, series, integral, asymptotic };

namespace detail {

// 1/Gamma(z) via reflection, returned as (sign, log magnitude); sign 0 at the poles.
inline void rgamma_parts(double z, int& sign, double& logmag) {
  if (z > 0.0) {
    sign = 1;
    logmag = -std::lgamma(z);
    return;
  }
  if (z == std::floor(z)) {
    sign = 0;
    logmag = -std::numeric_limits<double>::infinity();
    return;
  }
  double s = std::sin(std::numbers::pi * z);
  sign = s > 0 ? 1 : -1;
  logmag = std::lgamma(1.0 - z) + std::log(std::abs(s)) - std::log(std::numbers::pi);
}

inline double ml_series(double a, double b, double x) {
  if (x == 0.0) return 1.0 / std::tgamma(b);
  double lx = std::log(x);
  double sum = 0.0;
  for (int n = 0; n < 400; ++n) {
    double mag = std::exp(n * lx - std::lgamma(a * n + b));
    double term = (n % 2 == 0) ? mag : -mag;
    sum += term;
    if (n > 2 && n * a > std::pow(x, 1.0 / a) && mag < 1e-17 * std::max(std::abs(sum), 1e-300)) break;
  }
  return sum;
}

// Residues at t = x^{1/a} e^{+-i pi/a}: (2/a) Re[t^{1-b} e^t].
inline double ml_poles(double a, double b, double x) {
  if (x == 0.0) return 0.0;
  double r = std::pow(x, 1.0 / a);
  double ph = std::numbers::pi / a;
  double re = r * std::cos(ph), im = r * std::sin(ph);
  double logmag = re + (1.0 - b) * std::log(r);
  if (logmag < -745.0) return 0.0;
  return 2.0 / a * std::exp(logmag) * std::cos(im + (1.0 - b) * ph);
}

inline double ml_integral(double a, double b, double x) {
  require(x > 0.0, "mittag-leffler integral form needs x > 0");
  double sb = std::sin(std::numbers::pi * b);
  double sab = std::sin(std::numbers::pi * (a - b));
  double ca = std::cos(std::numbers::pi * a);
  auto f = [&](double y) {
    double rho = std::exp(y);
    double ra = std::pow(rho, a);
    double num = std::pow(rho, a - b) * std::exp(-rho) * (ra * sb - x * sab);
    double den = ra * ra + 2.0 * x * ra * ca + x * x;
    return rho * num / den;
  };
  double peak = std::log(std::pow(x, 1.0 / a));
  double lo = std::min(peak, 0.0) - 36.0;
  double hi = std::log(90.0);
  double err = 0.0;
  using gk = boost::math::quadrature::gauss_kronrod<double, 31>;
  double total = 0.0;
  if (peak > lo && peak < hi) {
    total += gk::integrate(f, lo, peak, 20, 1e-14, &err);
    total += gk::integrate(f, peak, hi, 20, 1e-14, &err);
  } else {
    total += gk::integrate(f, lo, hi, 20, 1e-14, &err);
  }
  return ml_poles(a, b, x) + total / std::numbers::pi;
}

// -sum_k (-x)^{-k} / Gamma(b - a k), optimally truncated, plus the pole pair.
inline double ml_asymptotic(double a, double b, double x) {
  require(x > 0.0, "mittag-leffler asymptotic form needs x > 0");
  double lx = std::log(x);
  double sum = 0.0;
  double prev = std::numeric_limits<double>::infinity();
  for (int k = 1; k < 200; ++k) {
    int sign = 0;
    double lg = 0.0;
    rgamma_parts(b - a * k, sign, lg);
    if (sign == 0) continue;
    double logmag = -k * lx + lg;
    if (logmag > std::log(prev)) break;
    double mag = std::exp(logmag);
    // -(-1)^{-k} = -(-1)^k
    double term = ((k % 2 == 0) ? -1.0 : 1.0) * sign * mag;
    sum += term;
    prev = mag;
    if (mag < 1e-18 * std::abs(sum)) break;
  }
  return sum + ml_poles(a, b, x);
}

}  // namespace detail

inline double ml_series_radius() { return 5.0; }
inline double ml_asymptotic_radius(double a) { return std::pow(25.0, a); }

inline double mittag_leffler_neg(double a, double b, double x, MLMethod method = MLMethod::automatic) {
  require(a > 1.0 && a < 2.0, "mittag_leffler_neg: order must lie in (1, 2)");
  require(b > 0.0, "mittag_leffler_neg: b must be positive");
  require(x >= 0.0, "mittag_leffler_neg: argument must be -x with x >= 0");
  switch (method) {
    case MLMethod::series:
      return detail::ml_series(a, b, x);
    case MLMethod::integral:
      return detail::ml_integral(a, b, x);
    case MLMethod::asymptotic:
      return detail::ml_asymptotic(a, b, x);
    case MLMethod::automatic:
      break;
  }
  if (x <= ml_series_radius()) return detail::ml_series(a, b, x);
  if (x >= ml_asymptotic_radius(a)) return detail::ml_asymptotic(a, b, x);
  return detail::ml_integral(a, b, x);
}

}  // namespace corner_sgd
