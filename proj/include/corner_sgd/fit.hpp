#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "errors.hpp"

namespace corner_sgd {

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
  std::size_t n = 0;
};

// Ordinary least squares y = intercept + slope * x.
inline LinearFit linear_fit(std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "linear_fit: size mismatch");
  std::size_t n = x.size();
  require(n >= 2, "linear_fit: need at least two points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  require(sxx > 0.0, "linear_fit: degenerate abscissae");
  LinearFit f;
  f.n = n;
  f.slope = sxy / sxx;
  f.intercept = my - f.slope * mx;
  if (n > 2) {
    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double r = y[i] - f.intercept - f.slope * x[i];
      rss += r * r;
    }
    f.slope_stderr = std::sqrt(rss / static_cast<double>(n - 2) / sxx);
  }
  return f;
}

struct PowerFit {
  double exponent = 0.0;   // v ~ prefactor * t^{-exponent}
  double prefactor = 0.0;
  double stderr_ = 0.0;
  std::size_t points = 0;  // raw points inside the window
  std::size_t bins = 0;
};

// Averages (log t, log v) inside multiplicative bins of the given width
// starting at t_min, then fits a line through the bin means.
inline PowerFit smoothed_power_fit(std::span<const double> t, std::span<const double> v, double t_min,
                                   double t_max, std::size_t min_points = 20, double width = 1.15) {
  require(t.size() == v.size(), "power fit: size mismatch");
  require(t_min > 0.0 && t_max > t_min, "power fit: bad window");
  double lw = std::log(width);
  std::vector<double> sx, sy;
  std::vector<std::size_t> cnt;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_min || t[i] > t_max || !(v[i] > 0.0) || !std::isfinite(v[i])) continue;
    ++inside;
    auto b = static_cast<std::size_t>(std::floor(std::log(t[i] / t_min) / lw));
    if (b >= cnt.size()) {
      sx.resize(b + 1, 0.0);
      sy.resize(b + 1, 0.0);
      cnt.resize(b + 1, 0);
    }
    sx[b] += std::log(t[i]);
    sy[b] += std::log(v[i]);
    ++cnt[b];
  }
  require(inside >= min_points, "power fit: window holds too few points");
  std::vector<double> bx, by;
  for (std::size_t b = 0; b < cnt.size(); ++b) {
    if (cnt[b] == 0) continue;
    bx.push_back(sx[b] / static_cast<double>(cnt[b]));
    by.push_back(sy[b] / static_cast<double>(cnt[b]));
  }
  LinearFit lf = linear_fit(bx, by);
  PowerFit pf;
  pf.exponent = -lf.slope;
  pf.prefactor = std::exp(lf.intercept);
  pf.stderr_ = lf.slope_stderr;
  pf.points = inside;
  pf.bins = bx.size();
  return pf;
}

// Mean of v * t^exponent over the window: the plateau of a compensated series.
inline double compensated_mean(std::span<const double> t, std::span<const double> v, double exponent, double t_min,
                               double t_max) {
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_min || t[i] > t_max) continue;
    s += v[i] * std::pow(t[i], exponent);
    ++n;
  }
  require(n > 0, "compensated_mean: empty window");
  return s / static_cast<double>(n);
}

}  // namespace corner_sgd
