#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <boost/math/quadrature/gauss.hpp>

namespace corner_sgd {

// Full Gauss-Legendre rule on [-1, 1] assembled from Boost's half-rule tables.
template <unsigned N>
struct GaussRule {
  std::array<double, N> x{};
  std::array<double, N> w{};

  GaussRule() {
    using table = boost::math::quadrature::gauss<double, N>;
    const auto& abs = table::abscissa();
    const auto& wts = table::weights();
    std::size_t k = 0;
    for (std::size_t i = 0; i < abs.size(); ++i) {
      if (abs[i] == 0.0) {
        x[k] = 0.0;
        w[k++] = wts[i];
        continue;
      }
      x[k] = -abs[i];
      w[k++] = wts[i];
      x[k] = abs[i];
      w[k++] = wts[i];
    }
  }
};

inline const GaussRule<16>& gauss16() {
  static const GaussRule<16> rule;
  return rule;
}

// Composite 16-point rule over consecutive breakpoints.
template <class T, class F>
T integrate_panels(F&& f, std::span<const double> breaks) {
  const auto& g = gauss16();
  T total{};
  for (std::size_t p = 0; p + 1 < breaks.size(); ++p) {
    double mid = 0.5 * (breaks[p] + breaks[p + 1]);
    double half = 0.5 * (breaks[p + 1] - breaks[p]);
    T panel{};
    for (std::size_t i = 0; i < 16; ++i) panel += g.w[i] * f(mid + half * g.x[i]);
    total += half * panel;
  }
  return total;
}

// n equal panels on [a, b].
inline std::vector<double> uniform_breaks(double a, double b, std::size_t n) {
  std::vector<double> br(n + 1);
  for (std::size_t i = 0; i <= n; ++i) br[i] = a + (b - a) * static_cast<double>(i) / static_cast<double>(n);
  br[n] = b;
  return br;
}

}  // namespace corner_sgd
