#pragma once

#include <algorithm>
#include <complex>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"

namespace corner_sgd {

// Real polynomial, coefficients low to high.
using Poly = std::vector<double>;

template <class T>
T poly_eval(std::span<const double> p, T x) {
  T acc{};
  for (auto it = p.rbegin(); it != p.rend(); ++it) acc = acc * x + *it;
  return acc;
}

inline Poly poly_mul(std::span<const double> a, std::span<const double> b) {
  if (a.empty() || b.empty()) return {};
  Poly out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  return out;
}

inline Poly poly_add(std::span<const double> a, std::span<const double> b, double scale_b = 1.0) {
  Poly out(std::max(a.size(), b.size()), 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) out[i] += a[i];
  for (std::size_t i = 0; i < b.size(); ++i) out[i] += scale_b * b[i];
  return out;
}

inline Poly poly_derivative(std::span<const double> p) {
  if (p.size() <= 1) return {0.0};
  Poly d(p.size() - 1);
  for (std::size_t i = 1; i < p.size(); ++i) d[i - 1] = static_cast<double>(i) * p[i];
  return d;
}

// Product of (x - r) over the given roots.
inline Poly poly_from_roots(std::span<const double> roots) {
  Poly p{1.0};
  for (double r : roots) {
    Poly f{-r, 1.0};
    p = poly_mul(p, f);
  }
  return p;
}

// Roots via eigenvalues of the companion matrix.
inline std::vector<std::complex<double>> poly_roots(std::span<const double> p) {
  std::size_t deg = p.size();
  while (deg > 0 && p[deg - 1] == 0.0) --deg;
  require(deg >= 1, "poly_roots: zero polynomial");
  std::size_t n = deg - 1;
  if (n == 0) return {};
  double lead = p[n];
  Eigen::MatrixXd c = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (std::size_t i = 1; i < n; ++i) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
  for (std::size_t i = 0; i < n; ++i) c(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(n - 1)) = -p[i] / lead;
  Eigen::EigenSolver<Eigen::MatrixXd> es(c, false);
  if (es.info() != Eigen::Success) throw numerical_error("poly_roots: eigen solve failed");
  std::vector<std::complex<double>> roots(n);
  for (std::size_t i = 0; i < n; ++i) roots[i] = es.eigenvalues()[static_cast<Eigen::Index>(i)];
  return roots;
}

}  // namespace corner_sgd
