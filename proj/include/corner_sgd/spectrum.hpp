#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <tuple>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "fit.hpp"
#include "parallel.hpp"
#include "quadrature.hpp"

namespace corner_sgd {

// Capacity/source exponents: lambda_k ~ Lambda k^{-nu} and
// sum_{lambda_k < lambda} lambda_k s_k ~ Q lambda^zeta.
struct PowerLawMeta {
  double nu = 0.0;
  double zeta = 0.0;
  double lambda_scale = 1.0;
  double q_src = 1.0;
};

struct SpectralProblem {
  std::vector<double> eigenvalues;  // strictly decreasing, positive
  std::vector<double> coeffs;       // s_k = (e_k . w_*)^2
  std::optional<PowerLawMeta> meta;

  std::size_t size() const { return eigenvalues.size(); }

  void validate() const {
    require(!eigenvalues.empty(), "spectral problem: no eigenvalues");
    require(coeffs.size() == eigenvalues.size(), "spectral problem: coeffs/eigenvalues length mismatch");
    for (std::size_t k = 0; k < eigenvalues.size(); ++k) {
      require(eigenvalues[k] > 0.0 && std::isfinite(eigenvalues[k]), "spectral problem: eigenvalues must be positive");
      require(coeffs[k] >= 0.0 && std::isfinite(coeffs[k]), "spectral problem: coeffs must be nonnegative");
      if (k > 0) require(eigenvalues[k] < eigenvalues[k - 1], "spectral problem: eigenvalues must strictly decrease");
    }
    if (meta) {
      require(meta->nu > 0 && meta->zeta > 0 && meta->lambda_scale > 0 && meta->q_src > 0,
              "spectral problem: meta values must be positive");
    }
  }
};

// lambda_k = Lambda k^{-nu}; lambda_k s_k telescopes so that the cumulative
// source sum equals Q lambda_j^zeta at every eigenvalue.
inline SpectralProblem power_law_problem(double nu, double zeta, double lambda_scale, double q_src, std::size_t K) {
  require(nu > 0 && zeta > 0 && lambda_scale > 0 && q_src > 0, "power_law_problem: parameters must be positive");
  require(K >= 2, "power_law_problem: K must be at least 2");
  SpectralProblem p;
  p.eigenvalues.resize(K);
  p.coeffs.resize(K);
  for (std::size_t k = 0; k < K; ++k) p.eigenvalues[k] = lambda_scale * std::pow(static_cast<double>(k + 1), -nu);
  for (std::size_t k = 0; k < K; ++k) {
    double hi = std::pow(p.eigenvalues[k], zeta);
    double lo = k + 1 < K ? std::pow(p.eigenvalues[k + 1], zeta) : 0.0;
    p.coeffs[k] = q_src * (hi - lo) / p.eigenvalues[k];
  }
  p.meta = PowerLawMeta{nu, zeta, lambda_scale, q_src};
  return p;
}

// k-th root (0-based) of cos(xi) cosh(xi) = -1, solved as cos(xi) + sech(xi) = 0.
inline double cantilever_root(std::size_t k) {
  double xi = k == 0 ? 1.8751 : std::numbers::pi * (0.5 + static_cast<double>(k));
  for (int it = 0; it < 60; ++it) {
    double sech = 1.0 / std::cosh(xi);
    double f = std::cos(xi) + sech;
    double df = -std::sin(xi) - sech * std::tanh(xi);
    double step = f / df;
    xi -= step;
    if (std::abs(step) < 1e-15 * xi) break;
  }
  return xi;
}

// cosh(xi x) + cos(xi x) - R (sinh(xi x) + sin(xi x)), R = (cosh xi + cos xi)/(sinh xi + sin xi),
// rewritten so that nothing overflows for large xi.
inline double indicator_eigenfunction(double xi, double x) {
  double em = std::exp(-xi);
  double den = 1.0 - em * em + 2.0 * em * std::sin(xi);
  double r = (1.0 + em * em + 2.0 * em * std::cos(xi)) / den;
  double grow = 2.0 * std::exp(-xi * (1.0 - x)) * (std::sin(xi) - std::cos(xi) - em) / den;
  return 0.5 * (grow + std::exp(-xi * x) * (1.0 + r)) + std::cos(xi * x) - r * std::sin(xi * x);
}

// q(x) = int_{1/4}^{3/4} (y - x)_+ dy.
inline double indicator_q(double x) {
  if (x <= 0.25) return (1.0 - 2.0 * x) / 4.0;
  if (x < 0.75) return 0.5 * (0.75 - x) * (0.75 - x);
  return 0.0;
}

inline SpectralProblem indicator_problem(std::size_t K, std::size_t quad_nodes) {
  require(K >= 1, "indicator_problem: K must be at least 1");
  std::vector<double> xi(K);
  for (std::size_t k = 0; k < K; ++k) xi[k] = cantilever_root(k);
  double periods = xi.back() / (2.0 * std::numbers::pi);
  require(static_cast<double>(quad_nodes) >= 10.0 * std::max(1.0, periods),
          "indicator_problem: quad_nodes too small for the highest mode");

  std::size_t panels = std::max<std::size_t>(4, (quad_nodes + 15) / 16);
  std::size_t outer = std::max<std::size_t>(1, panels / 4);
  std::size_t inner = std::max<std::size_t>(1, panels - 2 * outer);
  std::vector<double> br;
  for (auto [a, b, n] : {std::tuple{0.0, 0.25, outer}, std::tuple{0.25, 0.75, inner}, std::tuple{0.75, 1.0, outer}}) {
    auto seg = uniform_breaks(a, b, n);
    br.insert(br.end(), seg.begin(), seg.end() - 1);
  }
  br.push_back(1.0);

  SpectralProblem p;
  p.eigenvalues.resize(K);
  p.coeffs.resize(K);
  parallel_for(K, [&](std::size_t k) {
    double lam = std::pow(xi[k], -4.0);
    double proj = integrate_panels<double>([&](double x) { return indicator_eigenfunction(xi[k], x) * indicator_q(x); }, br);
    double norm2 = integrate_panels<double>(
        [&](double x) {
          double e = indicator_eigenfunction(xi[k], x);
          return e * e;
        },
        br);
    p.eigenvalues[k] = lam;
    p.coeffs[k] = proj * proj / (lam * lam * norm2);
  });
  // Large-k asymptotics: lambda_k ~ (pi (k + 1/2))^{-4}, lambda_k s_k xi_k^2 averages 4.
  p.meta = PowerLawMeta{4.0, 0.25, std::pow(std::numbers::pi, -4.0), 4.0 / std::numbers::pi};
  return p;
}

struct ExponentFit {
  double nu_fit = 0.0;
  double zeta_fit = 0.0;
  double index_shift = 0.0;  // k0 in log lambda = a - nu log(k + k0)
  double q_fit = 0.0;        // Q in R = Q lambda^zeta - T
  double nu_first_half = 0.0;
  double nu_second_half = 0.0;
  bool power_law = true;     // false when nu drifts between the two halves of the window
};

namespace detail {

struct ShiftedLogFit {
  double a = 0.0, nu = 0.0, k0 = 0.0, rss = 0.0;
};

inline ShiftedLogFit shifted_fit_fixed(std::span<const double> idx, std::span<const double> loglam, double k0) {
  std::vector<double> x(idx.size());
  for (std::size_t i = 0; i < idx.size(); ++i) x[i] = std::log(idx[i] + k0);
  LinearFit lf = linear_fit(x, loglam);
  ShiftedLogFit out{lf.intercept, -lf.slope, k0, 0.0};
  for (std::size_t i = 0; i < idx.size(); ++i) {
    double r = loglam[i] - lf.intercept - lf.slope * x[i];
    out.rss += r * r;
  }
  return out;
}

// Fits log lambda = a - nu log(k + k0): coarse scan over k0, then Gauss-Newton on (a, nu, k0).
inline ShiftedLogFit shifted_log_fit(std::span<const double> idx, std::span<const double> loglam) {
  double lo = -0.999 * idx.front(), hi = 4.0 * idx.front() + 4.0;
  ShiftedLogFit best = shifted_fit_fixed(idx, loglam, 0.0);
  for (int i = 0; i <= 400; ++i) {
    double k0 = lo + (hi - lo) * i / 400.0;
    ShiftedLogFit f = shifted_fit_fixed(idx, loglam, k0);
    if (f.rss < best.rss) best = f;
  }
  Eigen::Index n = static_cast<Eigen::Index>(idx.size());
  for (int it = 0; it < 60 && best.rss > 0.0; ++it) {
    Eigen::MatrixXd J(n, 3);
    Eigen::VectorXd r(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      double z = idx[static_cast<std::size_t>(i)] + best.k0;
      r(i) = loglam[static_cast<std::size_t>(i)] - best.a + best.nu * std::log(z);
      J(i, 0) = -1.0;
      J(i, 1) = std::log(z);
      J(i, 2) = best.nu / z;
    }
    Eigen::Vector3d step = J.colPivHouseholderQr().solve(-r);
    bool improved = false;
    for (double damp = 1.0; damp > 1e-6; damp *= 0.5) {
      double k0 = best.k0 + damp * step(2);
      if (k0 <= lo) continue;
      ShiftedLogFit trial{best.a + damp * step(0), best.nu + damp * step(1), k0, 0.0};
      for (Eigen::Index i = 0; i < n; ++i) {
        double z = idx[static_cast<std::size_t>(i)] + trial.k0;
        double ri = loglam[static_cast<std::size_t>(i)] - trial.a + trial.nu * std::log(z);
        trial.rss += ri * ri;
      }
      if (trial.rss < best.rss) {
        best = trial;
        improved = true;
        break;
      }
    }
    if (!improved) break;
  }
  return best;
}

struct OffsetPowerFit {
  double zeta = 0.0, q = 0.0, offset = 0.0, cost = 0.0;
};

// Minimises sum ((Q tau^zeta - T - R)/R)^2 for fixed zeta; (Q, T) by weighted LS.
inline OffsetPowerFit offset_fit_fixed(std::span<const double> tau, std::span<const double> cum, double zeta) {
  double a11 = 0, a12 = 0, a22 = 0, b1 = 0, b2 = 0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    double w = 1.0 / (cum[i] * cum[i]);
    double f = std::pow(tau[i], zeta);
    a11 += w * f * f;
    a12 -= w * f;
    a22 += w;
    b1 += w * f * cum[i];
    b2 -= w * cum[i];
  }
  double det = a11 * a22 - a12 * a12;
  OffsetPowerFit out{zeta, 0.0, 0.0, std::numeric_limits<double>::infinity()};
  if (!(std::abs(det) > 0.0)) return out;
  out.q = (b1 * a22 - a12 * b2) / det;
  out.offset = (a11 * b2 - a12 * b1) / det;
  out.cost = 0.0;
  for (std::size_t i = 0; i < tau.size(); ++i) {
    double r = (out.q * std::pow(tau[i], zeta) - out.offset - cum[i]) / cum[i];
    out.cost += r * r;
  }
  return out;
}

inline OffsetPowerFit offset_power_fit(std::span<const double> tau, std::span<const double> cum) {
  OffsetPowerFit best;
  best.cost = std::numeric_limits<double>::infinity();
  const double step = 0.005;
  for (double z = step; z <= 3.0 + 1e-12; z += step) {
    OffsetPowerFit f = offset_fit_fixed(tau, cum, z);
    if (f.cost < best.cost) best = f;
  }
  // golden-section refinement around the best grid value
  double a = std::max(1e-6, best.zeta - step), b = best.zeta + step;
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = offset_fit_fixed(tau, cum, c).cost, fd = offset_fit_fixed(tau, cum, d).cost;
  for (int it = 0; it < 100 && b - a > 1e-12; ++it) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = offset_fit_fixed(tau, cum, c).cost;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = offset_fit_fixed(tau, cum, d).cost;
    }
  }
  OffsetPowerFit refined = offset_fit_fixed(tau, cum, 0.5 * (a + b));
  return refined.cost <= best.cost ? refined : best;
}

}  // namespace detail

// Fits nu and zeta on the last ceil(tail_fraction * K) eigenvalues.
inline ExponentFit fit_exponents(const SpectralProblem& problem, double tail_fraction) {
  problem.validate();
  require(tail_fraction > 0.0 && tail_fraction < 1.0 + 1e-12, "fit_exponents: tail_fraction must be in (0, 1)");
  std::size_t K = problem.size();
  auto n_tail = static_cast<std::size_t>(std::ceil(tail_fraction * static_cast<double>(K)));
  n_tail = std::min(n_tail, K);
  require(n_tail >= 16, "fit_exponents: fewer than 16 eigenvalues in the tail window");
  std::size_t first = K - n_tail;
  require(problem.eigenvalues[first] > problem.eigenvalues[K - 1], "fit_exponents: degenerate (constant) data");

  std::vector<double> idx, loglam;
  for (std::size_t k = first; k < K; ++k) {
    idx.push_back(static_cast<double>(k + 1));
    loglam.push_back(std::log(problem.eigenvalues[k]));
  }
  ExponentFit out;
  auto full = detail::shifted_log_fit(idx, loglam);
  out.nu_fit = full.nu;
  out.index_shift = full.k0;

  std::size_t half = idx.size() / 2;
  std::span<const double> si(idx), sl(loglam);
  out.nu_first_half = detail::shifted_fit_fixed(si.first(half), sl.first(half), full.k0).nu;
  out.nu_second_half = detail::shifted_fit_fixed(si.subspan(half), sl.subspan(half), full.k0).nu;
  out.power_law = std::abs(out.nu_first_half - out.nu_second_half) <= 0.05 * std::abs(full.nu);

  // cumulative source sums sum_{k >= j} lambda_k s_k at thresholds sqrt(lambda_{j-1} lambda_j)
  std::vector<double> tail_sum(K + 1, 0.0);
  for (std::size_t k = K; k-- > 0;) tail_sum[k] = tail_sum[k + 1] + problem.eigenvalues[k] * problem.coeffs[k];
  std::vector<double> tau, cum;
  for (std::size_t j = std::max<std::size_t>(first, 1); j < K; ++j) {
    if (!(tail_sum[j] > 0.0)) continue;
    tau.push_back(std::sqrt(problem.eigenvalues[j - 1] * problem.eigenvalues[j]));
    cum.push_back(tail_sum[j]);
  }
  require(tau.size() >= 8, "fit_exponents: source mass vanishes in the tail window");
  auto zf = detail::offset_power_fit(tau, cum);
  out.zeta_fit = zf.zeta;
  out.q_fit = zf.q;
  return out;
}

}  // namespace corner_sgd
