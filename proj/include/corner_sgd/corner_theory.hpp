#pragma once

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <string_view>
#include <vector>

#include "errors.hpp"
#include "mittag_leffler.hpp"
#include "quadrature.hpp"

namespace corner_sgd {

// Template constant of the ideal corner map near mu = 1:
//   Psi(mu) ~ -c_psi (mu - 1)^theta.
// Expanding corner_map_eval at mu = 1 gives A sin((2-theta)pi) / ((2-theta)pi).
inline double c_psi_template(double theta, double a) {
  require(theta > 1.0 && theta < 2.0, "c_psi_template: theta must lie in (1, 2)");
  require(a > 0.0, "c_psi_template: scale must be positive");
  double x = (2.0 - theta) * std::numbers::pi;
  return a * std::sin(x) / x;
}

inline double f_u(double r, double theta, double c_psi, MLMethod method = MLMethod::automatic) {
  require(theta > 1.0 && theta < 2.0, "f_u: theta must lie in (1, 2)");
  require(c_psi > 0.0, "f_u: c_psi must be positive");
  if (r <= 0.0) return 0.0;
  double z = std::pow(r, theta) / c_psi;
  return std::pow(r, theta - 1.0) / c_psi * mittag_leffler_neg(theta, theta, z, method);
}

inline double f_v(double r, double theta, double c_psi, MLMethod method = MLMethod::automatic) {
  require(theta > 1.0 && theta < 2.0, "f_v: theta must lie in (1, 2)");
  require(c_psi > 0.0, "f_v: c_psi must be positive");
  if (r < 0.0) return 0.0;
  if (r == 0.0) return 1.0;
  return mittag_leffler_neg(theta, 1.0, std::pow(r, theta) / c_psi, method);
}

namespace detail {

inline constexpr double kRadialMin = 1e-6;
inline constexpr double kRadialMax = 1e6;

// Integral over [r0, R] in log r of r * g(r), panels of width 1/panels_per_unit.
template <class G>
double log_radial_integral(G&& g, double panels_per_unit) {
  double lo = std::log(kRadialMin), hi = std::log(kRadialMax);
  auto n = static_cast<std::size_t>(std::ceil((hi - lo) * panels_per_unit));
  auto br = uniform_breaks(lo, hi, n);
  return integrate_panels<double>(
      [&](double y) {
        double r = std::exp(y);
        return r * g(r);
      },
      br);
}

}  // namespace detail

// (tau1/|B|) Lambda^{1/nu} (theta/nu) int_0^inf r^{1-theta/nu} F_U(r)^2 dr.
inline double c_u_coefficient(double theta, double nu, double lambda_scale, double tau1, std::size_t batch,
                              double c_psi, double panels_per_unit = 4.0) {
  require(theta > 1.0 && theta < 2.0, "c_u_coefficient: theta must lie in (1, 2)");
  require(nu > 1.0, "c_u_coefficient: nu must exceed 1");
  require(lambda_scale > 0.0 && tau1 >= 0.0 && batch >= 1, "c_u_coefficient: bad prefactor inputs");
  require(c_psi > 0.0, "c_u_coefficient: c_psi must be positive");
  double p = 1.0 - theta / nu;
  double body = detail::log_radial_integral(
      [&](double r) {
        double f = f_u(r, theta, c_psi);
        return std::pow(r, p) * f * f;
      },
      panels_per_unit);
  double r0 = detail::kRadialMin, R = detail::kRadialMax;
  double lo_exp = 2.0 * theta - theta / nu;
  double small = std::pow(r0, lo_exp) / (lo_exp * std::pow(c_psi * std::tgamma(theta), 2));
  double hi_exp = theta / nu + 2.0 * theta;
  double large = std::pow(c_psi / std::tgamma(-theta), 2) * std::pow(R, -hi_exp) / hi_exp;
  return tau1 / static_cast<double>(batch) * std::pow(lambda_scale, 1.0 / nu) * (theta / nu) *
         (small + body + large);
}

// Q theta zeta int_0^inf r^{theta zeta - 1} F_V(r)^2 dr.
inline double c_v_coefficient(double theta, double zeta, double q_src, double c_psi, double panels_per_unit = 4.0) {
  require(theta > 1.0 && theta < 2.0, "c_v_coefficient: theta must lie in (1, 2)");
  require(zeta > 0.0 && zeta < 2.0, "c_v_coefficient: zeta must lie in (0, 2)");
  require(q_src > 0.0 && c_psi > 0.0, "c_v_coefficient: bad inputs");
  double p = theta * zeta - 1.0;
  double body = detail::log_radial_integral(
      [&](double r) {
        double f = f_v(r, theta, c_psi);
        return std::pow(r, p) * f * f;
      },
      panels_per_unit);
  double r0 = detail::kRadialMin, R = detail::kRadialMax;
  double small = std::pow(r0, theta * zeta) / (theta * zeta);
  double hi_exp = 2.0 * theta - theta * zeta;
  double large = std::pow(c_psi / std::tgamma(1.0 - theta), 2) * std::pow(R, -hi_exp) / hi_exp;
  return q_src * theta * zeta * (small + body + large);
}

struct CornerAsymptotics {
  double theta = 0.0;
  double c_psi = 0.0;
  double nu = 0.0;
  double zeta = 0.0;
  double tau1 = 0.0;
  std::size_t batch = 1;
  double c_u = 0.0;
  double c_v = 0.0;

  double u_exponent() const { return 2.0 - theta / nu; }
  double v_exponent() const { return theta * zeta; }
};

inline CornerAsymptotics corner_asymptotics(double theta, double a, double nu, double zeta, double lambda_scale,
                                            double q_src, double tau1, std::size_t batch) {
  CornerAsymptotics c;
  c.theta = theta;
  c.c_psi = c_psi_template(theta, a);
  c.nu = nu;
  c.zeta = zeta;
  c.tau1 = tau1;
  c.batch = batch;
  c.c_u = c_u_coefficient(theta, nu, lambda_scale, tau1, batch, c.c_psi);
  c.c_v = c_v_coefficient(theta, zeta, q_src, c.c_psi);
  return c;
}

enum class PhaseRegion { I_full, II_balanced, III_usigma_limited, outside };

inline std::string_view to_string(PhaseRegion r) {
  switch (r) {
    case PhaseRegion::I_full: return "I";
    case PhaseRegion::II_balanced: return "II";
    case PhaseRegion::III_usigma_limited: return "III";
    case PhaseRegion::outside: return "outside";
  }
  return "outside";
}

struct PhaseCell {
  double zeta = 0.0;
  double inv_nu = 0.0;
  double theta_max = std::numeric_limits<double>::quiet_NaN();
  PhaseRegion region = PhaseRegion::outside;
};

inline PhaseCell theta_max(double zeta, double nu) {
  PhaseCell cell;
  cell.zeta = zeta;
  cell.inv_nu = std::isfinite(nu) && nu != 0.0 ? 1.0 / nu : 0.0;
  if (!(nu > 1.0) || !std::isfinite(nu) || !(zeta > 0.0) || !(zeta < 2.0 - 1.0 / nu)) return cell;
  double balance = 2.0 / (zeta + 1.0 / nu);
  cell.theta_max = std::min({2.0, nu, balance});
  if (2.0 <= nu && 2.0 <= balance)
    cell.region = PhaseRegion::I_full;
  else if (nu <= balance)
    cell.region = PhaseRegion::III_usigma_limited;
  else
    cell.region = PhaseRegion::II_balanced;
  return cell;
}

// Row-major over (zeta, inv_nu).
inline std::vector<PhaseCell> phase_sweep(std::span<const double> zeta_grid, std::span<const double> inv_nu_grid) {
  std::vector<PhaseCell> out;
  out.reserve(zeta_grid.size() * inv_nu_grid.size());
  for (double z : zeta_grid)
    for (double inu : inv_nu_grid) {
      PhaseCell c = inu > 0.0 ? theta_max(z, 1.0 / inu) : PhaseCell{};
      c.zeta = z;
      c.inv_nu = inu;
      out.push_back(c);
    }
  return out;
}

}  // namespace corner_sgd
