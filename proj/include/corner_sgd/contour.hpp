#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "errors.hpp"
#include "poly.hpp"
#include "quadrature.hpp"

namespace corner_sgd {

using cplx = std::complex<double>;

// Psi = P/Q with P monic of degree M+1 and P(1) = 0.
struct RationalMap {
  Poly p;
  Poly q;

  std::size_t memory() const { return p.size() - 2; }

  cplx operator()(cplx mu) const { return poly_eval<cplx>(p, mu) / poly_eval<cplx>(q, mu); }

  void validate() const {
    require(p.size() >= 2, "rational map: P must have degree at least 1");
    require(p.back() == 1.0, "rational map: P must be monic");
    double scale = 0.0;
    for (double c : p) scale = std::max(scale, std::abs(c));
    require(std::abs(poly_eval<double>(p, 1.0)) <= 1e-12 * std::max(1.0, scale), "rational map: P(1) must vanish");
    require(!q.empty() && q.size() < p.size(), "rational map: Q must have degree at most M");
    require(std::any_of(q.begin(), q.end(), [](double c) { return c != 0.0; }), "rational map: Q is identically zero");
  }
};

// Parameters of the memory-M iteration
//   w' = w - alpha g + b.u,   u' = c g + D u.
struct MemoryAlgorithm {
  double alpha = 0.0;
  std::vector<double> b;
  std::vector<double> c;
  Eigen::MatrixXd d;

  std::size_t memory() const { return b.size(); }

  bool d_is_diagonal() const {
    for (Eigen::Index i = 0; i < d.rows(); ++i)
      for (Eigen::Index j = 0; j < d.cols(); ++j)
        if (i != j && d(i, j) != 0.0) return false;
    return true;
  }

  double d_spectral_radius() const {
    if (memory() == 0) return 0.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(d, false);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }

  void validate() const {
    auto m = static_cast<Eigen::Index>(memory());
    require(c.size() == b.size(), "memory algorithm: b and c must have the same length");
    require(d.rows() == m && d.cols() == m, "memory algorithm: D must be M x M");
    require(std::isfinite(alpha), "memory algorithm: alpha must be finite");
  }
};

inline MemoryAlgorithm plain_gd(double alpha) {
  MemoryAlgorithm a;
  a.alpha = alpha;
  a.d = Eigen::MatrixXd(0, 0);
  return a;
}

// u_t = w_t - w_{t-1}: w' = w - alpha g + beta u, u' = -alpha g + beta u.
inline MemoryAlgorithm heavy_ball(double alpha, double beta) {
  MemoryAlgorithm a;
  a.alpha = alpha;
  a.b = {beta};
  a.c = {-alpha};
  a.d = Eigen::MatrixXd::Constant(1, 1, beta);
  return a;
}

struct CornerSpec {
  double theta = 1.5;
  double a = 1.0;
  int m = 5;
  double l = 5.0;

  double spacing() const { return l / std::sqrt(static_cast<double>(m)); }

  void validate() const {
    require(theta > 1.0 && theta < 2.0, "corner spec: theta must lie in (1, 2)");
    require(a > 0.0, "corner spec: A must be positive");
    require(m >= 1, "corner spec: M must be positive");
    require(l > 0.0, "corner spec: l must be positive");
  }
};

// Ideal template map, evaluated by quadrature of
//   I(mu) = (2 - theta) int_0^inf e^{-(2-theta)s} / (mu - 1 + e^{-s}) ds,
//   Psi(mu) = -A (mu - 1) / (mu I(mu)).
inline cplx corner_integral(double theta, cplx mu) {
  cplx eps = mu - 1.0;
  double k = 2.0 - theta;
  double s_star = std::max(0.0, -std::log(std::abs(eps)));
  double s_end = s_star + 40.0;
  auto panels = static_cast<std::size_t>(std::ceil(s_end / 0.5));
  auto br = uniform_breaks(0.0, s_end, panels);
  cplx body = integrate_panels<cplx>([&](double s) { return std::exp(-k * s) / (eps + std::exp(-s)); }, br);
  // beyond s_end the integrand is e^{-ks}/eps to relative accuracy e^{-40}
  cplx tail = std::exp(-k * s_end) / (k * eps);
  return k * (body + tail);
}

inline cplx corner_map_eval(double theta, double a, cplx mu) {
  require(theta > 1.0 && theta < 2.0, "corner_map_eval: theta must lie in (1, 2)");
  require(a > 0.0, "corner_map_eval: A must be positive");
  require(!(mu.imag() == 0.0 && mu.real() >= 0.0 && mu.real() <= 1.0), "corner_map_eval: mu lies on the cut [0, 1]");
  return -a * (mu - 1.0) / (mu * corner_integral(theta, mu));
}

namespace detail {

struct CornerNodes {
  double h;
  std::vector<double> s, weight, d;  // s_m = (m - 1/2) h, weight e^{-(2-theta)s_m}, d_m = 1 - e^{-s_m}
};

inline CornerNodes corner_nodes(const CornerSpec& spec) {
  spec.validate();
  CornerNodes n;
  n.h = spec.spacing();
  for (int m = 1; m <= spec.m; ++m) {
    double s = (m - 0.5) * n.h;
    n.s.push_back(s);
    n.weight.push_back(std::exp(-(2.0 - spec.theta) * s));
    n.d.push_back(-std::expm1(-s));
  }
  return n;
}

}  // namespace detail

// Midpoint rule with step h = l/sqrt(M) applied to the template integral.
inline RationalMap discretize_corner(const CornerSpec& spec) {
  auto n = detail::corner_nodes(spec);
  RationalMap map;
  Poly one_root{-1.0, 1.0};
  map.p = poly_mul(one_root, poly_from_roots(n.d));
  map.p.back() = 1.0;
  // Q = (theta - 2)(h/A) mu sum_m w_m prod_{j != m}(mu - d_j)
  Poly sum(static_cast<std::size_t>(spec.m), 0.0);
  for (std::size_t m = 0; m < n.d.size(); ++m) {
    std::vector<double> others;
    for (std::size_t j = 0; j < n.d.size(); ++j)
      if (j != m) others.push_back(n.d[j]);
    Poly term = poly_from_roots(others);
    for (std::size_t i = 0; i < term.size(); ++i) sum[i] += n.weight[m] * term[i];
  }
  double scale = (spec.theta - 2.0) * n.h / spec.a;
  map.q.assign(sum.size() + 1, 0.0);
  for (std::size_t i = 0; i < sum.size(); ++i) map.q[i + 1] = scale * sum[i];
  return map;
}

// Explicit diagonal memory-M algorithm with the same characteristic polynomial.
inline MemoryAlgorithm algorithm_from_corner(const CornerSpec& spec) {
  auto n = detail::corner_nodes(spec);
  double k = 2.0 - spec.theta;
  MemoryAlgorithm alg;
  auto m = static_cast<Eigen::Index>(spec.m);
  alg.d = Eigen::MatrixXd::Zero(m, m);
  alg.b.assign(n.d.size(), 1.0);
  alg.c.resize(n.d.size());
  for (std::size_t i = 0; i < n.d.size(); ++i) {
    alg.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)) = n.d[i];
    alg.c[i] = k * n.h * n.weight[i] * std::expm1(-n.s[i]) / spec.a;
  }
  alg.alpha = k * n.h * (-std::expm1(-k * spec.m * n.h)) / (-std::expm1(-k * n.h)) * std::exp(-k * n.h / 2.0) / spec.a;
  return alg;
}

// Fine discretization standing in for the ideal map: node spacing h and
// nodes covering s in [0, span]. Spacing 0.5 over 30 reproduces the ideal
// kernels to well under a percent for lambda down to 1e-16.
inline CornerSpec ideal_corner_surrogate(double theta, double a, double h = 0.5, double span = 30.0) {
  require(h > 0.0 && span >= h, "ideal_corner_surrogate: bad spacing");
  CornerSpec s;
  s.theta = theta;
  s.a = a;
  s.m = static_cast<int>(std::ceil(span / h));
  s.l = h * std::sqrt(static_cast<double>(s.m));
  s.validate();
  return s;
}

// P = (mu - 1) det(mu - D), Q = det(mu - D)(b.(mu - D)^{-1} c - alpha).
inline RationalMap rational_from_algorithm(const MemoryAlgorithm& alg) {
  alg.validate();
  std::size_t m = alg.memory();
  RationalMap map;
  Poly one_root{-1.0, 1.0};
  if (alg.d_is_diagonal()) {
    std::vector<double> d(m);
    for (std::size_t i = 0; i < m; ++i) d[i] = alg.d(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i));
    Poly det = poly_from_roots(d);
    map.p = poly_mul(one_root, det);
    map.q = Poly(m + 1, 0.0);
    for (std::size_t i = 0; i <= m; ++i) map.q[i] = -alg.alpha * det[i];
    for (std::size_t j = 0; j < m; ++j) {
      std::vector<double> others;
      for (std::size_t i = 0; i < m; ++i)
        if (i != j) others.push_back(d[i]);
      Poly term = poly_from_roots(others);
      for (std::size_t i = 0; i < term.size(); ++i) map.q[i] += alg.b[j] * alg.c[j] * term[i];
    }
  } else {
    // Q(mu) = -det [[mu - D, c], [b^T, alpha]]; both polynomials recovered
    // from samples on a circle by a discrete Fourier transform.
    std::size_t n = m + 1;
    double radius = 1.0 + alg.d_spectral_radius();
    std::vector<cplx> det_vals(n), q_vals(n);
    auto mi = static_cast<Eigen::Index>(m);
    for (std::size_t j = 0; j < n; ++j) {
      cplx mu = std::polar(radius, 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n));
      Eigen::MatrixXcd x = -alg.d.cast<cplx>();
      x.diagonal().array() += mu;
      det_vals[j] = x.determinant();
      Eigen::MatrixXcd bordered(mi + 1, mi + 1);
      bordered.topLeftCorner(mi, mi) = x;
      for (Eigen::Index i = 0; i < mi; ++i) {
        bordered(i, mi) = alg.c[static_cast<std::size_t>(i)];
        bordered(mi, i) = alg.b[static_cast<std::size_t>(i)];
      }
      bordered(mi, mi) = alg.alpha;
      q_vals[j] = -bordered.determinant();
    }
    auto coeffs = [&](const std::vector<cplx>& vals) {
      Poly c(n);
      for (std::size_t k = 0; k < n; ++k) {
        cplx acc = 0.0;
        for (std::size_t j = 0; j < n; ++j)
          acc += vals[j] * std::polar(1.0, -2.0 * std::numbers::pi * static_cast<double>(j * k) / static_cast<double>(n));
        c[k] = acc.real() / static_cast<double>(n) / std::pow(radius, static_cast<double>(k));
      }
      return c;
    };
    Poly det = coeffs(det_vals);
    det.back() = 1.0;
    map.p = poly_mul(one_root, det);
    map.q = coeffs(q_vals);
  }
  map.p.back() = 1.0;
  return map;
}

inline RationalMap heavy_ball_map(double alpha, double beta) {
  require(alpha > 0.0, "heavy_ball_map: alpha must be positive");
  require(beta > -1.0 && beta < 1.0, "heavy_ball_map: beta must lie in (-1, 1)");
  return RationalMap{{beta, -1.0 - beta, 1.0}, {0.0, -alpha}};
}

// General memory-1 map (mu - 1)(mu - beta)/(q0 + q1 mu).
inline RationalMap memory1_map(double beta, double q0, double q1) {
  return RationalMap{{beta, -1.0 - beta, 1.0}, {q0, q1}};
}

// D = beta, b = 1, c = q0 + q1 beta, alpha = -q1.
inline MemoryAlgorithm memory1_algorithm(double beta, double q0, double q1) {
  MemoryAlgorithm a;
  a.alpha = -q1;
  a.b = {1.0};
  a.c = {q0 + q1 * beta};
  a.d = Eigen::MatrixXd::Constant(1, 1, beta);
  return a;
}

// Psi injective on |mu| > 1 iff -1 < q0/q1 <= (1 - beta)/(3 + beta).
inline bool memory1_injectivity(double beta, double q0, double q1) {
  require(beta > -1.0 && beta < 1.0, "memory1_injectivity: beta must lie in (-1, 1)");
  require(q1 != 0.0, "memory1_injectivity: q1 must be nonzero");
  double r = q0 / q1;
  return r > -1.0 && r <= (1.0 - beta) / (3.0 + beta);
}

// |LHS - RHS| of the implicit quartic satisfied by the memory-1 contour.
inline double memory1_quartic_residual(double beta, double q0, double q1, cplx w) {
  require(beta > -1.0 && beta < 1.0, "memory1_quartic_residual: beta must lie in (-1, 1)");
  double x = w.real(), y = w.imag();
  double lhs = 1.0 - (beta - q0 * x) * (beta - q0 * x) - q0 * q0 * y * y;
  double mid = beta * beta - 1.0 + ((q1 - q0) * beta - q1 - q0) * x - q0 * q1 * (x * x + y * y);
  double last = (beta + 1.0) * (q0 + q1) * y;
  return std::abs(lhs * lhs - mid * mid - last * last);
}

// Heavy-ball (q0 = 0) reduction: (1 - beta^2)^2 = (beta^2 - 1 + (beta - 1) q1 x)^2 + (beta + 1)^2 q1^2 y^2.
inline double heavy_ball_quadratic_residual(double beta, double q1, cplx w) {
  double x = w.real(), y = w.imag();
  double a = beta * beta - 1.0 + (beta - 1.0) * q1 * x;
  double b = (beta + 1.0) * q1 * y;
  double l = 1.0 - beta * beta;
  return std::abs(l * l - a * a - b * b);
}

// Psi(mu) = (mu - 1)/(b.(mu - D)^{-1} c - alpha), the accurate way to evaluate a long-memory map.
inline cplx algorithm_map_eval(const MemoryAlgorithm& alg, cplx mu) {
  alg.validate();
  const auto m = static_cast<Eigen::Index>(alg.memory());
  cplx r = -alg.alpha;
  if (m > 0) {
    Eigen::MatrixXcd x = -alg.d.cast<cplx>();
    x.diagonal().array() += mu;
    Eigen::VectorXcd c = Eigen::Map<const Eigen::VectorXd>(alg.c.data(), m).cast<cplx>();
    Eigen::VectorXcd b = Eigen::Map<const Eigen::VectorXd>(alg.b.data(), m).cast<cplx>();
    r += b.dot(x.partialPivLu().solve(c));
  }
  if (r == 0.0) throw numerical_error("algorithm_map_eval: pole of Psi");
  return (mu - 1.0) / r;
}

// alpha_eff = -Q(1)/P'(1).
inline double effective_learning_rate(const RationalMap& map) {
  Poly dp = poly_derivative(map.p);
  double d1 = poly_eval<double>(dp, 1.0);
  if (d1 == 0.0) throw numerical_error("effective_learning_rate: P'(1) = 0, degenerate map");
  return -poly_eval<double>(map.q, 1.0) / d1;
}

// Same quantity from the state-space form, alpha - b.(I - D)^{-1} c. Stays accurate when the poles of
// the map crowd against 1, where the monomial coefficients cancel.
inline double effective_learning_rate(const MemoryAlgorithm& alg) {
  alg.validate();
  if (alg.memory() == 0) return alg.alpha;
  const auto m = static_cast<Eigen::Index>(alg.memory());
  Eigen::MatrixXd id_minus_d = Eigen::MatrixXd::Identity(m, m) - alg.d;
  Eigen::FullPivLU<Eigen::MatrixXd> lu(id_minus_d);
  if (!lu.isInvertible()) throw numerical_error("effective_learning_rate: D has eigenvalue 1, degenerate map");
  Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(alg.c.data(), m);
  Eigen::VectorXd b = Eigen::Map<const Eigen::VectorXd>(alg.b.data(), m);
  return alg.alpha - b.dot(lu.solve(c));
}

struct StabilityReport {
  bool stable = true;
  double worst_modulus = 0.0;
  double worst_lambda = 0.0;
  std::vector<double> moduli;  // max root modulus per lambda
};

// Roots of P - lambda Q for every lambda; stable iff all lie strictly inside the unit disk.
inline StabilityReport stability_check(const RationalMap& map, std::span<const double> lambdas) {
  StabilityReport rep;
  for (double lam : lambdas) {
    require(lam > 0.0, "stability_check: lambdas must be positive");
    Poly chi = poly_add(map.p, map.q, -lam);
    double worst = 0.0;
    for (const auto& r : poly_roots(chi)) worst = std::max(worst, std::abs(r));
    rep.moduli.push_back(worst);
    if (worst >= rep.worst_modulus) {
      rep.worst_modulus = worst;
      rep.worst_lambda = lam;
    }
    if (!(worst < 1.0)) rep.stable = false;
  }
  return rep;
}

// Eigenvalues of the per-mode transition matrix [[1 - alpha lambda, b^T], [lambda c, D]]; these are the
// roots of P - lambda Q without forming the monomial expansion.
inline StabilityReport stability_check(const MemoryAlgorithm& alg, std::span<const double> lambdas) {
  alg.validate();
  const auto m = static_cast<Eigen::Index>(alg.memory());
  StabilityReport rep;
  Eigen::MatrixXd s(m + 1, m + 1);
  for (double lam : lambdas) {
    require(lam > 0.0, "stability_check: lambdas must be positive");
    s(0, 0) = 1.0 - alg.alpha * lam;
    for (Eigen::Index i = 0; i < m; ++i) {
      s(0, i + 1) = alg.b[static_cast<std::size_t>(i)];
      s(i + 1, 0) = lam * alg.c[static_cast<std::size_t>(i)];
    }
    s.bottomRightCorner(m, m) = alg.d;
    Eigen::EigenSolver<Eigen::MatrixXd> es(s, false);
    double worst = es.eigenvalues().cwiseAbs().maxCoeff();
    rep.moduli.push_back(worst);
    if (worst >= rep.worst_modulus) {
      rep.worst_modulus = worst;
      rep.worst_lambda = lam;
    }
    if (!(worst < 1.0)) rep.stable = false;
  }
  return rep;
}

struct ContourPolyline {
  std::vector<double> phi;
  std::vector<cplx> points;

  // Angle at Psi(1) swept counterclockwise from the phi < 0 neighbour to the phi > 0 neighbour.
  double external_angle() const {
    require(points.size() >= 3, "external_angle: too few points");
    cplx after = points[1] - points[0];
    cplx before = points.back() - points[0];
    double ang = std::arg(after) - std::arg(before);
    const double two_pi = 2.0 * std::numbers::pi;
    ang = std::fmod(ang, two_pi);
    if (ang < 0) ang += two_pi;
    return ang;
  }
};

inline ContourPolyline contour_points(const RationalMap& map, std::size_t n) {
  require(n >= 8, "contour_points: n must be at least 8");
  ContourPolyline out;
  for (std::size_t j = 0; j < n; ++j) {
    double phi = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    if (phi > std::numbers::pi) phi -= 2.0 * std::numbers::pi;
    cplx mu = std::polar(1.0, phi);
    cplx q = poly_eval<cplx>(map.q, mu);
    if (std::abs(q) < 1e-14) throw numerical_error("contour_points: pole of Psi on the unit circle");
    out.phi.push_back(phi);
    out.points.push_back(poly_eval<cplx>(map.p, mu) / q);
  }
  return out;
}

inline ContourPolyline contour_points(const CornerSpec& spec, std::size_t n) {
  require(n >= 8, "contour_points: n must be at least 8");
  spec.validate();
  ContourPolyline out;
  for (std::size_t j = 0; j < n; ++j) {
    double phi = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    if (phi > std::numbers::pi) phi -= 2.0 * std::numbers::pi;
    out.phi.push_back(phi);
    out.points.push_back(j == 0 ? cplx{0.0, 0.0} : corner_map_eval(spec.theta, spec.a, std::polar(1.0, phi)));
  }
  return out;
}

// Resolvent-form evaluation; preferred for long-memory algorithms.
inline ContourPolyline contour_points(const MemoryAlgorithm& alg, std::size_t n) {
  require(n >= 8, "contour_points: n must be at least 8");
  ContourPolyline out;
  for (std::size_t j = 0; j < n; ++j) {
    double phi = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(n);
    if (phi > std::numbers::pi) phi -= 2.0 * std::numbers::pi;
    out.phi.push_back(phi);
    out.points.push_back(j == 0 ? cplx{0.0, 0.0} : algorithm_map_eval(alg, std::polar(1.0, phi)));
  }
  return out;
}

// An explicit rational map, an algorithm, or the ideal template map.
using MapSource = std::variant<RationalMap, CornerSpec, MemoryAlgorithm>;

inline ContourPolyline contour_points(const MapSource& src, std::size_t n) {
  return std::visit([n](const auto& s) { return contour_points(s, n); }, src);
}

}  // namespace corner_sgd
