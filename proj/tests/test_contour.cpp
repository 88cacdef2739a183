#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

#include "corner_sgd/contour.hpp"
#include "corner_sgd/corner_theory.hpp"

using namespace corner_sgd;

namespace {

double rel_diff(const Poly& a, const Poly& b) {
  EXPECT_EQ(a.size(), b.size());
  double scale = 0.0, diff = 0.0;
  for (std::size_t i = 0; i < std::min(a.size(), b.size()); ++i) {
    scale = std::max(scale, std::abs(b[i]));
    diff = std::max(diff, std::abs(a[i] - b[i]));
  }
  return diff / scale;
}

}  // namespace

TEST(CornerMap, LargeMuIsLinear) {
  cplx v = corner_map_eval(1.5, 1.0, cplx(1e6, 0.0));
  EXPECT_NEAR(v.real() / -1e6, 1.0, 1e-5);
}

// With x = e^{-s} and k = 2 - theta, the integral for mu = 1 + eps is the convergent series
//   k [pi eps^{k-1} / sin(k pi) + sum_n (-eps)^n / (k - 1 - n)].
static double small_gap_series(double theta, double eps) {
  double k = 2.0 - theta, acc = std::numbers::pi * std::pow(eps, k - 1.0) / std::sin(k * std::numbers::pi), t = 1.0;
  for (int n = 0; n < 2000 && std::abs(t) > 1e-18; ++n) {
    acc += t / (k - 1.0 - n);
    t *= -eps;
  }
  return k * acc;
}

TEST(CornerMap, IntegralMatchesSmallGapSeries) {
  for (double theta : {1.2, 1.5, 1.8})
    for (double eps : {std::ldexp(1.0, -40), std::ldexp(1.0, -20), 1e-3, 0.1, 0.5}) {
      double ref = small_gap_series(theta, eps);
      cplx v = corner_integral(theta, cplx(1.0 + eps, 0.0));
      EXPECT_NEAR(v.real(), ref, 1e-12 * std::abs(ref)) << theta << " " << eps;
      EXPECT_EQ(v.imag(), 0.0);
    }
}

// Leading term c eps^theta; the first correction has relative size sin(k pi)/((1-k) pi) eps^{theta-1}.
TEST(CornerMap, NearOneMatchesTemplateConstant) {
  for (double theta : {1.3, 1.5, 1.8}) {
    double k = 2.0 - theta, eps = std::ldexp(1.0, -40);
    cplx v = corner_map_eval(theta, 1.0, cplx(1.0 + eps, 0.0));
    double ratio = -v.real() / (c_psi_template(theta, 1.0) * std::pow(eps, theta));
    double corr = std::sin(k * std::numbers::pi) / ((1.0 - k) * std::numbers::pi) * std::pow(eps, theta - 1.0);
    EXPECT_NEAR(ratio, 1.0 + corr, 1e-3 * corr + 1e-9) << theta;
  }
}

TEST(CornerMap, AtMinusOneExceedsTwo) {
  cplx v = corner_map_eval(1.5, 1.0, cplx(-1.0, 0.0));
  EXPECT_GT(v.real(), 2.0);
  EXPECT_NEAR(v.imag(), 0.0, 1e-12);
}

TEST(CornerMap, RejectsCut) {
  EXPECT_THROW(corner_map_eval(1.5, 1.0, cplx(0.5, 0.0)), config_error);
  EXPECT_THROW(corner_map_eval(2.0, 1.0, cplx(2.0, 0.0)), config_error);
}

// Independent oracle: brute midpoint rule in delta for the original integral form.
TEST(CornerMap, MatchesDeltaIntegral) {
  const double theta = 1.3;
  for (cplx mu : {cplx(2.0, 1.0), cplx(-0.5, 1.2), cplx(0.3, -1.1)}) {
    const int n = 2000000;
    cplx acc = 0.0;
    // int_0^1 d(delta^{2-theta}) / (mu - 1 + delta), substituting delta = u^{1/(2-theta)}
    double k = 2.0 - theta;
    for (int i = 0; i < n; ++i) {
      double u = (i + 0.5) / n;
      acc += 1.0 / (mu - 1.0 + std::pow(u, 1.0 / k)) / static_cast<double>(n);
    }
    cplx psi = -(mu - 1.0) / (mu * acc);
    cplx v = corner_map_eval(theta, 1.0, mu);
    EXPECT_LT(std::abs(v - psi) / std::abs(psi), 1e-6);
  }
}

TEST(CornerMap, ThetaExponentRecoverable) {
  for (double theta : {1.3, 1.5, 1.8}) {
    double e1 = std::ldexp(1.0, -44), e2 = std::ldexp(1.0, -34);
    double a = std::log(std::abs(corner_map_eval(theta, 1.0, cplx(1.0 + e1, 0.0))));
    double b = std::log(std::abs(corner_map_eval(theta, 1.0, cplx(1.0 + e2, 0.0))));
    EXPECT_NEAR((b - a) / (std::log(e2) - std::log(e1)), theta, 5e-3) << theta;
  }
}

TEST(Discretize, SingleNodeProduct) {
  auto map = discretize_corner({1.5, 1.0, 1, 5.0});
  double d = 1.0 - std::exp(-2.5);
  Poly expect = poly_mul(Poly{-1.0, 1.0}, Poly{-d, 1.0});
  ASSERT_EQ(map.p.size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(map.p[i], expect[i], 1e-15);
}

TEST(Discretize, MonicAndVanishingAtOne) {
  for (double theta : {1.3, 1.8})
    for (int m = 1; m <= 8; ++m) {
      auto map = discretize_corner({theta, 2.0, m, 5.0});
      EXPECT_EQ(map.p.back(), 1.0);
      EXPECT_LE(std::abs(poly_eval<double>(map.p, 1.0)), 1e-12);
      EXPECT_NO_THROW(map.validate());
    }
}

// Refining M at fixed l shrinks the node spacing and extends the span together.
TEST(Discretize, ConvergesToIdealMap) {
  auto err = [](int m) {
    auto alg = algorithm_from_corner({1.8, 1.0, m, 5.0});
    double worst = 0.0;
    for (int j = 0; j < 100; ++j) {
      cplx mu = std::polar(2.0, 2.0 * std::numbers::pi * j / 100.0);
      cplx ideal = corner_map_eval(1.8, 1.0, mu);
      worst = std::max(worst, std::abs(algorithm_map_eval(alg, mu) - ideal) / std::abs(ideal));
    }
    return worst;
  };
  double prev = err(5);
  for (int m : {10, 20, 40, 80}) {
    double e = err(m);
    EXPECT_LT(e, prev) << m;
    prev = e;
  }
  EXPECT_LT(prev, 5e-3);
}

TEST(Discretize, MonomialAndResolventFormsAgreeForShortMemory) {
  auto spec = CornerSpec{1.8, 1.0, 5, 5.0};
  auto map = discretize_corner(spec);
  auto alg = algorithm_from_corner(spec);
  for (cplx mu : {cplx(-1.0, 0.0), cplx(0.0, 1.0), cplx(2.0, 0.0), cplx(0.3, -0.8)})
    EXPECT_LT(std::abs(map(mu) - algorithm_map_eval(alg, mu)) / std::abs(map(mu)), 1e-12);
}

TEST(AlgorithmFromCorner, SingleNodeValues) {
  auto alg = algorithm_from_corner({1.5, 1.0, 1, 1.0});
  EXPECT_NEAR(alg.d(0, 0), 1.0 - std::exp(-0.5), 1e-15);
  EXPECT_NEAR(alg.alpha, 0.5 * std::exp(-0.25), 1e-15);
}

TEST(AlgorithmFromCorner, Signs) {
  for (double theta : {1.2, 1.5, 1.9})
    for (int m : {1, 4, 8}) {
      auto alg = algorithm_from_corner({theta, 0.7, m, 5.0});
      EXPECT_GT(alg.alpha, 0.0);
      for (int i = 0; i < m; ++i) {
        EXPECT_GT(alg.d(i, i), 0.0);
        EXPECT_LT(alg.d(i, i), 1.0);
        EXPECT_LT(alg.c[static_cast<std::size_t>(i)], 0.0);
        EXPECT_EQ(alg.b[static_cast<std::size_t>(i)], 1.0);
      }
    }
}

TEST(RoundTrip, AlgorithmReproducesDiscretizedMap) {
  for (double theta : {1.3, 1.5, 1.8})
    for (int m = 1; m <= 8; ++m) {
      CornerSpec s{theta, 1.0, m, 5.0};
      auto a = rational_from_algorithm(algorithm_from_corner(s));
      auto b = discretize_corner(s);
      EXPECT_LT(rel_diff(a.p, b.p), 1e-9) << theta << " " << m;
      EXPECT_LT(rel_diff(a.q, b.q), 1e-9) << theta << " " << m;
    }
}

TEST(RoundTrip, DensePathAgreesWithDiagonalPath) {
  // same algorithm in a rotated basis: D' = R D R^T, b' = R b, c' = R c
  auto alg = algorithm_from_corner({1.6, 1.0, 4, 5.0});
  Eigen::MatrixXd r = Eigen::MatrixXd::Random(4, 4).householderQr().householderQ();
  MemoryAlgorithm rot = alg;
  rot.d = r * alg.d * r.transpose();
  Eigen::Map<const Eigen::VectorXd> b(alg.b.data(), 4), c(alg.c.data(), 4);
  Eigen::VectorXd rb = r * b, rc = r * c;
  rot.b.assign(rb.data(), rb.data() + 4);
  rot.c.assign(rc.data(), rc.data() + 4);
  ASSERT_FALSE(rot.d_is_diagonal());
  auto a = rational_from_algorithm(alg), d = rational_from_algorithm(rot);
  EXPECT_LT(rel_diff(d.p, a.p), 1e-10);
  EXPECT_LT(rel_diff(d.q, a.q), 1e-10);
}

TEST(RationalFromAlgorithm, PlainAndHeavyBall) {
  auto p = rational_from_algorithm(plain_gd(0.3));
  EXPECT_EQ(p.p, (Poly{-1.0, 1.0}));
  ASSERT_EQ(p.q.size(), 1u);
  EXPECT_DOUBLE_EQ(p.q[0], -0.3);
  auto hb = rational_from_algorithm(heavy_ball(0.7, 0.4));
  auto ref = heavy_ball_map(0.7, 0.4);
  EXPECT_LT(rel_diff(hb.p, ref.p), 1e-15);
  EXPECT_NEAR(hb.q[0], 0.0, 1e-15);
  EXPECT_NEAR(hb.q[1], ref.q[1], 1e-15);
}

TEST(RationalMap, ConjugationSymmetry) {
  auto map = discretize_corner({1.7, 1.0, 5, 5.0});
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 100; ++i) {
    cplx mu(u(gen), u(gen));
    cplx a = map(std::conj(mu)), b = std::conj(map(mu));
    EXPECT_LE(std::abs(a - b), 1e-12 * std::max(1.0, std::abs(b)));
  }
}

TEST(HeavyBall, CircleAndEllipse) {
  auto circle = contour_points(heavy_ball_map(1.0, 0.0), 64);
  for (auto z : circle.points) EXPECT_NEAR(std::abs(z - 1.0), 1.0, 1e-12);
  for (auto [alpha, a, b] : {std::tuple{1.0, 1.5, 0.5}, std::tuple{2.0, 0.75, 0.25}}) {
    auto poly = contour_points(heavy_ball_map(alpha, 0.5), 64);
    for (auto z : poly.points) {
      double x = (z.real() - a) / a, y = z.imag() / b;
      EXPECT_NEAR(x * x + y * y, 1.0, 1e-12);
    }
  }
}

TEST(Memory1, Injectivity) {
  EXPECT_TRUE(memory1_injectivity(0.5, 0.0, -1.0));
  EXPECT_FALSE(memory1_injectivity(0.0, -0.5, -1.0));
  EXPECT_TRUE(memory1_injectivity(0.0, 0.3, -1.0));
  EXPECT_THROW(memory1_injectivity(0.0, 0.3, 0.0), config_error);
}

TEST(Memory1, QuarticVanishesOnContour) {
  auto map = memory1_map(0.65, 0.125, -1.0);
  for (int j = 0; j < 64; ++j) {
    cplx w = map(std::polar(1.0, 2.0 * std::numbers::pi * (j + 0.5) / 64.0));
    EXPECT_LE(memory1_quartic_residual(0.65, 0.125, -1.0, w), 1e-8);
  }
  EXPECT_GT(memory1_quartic_residual(0.65, 0.125, -1.0, cplx(100.0, 100.0)), 1.0);
}

TEST(Memory1, HeavyBallQuadratic) {
  auto map = memory1_map(0.3, 0.0, -0.8);
  for (int j = 0; j < 64; ++j) {
    cplx w = map(std::polar(1.0, 2.0 * std::numbers::pi * (j + 0.5) / 64.0));
    EXPECT_LE(heavy_ball_quadratic_residual(0.3, -0.8, w), 1e-10);
    EXPECT_LE(memory1_quartic_residual(0.3, 0.0, -0.8, w), 1e-10);
  }
}

TEST(Memory1, AlgorithmHasTheMap) {
  auto m = rational_from_algorithm(memory1_algorithm(0.65, 0.125, -1.0));
  auto ref = memory1_map(0.65, 0.125, -1.0);
  EXPECT_LT(rel_diff(m.p, ref.p), 1e-15);
  EXPECT_LT(rel_diff(m.q, ref.q), 1e-15);
}

TEST(EffectiveRate, ClosedForms) {
  EXPECT_DOUBLE_EQ(effective_learning_rate(rational_from_algorithm(plain_gd(0.4))), 0.4);
  EXPECT_NEAR(effective_learning_rate(heavy_ball_map(0.4, 0.75)), 1.6, 1e-14);
  EXPECT_NEAR(effective_learning_rate(heavy_ball(0.4, 0.75)), 1.6, 1e-14);
  // corner: -1/Psi'(1) by a central difference well inside the gap to the nearest pole
  auto alg = algorithm_from_corner({1.8, 1.0, 5, 5.0});
  double a = effective_learning_rate(alg);
  EXPECT_GT(a, 0.0);
  double h = 1e-8;
  double dpsi = (algorithm_map_eval(alg, cplx(1.0 + h)) - algorithm_map_eval(alg, cplx(1.0 - h))).real() / (2 * h);
  EXPECT_NEAR(a, -1.0 / dpsi, 1e-5 * a);
  // the monomial route loses digits to cancellation but stays in the neighbourhood
  EXPECT_NEAR(effective_learning_rate(discretize_corner({1.8, 1.0, 5, 5.0})), a, 1e-2 * a);
}

TEST(EffectiveRate, DegenerateMapRejected) {
  RationalMap m{{1.0, -2.0, 1.0}, {-1.0}};  // double root at 1
  EXPECT_THROW(effective_learning_rate(m), numerical_error);
}

TEST(Stability, PlainGd) {
  auto map = rational_from_algorithm(plain_gd(1.0));
  std::vector<double> ok{1.5}, bad{2.5};
  auto r1 = stability_check(map, ok);
  EXPECT_TRUE(r1.stable);
  EXPECT_NEAR(r1.worst_modulus, 0.5, 1e-14);
  auto r2 = stability_check(map, bad);
  EXPECT_FALSE(r2.stable);
  EXPECT_NEAR(r2.worst_modulus, 1.5, 1e-14);
}

TEST(Stability, AlgorithmAndMapAgreeForPlainAndHeavyBall) {
  std::vector<double> lams{0.1, 0.7, 1.3, 2.4};
  for (const auto& alg : {plain_gd(1.0), heavy_ball(0.5, 0.6)}) {
    auto a = stability_check(alg, lams), b = stability_check(rational_from_algorithm(alg), lams);
    EXPECT_EQ(a.stable, b.stable);
    for (std::size_t i = 0; i < lams.size(); ++i) EXPECT_NEAR(a.moduli[i], b.moduli[i], 1e-12);
  }
}

TEST(Stability, DiscretizedCornerStableUpToTwiceScale) {
  auto alg = algorithm_from_corner({1.8, 1.0, 5, 5.0});
  std::vector<double> lams;
  for (int i = 1; i <= 200; ++i) lams.push_back(2.0 * i / 200.0);
  EXPECT_TRUE(stability_check(alg, lams).stable);
  // as lambda -> 0 the leading root is 1 - alpha_eff lambda + O(lambda^2)
  double a = effective_learning_rate(alg);
  std::vector<double> small{1e-10, 1e-11};
  auto s = stability_check(alg, small);
  for (std::size_t i = 0; i < small.size(); ++i) {
    EXPECT_LT(s.moduli[i], 1.0);
    EXPECT_NEAR((1.0 - s.moduli[i]) / (a * small[i]), 1.0, 1e-2);
  }
}

TEST(Contour, PlainClosedForm) {
  auto poly = contour_points(rational_from_algorithm(plain_gd(2.0)), 8);
  for (std::size_t j = 0; j < 8; ++j) {
    cplx mu = std::polar(1.0, poly.phi[j]);
    EXPECT_LE(std::abs(poly.points[j] + (mu - 1.0) / 2.0), 1e-15);
  }
  EXPECT_EQ(poly.phi[0], 0.0);
}

TEST(Contour, ConjugateSymmetricPolyline) {
  auto poly = contour_points(MapSource{discretize_corner({1.5, 1.0, 3, 5.0})}, 64);
  for (std::size_t j = 1; j < 32; ++j) EXPECT_LE(std::abs(poly.points[64 - j] - std::conj(poly.points[j])), 1e-12);
}

TEST(Contour, IdealCornerAngle) {
  CornerSpec s{1.8, 1.0, 5, 5.0};
  auto poly = contour_points(MapSource{s}, 1 << 14);
  EXPECT_EQ(poly.points[0], cplx(0.0, 0.0));
  EXPECT_NEAR(poly.external_angle(), 1.8 * std::numbers::pi, 0.02 * 1.8 * std::numbers::pi);
}

TEST(Contour, AlgorithmPathMatchesCoefficients) {
  auto alg = heavy_ball(0.7, 0.4);
  auto a = contour_points(MapSource{alg}, 64), b = contour_points(MapSource{rational_from_algorithm(alg)}, 64);
  for (std::size_t j = 0; j < 64; ++j) {
    EXPECT_EQ(a.phi[j], b.phi[j]);
    EXPECT_LE(std::abs(a.points[j] - b.points[j]), 1e-14);
  }
}

TEST(Contour, LongMemorySurrogateAngle) {
  auto poly = contour_points(MapSource{algorithm_from_corner(ideal_corner_surrogate(1.5, 1.0))}, 1 << 14);
  EXPECT_NEAR(poly.external_angle(), 1.5 * std::numbers::pi, 0.02 * 1.5 * std::numbers::pi);
}

TEST(Contour, PoleOnCircleReported) {
  RationalMap m{{-1.0, 1.0}, {1.0}};
  m.q = {1.0};
  EXPECT_NO_THROW(contour_points(m, 16));
  RationalMap pole{{0.0, -1.0, 1.0}, {1.0, 1.0}};  // Q(-1) = 0
  EXPECT_THROW(contour_points(pole, 16), numerical_error);
}

TEST(Surrogate, TracksIdealMap) {
  auto s = ideal_corner_surrogate(1.5, 1.0);
  EXPECT_EQ(s.m, 60);
  EXPECT_NEAR(s.spacing(), 0.5, 1e-15);
  auto alg = algorithm_from_corner(s);
  for (cplx mu : {cplx(-1.0, 0.0), cplx(0.0, 1.0), cplx(1.05, 0.2), cplx(2.0, 0.0)}) {
    cplx ideal = corner_map_eval(1.5, 1.0, mu);
    EXPECT_LT(std::abs(algorithm_map_eval(alg, mu) - ideal) / std::abs(ideal), 2e-2);
  }
}
