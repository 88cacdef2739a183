#include <cmath>
#include <numbers>
#include <vector>

#include <gtest/gtest.h>

#include "corner_sgd/contour.hpp"
#include "corner_sgd/corner_theory.hpp"

using namespace corner_sgd;

namespace {

struct MlRef {
  double a, b, x, value;
};

// E_{a,b}(-x) from the power series in 600-digit arithmetic.
const std::vector<MlRef> kMlRefs = {
    {1.3, 1.3, 0.5, 0.80804732952192656},     {1.3, 1.3, 3.0, 0.1072056469970987},
    {1.3, 1.3, 8.0, -0.025565326085686293},   {1.3, 1.3, 20.0, -0.00048822418450495086},
    {1.3, 1.3, 60.0, -8.8778784668388745e-5}, {1.3, 1.3, 200.0, -7.6530550444748807e-6},
    {1.3, 1.0, 0.5, 0.63300793500239904},     {1.3, 1.0, 3.0, -0.084672263992044021},
    {1.3, 1.0, 8.0, -0.071770130057674015},   {1.3, 1.0, 20.0, -0.01184112011002962},
    {1.3, 1.0, 60.0, -0.0039739900718721057}, {1.3, 1.0, 200.0, -0.0011664556086413382},
    {1.5, 1.5, 0.5, 0.89886307554606876},     {1.5, 1.5, 3.0, 0.21497666776826928},
    {1.5, 1.5, 8.0, -0.072657823578414059},   {1.5, 1.5, 20.0, 0.0061985012468613419},
    {1.5, 1.5, 60.0, 3.4491066810954634e-5},  {1.5, 1.5, 200.0, -1.057638074470454e-5},
    {1.5, 1.0, 0.5, 0.66323679487242796},     {1.5, 1.0, 3.0, -0.17556537379997824},
    {1.5, 1.0, 8.0, -0.20287153923872816},    {1.5, 1.0, 20.0, 0.019595747930187506},
    {1.5, 1.0, 60.0, -0.0042085916177409564}, {1.5, 1.0, 200.0, -0.0014100242479369773},
    {1.8, 1.8, 0.5, 0.94464310436027947},     {1.8, 1.8, 3.0, 0.44457236679978917},
    {1.8, 1.8, 8.0, -0.042500795836507274},   {1.8, 1.8, 20.0, -0.092868206049522574},
    {1.8, 1.8, 60.0, -0.010741390587748022},  {1.8, 1.8, 200.0, 6.6577873806400225e-5},
    {1.8, 1.0, 0.5, 0.71992993686215541},     {1.8, 1.0, 3.0, -0.21891138756102455},
    {1.8, 1.0, 8.0, -0.6538864740030768},     {1.8, 1.0, 20.0, 0.20184270449898259},
    {1.8, 1.0, 60.0, -0.20558335977619451},   {1.8, 1.0, 200.0, 0.039793602440140165},
};

}  // namespace

TEST(MittagLeffler, HighPrecisionReferences) {
  for (const auto& r : kMlRefs) {
    double v = mittag_leffler_neg(r.a, r.b, r.x);
    EXPECT_NEAR(v, r.value, 1e-12 + 1e-9 * std::abs(r.value)) << r.a << " " << r.b << " " << r.x;
  }
}

TEST(MittagLeffler, ElementaryCases) {
  // E_{a,b}(0) = 1/Gamma(b)
  EXPECT_NEAR(mittag_leffler_neg(1.5, 2.5, 0.0), 1.0 / std::tgamma(2.5), 1e-15);
  EXPECT_THROW(mittag_leffler_neg(2.0, 1.0, 1.0), config_error);
  EXPECT_THROW(mittag_leffler_neg(1.5, 1.0, -1.0), config_error);
}

TEST(MittagLeffler, MethodsAgreeOnOverlap) {
  for (double a : {1.3, 1.5, 1.8})
    for (double b : {1.0, a}) {
      for (double x : {1.0, 2.5, 5.0}) {
        double s = mittag_leffler_neg(a, b, x, MLMethod::series);
        double q = mittag_leffler_neg(a, b, x, MLMethod::integral);
        EXPECT_NEAR(q, s, 1e-6 * std::abs(s) + 1e-12) << a << " " << b << " " << x;
      }
      double z1 = ml_asymptotic_radius(a);
      for (double x : {z1, 1.5 * z1, 3.0 * z1}) {
        double q = mittag_leffler_neg(a, b, x, MLMethod::integral);
        double g = mittag_leffler_neg(a, b, x, MLMethod::asymptotic);
        EXPECT_NEAR(g, q, 1e-6 * std::abs(q) + 1e-12) << a << " " << b << " " << x;
      }
    }
}

TEST(TemplateConstant, MatchesMapNearOne) {
  for (double theta : {1.2, 1.5, 1.8})
    for (double a : {1.0, 2.0}) {
      // the ratio approaches 1 like eps^{theta-1}; eliminate that term from two gaps
      auto ratio = [&](double eps) {
        return -corner_map_eval(theta, a, cplx(1.0 + eps, 0.0)).real() / std::pow(eps, theta) / c_psi_template(theta, a);
      };
      double e1 = std::ldexp(1.0, -30), e2 = std::ldexp(1.0, -40), p = theta - 1.0;
      double w1 = std::pow(e1, p), w2 = std::pow(e2, p);
      double limit = (ratio(e2) * w1 - ratio(e1) * w2) / (w1 - w2);
      EXPECT_NEAR(limit, 1.0, 1e-4) << theta << " " << a;
    }
}

TEST(TemplateConstant, Values) {
  EXPECT_NEAR(c_psi_template(1.5, 1.0), 2.0 / std::numbers::pi, 1e-15);
  EXPECT_NEAR(c_psi_template(1.99, 1.0), 1.0, 2e-4);
  EXPECT_DOUBLE_EQ(c_psi_template(1.8, 2.0), 2.0 * c_psi_template(1.8, 1.0));
  EXPECT_THROW(c_psi_template(2.0, 1.0), config_error);
}

TEST(Kernels, NegativeArgument) {
  EXPECT_EQ(f_u(-1.0, 1.5, 1.0), 0.0);
  EXPECT_EQ(f_u(0.0, 1.5, 1.0), 0.0);
  EXPECT_EQ(f_v(-1.0, 1.5, 1.0), 0.0);
  EXPECT_EQ(f_v(0.0, 1.5, 1.0), 1.0);
}

TEST(Kernels, SmallAndLargeR) {
  double r = 1e-3;
  EXPECT_NEAR(f_u(r, 1.5, 1.0) / (std::sqrt(r) / std::tgamma(1.5)), 1.0, 1e-2);
  EXPECT_NEAR(f_v(1e-6, 1.5, 1.0), 1.0, 1e-8);
  r = 1e3;
  EXPECT_NEAR(f_u(r, 1.5, 1.0) / (-1.0 / std::tgamma(-1.5) * std::pow(r, -2.5)), 1.0, 0.05);
  EXPECT_NEAR(f_v(r, 1.5, 1.0) / (1.0 / std::tgamma(-0.5) * std::pow(r, -1.5)), 1.0, 0.05);
  // c_psi enters through r^theta / c_psi
  double c = 0.7;
  EXPECT_NEAR(f_v(r, 1.5, c) / (c / std::tgamma(-0.5) * std::pow(r, -1.5)), 1.0, 0.05);
  EXPECT_NEAR(f_u(r, 1.5, c) / (-c / std::tgamma(-1.5) * std::pow(r, -2.5)), 1.0, 0.05);
}

TEST(Coefficients, PositiveAndFinite) {
  for (double theta : {1.2, 1.5, 1.9})
    for (double nu : {1.5, 4.0})
      for (double zeta : {0.1, 1.0, 1.9}) {
        auto c = corner_asymptotics(theta, 1.0, nu, zeta, 1.0, 1.0, 1.0, 1);
        EXPECT_GT(c.c_u, 0.0);
        EXPECT_GT(c.c_v, 0.0);
        EXPECT_TRUE(std::isfinite(c.c_u) && std::isfinite(c.c_v));
        EXPECT_DOUBLE_EQ(c.v_exponent(), theta * zeta);
        EXPECT_DOUBLE_EQ(c.u_exponent(), 2.0 - theta / nu);
      }
}

TEST(Coefficients, BatchAndSourceScaling) {
  double cp = c_psi_template(1.5, 1.0);
  EXPECT_DOUBLE_EQ(c_u_coefficient(1.5, 4.0, 1.0, 1.0, 2, cp), c_u_coefficient(1.5, 4.0, 1.0, 1.0, 1, cp) / 2.0);
  EXPECT_NEAR(c_v_coefficient(1.5, 0.25, 3.0, cp), 3.0 * c_v_coefficient(1.5, 0.25, 1.0, cp), 1e-14);
  EXPECT_NEAR(c_u_coefficient(1.5, 4.0, 16.0, 1.0, 1, cp), 2.0 * c_u_coefficient(1.5, 4.0, 1.0, 1.0, 1, cp), 1e-14);
}

TEST(Coefficients, QuadratureSelfConvergence) {
  double cp = c_psi_template(1.5, 1.0);
  double u4 = c_u_coefficient(1.5, 4.0, 1.0, 1.0, 1, cp, 4.0), u8 = c_u_coefficient(1.5, 4.0, 1.0, 1.0, 1, cp, 8.0);
  double v4 = c_v_coefficient(1.5, 0.25, 1.0, cp, 4.0), v8 = c_v_coefficient(1.5, 0.25, 1.0, cp, 8.0);
  EXPECT_NEAR(u4 / u8, 1.0, 1e-4);
  EXPECT_NEAR(v4 / v8, 1.0, 1e-4);
}

// Independent check of the radial integral: plain midpoint rule in log r over a wider range.
TEST(Coefficients, MatchesBruteForceIntegral) {
  double theta = 1.5, zeta = 0.25, cp = c_psi_template(theta, 1.0);
  const int n = 40000;
  double lo = std::log(1e-9), hi = std::log(1e8), h = (hi - lo) / n, acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double r = std::exp(lo + (i + 0.5) * h);
    double f = f_v(r, theta, cp);
    acc += std::pow(r, theta * zeta) * f * f * h;
  }
  acc += std::pow(1e-9, theta * zeta) / (theta * zeta);
  EXPECT_NEAR(c_v_coefficient(theta, zeta, 1.0, cp) / (theta * zeta * acc), 1.0, 1e-5);
}

TEST(Coefficients, RejectsDivergentParameters) {
  EXPECT_THROW(c_v_coefficient(1.5, 2.0, 1.0, 1.0), config_error);
  EXPECT_THROW(c_v_coefficient(1.5, 0.0, 1.0, 1.0), config_error);
  EXPECT_THROW(c_u_coefficient(1.5, 1.0, 1.0, 1.0, 1, 1.0), config_error);
  EXPECT_THROW(c_u_coefficient(2.0, 4.0, 1.0, 1.0, 1, 1.0), config_error);
}

TEST(ThetaMax, Examples) {
  auto a = theta_max(0.25, 4.0);
  EXPECT_DOUBLE_EQ(a.theta_max, 2.0);
  EXPECT_EQ(a.region, PhaseRegion::I_full);
  auto b = theta_max(0.25, 1.3);
  EXPECT_DOUBLE_EQ(b.theta_max, 1.3);
  EXPECT_EQ(b.region, PhaseRegion::III_usigma_limited);
  auto c = theta_max(1.0, 2.0);
  EXPECT_DOUBLE_EQ(c.theta_max, 4.0 / 3.0);
  EXPECT_EQ(c.region, PhaseRegion::II_balanced);
  auto d = theta_max(1.9, 2.0);
  EXPECT_EQ(d.region, PhaseRegion::outside);
  EXPECT_TRUE(std::isnan(d.theta_max));
  EXPECT_EQ(theta_max(0.5, 0.9).region, PhaseRegion::outside);
  EXPECT_EQ(theta_max(0.0, 3.0).region, PhaseRegion::outside);
}

TEST(ThetaMax, ContinuityAcrossBoundaries) {
  // I/II boundary at zeta + 1/nu = 1, I/III boundary at nu = 2
  for (double zeta : {0.2, 0.4}) {
    double nu = 1.0 / (1.0 - zeta);
    EXPECT_NEAR(theta_max(zeta - 1e-9, nu).theta_max, theta_max(zeta + 1e-9, nu).theta_max, 1e-8);
  }
  EXPECT_NEAR(theta_max(0.3, 2.0 - 1e-9).theta_max, theta_max(0.3, 2.0 + 1e-9).theta_max, 1e-8);
}

TEST(ThetaMax, Monotone) {
  for (double nu : {1.2, 2.0, 5.0}) {
    double prev = 3.0;
    for (double zeta = 0.01; zeta < 2.0 - 1.0 / nu; zeta += 0.01) {
      double t = theta_max(zeta, nu).theta_max;
      EXPECT_LE(t, prev + 1e-15);
      prev = t;
    }
  }
  for (double zeta : {0.1, 0.5, 0.9}) {
    double prev = 0.0;
    for (double nu = 1.01; nu < 10.0; nu += 0.05) {
      auto c = theta_max(zeta, nu);
      if (c.region == PhaseRegion::outside) continue;
      EXPECT_GE(c.theta_max, prev - 1e-15);
      prev = c.theta_max;
    }
  }
}

TEST(PhaseSweep, GridPoints) {
  std::vector<double> zetas{0.5, 1.5, 1.9}, inv{0.0, 0.4, 0.5};
  auto cells = phase_sweep(zetas, inv);
  ASSERT_EQ(cells.size(), 9u);
  EXPECT_EQ(cells[0].region, PhaseRegion::outside);  // 1/nu = 0
  EXPECT_DOUBLE_EQ(cells[2].theta_max, 2.0);         // (0.5, 0.5): all three expressions meet
  EXPECT_DOUBLE_EQ(cells[4].theta_max, 2.0 / 1.9);
  EXPECT_EQ(cells[4].region, PhaseRegion::II_balanced);
  EXPECT_EQ(cells[8].region, PhaseRegion::outside);
  for (std::size_t i = 0; i < cells.size(); ++i) {
    EXPECT_EQ(cells[i].zeta, zetas[i / 3]);
    EXPECT_EQ(cells[i].inv_nu, inv[i % 3]);
  }
  EXPECT_EQ(to_string(PhaseRegion::II_balanced), "II");
}
