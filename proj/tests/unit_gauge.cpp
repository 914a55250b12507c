#include <gtest/gtest.h>

#include <cmath>

#include "rieszlab/gauge.hpp"

using namespace rieszlab;

TEST(GaugeFunction, PowerEvaluateAndInverse) {
  GaugeFunction g = GaugeFunction::power(1.5, 2);
  EXPECT_DOUBLE_EQ(g(4.0), 8.0);
  EXPECT_NEAR(g.inverse(8.0), 4.0, 1e-12);
  EXPECT_NEAR(g.inverse(1e-9), std::pow(1e-9, 1.0 / 1.5), 1e-9 * std::pow(1e-9, 1.0 / 1.5));
  EXPECT_THROW(g.inverse(-1.0), NumericError);
  EXPECT_THROW(GaugeFunction::power(0.0, 2), ConfigError);
}

TEST(GaugeFunction, ValidateCatchesBadGrowth) {
  GaugeFunction ok = GaugeFunction::power(1.5, 2);
  EXPECT_NO_THROW(ok.validate(1e-6, 1.0));

  // exponent above the dimension breaks the doubling regularity h(2t) <= 2^d h(t)
  GaugeFunction toofast = GaugeFunction::power(2.5, 2);
  EXPECT_THROW(toofast.validate(1e-6, 1.0), ConfigError);

  GaugeFunction decreasing;
  decreasing.dim = 2;
  decreasing.name = "1/t";
  decreasing.h = [](double t) { return 1.0 / t; };
  EXPECT_THROW(decreasing.validate(1e-3, 1.0), ConfigError);
}

TEST(Quadrature, AdaptiveSimpsonClosedForms) {
  auto cube = [](double t) { return t * t * t; };
  EXPECT_NEAR(integrate_adaptive(cube, 0.0, 2.0), 4.0, 1e-10);
  auto expf = [](double t) { return std::exp(t); };
  EXPECT_NEAR(integrate_adaptive(expf, 0.0, 1.0), std::exp(1.0) - 1.0, 1e-9);
}

TEST(Quadrature, EnergyIntegralPowerGauge) {
  // h = t^beta: integral_a^b (h/t^s)^2 dt/t = [t^{2(beta-s)}/(2(beta-s))]_a^b
  GaugeFunction g = GaugeFunction::power(1.5, 2);
  double s = 1.0, a = 1e-4, b = 0.5;
  double expo = 2.0 * (1.5 - s);
  double exact = (std::pow(b, expo) - std::pow(a, expo)) / expo;
  EXPECT_NEAR(gauge_energy_integral(g, s, a, b), exact, 1e-8 * exact);

  // beta = s degenerates to log(b/a)
  GaugeFunction gs = GaugeFunction::power(1.0, 2);
  EXPECT_NEAR(gauge_energy_integral(gs, 1.0, a, b), std::log(b / a), 1e-8 * std::log(b / a));
}

TEST(Calibration, KappaClosedFormAtBetaEqualsS) {
  // h = t^s: kappa(sigma) = sqrt(ln N / s) / (P sigma^s), independent of which
  // sigma as long as the inverse window tracks it
  GaugeFunction g = GaugeFunction::power(1.0, 2);
  double s = 1.0, P = 2.0, N = 256.0, sigma = 0.37;
  double exact = std::sqrt(std::log(N) / s) / (P * std::pow(sigma, s));
  EXPECT_NEAR(calibration_kappa(g, s, sigma, P, N), exact, 1e-6 * exact);
}

TEST(Calibration, Sigma0ClosedForm) {
  // h = t^s, kappa(sigma) = C4 at sigma0^s = sqrt(d n ln 2 / s) / (P C4)
  int d = 2, n = 4;
  double s = 1.0, P = 1.0, C4 = 2.0;
  GaugeFunction g = GaugeFunction::power(s, d);
  double sigma0 = calibrate_sigma0(g, P, C4, d, s, n);
  double exact = std::sqrt(double(d) * n * std::log(2.0) / s) / (P * C4);
  EXPECT_NEAR(std::pow(sigma0, s), exact, 1e-5 * exact);
}

TEST(Calibration, SigmaFromGaugeIsGeometricForPowerGauge) {
  // h = t^beta gives sigma_j = sigma0 2^{-d j / beta}
  int d = 2, n = 5;
  double beta = 1.5, sigma0 = 0.8;
  GaugeFunction g = GaugeFunction::power(beta, d);
  SigmaSequence seq = sigma_from_gauge(g, sigma0, d, n);
  ASSERT_EQ(seq.n(), n);
  for (int j = 1; j <= n; ++j) {
    double exact = sigma0 * std::exp2(-double(d) * j / beta);
    EXPECT_NEAR(seq.sigma[j - 1], exact, 1e-10 * exact) << "j=" << j;
  }
  EXPECT_NO_THROW(seq.validate());

  // beta = s = 1, d = 2 is the quarter family anchored at sigma0
  GaugeFunction gs = GaugeFunction::power(1.0, 2);
  SigmaSequence qs = sigma_from_gauge(gs, 1.0, 2, 3);
  EXPECT_NEAR(qs.sigma[0], 0.25, 1e-12);
  EXPECT_NEAR(qs.sigma[1], 0.0625, 1e-12);
  EXPECT_NEAR(qs.sigma[2], 0.015625, 1e-12);
}
