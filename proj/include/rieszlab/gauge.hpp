#pragma once

#include <cmath>
#include <functional>
#include <string>

#include "rieszlab/common.hpp"
#include "rieszlab/sequence.hpp"

namespace rieszlab {

// Increasing gauge h with h(0) = 0, h(inf) = inf and h(r)/r^dim nonincreasing.
// The inverse is always computed numerically (log-scale bisection) so that
// arbitrary evaluators behave the same as closed-form ones.
struct GaugeFunction {
  std::function<double(double)> h;
  int dim = 0;           // dimension used by the regularity condition
  std::string name;      // for reports

  static GaugeFunction power(double beta, int dim_) {
    if (!(beta > 0.0)) throw ConfigError("gauge exponent must be positive");
    GaugeFunction g;
    g.h = [beta](double t) { return std::pow(t, beta); };
    g.dim = dim_;
    g.name = "t^" + format_g17(beta);
    return g;
  }

  double operator()(double t) const { return h(t); }

  // Solves h(t) = y. Brackets by repeated doubling/halving, then bisects the
  // bracket on a log scale; 200 iterations pin the root to round-off.
  double inverse(double y) const {
    if (!(y > 0.0) || !std::isfinite(y)) throw NumericError("gauge inverse: target must be positive finite");
    double lo = 1.0, hi = 1.0;
    int guard = 0;
    while (h(lo) > y) {
      lo *= 0.5;
      if (++guard > 2100) throw NumericError("gauge inverse: no lower bracket");
    }
    guard = 0;
    while (h(hi) < y) {
      hi *= 2.0;
      if (++guard > 2100) throw NumericError("gauge inverse: no upper bracket");
    }
    for (int it = 0; it < 200 && lo < hi; ++it) {
      double mid = std::sqrt(lo) * std::sqrt(hi);
      if (!(mid > lo && mid < hi)) break;
      if (h(mid) < y)
        lo = mid;
      else
        hi = mid;
    }
    return 0.5 * (lo + hi);
  }

  // Samples a log grid and checks monotonicity plus the doubling regularity
  // h(t2)/h(t1) <= (t2/t1)^dim.
  void validate(double tmin, double tmax, int samples = 64) const {
    if (!(tmin > 0.0 && tmax > tmin)) throw ConfigError("gauge validation range must satisfy 0 < tmin < tmax");
    double prev_t = tmin, prev_h = h(tmin);
    if (!(prev_h > 0.0)) throw ConfigError("gauge must be positive on (0, inf)");
    double step = std::pow(tmax / tmin, 1.0 / samples);
    for (int i = 1; i <= samples; ++i) {
      double t = tmin * std::pow(step, i);
      double v = h(t);
      if (!(v > prev_h)) throw ConfigError("gauge must be strictly increasing");
      double growth = v / prev_h;
      double cap = std::pow(t / prev_t, static_cast<double>(dim));
      if (growth > cap * (1.0 + 1e-9))
        throw ConfigError("gauge violates h(r)/r^d nonincreasing regularity");
      prev_t = t;
      prev_h = v;
    }
  }
};

// Adaptive Simpson on [a, b] with relative tolerance; used for the
// calibration integrals, which are smooth after the log substitution.
namespace detail {
inline double simpson(double a, double b, double fa, double fm, double fb) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}
inline double adapt(const std::function<double(double)>& f, double a, double m, double b,
                    double fa, double fm, double fb, double whole, double tol, int depth) {
  double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  double flm = f(lm), frm = f(rm);
  double left = simpson(a, m, fa, flm, fm);
  double right = simpson(m, b, fm, frm, fb);
  double delta = left + right - whole;
  if (depth <= 0) throw NumericError("adaptive quadrature: recursion limit");
  if (std::abs(delta) <= 15.0 * tol * (std::abs(left) + std::abs(right) + 1e-300))
    return left + right + delta / 15.0;
  return adapt(f, a, lm, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adapt(f, m, rm, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}
}  // namespace detail

inline double integrate_adaptive(const std::function<double(double)>& f, double a, double b,
                                 double rel_tol = 1e-8, int max_depth = 60) {
  if (a == b) return 0.0;
  double m = 0.5 * (a + b);
  double fa = f(a), fm = f(m), fb = f(b);
  double whole = detail::simpson(a, b, fa, fm, fb);
  return detail::adapt(f, a, m, b, fa, fm, fb, whole, rel_tol, max_depth);
}

// integral_{a}^{b} (h(t)/t^s)^2 dt/t via u = ln t
inline double gauge_energy_integral(const GaugeFunction& g, double s, double a, double b,
                                    double rel_tol = 1e-8) {
  if (!(a > 0.0 && b >= a)) throw ConfigError("integration bounds must satisfy 0 < a <= b");
  if (a == b) return 0.0;
  auto f = [&](double u) {
    double t = std::exp(u);
    double v = g(t) / std::pow(t, s);
    return v * v;
  };
  return integrate_adaptive(f, std::log(a), std::log(b), rel_tol);
}

// kappa(sigma) = [integral_{a_sigma}^{sigma} (h/t^s)^2 dt/t]^{1/2} / (P h(sigma))
// with h(a_sigma) = h(sigma)/N.
inline double calibration_kappa(const GaugeFunction& g, double s, double sigma, double P,
                                double N) {
  double hs = g(sigma);
  double a = g.inverse(hs / N);
  double I = gauge_energy_integral(g, s, a, sigma);
  return std::sqrt(I) / (P * hs);
}

// Finds the first sigma_0, scanning downward from large sigma, where
// kappa(sigma_0) = C4; kappa stays below C4 for sigma > sigma_0.
inline double calibrate_sigma0(const GaugeFunction& g, double P, double C4, int d, double s,
                               int n) {
  if (!(P > 0.0 && C4 > 0.0)) throw ConfigError("P and C4 must be positive");
  if (d < 1 || n < 1) throw ConfigError("d and n must be >= 1");
  double N = std::ldexp(1.0, d * n);
  auto kappa = [&](double sig) { return calibration_kappa(g, s, sig, P, N); };
  double hi = 1.0;
  int guard = 0;
  while (kappa(hi) >= C4) {
    hi *= 2.0;
    if (++guard > 2100) throw NumericError("calibration: kappa never drops below C4");
  }
  double lo = hi;
  guard = 0;
  do {
    lo *= 0.5;
    if (++guard > 2100) throw NumericError("calibration: kappa never reaches C4");
  } while (kappa(lo) < C4);
  // first crossing from above lies in [lo, 2 lo]
  double a = lo, b = 2.0 * lo;
  for (int it = 0; it < 200; ++it) {
    double mid = std::sqrt(a) * std::sqrt(b);
    if (!(mid > a && mid < b)) break;
    if (kappa(mid) >= C4)
      a = mid;
    else
      b = mid;
    if (std::abs(kappa(a) - C4) <= 1e-9 * C4) break;
  }
  double sigma0 = a;
  if (std::abs(kappa(sigma0) - C4) > 1e-6 * C4)
    throw NumericError("calibration did not converge: kappa(sigma0) off by more than 1e-6 rel");
  return sigma0;
}

// sigma_j = h^{-1}(2^{-dj} h(sigma_0)), j = 1..n. Regularity of h guarantees
// 2 sigma_{j+1} <= sigma_j; inverse round-off within 1e-12 is absorbed, any
// larger violation is an error.
inline SigmaSequence sigma_from_gauge(const GaugeFunction& g, double sigma0, int d, int n) {
  if (!(sigma0 > 0.0)) throw ConfigError("sigma0 must be positive");
  if (d < 1 || n < 1) throw ConfigError("d and n must be >= 1");
  double h0 = g(sigma0);
  SigmaSequence seq;
  seq.sigma.resize(n);
  double prev = sigma0;
  for (int j = 1; j <= n; ++j) {
    double v = g.inverse(std::ldexp(h0, -d * j));
    double cap = 0.5 * prev;
    if (v > cap) {
      if (v > cap * (1.0 + 1e-12))
        throw NumericError("gauge-generated sigma violates halving at level " + std::to_string(j));
      v = cap;
    }
    seq.sigma[j - 1] = v;
    prev = v;
  }
  seq.validate();
  return seq;
}

}  // namespace rieszlab
