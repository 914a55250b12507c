#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "rieszlab/common.hpp"
#include "rieszlab/measure.hpp"
#include "rieszlab/riesz.hpp"

namespace rieszlab {

// The truncated Riesz operator on L^2(nu): scalar functions on the nodes map
// to d-vector fields on the nodes. eps = 0 means every pair of distinct
// locations interacts (the principal-value matrix with zero diagonal).
struct RieszOperator {
  const DiscreteMeasure* nu = nullptr;
  double eps = 0.0;
  double s = 1.0;
  int workers = 0;

  std::size_t nodes() const { return nu->size(); }
  int dim() const { return nu->d; }

  // out[i*d + a] = sum_{j : |x_j - x_i| > eps} K_a(x_j - x_i) f[j] w_j
  void apply_forward(const std::vector<double>& f, std::vector<double>& out) const {
    const int d = nu->d;
    const std::size_t N = nu->size();
    if (f.size() != N) throw ConfigError("forward input must be scalar on the nodes");
    out.assign(N * d, 0.0);
    const double eps2 = eps * eps;
    parallel_for(N, workers, [&](std::size_t b, std::size_t e) {
      std::vector<CompensatedSum> acc(d);
      for (std::size_t i = b; i < e; ++i) {
        const double* x = nu->point(i);
        for (int a = 0; a < d; ++a) acc[a] = CompensatedSum{};
        for (std::size_t j = 0; j < N; ++j) {
          double diff[max_dim];
          double r2 = 0;
          for (int a = 0; a < d; ++a) {
            diff[a] = nu->point(j)[a] - x[a];
            r2 += diff[a] * diff[a];
          }
          if (r2 <= eps2 || r2 == 0.0) continue;
          double factor = (s == 1.0) ? nu->w[j] / r2 : nu->w[j] * std::pow(r2, -0.5 * (s + 1.0));
          double fj = f[j];
          for (int a = 0; a < d; ++a) acc[a].add(diff[a] * factor * fj);
        }
        for (int a = 0; a < d; ++a) out[i * d + a] = acc[a].value();
      }
    });
  }

  // out[j] = sum_{i : |x_j - x_i| > eps} K(x_j - x_i) . g_i w_i, the adjoint
  // in the nu-weighted inner product.
  void apply_adjoint(const std::vector<double>& g, std::vector<double>& out) const {
    const int d = nu->d;
    const std::size_t N = nu->size();
    if (g.size() != N * std::size_t(d)) throw ConfigError("adjoint input must be a vector field");
    out.assign(N, 0.0);
    const double eps2 = eps * eps;
    parallel_for(N, workers, [&](std::size_t b, std::size_t e) {
      for (std::size_t j = b; j < e; ++j) {
        const double* xj = nu->point(j);
        CompensatedSum acc;
        for (std::size_t i = 0; i < N; ++i) {
          double diff[max_dim];
          double r2 = 0;
          for (int a = 0; a < d; ++a) {
            diff[a] = xj[a] - nu->point(i)[a];
            r2 += diff[a] * diff[a];
          }
          if (r2 <= eps2 || r2 == 0.0) continue;
          double factor = (s == 1.0) ? nu->w[i] / r2 : nu->w[i] * std::pow(r2, -0.5 * (s + 1.0));
          double dot = 0;
          for (int a = 0; a < d; ++a) dot += diff[a] * g[i * d + a];
          acc.add(dot * factor);
        }
        out[j] = acc.value();
      }
    });
  }
};

inline double weighted_dot(const DiscreteMeasure& nu, const std::vector<double>& u,
                           const std::vector<double>& v) {
  if (u.size() != v.size()) throw ConfigError("inner product size mismatch");
  std::size_t comps = u.size() / nu.size();
  CompensatedSum acc;
  for (std::size_t i = 0; i < nu.size(); ++i)
    for (std::size_t c = 0; c < comps; ++c) acc.add(nu.w[i] * u[i * comps + c] * v[i * comps + c]);
  return acc.value();
}

inline double weighted_norm(const DiscreteMeasure& nu, const std::vector<double>& u) {
  return std::sqrt(weighted_dot(nu, u, u));
}

struct OperatorNormResult {
  double norm = 0.0;
  int iterations = 0;
  bool restarted = false;
  std::vector<double> trace;       // Rayleigh iterates sqrt(lambda_k)
  std::vector<double> eigvec;      // converged unit vector in L^2(nu)
};

inline constexpr std::uint64_t operator_norm_seed = 0x52AE5EEDBA5EBA11ull;

namespace detail {

enum class PowerOutcome { converged, stalled, annihilated };

inline PowerOutcome power_iterate(const RieszOperator& op, std::vector<double>& f, double tol,
                                  int max_iter, OperatorNormResult& res) {
  const std::size_t N = op.nodes();
  std::vector<double> g, back;
  double nrm = weighted_norm(*op.nu, f);
  if (nrm == 0.0) return PowerOutcome::annihilated;
  for (double& v : f) v /= nrm;
  double prev = -1.0;
  int stable = 0;
  for (int it = 1; it <= max_iter; ++it) {
    op.apply_forward(f, g);
    op.apply_adjoint(g, back);
    double lambda = weighted_dot(*op.nu, back, f);  // = <Af, f> = ||Rf||^2
    double sigma = lambda > 0.0 ? std::sqrt(lambda) : 0.0;
    res.trace.push_back(sigma);
    res.iterations++;
    double bn = weighted_norm(*op.nu, back);
    if (bn == 0.0) return PowerOutcome::annihilated;
    if (prev >= 0.0 && std::abs(sigma - prev) <= tol * std::max(sigma, 1e-300)) {
      if (++stable >= 4) {
        res.norm = sigma;
        res.eigvec = f;
        return PowerOutcome::converged;
      }
    } else {
      stable = 0;
    }
    prev = sigma;
    for (std::size_t i = 0; i < N; ++i) f[i] = back[i] / bn;
  }
  return PowerOutcome::stalled;
}

}  // namespace detail

// Largest singular value of the truncated operator by power iteration on the
// normal operator, fixed seed, relative Rayleigh stagnation stop. A second
// seeded start covers near-degenerate spectra before giving up. A start
// vector annihilated by the normal operator counts as norm 0 only for the
// seeded random starts (exact annihilation of a random vector means the
// matrix is structurally zero); a warm start that dies falls back to the
// random start.
inline OperatorNormResult operator_norm(const RieszOperator& op, double tol = 1e-13,
                                        int max_iter = 20000,
                                        std::uint64_t seed = operator_norm_seed,
                                        const std::vector<double>* warm_start = nullptr) {
  if (!(tol > 0.0)) throw ConfigError("tolerance must be positive");
  const std::size_t N = op.nodes();
  if (N == 0) throw ConfigError("empty measure");
  OperatorNormResult res;
  std::vector<double> f;
  if (warm_start && warm_start->size() == N) {
    f = *warm_start;
    if (detail::power_iterate(op, f, tol, max_iter, res) == detail::PowerOutcome::converged)
      return res;
  }
  for (int attempt = 0; attempt < 2; ++attempt) {
    if (attempt == 1) res.restarted = true;
    Rng rng(attempt == 0 ? seed : seed ^ 0x9E3779B97F4A7C15ull);
    f.resize(N);
    for (std::size_t i = 0; i < N; ++i) f[i] = rng.sym();
    switch (detail::power_iterate(op, f, tol, max_iter, res)) {
      case detail::PowerOutcome::converged:
        return res;
      case detail::PowerOutcome::annihilated:
        res.norm = 0.0;
        return res;
      case detail::PowerOutcome::stalled:
        break;
    }
  }
  std::size_t k = res.trace.size();
  throw NumericError("operator norm did not converge: last iterates " +
                     format_g17(k >= 2 ? res.trace[k - 2] : 0.0) + ", " +
                     format_g17(k >= 1 ? res.trace[k - 1] : 0.0));
}

struct OperatorSweepResult {
  std::vector<double> eps;
  std::vector<double> norms;
  double sup = 0.0;
  double arg_eps = 0.0;
  int total_iterations = 0;
};

// sup over a truncation grid of the fixed-eps operator norms, warm-starting
// each solve from the previous eigenvector. The grid should include 0 when
// principal-value node exclusion is the intended limit.
inline OperatorSweepResult operator_norm_sweep(const DiscreteMeasure& nu, double s,
                                               const std::vector<double>& eps_values,
                                               double tol = 1e-13, int max_iter = 20000,
                                               std::uint64_t seed = operator_norm_seed,
                                               int workers = 0) {
  if (eps_values.empty()) throw ConfigError("empty truncation grid");
  OperatorSweepResult out;
  std::vector<double> warm;
  for (double eps : eps_values) {
    if (eps < 0.0) throw ConfigError("truncation radius must be >= 0");
    RieszOperator op{&nu, eps, s, workers};
    OperatorNormResult r =
        operator_norm(op, tol, max_iter, seed, warm.empty() ? nullptr : &warm);
    if (!r.eigvec.empty()) warm = r.eigvec;
    out.eps.push_back(eps);
    out.norms.push_back(r.norm);
    out.total_iterations += r.iterations;
    if (r.norm > out.sup) {
      out.sup = r.norm;
      out.arg_eps = eps;
    }
  }
  return out;
}

}  // namespace rieszlab
