#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "rieszlab/common.hpp"
#include "rieszlab/gauge.hpp"
#include "rieszlab/geometry.hpp"

namespace rieszlab {

// Weighted point cloud. Points are stored flat (d doubles per point); tag[i]
// is the bottom-level cube that owns point i.
struct DiscreteMeasure {
  int d = 0;
  std::vector<double> x;
  std::vector<double> w;
  std::vector<std::uint64_t> tag;

  std::size_t size() const { return w.size(); }
  const double* point(std::size_t i) const { return x.data() + i * d; }

  void push(const double* p, double weight, std::uint64_t t) {
    x.insert(x.end(), p, p + d);
    w.push_back(weight);
    tag.push_back(t);
  }

  double total_mass() const {
    CompensatedSum acc;
    for (double v : w) acc.add(v);
    return acc.value();
  }
};

inline DiscreteMeasure scale_measure(DiscreteMeasure nu, double factor) {
  for (double& v : nu.w) v *= factor;
  return nu;
}

inline DiscreteMeasure filter_measure(const DiscreteMeasure& nu, const std::vector<char>& keep) {
  if (keep.size() != nu.size()) throw ConfigError("keep mask size mismatch");
  DiscreteMeasure out;
  out.d = nu.d;
  for (std::size_t i = 0; i < nu.size(); ++i)
    if (keep[i]) out.push(nu.point(i), nu.w[i], nu.tag[i]);
  return out;
}

inline constexpr std::uint64_t max_points = std::uint64_t(1) << 24;

// One unit mass split evenly over the bottom-level cube centers.
inline DiscreteMeasure discretize_centers(const CantorSet& set) {
  DiscreteMeasure nu;
  nu.d = set.d;
  std::uint64_t cnt = set.level_count(set.n);
  nu.x.reserve(cnt * set.d);
  double mass = std::ldexp(1.0, -set.d * set.n);
  double c[max_dim];
  for (std::uint64_t k = 0; k < cnt; ++k) {
    set.center_of(set.n, k, c);
    nu.push(c, mass, k);
  }
  return nu;
}

// q^d tensor-grid nodes per bottom cube (q odd keeps the cloud symmetric
// under reflection through each cube center, which the principal-value
// cancellations rely on). Per-cube mass stays 2^{-dn}.
inline DiscreteMeasure discretize_grid(const CantorSet& set, int q) {
  if (q < 1 || q % 2 == 0) throw ConfigError("grid order must be odd and positive");
  std::uint64_t per_cube = 1;
  for (int a = 0; a < set.d; ++a) per_cube *= std::uint64_t(q);
  std::uint64_t cnt = set.level_count(set.n);
  if (cnt > max_points / per_cube) throw ConfigError("grid point count exceeds the 2^24 cap");
  DiscreteMeasure nu;
  nu.d = set.d;
  nu.x.reserve(cnt * per_cube * set.d);
  double edge = set.ladder.ell[set.n - 1];
  double mass = std::ldexp(1.0, -set.d * set.n) / double(per_cube);
  std::vector<double> off(q);
  for (int i = 0; i < q; ++i) off[i] = edge * double(2 * i + 1 - q) / double(2 * q);
  double c[max_dim], p[max_dim];
  std::vector<int> idx(set.d, 0);
  for (std::uint64_t k = 0; k < cnt; ++k) {
    set.center_of(set.n, k, c);
    std::fill(idx.begin(), idx.end(), 0);
    for (std::uint64_t node = 0; node < per_cube; ++node) {
      for (int a = 0; a < set.d; ++a) p[a] = c[a] + off[idx[a]];
      nu.push(p, mass, k);
      for (int a = 0; a < set.d; ++a) {
        if (++idx[a] < q) break;
        idx[a] = 0;
      }
    }
  }
  return nu;
}

// ---- ball probes ----

// nu(closed ball B(center, r)) by direct summation in storage order.
inline double ball_mass(const DiscreteMeasure& nu, const double* center, double r) {
  double r2 = r * r;
  CompensatedSum acc;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const double* p = nu.point(i);
    double d2 = 0;
    for (int a = 0; a < nu.d; ++a) {
      double diff = p[a] - center[a];
      d2 += diff * diff;
    }
    if (d2 <= r2) acc.add(nu.w[i]);
  }
  return acc.value();
}

struct GrowthReport {
  double constant = 0.0;
  std::size_t arg_point = 0;
  double arg_radius = 0.0;
  std::vector<double> radii;
};

// sup over probe balls of nu(B(x, r)) / denom(r), centers running over the
// points of nu. Exact on the probe family; a lower bound for the full sup.
inline GrowthReport probe_sup(const DiscreteMeasure& nu, const std::vector<double>& radii,
                              const std::function<double(double)>& denom) {
  if (nu.size() == 0) throw ConfigError("empty measure");
  if (radii.empty()) throw ConfigError("empty probe radius family");
  std::vector<double> dvals(radii.size());
  for (std::size_t r = 0; r < radii.size(); ++r) {
    if (!(radii[r] > 0.0)) throw ConfigError("probe radii must be positive");
    dvals[r] = denom(radii[r]);
    if (!(dvals[r] > 0.0)) throw ConfigError("probe denominator must be positive");
  }
  std::vector<double> best(nu.size(), 0.0);
  std::vector<std::size_t> best_r(nu.size(), 0);
  parallel_for(nu.size(), 0, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      for (std::size_t r = 0; r < radii.size(); ++r) {
        double v = ball_mass(nu, nu.point(i), radii[r]) / dvals[r];
        if (v > best[i]) {
          best[i] = v;
          best_r[i] = r;
        }
      }
    }
  });
  GrowthReport rep;
  rep.radii = radii;
  for (std::size_t i = 0; i < nu.size(); ++i)
    if (best[i] > rep.constant) {
      rep.constant = best[i];
      rep.arg_point = i;
      rep.arg_radius = radii[best_r[i]];
    }
  return rep;
}

// Probe radii for growth checks on a built set: circumball diameters scale by
// scale, plus half the bottom edge to see single points.
inline std::vector<double> growth_radii(const CantorSet& set) {
  std::vector<double> radii;
  double rootd = std::sqrt(double(set.d));
  for (int j = 1; j <= set.n; ++j) radii.push_back(rootd * set.ladder.ell[j - 1]);
  radii.push_back(0.5 * set.ladder.ell[set.n - 1]);
  return radii;
}

inline GrowthReport growth_constant(const DiscreteMeasure& nu, double s,
                                    const std::vector<double>& radii) {
  return probe_sup(nu, radii, [s](double r) { return std::pow(r, s); });
}

// ---- gauge witness ----

struct PsiWitness {
  DiscreteMeasure measure;
  double mass = 0.0;  // h(sigma_0), recovered as 2^d h(sigma_1)
  double frostman_constant = 0.0;
  GrowthReport probe;
};

inline PsiWitness psi_witness(const CantorSet& set, const GaugeFunction& h) {
  PsiWitness out;
  out.mass = std::ldexp(h(set.ladder.sigma[0]), set.d);
  out.measure = scale_measure(discretize_centers(set), out.mass);
  std::vector<double> radii;
  double rootd = std::sqrt(double(set.d));
  for (int j = 1; j <= set.n; ++j) radii.push_back(rootd * set.ladder.ell[j - 1]);
  out.probe = probe_sup(out.measure, radii, [&h](double r) { return h(r); });
  out.frostman_constant = out.probe.constant;
  // Probe the circumball of every cube as well. This makes the constant
  // dominate cube mass / h(cover radius) at each level, so the certified
  // lower content bound can never cross the circumball cover bound.
  for (int j = 1; j <= set.n; ++j) {
    double r = 0.5 * rootd * set.ladder.ell[j - 1];
    double hr = h(r);
    if (!(hr > 0.0)) throw NumericError("gauge vanishes at a probe radius");
    std::vector<double> centers = set.level_centers(j);
    std::uint64_t count = set.level_count(j);
    for (std::uint64_t k = 0; k < count; ++k) {
      double v = ball_mass(out.measure, centers.data() + k * set.d, r) / hr;
      if (v > out.frostman_constant) {
        out.frostman_constant = v;
        out.probe.arg_radius = r;
      }
    }
  }
  return out;
}

// ---- content bounds ----

struct ContentBounds {
  double lower = 0.0;
  double upper = 0.0;
  int upper_level = 0;
  double psi_mass = 0.0;
  double frostman_constant = 0.0;
};

// Two-sided bounds on the h-content of the bottom-level cube union: cover by
// level-j circumballs from above, mass distribution of the witness from
// below.
inline ContentBounds content_bounds(const CantorSet& set, const GaugeFunction& h) {
  ContentBounds out;
  double rootd = std::sqrt(double(set.d));
  out.upper = std::numeric_limits<double>::infinity();
  for (int j = 1; j <= set.n; ++j) {
    double cover = std::ldexp(1.0, set.d * j) * h(0.5 * rootd * set.ladder.ell[j - 1]);
    if (cover < out.upper) {
      out.upper = cover;
      out.upper_level = j;
    }
  }
  PsiWitness psi = psi_witness(set, h);
  out.psi_mass = psi.mass;
  out.frostman_constant = psi.frostman_constant;
  out.lower = psi.mass / psi.frostman_constant;
  if (!(out.lower <= out.upper * (1.0 + 1e-12)))
    throw InvariantError("content bounds cross: lower exceeds upper");
  return out;
}

// ---- export ----
// First line: JSON metadata. Then one line per point: x_1 ... x_d weight tag.

inline void write_measure(std::ostream& os, const DiscreteMeasure& nu) {
  os << "{\"schema_version\":1,\"d\":" << nu.d << ",\"count\":" << nu.size()
     << ",\"total_mass\":" << format_g17(nu.total_mass()) << "}\n";
  for (std::size_t i = 0; i < nu.size(); ++i) {
    const double* p = nu.point(i);
    for (int a = 0; a < nu.d; ++a) os << format_g17(p[a]) << " ";
    os << format_g17(nu.w[i]) << " " << nu.tag[i] << "\n";
  }
}

}  // namespace rieszlab
