#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rieszlab/common.hpp"
#include "rieszlab/geometry.hpp"
#include "rieszlab/measure.hpp"

namespace rieszlab {

// K(x) = x / |x|^{s+1}; odd, homogeneous of degree -s.
inline void riesz_kernel(const double* x, int d, double s, double* out) {
  double r2 = 0;
  for (int a = 0; a < d; ++a) r2 += x[a] * x[a];
  if (r2 == 0.0) throw ConfigError("kernel evaluated at the origin");
  double factor = (s == 1.0) ? 1.0 / r2 : std::pow(r2, -0.5 * (s + 1.0));
  for (int a = 0; a < d; ++a) out[a] = x[a] * factor;
}

enum class Exclude { none, own_node, own_cube };

inline Exclude parse_exclude(const std::string& name) {
  if (name == "none") return Exclude::none;
  if (name == "own_node") return Exclude::own_node;
  if (name == "own_cube") return Exclude::own_cube;
  throw ConfigError("unknown exclusion mode: " + name);
}

struct RieszField {
  int d = 0;
  double eps = 0.0;
  double s = 0.0;
  std::vector<double> targets;
  std::vector<double> values;

  std::size_t size() const { return values.size() / (d ? d : 1); }
  const double* target(std::size_t i) const { return targets.data() + i * d; }
  const double* value(std::size_t i) const { return values.data() + i * d; }
  double magnitude(std::size_t i) const {
    double r2 = 0;
    const double* v = value(i);
    for (int a = 0; a < d; ++a) r2 += v[a] * v[a];
    return std::sqrt(r2);
  }
};

// Sum of K(y - x) w_y over sources y with |y - x| > eps, minus the excluded
// ones. eps = 0 is the discrete principal value and requires an exclusion
// rule; a coincident source that survives exclusion at eps = 0 is an error.
// Summation runs in storage order with compensated accumulation.
inline RieszField transform_truncated(const DiscreteMeasure& nu, const double* targets,
                                      std::size_t ntargets, double eps, double s,
                                      Exclude exclude,
                                      const std::uint64_t* target_tags = nullptr,
                                      int workers = 0) {
  if (eps < 0.0) throw ConfigError("truncation radius must be >= 0");
  if (eps == 0.0 && exclude == Exclude::none)
    throw ConfigError("eps = 0 requires an exclusion rule");
  if (exclude == Exclude::own_cube && target_tags == nullptr)
    throw ConfigError("own-cube exclusion needs target cube tags");
  const int d = nu.d;
  RieszField field;
  field.d = d;
  field.eps = eps;
  field.s = s;
  field.targets.assign(targets, targets + ntargets * d);
  field.values.assign(ntargets * d, 0.0);
  const double eps2 = eps * eps;
  parallel_for(ntargets, workers, [&](std::size_t tb, std::size_t te) {
    std::vector<CompensatedSum> acc(d);
    for (std::size_t t = tb; t < te; ++t) {
      const double* x = targets + t * d;
      for (int a = 0; a < d; ++a) acc[a] = CompensatedSum{};
      for (std::size_t i = 0; i < nu.size(); ++i) {
        if (exclude == Exclude::own_cube && nu.tag[i] == target_tags[t]) continue;
        const double* y = nu.point(i);
        double diff[max_dim];
        double r2 = 0;
        for (int a = 0; a < d; ++a) {
          diff[a] = y[a] - x[a];
          r2 += diff[a] * diff[a];
        }
        if (r2 == 0.0) {
          if (exclude == Exclude::own_node) continue;
          if (eps == 0.0) throw ConfigError("target coincides with a source node at eps = 0");
          continue;
        }
        if (r2 <= eps2) continue;
        double factor = (s == 1.0) ? nu.w[i] / r2 : nu.w[i] * std::pow(r2, -0.5 * (s + 1.0));
        for (int a = 0; a < d; ++a) acc[a].add(diff[a] * factor);
      }
      for (int a = 0; a < d; ++a) field.values[t * d + a] = acc[a].value();
    }
  });
  return field;
}

inline RieszField transform_at_nodes(const DiscreteMeasure& nu, double eps, double s,
                                     Exclude exclude, int workers = 0) {
  return transform_truncated(nu, nu.x.data(), nu.size(), eps, s, exclude,
                             exclude == Exclude::own_cube ? nu.tag.data() : nullptr, workers);
}

// Truncation grid: every ladder scale and the root diameter scale, with the
// midpoint of each consecutive pair. Ascending, deduplicated.
inline std::vector<double> eps_ladder(const CantorSet& set) {
  std::vector<double> base;
  for (int j = set.n; j >= 1; --j) base.push_back(set.ladder.ell[j - 1]);
  base.push_back(2.0 * set.T * set.ladder.ell[0]);
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end()), base.end());
  std::vector<double> grid;
  for (std::size_t i = 0; i < base.size(); ++i) {
    grid.push_back(base[i]);
    if (i + 1 < base.size()) grid.push_back(0.5 * (base[i] + base[i + 1]));
  }
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end()), grid.end());
  return grid;
}

// Per target, max over the grid of |R_{nu,eps}(x)|. One pass over sources
// sorted by descending distance: each grid eps sees exactly the sources
// beyond it, so every source is accumulated once.
inline std::vector<double> transform_maximal(const DiscreteMeasure& nu, const double* targets,
                                             std::size_t ntargets,
                                             const std::vector<double>& eps_grid, double s,
                                             int workers = 0) {
  if (eps_grid.empty()) throw ConfigError("empty truncation grid");
  for (std::size_t i = 0; i < eps_grid.size(); ++i) {
    if (!(eps_grid[i] > 0.0)) throw ConfigError("truncation grid must be positive");
    if (i > 0 && !(eps_grid[i] > eps_grid[i - 1]))
      throw ConfigError("truncation grid must be strictly increasing");
  }
  const int d = nu.d;
  std::vector<double> out(ntargets, 0.0);
  parallel_for(ntargets, workers, [&](std::size_t tb, std::size_t te) {
    std::vector<std::pair<double, std::size_t>> order(nu.size());
    std::vector<CompensatedSum> acc(d);
    for (std::size_t t = tb; t < te; ++t) {
      const double* x = targets + t * d;
      for (std::size_t i = 0; i < nu.size(); ++i) {
        double r2 = 0;
        for (int a = 0; a < d; ++a) {
          double diff = nu.point(i)[a] - x[a];
          r2 += diff * diff;
        }
        order[i] = {r2, i};
      }
      std::sort(order.begin(), order.end(), [](const auto& u, const auto& v) {
        return u.first > v.first || (u.first == v.first && u.second < v.second);
      });
      for (int a = 0; a < d; ++a) acc[a] = CompensatedSum{};
      std::size_t pos = 0;
      double best = 0.0;
      for (std::size_t g = eps_grid.size(); g-- > 0;) {
        double eps2 = eps_grid[g] * eps_grid[g];
        for (; pos < order.size() && order[pos].first > eps2; ++pos) {
          std::size_t i = order[pos].second;
          double r2 = order[pos].first;
          double factor = (s == 1.0) ? nu.w[i] / r2 : nu.w[i] * std::pow(r2, -0.5 * (s + 1.0));
          for (int a = 0; a < d; ++a) acc[a].add((nu.point(i)[a] - x[a]) * factor);
        }
        double m2 = 0;
        for (int a = 0; a < d; ++a) {
          double v = acc[a].value();
          m2 += v * v;
        }
        best = std::max(best, std::sqrt(m2));
      }
      out[t] = best;
    }
  });
  return out;
}

// ---- shell decomposition ----

// Splits the principal-value transform at x into stage shells: shell p holds
// the sources whose deepest shared frame cell with x is the stage-p one.
struct XiDecomposition {
  int d = 0;
  int m = 0;
  std::vector<double> xi;           // m rows of d components
  std::vector<std::size_t> counts;  // sources per shell
  const double* shell(int p) const { return xi.data() + std::size_t(p - 1) * d; }
  double magnitude(int p) const {
    double r2 = 0;
    for (int a = 0; a < d; ++a) r2 += shell(p)[a] * shell(p)[a];
    return std::sqrt(r2);
  }
  void total(double* out) const {
    for (int a = 0; a < d; ++a) {
      CompensatedSum acc;
      for (int p = 0; p < m; ++p) acc.add(xi[std::size_t(p) * d + a]);
      out[a] = acc.value();
    }
  }
};

inline XiDecomposition xi_decomposition(const DiscreteMeasure& mu, const CantorSet& set,
                                        const double* x, double s) {
  LocateResult loc = locate(set, x);
  if (!loc.inside_set(set.n)) throw ConfigError("shell decomposition target lies outside the set");
  std::uint64_t xtag = loc.levels[set.n - 1];
  const int d = set.d, m = set.stages();
  XiDecomposition out;
  out.d = d;
  out.m = m;
  out.xi.assign(std::size_t(m) * d, 0.0);
  out.counts.assign(m, 0);
  std::vector<CompensatedSum> acc(std::size_t(m) * d);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double* y = mu.point(i);
    double diff[max_dim];
    double r2 = 0;
    for (int a = 0; a < d; ++a) {
      diff[a] = y[a] - x[a];
      r2 += diff[a] * diff[a];
    }
    if (r2 == 0.0) continue;  // principal value: own node dropped
    int shell = 1;
    for (int p = m; p >= 1; --p) {
      int lvl = set.stage_level(p) - 1;
      if (set.ancestor(mu.tag[i], set.n, lvl) == set.ancestor(xtag, set.n, lvl)) {
        shell = p;
        break;
      }
    }
    double factor = (s == 1.0) ? mu.w[i] / r2 : mu.w[i] * std::pow(r2, -0.5 * (s + 1.0));
    for (int a = 0; a < d; ++a) acc[std::size_t(shell - 1) * d + a].add(diff[a] * factor);
    out.counts[shell - 1]++;
  }
  for (int p = 0; p < m; ++p)
    for (int a = 0; a < d; ++a) out.xi[std::size_t(p) * d + a] = acc[std::size_t(p) * d + a].value();
  return out;
}

// ---- norms and export ----

inline double l2_norm(const RieszField& field, const DiscreteMeasure& nu) {
  if (field.size() != nu.size() || field.d != nu.d)
    throw ConfigError("field and measure nodes do not match");
  CompensatedSum acc;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    double m2 = 0;
    const double* v = field.value(i);
    for (int a = 0; a < field.d; ++a) m2 += v[a] * v[a];
    acc.add(m2 * nu.w[i]);
  }
  return std::sqrt(acc.value());
}

inline void write_field(std::ostream& os, const RieszField& field) {
  os << "{\"schema_version\":1,\"d\":" << field.d << ",\"count\":" << field.size()
     << ",\"eps\":" << format_g17(field.eps) << ",\"s\":" << format_g17(field.s) << "}\n";
  for (std::size_t i = 0; i < field.size(); ++i) {
    const double* x = field.target(i);
    const double* v = field.value(i);
    for (int a = 0; a < field.d; ++a) os << format_g17(x[a]) << " ";
    for (int a = 0; a < field.d; ++a) os << format_g17(v[a]) << (a + 1 < field.d ? " " : "\n");
  }
}

}  // namespace rieszlab
