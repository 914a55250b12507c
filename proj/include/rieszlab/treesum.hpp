#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "rieszlab/common.hpp"
#include "rieszlab/geometry.hpp"
#include "rieszlab/measure.hpp"
#include "rieszlab/riesz.hpp"

namespace rieszlab {

// Mass and center-of-mass aggregates over the cube hierarchy, plus a
// bottom-cube -> point index (points bucketed by tag, storage order kept).
struct TreeIndex {
  int d = 0;
  int n = 0;
  std::vector<std::vector<double>> mass;  // mass[j][k], j = 0..n
  std::vector<std::vector<double>> com;   // com[j][k*d + a]
  std::vector<std::uint32_t> bucket_start;
  std::vector<std::uint32_t> bucket_points;
  double diam_factor = 0.0;  // sqrt(d)

  const double* cell_com(int j, std::uint64_t k) const { return com[j].data() + k * d; }
};

inline TreeIndex build_tree_index(const CantorSet& set, const DiscreteMeasure& nu) {
  if (nu.d != set.d) throw ConfigError("measure dimension does not match the set");
  TreeIndex tree;
  tree.d = set.d;
  tree.n = set.n;
  tree.diam_factor = std::sqrt(double(set.d));
  const std::uint64_t bottom = set.level_count(set.n);
  tree.mass.assign(set.n + 1, {});
  tree.com.assign(set.n + 1, {});
  tree.mass[set.n].assign(bottom, 0.0);
  tree.com[set.n].assign(bottom * set.d, 0.0);
  std::vector<std::uint32_t> counts(bottom, 0);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    std::uint64_t k = nu.tag[i];
    if (k >= bottom) throw ConfigError("point tag outside the bottom level");
    counts[k]++;
    tree.mass[set.n][k] += nu.w[i];
    for (int a = 0; a < set.d; ++a) tree.com[set.n][k * set.d + a] += nu.w[i] * nu.point(i)[a];
  }
  tree.bucket_start.assign(bottom + 1, 0);
  for (std::uint64_t k = 0; k < bottom; ++k)
    tree.bucket_start[k + 1] = tree.bucket_start[k] + counts[k];
  tree.bucket_points.resize(nu.size());
  std::vector<std::uint32_t> cursor(tree.bucket_start.begin(), tree.bucket_start.end() - 1);
  for (std::size_t i = 0; i < nu.size(); ++i)
    tree.bucket_points[cursor[nu.tag[i]]++] = static_cast<std::uint32_t>(i);
  for (int j = set.n - 1; j >= 0; --j) {
    std::uint64_t cnt = set.level_count(j);
    tree.mass[j].assign(cnt, 0.0);
    tree.com[j].assign(cnt * set.d, 0.0);
    std::uint64_t fam = std::uint64_t(1) << set.d;
    for (std::uint64_t k = 0; k < cnt; ++k) {
      for (std::uint64_t g = 0; g < fam; ++g) {
        std::uint64_t child = (k << set.d) | g;
        tree.mass[j][k] += tree.mass[j + 1][child];
        for (int a = 0; a < set.d; ++a)
          tree.com[j][k * set.d + a] += tree.com[j + 1][child * set.d + a];
      }
    }
  }
  for (int j = set.n; j >= 0; --j)
    for (std::uint64_t k = 0; k < tree.mass[j].size(); ++k)
      if (tree.mass[j][k] > 0.0)
        for (int a = 0; a < set.d; ++a) tree.com[j][k * set.d + a] /= tree.mass[j][k];
  return tree;
}

// Far-field monopole approximation: a cell is summarized by its total mass
// at its center of mass when (cell diameter) < mac * (distance to the center
// of mass) and the whole cell clears the truncation radius; otherwise its
// children are visited, with exact per-point sums at the bottom. mac -> 0
// degenerates to the naive sum.
inline RieszField tree_transform(const DiscreteMeasure& nu, const CantorSet& set,
                                 const TreeIndex& tree, const double* targets,
                                 std::size_t ntargets, double eps, double s, double mac,
                                 int workers = 0) {
  if (!(mac >= 0.0 && mac < 1.0)) throw ConfigError("multipole acceptance must lie in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("tree backend requires eps > 0");
  const int d = set.d;
  RieszField field;
  field.d = d;
  field.eps = eps;
  field.s = s;
  field.targets.assign(targets, targets + ntargets * d);
  field.values.assign(ntargets * d, 0.0);
  const double eps2 = eps * eps;
  parallel_for(ntargets, workers, [&](std::size_t tb, std::size_t te) {
    std::vector<CompensatedSum> acc(d);
    std::vector<std::pair<int, std::uint64_t>> stack;
    for (std::size_t t = tb; t < te; ++t) {
      const double* x = targets + t * d;
      for (int a = 0; a < d; ++a) acc[a] = CompensatedSum{};
      stack.clear();
      stack.push_back({0, 0});
      while (!stack.empty()) {
        auto [j, k] = stack.back();
        stack.pop_back();
        if (tree.mass[j][k] == 0.0) continue;
        double diam = tree.diam_factor * set.edge_of(j);
        const double* cm = tree.cell_com(j, k);
        double diff[max_dim];
        double r2 = 0;
        for (int a = 0; a < d; ++a) {
          diff[a] = cm[a] - x[a];
          r2 += diff[a] * diff[a];
        }
        double r = std::sqrt(r2);
        if (j > 0 && diam < mac * r && r - diam > eps) {
          double m = tree.mass[j][k];
          double factor = (s == 1.0) ? m / r2 : m * std::pow(r2, -0.5 * (s + 1.0));
          for (int a = 0; a < d; ++a) acc[a].add(diff[a] * factor);
          continue;
        }
        if (j == tree.n) {
          for (std::uint32_t b = tree.bucket_start[k]; b < tree.bucket_start[k + 1]; ++b) {
            std::size_t i = tree.bucket_points[b];
            const double* y = nu.point(i);
            double pr2 = 0;
            double pd[max_dim];
            for (int a = 0; a < d; ++a) {
              pd[a] = y[a] - x[a];
              pr2 += pd[a] * pd[a];
            }
            if (pr2 <= eps2) continue;
            double factor = (s == 1.0) ? nu.w[i] / pr2 : nu.w[i] * std::pow(pr2, -0.5 * (s + 1.0));
            for (int a = 0; a < d; ++a) acc[a].add(pd[a] * factor);
          }
          continue;
        }
        std::uint64_t fam = std::uint64_t(1) << d;
        for (std::uint64_t g = fam; g-- > 0;) stack.push_back({j + 1, (k << d) | g});
      }
      for (int a = 0; a < d; ++a) field.values[t * d + a] = acc[a].value();
    }
  });
  return field;
}

}  // namespace rieszlab
