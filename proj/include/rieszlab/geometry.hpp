#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "rieszlab/common.hpp"
#include "rieszlab/sequence.hpp"

namespace rieszlab {

// Closed axis-aligned cube: |x_a - center_a| <= edge/2 on every axis.
struct Cube {
  double center[max_dim] = {0};
  double edge = 0.0;
  int dim = 0;

  bool contains(const double* x) const {
    double half = 0.5 * edge;
    for (int a = 0; a < dim; ++a)
      if (std::abs(x[a] - center[a]) > half) return false;
    return true;
  }
};

// Nested cube family over a scale ladder. Level j has 2^{dj} closed cubes of
// edge ell_j in canonical order: the index packs one base-2^d digit per
// level, most significant digit = coarsest level, bit a of a digit = axis a
// (0 -> low side, 1 -> high side). At a selected level the two placements
// hug the walls of a frame of edge 2T ell_j centered in the parent cell; at
// an unselected level they are the two dyadic halves.
struct CantorSet {
  int d = 0;
  int n = 0;
  double T = 0.0;
  Ladder ladder;
  std::vector<double> step;  // center offset magnitude per level, step[t-1]

  std::uint64_t level_count(int j) const { return std::uint64_t(1) << (d * j); }
  double edge_of(int j) const { return j == 0 ? 2.0 * T * ladder.ell[0] : ladder.ell[j - 1]; }

  void center_of(int j, std::uint64_t k, double* out) const {
    for (int a = 0; a < d; ++a) out[a] = 0.0;
    const std::uint64_t digit_mask = (std::uint64_t(1) << d) - 1;
    for (int t = 1; t <= j; ++t) {
      std::uint64_t g = (k >> (d * (j - t))) & digit_mask;
      for (int a = 0; a < d; ++a) {
        double off = step[t - 1];
        out[a] += ((g >> a) & 1) ? off : -off;
      }
    }
  }

  Cube cube(int j, std::uint64_t k) const {
    Cube c;
    c.dim = d;
    c.edge = edge_of(j);
    if (j > 0) center_of(j, k, c.center);
    return c;
  }

  // Flat array of level-j centers (d doubles per cube, canonical order).
  std::vector<double> level_centers(int j) const {
    std::uint64_t cnt = level_count(j);
    std::vector<double> out(cnt * d);
    for (std::uint64_t k = 0; k < cnt; ++k) center_of(j, k, out.data() + k * d);
    return out;
  }

  // Frames: stage p >= 1 places 2^{d(j_p - 1)} frames of edge 2T ell_{j_p}
  // centered at the level-(j_p - 1) cube centers.
  int stages() const { return ladder.m(); }
  int stage_level(int p) const { return ladder.selected[p - 1]; }
  double frame_edge(int p) const { return 2.0 * T * ladder.ell[stage_level(p) - 1]; }
  std::uint64_t frame_count(int p) const { return level_count(stage_level(p) - 1); }
  Cube frame(int p, std::uint64_t i) const {
    Cube c;
    c.dim = d;
    c.edge = frame_edge(p);
    if (stage_level(p) > 1) center_of(stage_level(p) - 1, i, c.center);
    return c;
  }

  std::uint64_t ancestor(std::uint64_t k, int from_level, int to_level) const {
    return k >> (d * (from_level - to_level));
  }
};

inline int max_depth_for_dim(int d) { return 24 / d; }

inline CantorSet build_cantor(const Ladder& lad, int d) {
  if (d < 1 || d > max_dim) throw ConfigError("dimension out of range");
  lad.check_invariants();
  validate_alpha_T(lad.alpha, lad.T);
  if (std::uint64_t(d) * lad.n() > 24)
    throw ConfigError("2^(d n) exceeds the 2^24 cube cap");
  CantorSet set;
  set.d = d;
  set.n = lad.n();
  set.T = lad.T;
  set.ladder = lad;
  set.step.resize(set.n);
  for (int t = 1; t <= set.n; ++t) {
    double ell = lad.ell[t - 1];
    set.step[t - 1] = lad.is_selected(t) ? (lad.T - 0.5) * ell : 0.5 * ell;
  }
  return set;
}

// ---- address codec ----

// Per-axis sign vector of a level-n cube: signs[a*n + (t-1)] = +/-1 is the
// choice made at level t along axis a.
inline std::vector<int> address_signs(const CantorSet& set, std::uint64_t k) {
  std::vector<int> signs(std::size_t(set.d) * set.n);
  const std::uint64_t digit_mask = (std::uint64_t(1) << set.d) - 1;
  for (int t = 1; t <= set.n; ++t) {
    std::uint64_t g = (k >> (set.d * (set.n - t))) & digit_mask;
    for (int a = 0; a < set.d; ++a)
      signs[std::size_t(a) * set.n + (t - 1)] = ((g >> a) & 1) ? 1 : -1;
  }
  return signs;
}

inline std::uint64_t index_from_signs(const CantorSet& set, const std::vector<int>& signs) {
  if (signs.size() != std::size_t(set.d) * set.n) throw ConfigError("sign vector size mismatch");
  std::uint64_t k = 0;
  for (int t = 1; t <= set.n; ++t) {
    std::uint64_t g = 0;
    for (int a = 0; a < set.d; ++a)
      if (signs[std::size_t(a) * set.n + (t - 1)] > 0) g |= std::uint64_t(1) << a;
    k = (k << set.d) | g;
  }
  return k;
}

inline std::uint64_t flip_address_bit(const CantorSet& set, std::uint64_t k, int level, int axis) {
  return k ^ (std::uint64_t(1) << (set.d * (set.n - level) + axis));
}

// ---- locate ----

// Containment chain of a point: levels[j-1] is the index of the level-j cube
// containing x for j = 1..depth; frames lists the stages whose frame contains
// x. Boundary ties resolve to the lowest index.
struct LocateResult {
  bool in_root = false;
  std::vector<std::uint64_t> levels;
  std::vector<int> frame_stages;
  std::vector<std::uint64_t> frames;
  int depth() const { return static_cast<int>(levels.size()); }
  bool inside_set(int n) const { return in_root && depth() == n; }
};

inline LocateResult locate(const CantorSet& set, const double* x) {
  LocateResult res;
  double half_root = set.T * set.ladder.ell[0];
  for (int a = 0; a < set.d; ++a)
    if (std::abs(x[a]) > half_root) return res;
  res.in_root = true;
  std::uint64_t k = 0;
  double center[max_dim] = {0};
  for (int j = 1; j <= set.n; ++j) {
    double half = 0.5 * set.ladder.ell[j - 1];
    double off = set.step[j - 1];
    bool found = false;
    std::uint64_t g_found = 0;
    double child[max_dim];
    for (std::uint64_t g = 0; g < (std::uint64_t(1) << set.d) && !found; ++g) {
      bool ok = true;
      for (int a = 0; a < set.d; ++a) {
        child[a] = center[a] + (((g >> a) & 1) ? off : -off);
        if (std::abs(x[a] - child[a]) > half) {
          ok = false;
          break;
        }
      }
      if (ok) {
        found = true;
        g_found = g;
      }
    }
    if (!found) break;
    for (int a = 0; a < set.d; ++a)
      center[a] += (((g_found >> a) & 1) ? off : -off);
    k = (k << set.d) | g_found;
    res.levels.push_back(k);
  }
  for (int p = 1; p <= set.stages(); ++p) {
    int jp = set.stage_level(p);
    if (jp - 1 > res.depth()) break;
    std::uint64_t cell = (jp == 1) ? 0 : res.levels[jp - 2];
    Cube f = set.frame(p, cell);
    if (f.contains(x)) {
      res.frame_stages.push_back(p);
      res.frames.push_back(cell);
    }
  }
  return res;
}

// ---- post-build verification ----

namespace detail {
inline void for_sampled(std::uint64_t count, std::uint64_t cap,
                        const std::function<void(std::uint64_t)>& body) {
  if (count == 0) return;
  if (cap == 0) cap = 1;
  if (count <= cap) {
    for (std::uint64_t k = 0; k < count; ++k) body(k);
  } else {
    std::uint64_t stride = count / cap;
    for (std::uint64_t k = 0; k < count; k += stride) body(k);
    body(count - 1);
  }
}
}  // namespace detail

// Verifies nesting, frame separation, corner placement, reflection symmetry
// and sibling spacing. Throws InvariantError with the offending level.
inline void check_geometry(const CantorSet& set, std::uint64_t sample_cap = 1u << 14) {
  const int d = set.d, n = set.n;
  const Ladder& lad = set.ladder;
  // frame separation: 2T ell_j < ell_{j-1} / 2 at selected levels j >= 2
  for (int j : lad.selected) {
    if (j < 2) continue;
    if (!(2.0 * set.T * lad.ell[j - 1] < 0.5 * lad.ell[j - 2]))
      throw InvariantError("frame separation fails at level " + std::to_string(j));
  }
  double ctmp[max_dim], ptmp[max_dim];
  for (int j = 1; j <= n; ++j) {
    double edge = lad.ell[j - 1];
    double parent_edge = set.edge_of(j - 1);
    double tol = 1e-12 * parent_edge;
    detail::for_sampled(set.level_count(j), sample_cap, [&](std::uint64_t k) {
      set.center_of(j, k, ctmp);
      if (j == 1) {
        for (int a = 0; a < d; ++a) ptmp[a] = 0.0;
      } else {
        set.center_of(j - 1, k >> d, ptmp);
      }
      for (int a = 0; a < d; ++a) {
        double slack = std::abs(ctmp[a] - ptmp[a]) + 0.5 * edge - 0.5 * parent_edge;
        if (slack > tol)
          throw InvariantError("cube escapes its parent at level " + std::to_string(j));
      }
      if (lad.is_selected(j)) {
        // far vertex of the cube must coincide with a frame vertex
        double want = set.T * edge;
        for (int a = 0; a < d; ++a) {
          double got = std::abs(ctmp[a] - ptmp[a]) + 0.5 * edge;
          if (std::abs(got - want) > tol)
            throw InvariantError("corner placement fails at level " + std::to_string(j));
        }
      }
      // reflection through the origin flips every sign choice: exact negation
      std::uint64_t mirror = ~k & (set.level_count(j) - 1);
      double mtmp[max_dim];
      set.center_of(j, mirror, mtmp);
      for (int a = 0; a < d; ++a)
        if (mtmp[a] != -ctmp[a])
          throw InvariantError("reflection symmetry fails at level " + std::to_string(j));
    });
  }
  // sibling spacing within one frame at the bottom level
  double min_gap = (2.0 * set.T - 1.0) * lad.ell[n - 1];
  const std::uint64_t fam_size = std::uint64_t(1) << d;
  std::vector<double> cs(fam_size * d);
  detail::for_sampled(set.level_count(n) >> d, sample_cap >> 1, [&](std::uint64_t fam) {
    std::uint64_t base = fam << d;
    for (std::uint64_t g = 0; g < fam_size; ++g)
      set.center_of(n, base | g, cs.data() + g * d);
    for (std::uint64_t g = 0; g < fam_size; ++g)
      for (std::uint64_t h = g + 1; h < fam_size; ++h) {
        double r2 = 0;
        for (int a = 0; a < d; ++a) {
          double diff = cs[g * d + a] - cs[h * d + a];
          r2 += diff * diff;
        }
        if (std::sqrt(r2) < min_gap * (1.0 - 1e-12))
          throw InvariantError("sibling centers too close at the bottom level");
      }
  });
}

// ---- set export ----
// First line is a JSON metadata object, then one line per bottom-level cube:
// "k center_1 ... center_d edge".

inline void write_set(std::ostream& os, const CantorSet& set, double s_for_digest) {
  os << "{\"schema_version\":1,\"d\":" << set.d << ",\"n\":" << set.n
     << ",\"alpha\":" << format_g17(set.ladder.alpha) << ",\"T\":" << format_g17(set.T)
     << ",\"cube_count\":" << set.level_count(set.n) << ",\"ladder_digest\":\""
     << ladder_digest(set.ladder, set.d, s_for_digest) << "\"}\n";
  double c[max_dim];
  double edge = set.ladder.ell[set.n - 1];
  for (std::uint64_t k = 0; k < set.level_count(set.n); ++k) {
    set.center_of(set.n, k, c);
    os << k;
    for (int a = 0; a < set.d; ++a) os << " " << format_g17(c[a]);
    os << " " << format_g17(edge) << "\n";
  }
}

}  // namespace rieszlab
