#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "rieszlab/common.hpp"
#include "rieszlab/gauge.hpp"
#include "rieszlab/geometry.hpp"
#include "rieszlab/measure.hpp"
#include "rieszlab/operator.hpp"
#include "rieszlab/riesz.hpp"
#include "rieszlab/sequence.hpp"

namespace rieszlab {

using nlohmann::json;

// ---- report plumbing ----
// Reports are JSON records: context (full configuration), measured and
// theoretical scalar maps, and ratios that always carry both operands.

inline json make_context(const CantorSet& set, double s, std::map<std::string, json> extra = {}) {
  json ctx;
  ctx["d"] = set.d;
  ctx["n"] = set.n;
  ctx["s"] = s;
  ctx["alpha"] = set.ladder.alpha;
  ctx["T"] = set.T;
  ctx["ladder_digest"] = ladder_digest(set.ladder, set.d, s);
  for (auto& [k, v] : extra) ctx[k] = v;
  return ctx;
}

inline void add_ratio(json& report, const std::string& name, double measured,
                      double theoretical) {
  report["ratios"][name] = {
      {"measured", measured}, {"theoretical", theoretical}, {"ratio", measured / theoretical}};
}

inline void stamp_report(json& report, const std::string& kind) {
  report["schema_version"] = 1;
  report["kind"] = kind;
  report["config_digest"] = hex64(fnv1a(report["context"].dump()));
}

// least-squares slope of y against x
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw ConfigError("slope fit needs >= 2 points");
  double xm = 0, ym = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    xm += x[i];
    ym += y[i];
  }
  xm /= double(x.size());
  ym /= double(x.size());
  double num = 0, den = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    num += (x[i] - xm) * (y[i] - ym);
    den += (x[i] - xm) * (x[i] - xm);
  }
  if (den == 0.0) throw ConfigError("slope fit: degenerate abscissae");
  return num / den;
}

// ---- L2-norm vs density-sum ratio ----

struct NormRatioOptions {
  std::vector<int> qs{3};  // first entry is the headline quadrature order
  int workers = 0;
};

// ||R_mu||^2 on the grid(q) discretization (principal value at the nodes)
// against the ladder density sum. Extra orders in qs feed a Cauchy-in-q
// stability record; divergence is reported, never hidden.
inline json norm_ratio_report(const CantorSet& set, double s, const NormRatioOptions& opt = {}) {
  if (opt.qs.empty()) throw ConfigError("no quadrature orders given");
  LadderStats st = ladder_stats(set.ladder, set.d, s);
  json rep;
  rep["context"] = make_context(set, s, {{"q", opt.qs.front()},
                                         {"eps", 0.0},
                                         {"exclude", "own_node"},
                                         {"backend", "naive"}});
  std::map<int, double> norm2_by_q;
  for (int q : opt.qs) {
    DiscreteMeasure mu = discretize_grid(set, q);
    RieszField field = transform_at_nodes(mu, 0.0, s, Exclude::own_node, opt.workers);
    double nrm = l2_norm(field, mu);
    norm2_by_q[q] = nrm * nrm;
  }
  double norm2 = norm2_by_q[opt.qs.front()];
  rep["measured"]["norm2"] = norm2;
  rep["theoretical"]["sum_theta2"] = st.total;
  add_ratio(rep, "norm2_over_sum_theta2", norm2, st.total);
  if (norm2_by_q.size() > 1) {
    json quad;
    double prev = 0;
    bool first = true;
    std::vector<double> diffs;
    for (auto& [q, v] : norm2_by_q) {
      quad["norm2"][std::to_string(q)] = v;
      if (!first) diffs.push_back(std::abs(v - prev) / std::max(std::abs(v), 1e-300));
      prev = v;
      first = false;
    }
    quad["consecutive_rel_diffs"] = diffs;
    bool shrinking = true;
    for (std::size_t i = 1; i < diffs.size(); ++i)
      if (diffs[i] > diffs[i - 1]) shrinking = false;
    quad["cauchy_in_q"] = shrinking && !diffs.empty() && diffs.back() <= 0.05;
    rep["quadrature"] = quad;
  }
  stamp_report(rep, "norm_ratio");
  return rep;
}

// ---- operator-norm report ----

struct OperatorReportOptions {
  double tol = 1e-13;
  int max_iter = 20000;
  std::uint64_t seed = operator_norm_seed;
  int workers = 0;
  bool with_trace = true;
};

// sup-over-eps operator norm of the center measure against the density sum.
// Every run asserts the f-equal-one lower bound: the operator norm at each
// eps dominates ||R 1|| / ||1||.
inline json operator_report(const CantorSet& set, double s,
                            const OperatorReportOptions& opt = {}) {
  DiscreteMeasure nu = discretize_centers(set);
  LadderStats st = ladder_stats(set.ladder, set.d, s);
  std::vector<double> grid;
  grid.push_back(0.0);
  for (double e : eps_ladder(set)) grid.push_back(e);
  OperatorSweepResult sweep =
      operator_norm_sweep(nu, s, grid, opt.tol, opt.max_iter, opt.seed, opt.workers);
  double mass = nu.total_mass();
  double best_f1 = 0.0;
  std::vector<double> f1_bounds;
  for (double eps : grid) {
    RieszField field = transform_at_nodes(nu, eps, s, Exclude::own_node, opt.workers);
    double bound = l2_norm(field, nu) / std::sqrt(mass);
    f1_bounds.push_back(bound);
    best_f1 = std::max(best_f1, bound);
    if (sweep.sup * (1.0 + 1e-9) < bound)
      throw InvariantError("operator norm fell below its f = 1 Rayleigh bound");
  }
  json rep;
  rep["context"] = make_context(set, s, {{"measure", "centers"},
                                         {"backend", "naive"},
                                         {"seed", opt.seed},
                                         {"tol", opt.tol}});
  rep["measured"]["operator_norm"] = sweep.sup;
  rep["measured"]["operator_norm2"] = sweep.sup * sweep.sup;
  rep["measured"]["arg_eps"] = sweep.arg_eps;
  rep["measured"]["f1_lower_bound"] = best_f1;
  rep["theoretical"]["sum_theta2"] = st.total;
  add_ratio(rep, "operator_norm2_over_sum_theta2", sweep.sup * sweep.sup, st.total);
  json sw;
  sw["eps"] = sweep.eps;
  sw["norms"] = sweep.norms;
  sw["f1_bounds"] = f1_bounds;
  sw["total_iterations"] = sweep.total_iterations;
  rep["sweep"] = sw;
  if (opt.with_trace) {
    RieszOperator op{&nu, sweep.arg_eps, s, opt.workers};
    OperatorNormResult r = operator_norm(op, opt.tol, opt.max_iter, opt.seed);
    rep["trace"] = {{"eps", sweep.arg_eps}, {"rayleigh", r.trace}, {"restarted", r.restarted}};
  }
  stamp_report(rep, "operator_norm");
  return rep;
}

// ---- capacity report ----

// Theoretical capacity band from the raw scale sequence.
inline double capacity_band(const SigmaSequence& seq, int d, double s) {
  CompensatedSum acc;
  for (int j = 1; j <= seq.n(); ++j) {
    double v = std::ldexp(1.0, -d * j) / std::pow(seq.sigma[j - 1], s);
    acc.add(v * v);
  }
  return 1.0 / std::sqrt(acc.value());
}

struct CapacityOptions {
  double alpha = 0.0;  // 0 -> default_alpha(T)
  double T = 4.0;
  bool infinite_tail = false;  // treat the sequence as a truncation of an
                               // infinite one and bound the dropped tail
  double tol = 1e-13;
  int max_iter = 20000;
  std::uint64_t seed = operator_norm_seed;
  int workers = 0;
};

// Capacity proxy min(1, 1/|R|) of the center measure against the sequence
// band [sum (2^{-dj}/sigma_j^s)^2]^{-1/2}.
inline json capacity_report(const SigmaSequence& seq, int d, double s,
                            const CapacityOptions& opt = {}) {
  double alpha = opt.alpha > 0.0 ? opt.alpha : default_alpha(opt.T);
  Ladder lad = regularize(seq, alpha, opt.T);
  CantorSet set = build_cantor(lad, d);
  DiscreteMeasure nu = discretize_centers(set);
  std::vector<double> grid;
  grid.push_back(0.0);
  for (double e : eps_ladder(set)) grid.push_back(e);
  OperatorSweepResult sweep =
      operator_norm_sweep(nu, s, grid, opt.tol, opt.max_iter, opt.seed, opt.workers);
  double proxy = sweep.sup > 1.0 ? 1.0 / sweep.sup : 1.0;
  double band = capacity_band(seq, d, s);
  json rep;
  rep["context"] = make_context(set, s, {{"measure", "centers"}, {"seed", opt.seed}});
  rep["measured"]["operator_norm"] = sweep.sup;
  rep["measured"]["capacity_proxy"] = proxy;
  rep["measured"]["arg_eps"] = sweep.arg_eps;
  rep["theoretical"]["band"] = band;
  add_ratio(rep, "proxy_over_band", proxy, band);
  if (opt.infinite_tail) {
    LadderStats st = ladder_stats(lad, d, s);
    double theta_last = st.Theta.back();
    double r = std::exp2(-2.0 * (d - s));
    double tail = theta_last * theta_last * r / (1.0 - r);
    double sum_sigma = 1.0 / (band * band);
    rep["truncation_tail"] = {{"theta_last2", theta_last * theta_last},
                              {"geometric_ratio", r},
                              {"tail_bound", tail},
                              {"tail_over_band_sum", tail / sum_sigma}};
  }
  stamp_report(rep, "capacity");
  return rep;
}

// ---- distribution report ----

struct DistributionOptions {
  std::vector<double> b_grid{0.0, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 1.0, 1.5, 2.0};
  bool with_maximal = true;
  int workers = 0;
};

// Survival curve of |R(x)|^2 relative to its weighted mean a: the mass
// fraction where |R|^2 > b a, per b on the grid. The b = 0.1 value is the
// headline big-portion statistic. The same curve is produced for the maximal
// transform when requested.
inline json distribution_report(const DiscreteMeasure& mu, const CantorSet& set, double s,
                                const DistributionOptions& opt = {}) {
  double mass = mu.total_mass();
  RieszField field = transform_at_nodes(mu, 0.0, s, Exclude::own_node, opt.workers);
  double norm = l2_norm(field, mu);
  double a = norm * norm / mass;
  std::vector<double> mag2(mu.size());
  for (std::size_t i = 0; i < mu.size(); ++i) {
    double m = field.magnitude(i);
    mag2[i] = m * m;
  }
  auto survival_curve = [&](const std::vector<double>& values, double mean) {
    std::vector<double> curve;
    for (double b : opt.b_grid) {
      CompensatedSum acc;
      for (std::size_t i = 0; i < mu.size(); ++i)
        if (values[i] > b * mean) acc.add(mu.w[i]);
      double frac = acc.value() / mass;
      if (b * frac > 1.0 + 1e-12)
        throw InvariantError("survival fraction breaks the mean bound");
      curve.push_back(frac);
    }
    for (std::size_t i = 1; i < curve.size(); ++i)
      if (curve[i] > curve[i - 1] + 1e-15)
        throw InvariantError("survival curve must be nonincreasing");
    return curve;
  };
  std::vector<double> curve = survival_curve(mag2, a);
  double big_portion = 0.0;
  for (std::size_t i = 0; i < opt.b_grid.size(); ++i)
    if (opt.b_grid[i] == 0.1) big_portion = curve[i];
  json rep;
  rep["context"] = make_context(set, s, {{"eps", 0.0}, {"exclude", "own_node"}});
  rep["context"]["points"] = mu.size();
  rep["measured"]["mean_square"] = a;
  rep["measured"]["norm2"] = norm * norm;
  rep["measured"]["big_portion_b_0.1"] = big_portion;
  rep["survival"]["b"] = opt.b_grid;
  rep["survival"]["fraction"] = curve;
  if (opt.with_maximal) {
    std::vector<double> rmax =
        transform_maximal(mu, mu.x.data(), mu.size(), eps_ladder(set), s, opt.workers);
    std::vector<double> rmax2(rmax.size());
    CompensatedSum acc;
    for (std::size_t i = 0; i < rmax.size(); ++i) {
      rmax2[i] = rmax[i] * rmax[i];
      acc.add(rmax2[i] * mu.w[i]);
    }
    double a_max = acc.value() / mass;
    std::vector<double> curve_max = survival_curve(rmax2, a_max);
    rep["measured"]["mean_square_maximal"] = a_max;
    rep["survival"]["fraction_maximal"] = curve_max;
    double big_max = 0.0;
    for (std::size_t i = 0; i < opt.b_grid.size(); ++i)
      if (opt.b_grid[i] == 0.1) big_max = curve_max[i];
    rep["measured"]["big_portion_maximal_b_0.1"] = big_max;
  }
  stamp_report(rep, "distribution");
  return rep;
}

// ---- threshold cube counting ----

struct ThresholdCubeSets {
  double c0 = 0.0;
  double threshold = 0.0;
  std::uint64_t count_full = 0;  // cubes with |R(center)| over threshold
  std::uint64_t count_excl = 0;  // same with the own cube removed from the sum
  std::uint64_t total = 0;
  std::vector<double> values_full;
  std::vector<double> values_excl;
};

namespace detail {
inline void require_equal_cube_masses(const CantorSet& set, const DiscreteMeasure& nu) {
  std::uint64_t cubes = set.level_count(set.n);
  std::vector<double> per(cubes, 0.0);
  for (std::size_t i = 0; i < nu.size(); ++i) {
    if (nu.tag[i] >= cubes) throw ConfigError("point tag outside the bottom level");
    per[nu.tag[i]] += nu.w[i];
  }
  double want = nu.total_mass() / double(cubes);
  for (std::uint64_t k = 0; k < cubes; ++k)
    if (std::abs(per[k] - want) > 1e-12 * std::abs(want))
      throw ConfigError("per-cube masses unequal");
}
}  // namespace detail

// Counts bottom cubes whose center value exceeds (c0 / T^s) [sum theta^2]^{1/2},
// for the full transform and the own-cube-excluded one. An optional shift
// moves every evaluation point by the same offset.
inline ThresholdCubeSets threshold_cube_sets(const CantorSet& set, const DiscreteMeasure& nu,
                                             double c0, double s,
                                             const double* shift = nullptr, int workers = 0) {
  if (c0 < 0.0) throw ConfigError("threshold coefficient must be >= 0");
  detail::require_equal_cube_masses(set, nu);
  LadderStats st = ladder_stats(set.ladder, set.d, s);
  std::uint64_t cubes = set.level_count(set.n);
  std::vector<double> pts = set.level_centers(set.n);
  if (shift)
    for (std::uint64_t k = 0; k < cubes; ++k)
      for (int a = 0; a < set.d; ++a) pts[k * set.d + a] += shift[a];
  std::vector<std::uint64_t> tags(cubes);
  for (std::uint64_t k = 0; k < cubes; ++k) tags[k] = k;
  RieszField full =
      transform_truncated(nu, pts.data(), cubes, 0.0, s, Exclude::own_node, nullptr, workers);
  RieszField excl =
      transform_truncated(nu, pts.data(), cubes, 0.0, s, Exclude::own_cube, tags.data(), workers);
  ThresholdCubeSets out;
  out.c0 = c0;
  out.threshold = c0 / std::pow(set.T, s) * std::sqrt(st.total);
  out.total = cubes;
  out.values_full.resize(cubes);
  out.values_excl.resize(cubes);
  for (std::uint64_t k = 0; k < cubes; ++k) {
    out.values_full[k] = full.magnitude(k);
    out.values_excl[k] = excl.magnitude(k);
    if (out.values_full[k] > out.threshold) out.count_full++;
    if (out.values_excl[k] > out.threshold) out.count_excl++;
  }
  return out;
}

// Largest c0 keeping the own-cube-excluded exceedance fraction >= target on
// the given set (the calibration is run once, on a small n, then the value
// is held fixed across the sweep).
inline double calibrate_c0(const CantorSet& set, const DiscreteMeasure& nu, double s,
                           double target_fraction = 0.1, int workers = 0) {
  ThresholdCubeSets base = threshold_cube_sets(set, nu, 0.0, s, nullptr, workers);
  LadderStats st = ladder_stats(set.ladder, set.d, s);
  double scale = std::pow(set.T, s) / std::sqrt(st.total);
  std::vector<double> scaled(base.values_excl);
  for (double& v : scaled) v *= scale;
  std::sort(scaled.begin(), scaled.end(), std::greater<double>());
  std::uint64_t need = static_cast<std::uint64_t>(
      std::ceil(target_fraction * double(base.total) - 1e-9));
  if (need == 0) need = 1;
  if (need > base.total) throw ConfigError("target fraction exceeds 1");
  return scaled[need - 1] * (1.0 - 1e-12);
}

inline json threshold_report(const CantorSet& set, const DiscreteMeasure& nu, double c0,
                             double s, int workers = 0) {
  ThresholdCubeSets t = threshold_cube_sets(set, nu, c0, s, nullptr, workers);
  json rep;
  rep["context"] = make_context(set, s, {{"c0", c0}});
  rep["measured"]["threshold"] = t.threshold;
  rep["measured"]["count_full"] = t.count_full;
  rep["measured"]["count_excl"] = t.count_excl;
  rep["measured"]["total"] = t.total;
  rep["measured"]["fraction_full"] = double(t.count_full) / double(t.total);
  rep["measured"]["fraction_excl"] = double(t.count_excl) / double(t.total);
  stamp_report(rep, "threshold_cubes");
  return rep;
}

// ---- lemma checkers ----

struct SelectionCheckResult {
  double fraction = 0.0;
  double bound = 0.0;
  bool verdict = false;
};

// For nonnegative f with mean >= L and second moment <= A L^2, the mass where
// f >= delta L is at least (1 - delta)^2 / (4 A).
inline SelectionCheckResult selection_check(const std::vector<double>& f,
                                            const std::vector<double>& w, double L, double A,
                                            double delta) {
  if (f.size() != w.size() || f.empty()) throw ConfigError("value/weight size mismatch");
  if (!(L > 0.0) || !(A > 0.0)) throw ConfigError("L and A must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw ConfigError("delta must lie in (0, 1)");
  CompensatedSum wsum, mean, second, tail;
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (f[i] < 0.0) throw ConfigError("f must be nonnegative");
    if (w[i] < 0.0) throw ConfigError("weights must be nonnegative");
    wsum.add(w[i]);
    mean.add(w[i] * f[i]);
    second.add(w[i] * f[i] * f[i]);
    if (f[i] >= delta * L) tail.add(w[i]);
  }
  if (std::abs(wsum.value() - 1.0) > 1e-9) throw ConfigError("weights must sum to 1");
  if (mean.value() < L * (1.0 - 1e-12)) throw ConfigError("mean hypothesis fails");
  if (second.value() > A * L * L * (1.0 + 1e-12)) throw ConfigError("second-moment hypothesis fails");
  SelectionCheckResult out;
  out.fraction = tail.value();
  out.bound = (1.0 - delta) * (1.0 - delta) / (4.0 * A);
  out.verdict = out.fraction >= out.bound * (1.0 - 1e-12);
  return out;
}

// Random admissible input for the tail-mass check: weights normalized, L at
// or below the true mean, A at or above the true normalized second moment.
struct SelectionCase {
  std::vector<double> f, w;
  double L = 0, A = 0, delta = 0;
};

inline SelectionCase make_selection_case(std::uint64_t seed, std::uint64_t index) {
  Rng rng(seed, index);
  SelectionCase c;
  std::size_t n = 2 + rng.next() % 40;
  c.f.resize(n);
  c.w.resize(n);
  double wsum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    c.f[i] = rng.uniform() * 10.0;
    c.w[i] = 0.05 + rng.uniform();
    wsum += c.w[i];
  }
  for (std::size_t i = 0; i < n; ++i) c.w[i] /= wsum;
  double mean = 0, second = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mean += c.w[i] * c.f[i];
    second += c.w[i] * c.f[i] * c.f[i];
  }
  c.L = mean * (0.3 + 0.7 * rng.uniform());
  c.A = second / (c.L * c.L) * (1.0 + rng.uniform());
  c.delta = 0.05 + 0.9 * rng.uniform();
  return c;
}

struct SubsequenceEnergyCheck {
  std::vector<int> indices;
  double selected_energy = 0.0;
  double total_energy = 0.0;
  double c = 0.0;
  bool verdict = false;
};

inline SubsequenceEnergyCheck subsequence_energy_check(const std::vector<double>& a,
                                                       double delta, double kappa) {
  SubsequenceSelection sel = select_subsequence(a, delta, kappa);
  SubsequenceEnergyCheck out;
  out.indices = sel.indices;
  out.c = sel.c;
  CompensatedSum total;
  for (double v : a) total.add(v * v);
  CompensatedSum picked;
  for (int p : sel.indices) picked.add(a[p - 1] * a[p - 1]);
  out.selected_energy = picked.value();
  out.total_energy = total.value();
  out.verdict = out.selected_energy >= out.c * out.total_energy;
  return out;
}

// Bipartite matching check: every sampled family of sign vectors with
// nonpositive weighted sum injects into the nonnegative side by flipping
// only minus components to plus. Masks encode sign vectors, bit = plus.
struct FlipInjectionResult {
  bool verdict = true;
  std::size_t families_checked = 0;
  std::uint32_t counterexample_size = 0;  // 0 when verdict holds
};

namespace detail {

struct FlipMatcher {
  int K;
  std::uint32_t full;
  std::vector<double> signed_sum;       // S(mask)
  std::vector<std::vector<std::uint32_t>> adj;  // mask -> admissible images
  std::vector<std::int64_t> match_of_image;

  explicit FlipMatcher(const std::vector<double>& lambdas) {
    K = static_cast<int>(lambdas.size());
    if (K < 1 || K > 12) throw ConfigError("flip check supports 1..12 components");
    full = (std::uint32_t(1) << K) - 1;
    std::uint32_t size = full + 1;
    signed_sum.assign(size, 0.0);
    double neg_total = 0;
    for (double l : lambdas) {
      if (!(l > 0.0)) throw ConfigError("lambdas must be positive");
      neg_total += l;
    }
    std::vector<double> subset_sum(size, 0.0);
    for (std::uint32_t m = 1; m <= full; ++m) {
      std::uint32_t low = m & (~m + 1);
      int bit = std::countr_zero(low);
      subset_sum[m] = subset_sum[m ^ low] + lambdas[bit];
    }
    for (std::uint32_t m = 0; m <= full; ++m) signed_sum[m] = 2.0 * subset_sum[m] - neg_total;
    adj.assign(size, {});
    for (std::uint32_t m = 0; m <= full; ++m) {
      if (signed_sum[m] > 0.0) continue;  // only the nonpositive side needs rows
      std::uint32_t rest = full & ~m;
      std::vector<std::uint32_t>& row = adj[m];
      for (std::uint32_t add = rest;; add = (add - 1) & rest) {
        std::uint32_t g = m | add;
        if (signed_sum[g] >= 0.0) row.push_back(g);
        if (add == 0) break;
      }
      std::reverse(row.begin(), row.end());  // try few flips first
    }
  }

  bool augment(std::uint32_t f, std::vector<char>& seen) {
    for (std::uint32_t g : adj[f]) {
      if (seen[g]) continue;
      seen[g] = 1;
      if (match_of_image[g] < 0 || augment(std::uint32_t(match_of_image[g]), seen)) {
        match_of_image[g] = f;
        return true;
      }
    }
    return false;
  }

  // true iff every vector in the family can be matched to a distinct image
  bool saturates(const std::vector<std::uint32_t>& family) {
    match_of_image.assign(full + 1u, -1);
    std::vector<char> seen;
    for (std::uint32_t f : family) {
      seen.assign(full + 1u, 0);
      if (!augment(f, seen)) return false;
    }
    return true;
  }

  std::vector<std::uint32_t> nonpositive_side() const {
    std::vector<std::uint32_t> out;
    for (std::uint32_t m = 0; m <= full; ++m)
      if (signed_sum[m] <= 0.0) out.push_back(m);
    return out;
  }
};

}  // namespace detail

// Exhaustive mode (K <= 5): matches the whole nonpositive side at once; a
// saturating matching restricts to every subfamily. Sampled mode: each trial
// draws a random subfamily and matches it directly.
inline FlipInjectionResult flip_injection_check(const std::vector<double>& lambdas,
                                                int family_samples = 0,
                                                std::uint64_t seed = 0x1105u) {
  detail::FlipMatcher matcher(lambdas);
  FlipInjectionResult out;
  std::vector<std::uint32_t> neg = matcher.nonpositive_side();
  if (family_samples <= 0) {
    if (matcher.K > 5) throw ConfigError("exhaustive mode needs K <= 5");
    out.families_checked = 1;
    if (!matcher.saturates(neg)) {
      out.verdict = false;
      out.counterexample_size = static_cast<std::uint32_t>(neg.size());
    }
    return out;
  }
  for (int t = 0; t < family_samples; ++t) {
    Rng rng(seed, static_cast<std::uint64_t>(t));
    std::vector<std::uint32_t> family;
    for (std::uint32_t m : neg)
      if (rng.next() & 1u) family.push_back(m);
    out.families_checked++;
    if (!matcher.saturates(family)) {
      out.verdict = false;
      out.counterexample_size = static_cast<std::uint32_t>(family.size());
      return out;
    }
  }
  return out;
}

// Monte Carlo anticoncentration: P{ |sum of random signs . lambda| >= beta
// (sum lambda^2)^{1/2} } over a centesimal beta grid; beta_hat is the
// largest grid point whose empirical probability still dominates it.
struct AnticoncentrationResult {
  double beta_hat = 0.0;
  double prob_hat = 0.0;
  WilsonInterval ci{0.0, 0.0};
  std::vector<double> beta_grid;
  std::vector<double> prob;

  double prob_at(double beta) const {
    for (std::size_t i = 0; i < beta_grid.size(); ++i)
      if (std::abs(beta_grid[i] - beta) < 1e-12) return prob[i];
    throw ConfigError("beta not on the grid");
  }
};

inline AnticoncentrationResult anticoncentration_check(const std::vector<double>& lambdas,
                                                       long trials, std::uint64_t seed) {
  if (trials < 10000) throw ConfigError("at least 1e4 trials required");
  const std::size_t K = lambdas.size();
  if (K == 0) throw ConfigError("empty weight vector");
  double l2 = 0;
  bool equal = true;
  for (double l : lambdas) {
    if (!(l > 0.0)) throw ConfigError("lambdas must be positive");
    l2 += l * l;
    if (l != lambdas[0]) equal = false;
  }
  double sigma = std::sqrt(l2);
  // Bin by direct comparison against precomputed thresholds so lattice-valued
  // sums sitting exactly on a grid point are counted on the >= side.
  std::vector<double> thresholds(101);
  for (int k = 0; k <= 100; ++k) thresholds[k] = double(k) / 100.0 * sigma;
  std::vector<long> bins(101, 0);
  const std::size_t words = (K + 63) / 64;
  for (long t = 0; t < trials; ++t) {
    Rng rng(seed, static_cast<std::uint64_t>(t));
    double total;
    if (equal) {
      long pop = 0;
      std::size_t left = K;
      for (std::size_t wd = 0; wd < words; ++wd) {
        std::uint64_t bits = rng.next();
        if (left < 64) bits &= (std::uint64_t(1) << left) - 1;
        pop += std::popcount(bits);
        left -= std::min<std::size_t>(left, 64);
      }
      total = lambdas[0] * double(2 * pop - long(K));
    } else {
      std::uint64_t bits = 0;
      int have = 0;
      double acc = 0;
      for (std::size_t i = 0; i < K; ++i) {
        if (have == 0) {
          bits = rng.next();
          have = 64;
        }
        acc += (bits & 1u) ? lambdas[i] : -lambdas[i];
        bits >>= 1;
        have--;
      }
      total = acc;
    }
    double v = std::abs(total);
    int bin = static_cast<int>(
        std::upper_bound(thresholds.begin() + 1, thresholds.end(), v) - thresholds.begin() - 1);
    if (v >= thresholds[100]) bin = 100;
    bins[bin]++;
  }
  AnticoncentrationResult out;
  long above = 0;
  std::vector<long> suffix(101, 0);
  for (int b = 100; b >= 0; --b) {
    above += bins[b];
    suffix[b] = above;
  }
  for (int k = 1; k <= 100; ++k) {
    out.beta_grid.push_back(double(k) / 100.0);
    out.prob.push_back(double(suffix[k]) / double(trials));
  }
  for (int k = 100; k >= 1; --k) {
    double beta = double(k) / 100.0;
    double p = out.prob[k - 1];
    if (p >= beta) {
      out.beta_hat = beta;
      out.prob_hat = p;
      out.ci = wilson95(p, double(trials));
      break;
    }
  }
  return out;
}

// ---- gauge pipelines ----

// integral_0^{t2} (h/t^s)^2 dt/t by geometric refinement of the lower limit.
// Increments over dyadic shells decay geometrically for convergent gauges;
// a stalled increment ratio marks divergence. When the per-shell ratio is
// stable but the budget runs out, the geometric tail is added analytically.
struct ZeroLimitIntegral {
  double value = 0.0;
  bool divergent = false;
  bool extrapolated = false;
};

inline ZeroLimitIntegral gauge_energy_integral_zero(const GaugeFunction& g, double s,
                                                    double t2) {
  if (!(t2 > 0.0)) throw ConfigError("upper limit must be positive");
  ZeroLimitIntegral out;
  CompensatedSum acc;
  double prev_inc = -1.0;
  int stalled = 0;
  double hi = t2;
  double ratio = 0.0;
  for (int k = 0; k < 200; ++k) {
    double lo = 0.5 * hi;
    double inc = gauge_energy_integral(g, s, lo, hi);
    acc.add(inc);
    if (prev_inc > 0.0) {
      ratio = inc / prev_inc;
      if (ratio >= 0.9999) {
        if (++stalled >= 5) {
          out.divergent = true;
          out.value = acc.value();
          return out;
        }
      } else {
        stalled = 0;
      }
    }
    if (acc.value() > 0.0 && inc <= 1e-12 * acc.value()) {
      out.value = acc.value();
      return out;
    }
    prev_inc = inc;
    hi = lo;
  }
  if (ratio > 0.0 && ratio < 1.0) {
    acc.add(prev_inc * ratio / (1.0 - ratio));
    out.extrapolated = true;
    out.value = acc.value();
    return out;
  }
  throw NumericError("zero-limit integral did not settle");
}

struct GaugeExperimentOptions {
  double P = 1.0;
  double C4 = 2.0;
  double alpha = 0.0;  // 0 -> default_alpha(T)
  double T = 4.0;
  double tol = 1e-13;
  int max_iter = 20000;
  std::uint64_t seed = operator_norm_seed;
  int workers = 0;
  std::uint64_t operator_point_cap = 4096;  // skip the operator stage above this
};

// Full calibrated pipeline: pick sigma_0 so the truncation-window energy
// integral matches C4 P h(sigma_0), generate the scale sequence from the
// gauge, build the set, and evaluate (a) the content lower bound of the
// region where the center-measure transform exceeds P, against the energy
// integral between the content scales, and (b) the capacity proxy against
// the content-over-energy bound. All comparability constants come out as
// measured ratios.
inline json gauge_experiment(const GaugeFunction& h, int n, int d, double s,
                             const GaugeExperimentOptions& opt = {}) {
  double sigma0 = calibrate_sigma0(h, opt.P, opt.C4, d, s, n);
  SigmaSequence seq = sigma_from_gauge(h, sigma0, d, n);
  double alpha = opt.alpha > 0.0 ? opt.alpha : default_alpha(opt.T);
  Ladder lad = regularize(seq, alpha, opt.T);
  CantorSet set = build_cantor(lad, d);
  DiscreteMeasure nu = discretize_centers(set);
  double N = std::ldexp(1.0, d * n);
  LadderStats st = ladder_stats(lad, d, s);

  json rep;
  rep["context"] = make_context(set, s, {{"gauge", h.name},
                                         {"P", opt.P},
                                         {"C4", opt.C4},
                                         {"seed", opt.seed},
                                         {"measure", "centers"}});
  rep["measured"]["sigma0"] = sigma0;
  rep["measured"]["h_sigma0"] = h(sigma0);
  rep["measured"]["sum_theta2"] = st.total;
  // the calibration identity makes the density sum track (C4 P)^2
  add_ratio(rep, "sqrt_sum_theta2_over_C4P", std::sqrt(st.total), opt.C4 * opt.P);

  RieszField field = transform_at_nodes(nu, 0.0, s, Exclude::own_node, opt.workers);
  PsiWitness psi = psi_witness(set, h);
  std::uint64_t exceed = 0;
  for (std::size_t i = 0; i < nu.size(); ++i)
    if (field.magnitude(i) > opt.P) exceed++;
  double survival = double(exceed) / double(nu.size());
  double psi_super = psi.mass * survival;  // witness mass of the super-level region
  double M_cert = psi_super / psi.frostman_constant;
  rep["measured"]["survival_fraction"] = survival;
  rep["measured"]["frostman_constant"] = psi.frostman_constant;
  rep["measured"]["content_lower_superlevel"] = M_cert;
  add_ratio(rep, "content_lower_over_h_sigma0", M_cert, h(sigma0));
  if (M_cert > 0.0) {
    double t_hi = h.inverse(M_cert);
    double t_lo = h.inverse(M_cert / N);
    double I = gauge_energy_integral(h, s, t_lo, t_hi);
    double rhs = 1.0 / opt.P * std::sqrt(I);  // ||nu|| = 1
    rep["measured"]["superlevel_energy_integral"] = I;
    add_ratio(rep, "content_lower_over_energy_bound", M_cert, rhs);
  }

  if (nu.size() <= opt.operator_point_cap) {
    std::vector<double> grid;
    grid.push_back(0.0);
    for (double e : eps_ladder(set)) grid.push_back(e);
    OperatorSweepResult sweep =
        operator_norm_sweep(nu, s, grid, opt.tol, opt.max_iter, opt.seed, opt.workers);
    double proxy = sweep.sup > 1.0 ? 1.0 / sweep.sup : 1.0;
    rep["measured"]["operator_norm"] = sweep.sup;
    rep["measured"]["capacity_proxy"] = proxy;
    ContentBounds cb = content_bounds(set, h);
    rep["measured"]["content_lower"] = cb.lower;
    rep["measured"]["content_upper"] = cb.upper;
    for (auto [label, M] : {std::pair<const char*, double>{"lower", cb.lower},
                            std::pair<const char*, double>{"upper", cb.upper}}) {
      double t2 = h.inverse(M);
      ZeroLimitIntegral zi = gauge_energy_integral_zero(h, s, t2);
      json entry;
      entry["content"] = M;
      entry["t2"] = t2;
      entry["divergent"] = zi.divergent;
      if (!zi.divergent) {
        double bound = M / std::sqrt(zi.value);
        entry["energy_integral"] = zi.value;
        entry["extrapolated"] = zi.extrapolated;
        entry["capacity_bound"] = bound;
        entry["proxy_over_bound"] = proxy / bound;
      }
      rep["capacity_comparison"][label] = entry;
    }
  } else {
    rep["operator_skipped"] = true;
  }
  stamp_report(rep, "gauge_experiment");
  return rep;
}

struct DivergenceSweepOptions {
  double sigma0 = 1.0;
  double alpha = 0.0;
  double T = 4.0;
  int n_lo = 2;
  int n_hi = 6;
  int workers = 0;
};

// Truncation sweep at fixed sigma_0: for gauges whose energy integral
// diverges at zero, the capacity band shrinks with depth while the content
// lower bound holds at a fixed positive level.
inline json divergence_sweep(const GaugeFunction& h, int d, double s,
                             const DivergenceSweepOptions& opt = {}) {
  if (opt.n_lo < 1 || opt.n_hi < opt.n_lo) throw ConfigError("bad depth range");
  double alpha = opt.alpha > 0.0 ? opt.alpha : default_alpha(opt.T);
  json rows = json::array();
  std::vector<double> log_n, log_band;
  double content_min = std::numeric_limits<double>::infinity();
  double content_max = 0.0;
  for (int n = opt.n_lo; n <= opt.n_hi; ++n) {
    SigmaSequence seq = sigma_from_gauge(h, opt.sigma0, d, n);
    Ladder lad = regularize(seq, alpha, opt.T);
    CantorSet set = build_cantor(lad, d);
    ContentBounds cb = content_bounds(set, h);
    double band = capacity_band(seq, d, s);
    json row;
    row["n"] = n;
    row["band"] = band;
    row["content_lower"] = cb.lower;
    row["content_upper"] = cb.upper;
    row["frostman_constant"] = cb.frostman_constant;
    rows.push_back(row);
    log_n.push_back(std::log(double(n)));
    log_band.push_back(std::log(band));
    content_min = std::min(content_min, cb.lower);
    content_max = std::max(content_max, cb.lower);
  }
  json rep;
  rep["context"] = {{"gauge", h.name}, {"d", d},      {"s", s},
                    {"sigma0", opt.sigma0},           {"alpha", alpha},
                    {"T", opt.T},                     {"n_lo", opt.n_lo},
                    {"n_hi", opt.n_hi}};
  rep["rows"] = rows;
  rep["measured"]["band_fit_exponent"] = fit_slope(log_n, log_band);
  rep["measured"]["content_lower_min"] = content_min;
  rep["measured"]["content_lower_max"] = content_max;
  rep["measured"]["content_stability"] = content_min / content_max;
  stamp_report(rep, "divergence_sweep");
  return rep;
}

}  // namespace rieszlab
