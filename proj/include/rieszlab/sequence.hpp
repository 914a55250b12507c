#pragma once

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <vector>

#include "rieszlab/common.hpp"

namespace rieszlab {

// Scale sequence sigma_1 >= 2 sigma_2 >= 4 sigma_3 >= ... (indices are
// 1-based in the math; storage is 0-based: sigma[j-1] holds sigma_j).
struct SigmaSequence {
  std::vector<double> sigma;

  int n() const { return static_cast<int>(sigma.size()); }

  static SigmaSequence geometric(double ratio, int n) {
    if (!(ratio >= 2.0)) throw ConfigError("geometric sigma ratio must be >= 2");
    if (n < 1) throw ConfigError("sequence length must be >= 1");
    SigmaSequence s;
    s.sigma.resize(n);
    double v = 1.0;
    for (int j = 0; j < n; ++j) {
      v /= ratio;
      s.sigma[j] = v;
    }
    return s;
  }

  void validate() const {
    if (sigma.empty()) throw ConfigError("empty sigma sequence");
    for (double v : sigma)
      if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("sigma values must be positive finite");
    for (std::size_t j = 0; j + 1 < sigma.size(); ++j)
      if (!(2.0 * sigma[j + 1] <= sigma[j]))
        throw ConfigError("sigma must at least halve at each step (2*sigma_{j+1} <= sigma_j)");
  }
};

inline void validate_alpha_T(double alpha, double T) {
  if (!(alpha > 0.0 && alpha < 0.5)) throw ConfigError("alpha must lie in (0, 1/2)");
  if (!(T > 1.0 && T < 1.0 / (2.0 * alpha)))
    throw ConfigError("T must lie in (1, 1/(2 alpha))");
}

inline double default_alpha(double T) { return std::min(0.1, 1.0 / (4.0 * T)); }

// Regularized scale ladder: ell_j halves inside a block [j_p, j_{p+1}) and
// drops by at least a factor alpha*2^{-gap} at every selected index.
struct Ladder {
  std::vector<double> sigma;
  std::vector<double> ell;
  std::vector<int> selected;  // block start indices J = {j_1 < ... < j_m}, 1-based
  double alpha = 0.0;
  double T = 0.0;

  int n() const { return static_cast<int>(ell.size()); }
  int m() const { return static_cast<int>(selected.size()); }

  bool is_selected(int j) const {
    return std::binary_search(selected.begin(), selected.end(), j);
  }

  // Block start j_p for level j (largest selected index <= j).
  int block_start(int j) const {
    auto it = std::upper_bound(selected.begin(), selected.end(), j);
    return *(it - 1);
  }

  // The selection threshold alpha * 2^{-(j-jp)} * sigma_jp, evaluated with
  // the exact expression used during selection so that invariant checks
  // reproduce the same floating point values.
  double threshold(int j, int jp) const {
    return alpha * std::ldexp(sigma[jp - 1], -(j - jp));
  }

  void check_invariants() const;
};

inline Ladder regularize(const SigmaSequence& seq, double alpha, double T) {
  seq.validate();
  validate_alpha_T(alpha, T);
  const int n = seq.n();
  Ladder lad;
  lad.sigma = seq.sigma;
  lad.alpha = alpha;
  lad.T = T;
  lad.ell.assign(n, 0.0);
  lad.selected = {1};
  if (n == 1) {
    lad.ell[0] = seq.sigma[0];
    return lad;
  }
  while (lad.selected.back() < n) {
    int jp = lad.selected.back();
    int jnext = n;
    if (seq.sigma[n - 1] <= lad.threshold(n, jp)) {
      for (int j = jp + 1; j <= n; ++j) {
        if (seq.sigma[j - 1] <= lad.threshold(j, jp)) {
          jnext = j;
          break;
        }
      }
    }
    lad.selected.push_back(jnext);
  }
  const auto& J = lad.selected;
  for (std::size_t p = 0; p + 1 < J.size(); ++p) {
    for (int j = J[p]; j < J[p + 1]; ++j)
      lad.ell[j - 1] = std::ldexp(seq.sigma[J[p] - 1], -(j - J[p]));
  }
  int jprev = J[J.size() - 2];
  lad.ell[n - 1] = std::min(seq.sigma[n - 1], lad.threshold(n, jprev));
  return lad;
}

// All comparisons reuse the multiplicative expressions from the selection
// pass, so for any admissible input they hold without tolerance.
inline void Ladder::check_invariants() const {
  const int nn = n();
  if (nn == 0) throw InvariantError("empty ladder");
  if (selected.empty() || selected.front() != 1 || selected.back() != nn)
    throw InvariantError("ladder block starts must begin at 1 and end at n");
  for (int p = 0; p + 1 < m(); ++p)
    if (!(selected[p] < selected[p + 1])) throw InvariantError("block starts not increasing");
  if (nn == 1) {
    if (ell[0] != sigma[0]) throw InvariantError("single-level ladder must have ell_1 = sigma_1");
    return;
  }
  // halving inside blocks, exact
  for (int p = 0; p + 1 < m(); ++p) {
    int jp = selected[p], jq = selected[p + 1];
    for (int j = jp; j < jq; ++j)
      if (ell[j - 1] != std::ldexp(sigma[jp - 1], -(j - jp)))
        throw InvariantError("within-block halving violated at level " + std::to_string(j));
  }
  // sigma_j <= ell_j < sigma_j / alpha for j < n
  for (int j = 1; j < nn; ++j) {
    if (!(sigma[j - 1] <= ell[j - 1]))
      throw InvariantError("ell_j < sigma_j at level " + std::to_string(j));
    if (!(alpha * ell[j - 1] < sigma[j - 1]))
      throw InvariantError("ell_j >= sigma_j/alpha at level " + std::to_string(j));
  }
  // alpha sigma_n <= ell_n <= sigma_n
  if (!(alpha * sigma[nn - 1] <= ell[nn - 1]) || !(ell[nn - 1] <= sigma[nn - 1]))
    throw InvariantError("ell_n outside [alpha sigma_n, sigma_n]");
  // drop at block starts: ell_{j_{p+1}} <= alpha 2^{-(j_{p+1}-j_p)} ell_{j_p}
  for (int p = 0; p + 1 < m(); ++p) {
    int jp = selected[p], jq = selected[p + 1];
    if (!(ell[jq - 1] <= threshold(jq, jp)))
      throw InvariantError("block-start drop violated at level " + std::to_string(jq));
  }
}

// Per-level densities theta_j = 2^{-dj} / ell_j^s and their block structure.
struct LadderStats {
  std::vector<double> theta;          // theta_j, j = 1..n
  std::vector<double> Theta;          // Theta_p = theta_{j_p}, p = 1..m
  std::vector<double> partial;        // partial_k = Theta_1^2 + ... + Theta_k^2
  double total = 0.0;                 // sum_j theta_j^2
  double block_constant = 0.0;        // sum_{i>=0} 2^{-2(d-s)i}, bound for block sums
};

inline LadderStats ladder_stats(const Ladder& lad, int d, double s) {
  if (d < 1) throw ConfigError("dimension must be >= 1");
  if (!(s > 0.0)) throw ConfigError("s must be positive");
  LadderStats st;
  const int n = lad.n();
  st.theta.resize(n);
  CompensatedSum tot;
  for (int j = 1; j <= n; ++j) {
    st.theta[j - 1] = std::ldexp(1.0, -d * j) / std::pow(lad.ell[j - 1], s);
    tot.add(st.theta[j - 1] * st.theta[j - 1]);
  }
  st.total = tot.value();
  st.Theta.reserve(lad.m());
  CompensatedSum part;
  for (int jp : lad.selected) {
    st.Theta.push_back(st.theta[jp - 1]);
    part.add(st.theta[jp - 1] * st.theta[jp - 1]);
    st.partial.push_back(part.value());
  }
  // geometric series sum_{i>=0} r^i with r = 2^{-2(d-s)}
  if (s < d) {
    double r = std::pow(2.0, -2.0 * (d - s));
    st.block_constant = 1.0 / (1.0 - r);
  } else {
    st.block_constant = std::numeric_limits<double>::infinity();
  }
  return st;
}

// Verifies the geometric block bound: sum of theta_j^2 over a block is at
// most block_constant * Theta_p^2.
inline void check_block_bound(const Ladder& lad, const LadderStats& st) {
  for (int p = 0; p < lad.m(); ++p) {
    int jp = lad.selected[p];
    int jq = (p + 1 < lad.m()) ? lad.selected[p + 1] : lad.n() + 1;
    CompensatedSum blk;
    for (int j = jp; j < jq; ++j) blk.add(st.theta[j - 1] * st.theta[j - 1]);
    double bound = st.block_constant * st.Theta[p] * st.Theta[p];
    if (!(blk.value() <= bound))
      throw InvariantError("block density bound violated in block starting at " + std::to_string(jp));
  }
}

// Backward greedy subsequence: p_K is the least maximizer of
// 2^{-delta (m-p)} a_p, and each earlier pick is the least maximizer of
// 2^{-delta (p_{l+1}-p)} a_p over p < p_{l+1}. The output always contains 1,
// and sum_{p in P} a_p^2 >= c * sum_p a_p^2 with c = 1 - 2^{-kappa delta}.
struct SubsequenceSelection {
  std::vector<int> indices;  // 1-based, increasing
  double c = 0.0;
};

inline SubsequenceSelection select_subsequence(const std::vector<double>& a, double delta,
                                               double kappa) {
  if (a.empty()) throw ConfigError("empty sequence");
  if (!(delta > 0.0) || !(kappa > 0.0)) throw ConfigError("delta and kappa must be positive");
  const int m = static_cast<int>(a.size());
  std::vector<int> picks;
  int anchor = m;
  // first pick: least maximizer of 2^{-delta (m-p)} a_p over p in [1, m]
  {
    int best = 1;
    double bestv = std::exp2(-delta * (m - 1)) * a[0];
    for (int p = 2; p <= m; ++p) {
      double v = std::exp2(-delta * (m - p)) * a[p - 1];
      if (v > bestv) {
        bestv = v;
        best = p;
      }
    }
    picks.push_back(best);
    anchor = best;
  }
  while (anchor > 1) {
    int best = 1;
    double bestv = std::exp2(-delta * (anchor - 1)) * a[0];
    for (int p = 2; p < anchor; ++p) {
      double v = std::exp2(-delta * (anchor - p)) * a[p - 1];
      if (v > bestv) {
        bestv = v;
        best = p;
      }
    }
    picks.push_back(best);
    anchor = best;
  }
  std::reverse(picks.begin(), picks.end());
  SubsequenceSelection out;
  out.indices = std::move(picks);
  out.c = 1.0 - std::exp2(-kappa * delta);
  return out;
}

// ---- ladder text format ----
// Header "d=<int> s=<float> alpha=<float> T=<float>", then one line per level
// "j sigma_j ell_j selected(0|1)", all floats with 17 significant digits.

inline void write_ladder(std::ostream& os, const Ladder& lad, int d, double s) {
  os << "d=" << d << " s=" << format_g17(s) << " alpha=" << format_g17(lad.alpha)
     << " T=" << format_g17(lad.T) << "\n";
  for (int j = 1; j <= lad.n(); ++j) {
    os << j << " " << format_g17(lad.sigma[j - 1]) << " " << format_g17(lad.ell[j - 1]) << " "
       << (lad.is_selected(j) ? 1 : 0) << "\n";
  }
}

struct LadderFile {
  Ladder ladder;
  int d = 0;
  double s = 0.0;
};

inline LadderFile read_ladder(std::istream& is) {
  LadderFile out;
  std::string header;
  if (!std::getline(is, header)) throw ConfigError("ladder file: missing header");
  double alpha = 0, T = 0;
  if (std::sscanf(header.c_str(), "d=%d s=%lf alpha=%lf T=%lf", &out.d, &out.s, &alpha, &T) != 4)
    throw ConfigError("ladder file: malformed header");
  out.ladder.alpha = alpha;
  out.ladder.T = T;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    int j = 0, sel = 0;
    double sig = 0, ell = 0;
    if (std::sscanf(line.c_str(), "%d %lf %lf %d", &j, &sig, &ell, &sel) != 4)
      throw ConfigError("ladder file: malformed level line");
    if (j != static_cast<int>(out.ladder.sigma.size()) + 1)
      throw ConfigError("ladder file: levels out of order");
    out.ladder.sigma.push_back(sig);
    out.ladder.ell.push_back(ell);
    if (sel) out.ladder.selected.push_back(j);
  }
  if (out.ladder.sigma.empty()) throw ConfigError("ladder file: no levels");
  return out;
}

inline std::string ladder_digest(const Ladder& lad, int d, double s) {
  std::ostringstream os;
  write_ladder(os, lad, d, s);
  return hex64(fnv1a(os.str()));
}

}  // namespace rieszlab
