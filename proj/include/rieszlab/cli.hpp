#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "rieszlab/estimates.hpp"
#include "rieszlab/treesum.hpp"

namespace rieszlab {

// Run configuration: JSON document first, command-line flags override.
struct RunConfig {
  int d = 2;
  double s = 1.0;
  int n = 3;
  int n_lo = 0;  // 0 -> no sweep requested; sweep commands default to 1..n
  int n_hi = 0;
  std::string sequence_kind = "geometric";  // geometric | explicit | gauge
  double ratio = 4.0;
  std::vector<double> sigma;    // explicit scales
  double gauge_beta = 1.5;      // power gauge exponent
  double sigma0 = 1.0;          // gauge anchor scale
  double alpha = 0.0;           // 0 -> default_alpha(T)
  double T = 4.0;
  int q = 3;
  std::string measure_mode = "centers";  // centers | grid
  std::string backend = "naive";         // naive | tree
  double mac = 0.3;
  double eps = 0.0;
  std::string exclude = "own_node";
  std::uint64_t seed = 0x5EEDULL;
  std::string out = "out";
  int workers = 0;
  double P = 1.0;
  double C4 = 2.0;
  double c0 = -1.0;  // < 0 -> calibrate on the n = 2 member of the family
  long trials = 100000;
  int lemma_cases = 1000;
  int flip_samples = 1000;
  bool divergence = false;

  double effective_alpha() const { return alpha > 0.0 ? alpha : default_alpha(T); }

  void validate() const {
    if (d < 1 || d > max_dim) throw ConfigError("d out of range");
    if (!(s > 0.0)) throw ConfigError("s must be positive");
    if (n < 1) throw ConfigError("n must be >= 1");
    if (std::uint64_t(d) * std::uint64_t(n) > 24) throw ConfigError("2^(d n) exceeds the cube cap");
    if (n_lo < 0 || n_hi < n_lo) throw ConfigError("bad n range");
    validate_alpha_T(effective_alpha(), T);
    if (q < 1 || q % 2 == 0) throw ConfigError("q must be odd and positive");
    if (sequence_kind != "geometric" && sequence_kind != "explicit" && sequence_kind != "gauge")
      throw ConfigError("unknown sequence kind: " + sequence_kind);
    if (sequence_kind == "geometric" && !(ratio >= 2.0))
      throw ConfigError("geometric ratio must be >= 2");
    if (sequence_kind == "gauge" && !(gauge_beta > 0.0 && sigma0 > 0.0))
      throw ConfigError("gauge spec needs positive beta and sigma0");
    if (measure_mode != "centers" && measure_mode != "grid")
      throw ConfigError("measure mode must be centers or grid");
    if (backend != "naive" && backend != "tree") throw ConfigError("unknown backend");
    if (backend == "tree" && !(mac >= 0.0 && mac < 1.0))
      throw ConfigError("mac must lie in [0, 1)");
    if (eps < 0.0) throw ConfigError("eps must be >= 0");
    parse_exclude(exclude);
    if (s >= double(d) && measure_mode != "centers")
      throw ConfigError("s >= d is only meaningful for the center measure");
    if (workers < 0) throw ConfigError("workers must be >= 0");
    if (trials < 10000) throw ConfigError("trials must be >= 1e4");
  }

  SigmaSequence make_sequence(int depth) const {
    if (sequence_kind == "explicit") {
      if (sigma.empty()) throw ConfigError("explicit sequence is empty");
      SigmaSequence seq;
      seq.sigma.assign(sigma.begin(),
                       sigma.begin() + std::min<std::size_t>(sigma.size(), depth));
      if (int(seq.sigma.size()) != depth)
        throw ConfigError("explicit sequence shorter than requested depth");
      seq.validate();
      return seq;
    }
    if (sequence_kind == "gauge")
      return sigma_from_gauge(GaugeFunction::power(gauge_beta, d), sigma0, d, depth);
    return SigmaSequence::geometric(ratio, depth);
  }

  CantorSet make_set(int depth) const {
    Ladder lad = regularize(make_sequence(depth), effective_alpha(), T);
    return build_cantor(lad, d);
  }

  DiscreteMeasure make_measure(const CantorSet& set) const {
    return measure_mode == "grid" ? discretize_grid(set, q) : discretize_centers(set);
  }

  json to_json() const {
    json j;
    j["d"] = d;
    j["s"] = s;
    j["n"] = n;
    if (n_lo > 0) j["sweep"] = {{"n_lo", n_lo}, {"n_hi", n_hi}};
    j["sequence"] = sequence_kind == "geometric"
                        ? json{{"kind", "geometric"}, {"ratio", ratio}}
                        : (sequence_kind == "explicit"
                               ? json{{"kind", "explicit"}, {"sigma", sigma}}
                               : json{{"kind", "gauge"}, {"beta", gauge_beta}, {"sigma0", sigma0}});
    j["alpha"] = effective_alpha();
    j["T"] = T;
    j["q"] = q;
    j["measure"] = measure_mode;
    j["backend"] = backend;
    j["mac"] = mac;
    j["eps"] = eps;
    j["exclude"] = exclude;
    j["seed"] = seed;
    j["workers"] = workers;
    return j;
  }
};

namespace detail {

inline void apply_config_json(RunConfig& cfg, const json& j) {
  if (j.contains("d")) cfg.d = j["d"].get<int>();
  if (j.contains("s")) cfg.s = j["s"].get<double>();
  if (j.contains("n")) cfg.n = j["n"].get<int>();
  if (j.contains("sweep")) {
    cfg.n_lo = j["sweep"].value("n_lo", 1);
    cfg.n_hi = j["sweep"].value("n_hi", cfg.n);
  }
  if (j.contains("sequence")) {
    const json& sq = j["sequence"];
    cfg.sequence_kind = sq.value("kind", cfg.sequence_kind);
    if (sq.contains("ratio")) cfg.ratio = sq["ratio"].get<double>();
    if (sq.contains("sigma")) cfg.sigma = sq["sigma"].get<std::vector<double>>();
    if (sq.contains("beta")) cfg.gauge_beta = sq["beta"].get<double>();
    if (sq.contains("sigma0")) cfg.sigma0 = sq["sigma0"].get<double>();
  }
  if (j.contains("alpha")) cfg.alpha = j["alpha"].get<double>();
  if (j.contains("T")) cfg.T = j["T"].get<double>();
  if (j.contains("q")) cfg.q = j["q"].get<int>();
  if (j.contains("measure")) cfg.measure_mode = j["measure"].get<std::string>();
  if (j.contains("backend")) cfg.backend = j["backend"].get<std::string>();
  if (j.contains("mac")) cfg.mac = j["mac"].get<double>();
  if (j.contains("eps")) cfg.eps = j["eps"].get<double>();
  if (j.contains("exclude")) cfg.exclude = j["exclude"].get<std::string>();
  if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  if (j.contains("out")) cfg.out = j["out"].get<std::string>();
  if (j.contains("workers")) cfg.workers = j["workers"].get<int>();
  if (j.contains("P")) cfg.P = j["P"].get<double>();
  if (j.contains("C4")) cfg.C4 = j["C4"].get<double>();
  if (j.contains("c0")) cfg.c0 = j["c0"].get<double>();
  if (j.contains("trials")) cfg.trials = j["trials"].get<long>();
  if (j.contains("lemma_cases")) cfg.lemma_cases = j["lemma_cases"].get<int>();
  if (j.contains("flip_samples")) cfg.flip_samples = j["flip_samples"].get<int>();
}

inline void atomic_write(const std::filesystem::path& path, const std::string& content) {
  std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw ConfigError("cannot open " + tmp.string() + " for writing");
    os << content;
  }
  std::filesystem::rename(tmp, path);
}

inline void write_meta(const RunConfig& cfg, const std::string& command) {
  auto now = std::chrono::system_clock::now();
  std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[64];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&tt));
  json meta;
  meta["command"] = command;
  meta["timestamp"] = buf;
  meta["config"] = cfg.to_json();
  atomic_write(std::filesystem::path(cfg.out) / "meta.json", meta.dump(2) + "\n");
}

inline void emit_report(const RunConfig& cfg, const json& report) {
  atomic_write(std::filesystem::path(cfg.out) / "report.json", report.dump(2) + "\n");
}

inline void emit_csv(const RunConfig& cfg, const std::string& csv) {
  atomic_write(std::filesystem::path(cfg.out) / "sweep.csv", csv);
}

inline std::pair<int, int> sweep_range(const RunConfig& cfg) {
  if (cfg.n_lo > 0) return {cfg.n_lo, cfg.n_hi};
  return {1, cfg.n};
}

}  // namespace detail

// ---- subcommand bodies ----

inline int cmd_regularize(const RunConfig& cfg) {
  Ladder lad = regularize(cfg.make_sequence(cfg.n), cfg.effective_alpha(), cfg.T);
  std::ostringstream os;
  write_ladder(os, lad, cfg.d, cfg.s);
  detail::atomic_write(std::filesystem::path(cfg.out) / "ladder.txt", os.str());
  std::cout << os.str();
  return 0;
}

inline int cmd_build(const RunConfig& cfg) {
  CantorSet set = cfg.make_set(cfg.n);
  check_geometry(set);
  std::ostringstream lt;
  write_ladder(lt, set.ladder, cfg.d, cfg.s);
  detail::atomic_write(std::filesystem::path(cfg.out) / "ladder.txt", lt.str());
  std::ostringstream st;
  write_set(st, set, cfg.s);
  detail::atomic_write(std::filesystem::path(cfg.out) / "set.txt", st.str());
  std::cerr << "built " << set.level_count(set.n) << " cubes at depth " << set.n << "\n";
  return 0;
}

inline int cmd_transform(const RunConfig& cfg) {
  CantorSet set = cfg.make_set(cfg.n);
  DiscreteMeasure nu = cfg.make_measure(set);
  RieszField field;
  if (cfg.backend == "tree") {
    if (cfg.exclude != "none") throw ConfigError("tree backend computes unexcluded sums only");
    TreeIndex tree = build_tree_index(set, nu);
    field = tree_transform(nu, set, tree, nu.x.data(), nu.size(), cfg.eps, cfg.s, cfg.mac,
                           cfg.workers);
  } else {
    field = transform_at_nodes(nu, cfg.eps, cfg.s, parse_exclude(cfg.exclude), cfg.workers);
  }
  std::ostringstream os;
  write_field(os, field);
  detail::atomic_write(std::filesystem::path(cfg.out) / "field.txt", os.str());
  std::cerr << "transform at " << field.size() << " nodes, eps=" << cfg.eps << "\n";
  return 0;
}

inline int cmd_verify_norm(const RunConfig& cfg) {
  auto [lo, hi] = detail::sweep_range(cfg);
  json rows = json::array();
  std::ostringstream csv;
  csv << "n,norm2,sum_theta2,ratio\n";
  double rmin = 0, rmax = 0;
  for (int n = lo; n <= hi; ++n) {
    CantorSet set = cfg.make_set(n);
    NormRatioOptions opt;
    opt.workers = cfg.workers;
    opt.qs = {cfg.q};
    if (n == std::min(3, hi) && cfg.q == 3) opt.qs = {3, 5, 7};
    json rep = norm_ratio_report(set, cfg.s, opt);
    double ratio = rep["ratios"]["norm2_over_sum_theta2"]["ratio"].get<double>();
    csv << n << "," << format_g17(rep["measured"]["norm2"].get<double>()) << ","
        << format_g17(rep["theoretical"]["sum_theta2"].get<double>()) << "," << format_g17(ratio)
        << "\n";
    rows.push_back(rep);
    rmin = (n == lo) ? ratio : std::min(rmin, ratio);
    rmax = (n == lo) ? ratio : std::max(rmax, ratio);
  }
  json report;
  report["kind"] = "norm_sweep";
  report["schema_version"] = 1;
  report["rows"] = rows;
  report["band_factor"] = rmax / rmin;
  detail::emit_report(cfg, report);
  detail::emit_csv(cfg, csv.str());
  std::cerr << "norm band factor " << rmax / rmin << " over n=" << lo << ".." << hi << "\n";
  return 0;
}

inline int cmd_verify_operator(const RunConfig& cfg) {
  auto [lo, hi] = detail::sweep_range(cfg);
  json rows = json::array();
  std::ostringstream csv;
  csv << "n,operator_norm2,sum_theta2,ratio\n";
  double rmin = 0, rmax = 0;
  for (int n = lo; n <= hi; ++n) {
    CantorSet set = cfg.make_set(n);
    OperatorReportOptions opt;
    opt.workers = cfg.workers;
    opt.seed = cfg.seed;
    json rep = operator_report(set, cfg.s, opt);
    double ratio = rep["ratios"]["operator_norm2_over_sum_theta2"]["ratio"].get<double>();
    csv << n << "," << format_g17(rep["measured"]["operator_norm2"].get<double>()) << ","
        << format_g17(rep["theoretical"]["sum_theta2"].get<double>()) << "," << format_g17(ratio)
        << "\n";
    rows.push_back(rep);
    rmin = (n == lo) ? ratio : std::min(rmin, ratio);
    rmax = (n == lo) ? ratio : std::max(rmax, ratio);
  }
  json report;
  report["kind"] = "operator_sweep";
  report["schema_version"] = 1;
  report["rows"] = rows;
  report["band_factor"] = rmax / rmin;
  detail::emit_report(cfg, report);
  detail::emit_csv(cfg, csv.str());
  std::cerr << "operator band factor " << rmax / rmin << "\n";
  return 0;
}

inline int cmd_capacity(const RunConfig& cfg) {
  auto [lo, hi] = detail::sweep_range(cfg);
  json rows = json::array();
  std::ostringstream csv;
  csv << "n,capacity_proxy,band,ratio\n";
  for (int n = lo; n <= hi; ++n) {
    CapacityOptions opt;
    opt.alpha = cfg.alpha;
    opt.T = cfg.T;
    opt.seed = cfg.seed;
    opt.workers = cfg.workers;
    json rep = capacity_report(cfg.make_sequence(n), cfg.d, cfg.s, opt);
    csv << n << "," << format_g17(rep["measured"]["capacity_proxy"].get<double>()) << ","
        << format_g17(rep["theoretical"]["band"].get<double>()) << ","
        << format_g17(rep["ratios"]["proxy_over_band"]["ratio"].get<double>()) << "\n";
    rows.push_back(rep);
  }
  json report;
  report["kind"] = "capacity_sweep";
  report["schema_version"] = 1;
  report["rows"] = rows;
  detail::emit_report(cfg, report);
  detail::emit_csv(cfg, csv.str());
  return 0;
}

inline int cmd_distribution(const RunConfig& cfg) {
  auto [lo, hi] = detail::sweep_range(cfg);
  json rows = json::array();
  std::ostringstream csv;
  csv << "n,mean_square,big_portion\n";
  for (int n = lo; n <= hi; ++n) {
    CantorSet set = cfg.make_set(n);
    DiscreteMeasure mu = cfg.make_measure(set);
    DistributionOptions opt;
    opt.workers = cfg.workers;
    json rep = distribution_report(mu, set, cfg.s, opt);
    csv << n << "," << format_g17(rep["measured"]["mean_square"].get<double>()) << ","
        << format_g17(rep["measured"]["big_portion_b_0.1"].get<double>()) << "\n";
    rows.push_back(rep);
  }
  json report;
  report["kind"] = "distribution_sweep";
  report["schema_version"] = 1;
  report["rows"] = rows;
  detail::emit_report(cfg, report);
  detail::emit_csv(cfg, csv.str());
  return 0;
}

inline int cmd_cubes(const RunConfig& cfg) {
  auto [lo, hi] = detail::sweep_range(cfg);
  double c0 = cfg.c0;
  if (c0 < 0.0) {
    int cal_n = std::min(2, hi);
    CantorSet cal_set = cfg.make_set(cal_n);
    DiscreteMeasure cal_nu = cfg.make_measure(cal_set);
    c0 = calibrate_c0(cal_set, cal_nu, cfg.s, 0.1, cfg.workers);
  }
  json rows = json::array();
  std::ostringstream csv;
  csv << "n,c0,fraction_excl,fraction_full\n";
  for (int n = lo; n <= hi; ++n) {
    CantorSet set = cfg.make_set(n);
    DiscreteMeasure nu = cfg.make_measure(set);
    json rep = threshold_report(set, nu, c0, cfg.s, cfg.workers);
    csv << n << "," << format_g17(c0) << ","
        << format_g17(rep["measured"]["fraction_excl"].get<double>()) << ","
        << format_g17(rep["measured"]["fraction_full"].get<double>()) << "\n";
    rows.push_back(rep);
  }
  json report;
  report["kind"] = "threshold_sweep";
  report["schema_version"] = 1;
  report["c0"] = c0;
  report["rows"] = rows;
  detail::emit_report(cfg, report);
  detail::emit_csv(cfg, csv.str());
  return 0;
}

inline int cmd_lemmas(const RunConfig& cfg) {
  json report;
  report["kind"] = "lemma_checks";
  report["schema_version"] = 1;
  bool all_ok = true;

  int fails31 = 0;
  for (int i = 0; i < cfg.lemma_cases; ++i) {
    SelectionCase c = make_selection_case(cfg.seed, std::uint64_t(i));
    SelectionCheckResult r = selection_check(c.f, c.w, c.L, c.A, c.delta);
    if (!r.verdict) fails31++;
  }
  report["selection"] = {{"cases", cfg.lemma_cases}, {"failures", fails31}};
  all_ok = all_ok && fails31 == 0;

  Ladder lad = regularize(cfg.make_sequence(cfg.n), cfg.effective_alpha(), cfg.T);
  LadderStats st = ladder_stats(lad, cfg.d, cfg.s);
  SubsequenceEnergyCheck en = subsequence_energy_check(st.Theta, 1.0, 1.0);
  report["subsequence"] = {{"indices", en.indices},
                          {"selected_energy", en.selected_energy},
                          {"total_energy", en.total_energy},
                          {"c", en.c},
                          {"verdict", en.verdict}};
  all_ok = all_ok && en.verdict;

  int flip_fails = 0;
  for (int i = 0; i < cfg.flip_samples; ++i) {
    Rng rng(cfg.seed ^ 0xF11Bu, std::uint64_t(i));
    int K = 6 + int(rng.next() % 7);
    std::vector<double> lam(K);
    for (double& l : lam) l = std::exp(rng.uniform(-2.0, 2.0));
    FlipInjectionResult r = flip_injection_check(lam, 1, rng.next());
    if (!r.verdict) flip_fails++;
  }
  report["flip_injection"] = {{"cases", cfg.flip_samples}, {"failures", flip_fails}};
  all_ok = all_ok && flip_fails == 0;

  std::vector<double> lam(2048, 1.0);
  AnticoncentrationResult ac = anticoncentration_check(lam, cfg.trials, cfg.seed);
  report["anticoncentration"] = {{"K", 2048},
                                 {"trials", cfg.trials},
                                 {"beta_hat", ac.beta_hat},
                                 {"prob_hat", ac.prob_hat},
                                 {"prob_at_1", ac.prob_at(1.0)},
                                 {"wilson_lo", ac.ci.lo},
                                 {"wilson_hi", ac.ci.hi}};
  all_ok = all_ok && ac.beta_hat > 0.0;

  report["verdict"] = all_ok;
  detail::emit_report(cfg, report);
  if (!all_ok) throw InvariantError("a lemma check failed; see report.json");
  return 0;
}

inline int cmd_gauge(const RunConfig& cfg) {
  GaugeFunction h = GaugeFunction::power(cfg.gauge_beta, cfg.d);
  json report;
  if (cfg.divergence) {
    DivergenceSweepOptions opt;
    opt.sigma0 = cfg.sigma0;
    opt.alpha = cfg.alpha;
    opt.T = cfg.T;
    auto [lo, hi] = detail::sweep_range(cfg);
    opt.n_lo = std::max(2, lo);
    opt.n_hi = hi;
    opt.workers = cfg.workers;
    report = divergence_sweep(h, cfg.d, cfg.s, opt);
  } else {
    GaugeExperimentOptions opt;
    opt.P = cfg.P;
    opt.C4 = cfg.C4;
    opt.alpha = cfg.alpha;
    opt.T = cfg.T;
    opt.seed = cfg.seed;
    opt.workers = cfg.workers;
    report = gauge_experiment(h, cfg.n, cfg.d, cfg.s, opt);
  }
  detail::emit_report(cfg, report);
  return 0;
}

inline int cmd_bench(const RunConfig& cfg) {
  CantorSet set = cfg.make_set(cfg.n);
  DiscreteMeasure nu = cfg.make_measure(set);
  double eps = cfg.eps > 0.0 ? cfg.eps : 0.5 * set.ladder.ell[set.n - 1];
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  RieszField naive = transform_truncated(nu, nu.x.data(), nu.size(), eps, cfg.s, Exclude::none,
                                         nullptr, cfg.workers);
  auto t1 = clock::now();
  TreeIndex tree = build_tree_index(set, nu);
  auto t2 = clock::now();
  RieszField fast =
      tree_transform(nu, set, tree, nu.x.data(), nu.size(), eps, cfg.s, cfg.mac, cfg.workers);
  auto t3 = clock::now();
  double max_rel = 0;
  for (std::size_t i = 0; i < nu.size(); ++i) {
    double ref = naive.magnitude(i);
    double diff = 0;
    for (int a = 0; a < nu.d; ++a) {
      double delta = fast.value(i)[a] - naive.value(i)[a];
      diff += delta * delta;
    }
    diff = std::sqrt(diff);
    max_rel = std::max(max_rel, ref > 0.0 ? diff / ref : diff);
  }
  auto ms = [](auto a, auto b) {
    return std::chrono::duration_cast<std::chrono::microseconds>(b - a).count() / 1000.0;
  };
  json report;
  report["kind"] = "bench";
  report["schema_version"] = 1;
  report["points"] = nu.size();
  report["eps"] = eps;
  report["mac"] = cfg.mac;
  report["naive_ms"] = ms(t0, t1);
  report["tree_build_ms"] = ms(t1, t2);
  report["tree_ms"] = ms(t2, t3);
  report["max_rel_deviation"] = max_rel;
  detail::emit_report(cfg, report);
  std::cerr << "naive " << ms(t0, t1) << " ms, tree " << ms(t2, t3) << " ms, max rel dev "
            << max_rel << "\n";
  return 0;
}

// ---- driver ----

inline int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"Riesz transforms, operator norms and capacity estimates on "
               "regularized Cantor measures"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path, sigma_file;

  app.add_option("--config", config_path, "JSON config file; flags override its fields");
  app.add_option("--d", cfg.d, "ambient dimension");
  app.add_option("--s", cfg.s, "kernel exponent");
  app.add_option("--n", cfg.n, "construction depth");
  app.add_option("--n-lo", cfg.n_lo, "sweep start depth");
  app.add_option("--n-hi", cfg.n_hi, "sweep end depth");
  app.add_option("--sequence", cfg.sequence_kind, "scale sequence: geometric | gauge | explicit");
  app.add_option("--ratio", cfg.ratio, "geometric scale ratio (sigma_j = ratio^-j)");
  app.add_option("--sigma-file", sigma_file, "file with explicit scales, one per line");
  app.add_option("--gauge-beta", cfg.gauge_beta, "power gauge exponent (sequence kind gauge)");
  app.add_option("--sigma0", cfg.sigma0, "gauge anchor scale");
  app.add_option("--alpha", cfg.alpha, "regularization alpha (0 picks the default)");
  app.add_option("--T", cfg.T, "frame half-width multiplier");
  app.add_option("--q", cfg.q, "quadrature order per axis (odd)");
  app.add_option("--measure", cfg.measure_mode, "measure mode: centers | grid");
  app.add_option("--backend", cfg.backend, "summation backend: naive | tree");
  app.add_option("--mac", cfg.mac, "tree multipole acceptance parameter");
  app.add_option("--eps", cfg.eps, "truncation radius");
  app.add_option("--exclude", cfg.exclude, "exclusion rule: none | own_node | own_cube");
  app.add_option("--seed", cfg.seed, "random seed");
  app.add_option("--out", cfg.out, "output directory");
  app.add_option("--workers", cfg.workers, "worker threads (0 = hardware)");
  app.add_option("--P", cfg.P, "gauge pipeline level");
  app.add_option("--C4", cfg.C4, "gauge calibration constant");
  app.add_option("--c0", cfg.c0, "threshold coefficient (< 0 calibrates at n = 2)");
  app.add_option("--trials", cfg.trials, "Monte Carlo trials");
  app.add_option("--lemma-cases", cfg.lemma_cases, "random cases for the selection check");
  app.add_option("--flip-samples", cfg.flip_samples, "random families for the flip check");
  app.add_flag("--divergence", cfg.divergence, "gauge: run the truncation divergence sweep");

  const char* names[] = {"regularize",      "build",    "transform", "verify-norm",
                         "verify-operator", "capacity", "distribution", "cubes",
                         "lemmas",          "gauge",    "bench"};
  const char* descs[] = {"echo and export the regularized scale ladder",
                         "build the cube family and export it",
                         "evaluate the transform at the measure nodes",
                         "L2-norm versus density-sum sweep",
                         "operator-norm versus density-sum sweep",
                         "capacity proxy versus sequence band",
                         "survival curve of |R|^2 against its mean",
                         "threshold cube counting",
                         "combinatorial lemma checkers",
                         "gauge calibration pipeline",
                         "naive versus tree backend timing"};
  for (int i = 0; i < 11; ++i) app.add_subcommand(names[i], descs[i])->fallthrough();

  std::vector<const char*> argv;
  argv.push_back("rieszlab");
  for (const std::string& a : args) argv.push_back(a.c_str());
  try {
    app.parse(int(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help is success, any parse failure is config
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    if (!config_path.empty()) {
      std::ifstream is(config_path);
      if (!is) throw ConfigError("cannot read config file: " + config_path);
      json j = json::parse(is);
      RunConfig file_cfg;
      detail::apply_config_json(file_cfg, j);
      // precedence: start from the file, then re-parse the flags over it
      cfg = file_cfg;
      CLI::App over{"override pass"};
      over.allow_extras();
      over.add_option("--d", cfg.d);
      over.add_option("--s", cfg.s);
      over.add_option("--n", cfg.n);
      over.add_option("--n-lo", cfg.n_lo);
      over.add_option("--n-hi", cfg.n_hi);
      over.add_option("--sequence", cfg.sequence_kind);
      over.add_option("--ratio", cfg.ratio);
      over.add_option("--gauge-beta", cfg.gauge_beta);
      over.add_option("--sigma0", cfg.sigma0);
      over.add_option("--alpha", cfg.alpha);
      over.add_option("--T", cfg.T);
      over.add_option("--q", cfg.q);
      over.add_option("--measure", cfg.measure_mode);
      over.add_option("--backend", cfg.backend);
      over.add_option("--mac", cfg.mac);
      over.add_option("--eps", cfg.eps);
      over.add_option("--exclude", cfg.exclude);
      over.add_option("--seed", cfg.seed);
      over.add_option("--out", cfg.out);
      over.add_option("--workers", cfg.workers);
      over.add_option("--P", cfg.P);
      over.add_option("--C4", cfg.C4);
      over.add_option("--c0", cfg.c0);
      over.add_option("--trials", cfg.trials);
      over.add_option("--lemma-cases", cfg.lemma_cases);
      over.add_option("--flip-samples", cfg.flip_samples);
      over.add_flag("--divergence", cfg.divergence);
      try {
        over.parse(int(argv.size()), argv.data());
      } catch (const CLI::ParseError& e) {
        throw ConfigError(std::string("flag override failed: ") + e.what());
      }
    }
    if (!sigma_file.empty()) {
      std::ifstream is(sigma_file);
      if (!is) throw ConfigError("cannot read sigma file: " + sigma_file);
      cfg.sigma.clear();
      double v;
      while (is >> v) cfg.sigma.push_back(v);
      cfg.sequence_kind = "explicit";
      if (cfg.n_lo == 0) cfg.n = int(cfg.sigma.size());
    }
    cfg.validate();
    detail::write_meta(cfg, command);

    if (command == "regularize") return cmd_regularize(cfg);
    if (command == "build") return cmd_build(cfg);
    if (command == "transform") return cmd_transform(cfg);
    if (command == "verify-norm") return cmd_verify_norm(cfg);
    if (command == "verify-operator") return cmd_verify_operator(cfg);
    if (command == "capacity") return cmd_capacity(cfg);
    if (command == "distribution") return cmd_distribution(cfg);
    if (command == "cubes") return cmd_cubes(cfg);
    if (command == "lemmas") return cmd_lemmas(cfg);
    if (command == "gauge") return cmd_gauge(cfg);
    if (command == "bench") return cmd_bench(cfg);
    throw ConfigError("unknown subcommand: " + command);
  } catch (const ConfigError& e) {
    json err = {{"error", {{"type", "config"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 2;
  } catch (const InvariantError& e) {
    json err = {{"error", {{"type", "invariant"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 1;
  } catch (const NumericError& e) {
    json err = {{"error", {{"type", "numeric"}, {"message", e.what()}}}};
    std::cerr << err.dump() << "\n";
    return 3;
  }
}

}  // namespace rieszlab
