#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

namespace rieszlab {

// Errors map to CLI exit codes: InvariantError -> 1, ConfigError -> 2, NumericError -> 3.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int max_dim = 8;

// Neumaier compensated accumulator. Callers fix the summation order, so
// results are bit-reproducible for a given input order.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double x) {
    double t = sum + x;
    if (std::abs(sum) >= std::abs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Stream seeded by (seed, counter); counter-based so per-item draws do not
// depend on evaluation order.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t s = seed ^ (0xD1B54A32D192ED03ull * (counter + 1));
  return splitmix64(s);
}

struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed) {}
  Rng(std::uint64_t seed, std::uint64_t counter) : state(mix_seed(seed, counter)) {}

  std::uint64_t next() { return splitmix64(state); }
  // uniform in [0, 1)
  double uniform() { return double(next() >> 11) * 0x1.0p-53; }
  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // uniform in [-1, 1)
  double sym() { return 2.0 * uniform() - 1.0; }
};

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// Shortest exact decimal form used by all text outputs (17 significant digits).
inline std::string format_g17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Runs body(begin, end) over a partition of [0, n). Each index must be
// independent of the others, so the partition does not affect results.
inline void parallel_for(std::size_t n, int workers,
                         const std::function<void(std::size_t, std::size_t)>& body) {
  if (n == 0) return;
  std::size_t hw = workers > 0 ? static_cast<std::size_t>(workers)
                               : std::max<std::size_t>(1, std::thread::hardware_concurrency());
  std::size_t parts = std::min(hw, n);
  if (parts <= 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(parts);
  std::size_t chunk = (n + parts - 1) / parts;
  for (std::size_t p = 0; p < parts; ++p) {
    std::size_t b = p * chunk, e = std::min(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&body, b, e] { body(b, e); });
  }
  for (auto& t : pool) t.join();
}

// 95% Wilson score interval for a binomial proportion.
struct WilsonInterval {
  double lo, hi;
};
inline WilsonInterval wilson95(double phat, double trials) {
  const double z = 1.959963984540054;
  double z2 = z * z;
  double denom = 1.0 + z2 / trials;
  double center = (phat + z2 / (2.0 * trials)) / denom;
  double half = z * std::sqrt(phat * (1.0 - phat) / trials + z2 / (4.0 * trials * trials)) / denom;
  return {center - half, center + half};
}

}  // namespace rieszlab
