#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace pointprobe {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Order-sensitive seed combinator for deriving independent substreams
/// from one master seed.
inline std::uint64_t seed_combine(std::uint64_t h, std::uint64_t v) {
  return splitmix64(h ^ (v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2)));
}

inline std::uint64_t seed_tag(std::string_view tag) {
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t substream(std::uint64_t master, std::string_view tag) {
  return seed_combine(master, seed_tag(tag));
}
inline std::uint64_t substream(std::uint64_t master, std::string_view tag,
                               std::uint64_t a) {
  return seed_combine(substream(master, tag), a);
}
inline std::uint64_t substream(std::uint64_t master, std::string_view tag,
                               std::uint64_t a, std::uint64_t b) {
  return seed_combine(substream(master, tag, a), b);
}

/// Deterministic RNG with hand-rolled distributions so draws do not depend
/// on the standard library's unspecified distribution algorithms.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  /// Uniform double in [0, 1), 53-bit resolution.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller (second variate discarded).
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t threshold = (-n) % n;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % n;
    }
  }

  int index(int n) { return static_cast<int>(below(static_cast<std::uint64_t>(n))); }

  /// Uniform permutation of {0, ..., n-1} (Fisher-Yates).
  std::vector<int> permutation(int n) {
    std::vector<int> p(n);
    for (int i = 0; i < n; ++i) p[i] = i;
    for (int i = n - 1; i > 0; --i) {
      const int j = index(i + 1);
      std::swap(p[i], p[j]);
    }
    return p;
  }

  /// k distinct elements of `pool`, uniform without replacement
  /// (partial Fisher-Yates; order of the result is the draw order).
  std::vector<int> sample(const std::vector<int>& pool, int k) {
    std::vector<int> work = pool;
    const int n = static_cast<int>(work.size());
    std::vector<int> out;
    out.reserve(k);
    for (int i = 0; i < k && i < n; ++i) {
      const int j = i + index(n - i);
      std::swap(work[i], work[j]);
      out.push_back(work[i]);
    }
    return out;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace pointprobe
