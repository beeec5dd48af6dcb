#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace sparsepair {

/// Deterministic 64-bit generator (xoshiro-style splitmix core). All toolkit
/// randomness flows through this type so that runs are reproducible from a
/// single seed plus the documented stage-tag splitting rule.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {
    // warm up so nearby seeds decorrelate
    next_u64();
    next_u64();
  }

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1); 53 mantissa bits, fully specified mapping.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). n must be > 0.
  std::uint64_t below(std::uint64_t n) {
    // modulo bias is < 2^-53 for the n used here (class/row counts)
    return next_u64() % n;
  }

  /// Standard normal via Box-Muller (no stdlib distribution, so the stream
  /// does not depend on the standard library implementation).
  double gaussian() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * std::numbers::pi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  template <typename RandomIt>
  void shuffle(RandomIt first, RandomIt last) {
    const auto n = static_cast<std::uint64_t>(last - first);
    for (std::uint64_t i = n; i > 1; --i) {
      const auto j = below(i);
      std::swap(first[i - 1], first[j]);
    }
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const char c : s) {
    h ^= static_cast<std::uint8_t>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Seed-splitting rule: every pipeline stage derives its own stream from the
/// run seed and a stage tag, e.g. derive_seed(seed, "train.epoch.3").
inline std::uint64_t derive_seed(std::uint64_t base, std::string_view tag) {
  return base ^ fnv1a64(tag);
}

}  // namespace sparsepair
