#pragma once

// Deterministic random number generation.
//
// The generator is SplitMix64 (Steele, Lea, Flood; also the seeding generator
// of xoshiro). One step adds the constant 0x9E3779B97F4A7C15 to a 64-bit
// state and scrambles the sum:
//
//   z  = state += 0x9E3779B97F4A7C15
//   z ^= z >> 30;  z *= 0xBF58476D1CE4E5B9
//   z ^= z >> 27;  z *= 0x94D049BB133111EB
//   return z ^ (z >> 31)
//
// It is fully specified here rather than borrowed from <random> because
// std::mt19937 distributions are not pinned across standard library
// implementations, and result files must be byte-identical everywhere.
//
// Every consumer derives an independent stream from (run seed, purpose tag,
// salt) via two rounds of the same avalanche function. Keying streams by the
// number of simulated tests instead of an iteration counter means a phase of
// a hybrid run draws exactly the bytes the standalone method would draw from
// the same state, which is what makes phase traces replayable.

#include <cmath>
#include <cstdint>
#include <vector>

#include "covsel/error.hpp"

namespace covsel {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1), 53 bits of mantissa.
  double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  // Uniform in [0, bound) without modulo bias. bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    require(bound > 0, "SplitMix64::below: bound must be positive");
    const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % bound;
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % bound;
  }

  // Standard normal via the Marsaglia polar method. The rejection loop is
  // deterministic given the stream position; the spare value is cached.
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * next_double() - 1.0;
      v = 2.0 * next_double() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double m = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * m;
    have_spare_ = true;
    return u * m;
  }

 private:
  std::uint64_t state_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// One avalanche round of the SplitMix64 scrambler, used to fold stream keys
// into a seed. Asymmetric in (a, b) on purpose.
inline std::uint64_t hash_combine(std::uint64_t a, std::uint64_t b) {
  std::uint64_t z = a + 0x9E3779B97F4A7C15ULL * (b + 0x632BE59BD9B4E019ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Purpose tags for derived streams. Values are part of the determinism
// contract: changing one changes every result file downstream of it.
enum class StreamPurpose : std::uint64_t {
  synth_clusters = 1,
  synth_test = 2,
  synth_subsets = 3,
  synth_point = 4,
  warmup = 5,
  random_batch = 6,
  ocsvm_subsample = 7,
  cds_negatives = 8,
  cds_topup = 9,
};

inline SplitMix64 derive_stream(std::uint64_t seed, StreamPurpose purpose,
                                std::uint64_t salt = 0) {
  return SplitMix64(hash_combine(
      hash_combine(seed, static_cast<std::uint64_t>(purpose)), salt));
}

// Fisher-Yates shuffle driven by the given stream.
template <class T>
void shuffle(std::vector<T>& items, SplitMix64& rng) {
  for (std::size_t i = items.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    using std::swap;
    swap(items[i - 1], items[j]);
  }
}

// First k elements of a seeded partial Fisher-Yates over [0, n). Order is
// meaningful: the prefix of a longer sample with the same stream is stable.
inline std::vector<std::uint64_t> sample_indices(std::uint64_t n,
                                                 std::uint64_t k,
                                                 SplitMix64& rng) {
  require(k <= n, "sample_indices: k (", k, ") exceeds n (", n, ")");
  std::vector<std::uint64_t> pool(n);
  for (std::uint64_t i = 0; i < n; ++i) pool[i] = i;
  for (std::uint64_t i = 0; i < k; ++i) {
    const std::uint64_t j = i + rng.below(n - i);
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

}  // namespace covsel
