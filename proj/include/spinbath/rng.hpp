#pragma once

#include <cstdint>
#include <random>

namespace spinbath {

// splitmix64 mixing step; used to derive independent substream seeds.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Substream seed for (master_seed, stream_index). Streams for distinct
// indices are statistically independent, so parallel generation of different
// configurations is scheduler-independent.
inline std::uint64_t derive_seed(std::uint64_t master_seed,
                                 std::uint64_t stream_index) {
  std::uint64_t s = master_seed;
  (void)splitmix64(s);
  s ^= 0xD1B54A32D192ED03ULL * (stream_index + 1);
  (void)splitmix64(s);
  return splitmix64(s);
}

// mt19937_64 wrapper with explicit bit-level uniform generation, so results
// do not depend on standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t bits() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // uniform integer in [0, n)
  std::uint64_t index(std::uint64_t n) {
    // rejection to avoid modulo bias
    const std::uint64_t limit = n * (UINT64_MAX / n);
    std::uint64_t x;
    do {
      x = eng_();
    } while (x >= limit);
    return x % n;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace spinbath
