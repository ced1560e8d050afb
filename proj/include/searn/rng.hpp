#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace searn {

// Explicit, seedable random stream.  Every draw in the library goes through
// this class so that results are bit-reproducible across platforms (the
// standard distributions are implementation-defined; we roll our own).
//
// split() derives an independent child stream from the parent's seed and a
// salt.  It does not depend on how many draws the parent has consumed, so
// per-instance / per-sample streams can be re-derived at will.
class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : seed_(seed), engine_(mix(seed, 0x6a09e667f3bcc908ull)) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n).
  int bounded(int n) { return static_cast<int>(engine_() % static_cast<std::uint64_t>(n)); }

  bool bernoulli(double p) { return uniform() < p; }

  double normal() {
    // Box-Muller, one value per call (the mate is discarded).
    double u1 = uniform();
    double u2 = uniform();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(engine_() % i);
      std::swap(v[i - 1], v[j]);
    }
  }

  RandomStream split(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0) const {
    std::uint64_t s = seed_;
    s = mix(s, a ^ 0x9e3779b97f4a7c15ull);
    s = mix(s, b ^ 0xbf58476d1ce4e5b9ull);
    s = mix(s, c ^ 0x94d049bb133111ebull);
    return RandomStream(s);
  }

 private:
  static std::uint64_t mix(std::uint64_t z, std::uint64_t salt) {
    z += 0x9e3779b97f4a7c15ull + salt;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
};

}  // namespace searn
