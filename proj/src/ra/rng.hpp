#pragma once

#include <cstdint>
#include <limits>
#include <span>

namespace ra {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

/// xoshiro256** seeded through splitmix64. Cheap to construct, so every
/// trajectory can own a private stream derived from the master seed.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  explicit RandomStream(std::uint64_t seed = 0) {
    std::uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  // Index drawn from a probability vector; mass lost to rounding goes to the
  // last entry with positive probability.
  std::size_t categorical(std::span<const double> probs) {
    const double u = uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (probs[i] <= 0.0) continue;
      last = i;
      acc += probs[i];
      if (u < acc) return i;
    }
    return last;
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  std::uint64_t s_[4];
};

// Seed for stream `index` of the family identified by (master, family).
// Streams depend only on these counters, never on scheduling.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t family, std::uint64_t index) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s = h ^ (family * 0xD1B54A32D192ED03ULL);
  h = splitmix64(s);
  s = h ^ (index * 0x8CB92BA72F3D8DD7ULL);
  return splitmix64(s);
}

}  // namespace ra
