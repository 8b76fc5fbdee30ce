#pragma once

#include <cstdint>
#include <limits>

namespace cmps {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Counter-based random stream.
///
/// The stream for (master_seed, index) has key
///   key = mix64(mix64(master_seed) ^ (index * 0x9e3779b97f4a7c15 + 0x632be59bd9b4e019))
/// and its n-th output (n = 0, 1, ...) is mix64(key + (n + 1) * 0x9e3779b97f4a7c15).
/// Outputs depend only on (master_seed, index, n), never on thread scheduling.
/// Satisfies UniformRandomBitGenerator, so it plugs into <random> distributions.
class RandomStream {
 public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t master_seed, std::uint64_t index) noexcept
      : key_(mix64(mix64(master_seed) ^ (index * kGolden + 0x632be59bd9b4e019ULL))) {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept {
    ++counter_;
    return mix64(key_ + counter_ * kGolden);
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  static constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

inline RandomStream rng_stream(std::uint64_t master_seed, std::uint64_t index) noexcept {
  return RandomStream(master_seed, index);
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform01(RandomStream& rng) noexcept {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Standard normal via Box-Muller on two fresh uniforms; consumes exactly two draws.
/// Used instead of std::normal_distribution so streams are reproducible across
/// standard library implementations.
double standard_normal(RandomStream& rng) noexcept;

}  // namespace cmps
