#ifndef SISC_RNG_HPP
#define SISC_RNG_HPP

#include <cstdint>
#include <limits>

namespace sisc {

/// SplitMix64 finalizer. Bijective on 64-bit words.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Purpose tags keep streams for different consumers disjoint.
enum class StreamPurpose : std::uint64_t {
  kPropagate = 1,
  kObserve = 2,
  kResample = 3,
  kTruth = 4,
  kTruthObserve = 5,
  kTest = 99,
};

/// Counter-based random stream keyed by (seed, purpose, index, time).
///
/// Each draw is a pure function of the key and a draw counter, so the output
/// for a particle at a time step does not depend on the order in which
/// particles are processed. Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  constexpr explicit Stream(std::uint64_t key) noexcept : key_{key} {}

  constexpr Stream(std::uint64_t seed, StreamPurpose purpose, std::uint64_t index, std::uint64_t time) noexcept
      : key_{mix64(mix64(mix64(mix64(seed) ^ static_cast<std::uint64_t>(purpose)) ^ index) ^ (time << 1U))} {}

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept { return std::numeric_limits<result_type>::max(); }

  constexpr result_type operator()() noexcept { return mix64(key_ + 0x632be59bd9b4e019ULL * ++counter_); }

  /// Uniform double in [0, 1) with 53 random bits.
  constexpr double uniform() noexcept { return static_cast<double>((*this)() >> 11U) * 0x1.0p-53; }

  constexpr std::uint64_t key() const noexcept { return key_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace sisc

#endif
