#pragma once

#include <cstdint>
#include <limits>

namespace amenpois {

/// Counter-based generator: the i-th output is a SplitMix64 finalizer applied
/// to key + i * golden_gamma, so a stream is fully described by (key, counter).
/// Substreams are derived by hashing (master seed, replicate, phase) into a key,
/// which makes results independent of how replicates are scheduled on workers.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t key = 0, std::uint64_t counter = 0) noexcept
      : key_(key), counter_(counter) {}

  static Rng substream(std::uint64_t master_seed, std::uint64_t replicate,
                       std::uint64_t phase = 0) noexcept;

  static constexpr result_type min() noexcept { return 0; }
  static constexpr result_type max() noexcept {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() noexcept { return mix(key_ + (++counter_) * kGamma); }

  /// Uniform on [0, 1) with 53 random bits.
  double uniform() noexcept { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) noexcept { return uniform() < p; }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) noexcept;

  /// Poisson draw: sequential inversion for small means, PTRS (Hormann 1993) otherwise.
  std::int64_t poisson(double mean);

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

  static constexpr std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  static constexpr std::uint64_t kGamma = 0x9e3779b97f4a7c15ULL;
  std::uint64_t key_;
  std::uint64_t counter_;
};

// Phase tags keep substreams of different pipeline stages disjoint.
namespace phase {
inline constexpr std::uint64_t field = 1;
inline constexpr std::uint64_t locations = 2;
inline constexpr std::uint64_t mixing = 3;
inline constexpr std::uint64_t compound = 4;
}  // namespace phase

}  // namespace amenpois
