#pragma once

#include <cstdint>
#include <string_view>

namespace vxseg {

// Counter-based generator: the n-th draw of a stream keyed by `key` is
//   mix64(key + (n + 1) * 0x9E3779B97F4A7C15)
// where mix64 is the SplitMix64 finalizer
//   z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
//   z ^= z >> 27; z *= 0x94D049BB133111EB;
//   z ^= z >> 31.
// Doubles take the top 53 bits. Only integer arithmetic is involved, so
// streams reproduce bit-for-bit on any platform.
std::uint64_t mix64(std::uint64_t z) noexcept;

/// Derives an independent sub-seed from a parent seed and a stream name.
std::uint64_t derive_seed(std::uint64_t parent, std::string_view name) noexcept;

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(key) {}

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1).
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [lo, hi] (inclusive), unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace vxseg
