#pragma once

#include <array>
#include <cstdint>

#include "hdclt/normal.hpp"

namespace hdclt {

// Philox4x32-10 counter-based generator. Every 128-bit counter block maps
// to four statistically independent 32-bit words, so draws are addressable
// by position: the value at index i never depends on how many workers are
// running or in what order other indices were consumed. The 64-bit stream
// id lives in the upper counter words, the seed in the key.
class PhiloxStream {
 public:
  PhiloxStream(std::uint64_t seed, std::uint64_t stream_id)
      : key0_(static_cast<std::uint32_t>(seed)),
        key1_(static_cast<std::uint32_t>(seed >> 32)),
        stream_(stream_id) {}

  std::uint64_t seed() const {
    return (static_cast<std::uint64_t>(key1_) << 32) | key0_;
  }
  std::uint64_t stream_id() const { return stream_; }

  std::array<std::uint32_t, 4> block(std::uint64_t block_index) const;

  std::uint32_t u32_at(std::uint64_t i) const {
    return block(i >> 2)[i & 3];
  }

  std::uint64_t u64_at(std::uint64_t i) const {
    const auto b = block(i >> 1);
    const int lane = static_cast<int>(i & 1) * 2;
    return (static_cast<std::uint64_t>(b[lane + 1]) << 32) | b[lane];
  }

  /// Uniform draw in the open interval (0, 1).
  double uniform_at(std::uint64_t i) const {
    return (static_cast<double>(u64_at(i) >> 11) + 0.5) * 0x1.0p-53;
  }

  /// Standard normal draw via inverse CDF; exactly one index per variate.
  double normal_at(std::uint64_t i) const {
    return normal_quantile(uniform_at(i));
  }

 private:
  std::uint32_t key0_, key1_;
  std::uint64_t stream_;
};

// Sequential cursor over a PhiloxStream. Caches the current block so that
// all four lanes are used; cheap for bulk draws (bootstrap resampling).
class SequentialRng {
 public:
  explicit SequentialRng(const PhiloxStream& stream, std::uint64_t start_u32 = 0)
      : stream_(stream), next_(start_u32), cached_block_(~std::uint64_t{0}) {}

  std::uint32_t next_u32() {
    const std::uint64_t blk = next_ >> 2;
    if (blk != cached_block_) {
      cache_ = stream_.block(blk);
      cached_block_ = blk;
    }
    return cache_[next_++ & 3];
  }

  std::uint64_t next_u64() {
    const std::uint64_t lo = next_u32();
    const std::uint64_t hi = next_u32();
    return (hi << 32) | lo;
  }

  double next_uniform() {
    return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
  }

  double next_normal() { return normal_quantile(next_uniform()); }

  /// Unbiased-to-2^-32 bounded draw (Lemire multiply-shift).
  std::uint32_t next_index(std::uint32_t bound) {
    return static_cast<std::uint32_t>(
        (static_cast<std::uint64_t>(next_u32()) * bound) >> 32);
  }

 private:
  PhiloxStream stream_;
  std::uint64_t next_;
  std::uint64_t cached_block_;
  std::array<std::uint32_t, 4> cache_{};
};

/// Stateless mix of two 64-bit values (splitmix64 finalizer over a sum);
/// used to derive sub-streams, e.g. bootstrap streams from batch identity.
std::uint64_t mix64(std::uint64_t a, std::uint64_t b);

}  // namespace hdclt
