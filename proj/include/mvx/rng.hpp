// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#pragma once

#include <array>
#include <cstdint>
#include <string_view>

namespace mvx {

using Counter4 = std::array<std::uint32_t, 4>;
using Key2 = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11). Pure function of
/// (counter, key); every draw in the library is addressed by a counter.
Counter4 philox4x32(Counter4 ctr, Key2 key) noexcept;

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Derives a 64-bit stream key from a master seed and a label such as
/// "signal/B". Distinct labels give statistically independent streams.
std::uint64_t derive_key(std::uint64_t seed, std::string_view label) noexcept;

inline Key2 split_key(std::uint64_t key) noexcept {
  return {static_cast<std::uint32_t>(key), static_cast<std::uint32_t>(key >> 32)};
}

/// Uniform in (0, 1) from 64 random bits; never returns 0 or 1.
inline double open_uniform(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

/// Stateless Gaussian noise addressed by (particle, component, step, substep).
/// Adding particles or components never changes existing draws.
class NoiseSource {
 public:
  NoiseSource() = default;
  NoiseSource(std::uint64_t seed, std::string_view label)
      : key_(split_key(derive_key(seed, label))) {}

  double normal(std::uint32_t particle, std::uint32_t component,
                std::uint32_t step, std::uint32_t substep) const noexcept;

  double uniform(std::uint32_t particle, std::uint32_t component,
                 std::uint32_t step, std::uint32_t substep) const noexcept;

  Key2 key() const noexcept { return key_; }

 private:
  Key2 key_{0, 0};
};

/// Sequential stream over a Philox key; each call consumes one counter value.
class Stream {
 public:
  Stream(std::uint64_t seed, std::string_view label)
      : key_(split_key(derive_key(seed, label))) {}

  double uniform() noexcept;
  double normal() noexcept;
  std::uint64_t next_u64() noexcept;

 private:
  Key2 key_;
  std::uint64_t counter_ = 0;
};

}  // namespace mvx
