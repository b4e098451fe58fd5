// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include "mvx/rng.hpp"

#include <cmath>
#include <numbers>

namespace mvx {

namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) noexcept {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

inline std::uint64_t join(std::uint32_t hi, std::uint32_t lo) noexcept {
  return (static_cast<std::uint64_t>(hi) << 32) | lo;
}

// Box-Muller on one Philox block; the sine branch is discarded.
inline double gaussian_from(const Counter4& r) noexcept {
  const double u1 = open_uniform(join(r[0], r[1]));
  const double u2 = open_uniform(join(r[2], r[3]));
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

Counter4 philox4x32(Counter4 ctr, Key2 key) noexcept {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

std::uint64_t derive_key(std::uint64_t seed, std::string_view label) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
  for (unsigned char c : label) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return splitmix64(splitmix64(seed) ^ h);
}

double NoiseSource::normal(std::uint32_t particle, std::uint32_t component,
                           std::uint32_t step, std::uint32_t substep) const noexcept {
  return gaussian_from(philox4x32({step, substep, particle, component}, key_));
}

double NoiseSource::uniform(std::uint32_t particle, std::uint32_t component,
                            std::uint32_t step, std::uint32_t substep) const noexcept {
  const Counter4 r = philox4x32({step, substep, particle, component}, key_);
  return open_uniform(join(r[0], r[1]));
}

std::uint64_t Stream::next_u64() noexcept {
  const Counter4 r = philox4x32(
      {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
      key_);
  ++counter_;
  return join(r[0], r[1]);
}

double Stream::uniform() noexcept { return open_uniform(next_u64()); }

double Stream::normal() noexcept {
  const Counter4 r = philox4x32(
      {static_cast<std::uint32_t>(counter_), static_cast<std::uint32_t>(counter_ >> 32), 0u, 0u},
      key_);
  ++counter_;
  return gaussian_from(r);
}

}  // namespace mvx
