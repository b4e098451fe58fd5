// SPDX-License-Identifier: Apache-2.0
// Copyright 2026 mvx-avgfilter contributors
#include <doctest.h>

#include <cmath>
#include <set>

#include "mvx/rng.hpp"

using namespace mvx;

TEST_CASE("philox4x32-10 known answers") {
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) ==
        Counter4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        Counter4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        Counter4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("derived keys separate labels and seeds") {
  std::set<std::uint64_t> keys;
  for (std::uint64_t seed : {0u, 1u, 2u})
    for (const char* label : {"signal/B", "signal/W", "obs/V", "filter/B"})
      keys.insert(derive_key(seed, label));
  CHECK(keys.size() == 12);
  CHECK(derive_key(5, "x") == derive_key(5, "x"));
}

TEST_CASE("open_uniform stays inside (0, 1)") {
  CHECK(open_uniform(0) > 0.0);
  CHECK(open_uniform(~std::uint64_t{0}) < 1.0);
}

TEST_CASE("noise values are addressed, not sequenced") {
  const NoiseSource a(9, "signal/B");
  const NoiseSource b(9, "signal/B");
  const double first = a.normal(3, 0, 10, 2);
  for (std::uint32_t i = 0; i < 50; ++i) (void)b.normal(i, 0, 0, 0);
  CHECK(b.normal(3, 0, 10, 2) == first);
  CHECK(a.normal(3, 0, 10, 2) != a.normal(4, 0, 10, 2));
  CHECK(a.normal(3, 0, 10, 2) != a.normal(3, 1, 10, 2));
  CHECK(a.normal(3, 0, 10, 2) != a.normal(3, 0, 11, 2));
  CHECK(a.normal(3, 0, 10, 2) != a.normal(3, 0, 10, 3));
}

TEST_CASE("standard normal moments within 3 sigma") {
  const NoiseSource src(123, "moments");
  constexpr std::uint32_t count = 200000;
  double s1 = 0, s2 = 0, s4 = 0;
  for (std::uint32_t i = 0; i < count; ++i) {
    const double v = src.normal(i, 0, 0, 0);
    s1 += v;
    s2 += v * v;
    s4 += v * v * v * v;
  }
  const double n = count;
  CHECK(std::abs(s1 / n) < 3.0 / std::sqrt(n));
  // Var(Z^2) = 2, Var(Z^4) = 96.
  CHECK(std::abs(s2 / n - 1.0) < 3.0 * std::sqrt(2.0 / n));
  CHECK(std::abs(s4 / n - 3.0) < 3.0 * std::sqrt(96.0 / n));
}

TEST_CASE("sequential stream uniforms are uniform") {
  Stream s(77, "stream");
  constexpr int count = 100000;
  int below = 0;
  double sum = 0;
  for (int i = 0; i < count; ++i) {
    const double u = s.uniform();
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    sum += u;
    below += u < 0.25;
  }
  CHECK(std::abs(sum / count - 0.5) < 3.0 * std::sqrt(1.0 / 12.0 / count));
  CHECK(std::abs(below / double(count) - 0.25) < 3.0 * std::sqrt(0.25 * 0.75 / count));
}
