#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace pimpc {

// Philox4x32-10 counter-based generator (Salmon et al., Random123). Output is
// a pure function of (key, counter), so any draw can be reproduced without
// replaying a sequential stream.
using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

constexpr PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) {
  constexpr std::uint64_t kMul0 = 0xD2511F53u;
  constexpr std::uint64_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  std::uint32_t c0 = ctr[0], c1 = ctr[1], c2 = ctr[2], c3 = ctr[3];
  std::uint32_t k0 = key[0], k1 = key[1];
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = kMul0 * c0;
    const std::uint64_t p1 = kMul1 * c2;
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    c0 = hi1 ^ c1 ^ k0;
    c1 = static_cast<std::uint32_t>(p1);
    c2 = hi0 ^ c3 ^ k1;
    c3 = static_cast<std::uint32_t>(p0);
    k0 += kWeyl0;
    k1 += kWeyl1;
  }
  return {c0, c1, c2, c3};
}

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Domain-separated key derivation: distinct (seed, domain, epoch) triples map
// to independent Philox keys.
constexpr PhiloxKey derive_key(std::uint64_t seed, std::uint64_t domain,
                               std::uint64_t epoch) {
  const std::uint64_t k =
      splitmix64(splitmix64(splitmix64(seed) ^ domain) ^ epoch);
  return {static_cast<std::uint32_t>(k), static_cast<std::uint32_t>(k >> 32)};
}

// Uniform in the open interval (-1, 1) from 32 random bits.
inline double symmetric_uniform(std::uint32_t bits) {
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-31 - 1.0;
}

// Two independent standard normals by the Marsaglia polar method. Each
// Philox block offers two candidate pairs; on the rare double rejection the
// top byte of ctr[3] is used as a retry index, so the result remains a pure
// function of (ctr, key). Callers must keep ctr[3] below 2^24.
inline std::array<double, 2> normal_pair(PhiloxCounter ctr, const PhiloxKey& key) {
  for (std::uint32_t retry = 0;; ++retry) {
    ctr[3] = (ctr[3] & 0x00FFFFFFu) | (retry << 24);
    const PhiloxCounter r = philox4x32(ctr, key);
    for (int pair = 0; pair < 2; ++pair) {
      const double u = symmetric_uniform(r[2 * pair]);
      const double v = symmetric_uniform(r[2 * pair + 1]);
      const double s = u * u + v * v;
      if (s < 1.0 && s > 0.0) {
        const double scale = std::sqrt(-2.0 * std::log(s) / s);
        return {u * scale, v * scale};
      }
    }
  }
}

}  // namespace pimpc
