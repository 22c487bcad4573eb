#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11) and the
// stateless Gaussian/uniform draws built on it. A draw is a pure function of
// (key, stream, index), so any partition of the index range reproduces the
// same numbers.

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace qcorr {

using Philox4x32Counter = std::array<std::uint32_t, 4>;
using Philox4x32Key = std::array<std::uint32_t, 2>;

inline Philox4x32Counter philox4x32_10(Philox4x32Counter ctr, Philox4x32Key key) {
  constexpr std::uint32_t kMul0 = 0xD2511F53u;
  constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
  constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
  constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kMul0} * ctr[0];
    const std::uint64_t p1 = std::uint64_t{kMul1} * ctr[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += kWeyl0;
    key[1] += kWeyl1;
  }
  return ctr;
}

// SplitMix64 finaliser; a bijection on 64-bit words.
inline constexpr std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9E3779B97F4A7C15ull;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

  // Four raw words for block `block` of stream `stream`.
  Philox4x32Counter block(std::uint32_t stream, std::uint64_t block) const {
    return philox4x32_10({static_cast<std::uint32_t>(block),
                          static_cast<std::uint32_t>(block >> 32), stream, 0u},
                         key_);
  }

  // Uniform on (0, 1]; two per block (slot 0 or 1).
  double uniform(std::uint32_t stream, std::uint64_t block, int slot) const {
    const auto r = this->block(stream, block);
    return to_unit(r[2 * slot], r[2 * slot + 1]);
  }

  // Standard normal for sample `index` of `stream` (Box-Muller; two samples per block).
  double normal(std::uint32_t stream, std::uint64_t index) const {
    const auto r = block(stream, index >> 1);
    const double u1 = to_unit(r[0], r[1]);
    const double u2 = to_unit(r[2], r[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 2.0 * std::numbers::pi * u2;
    return (index & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
  }

 private:
  static double to_unit(std::uint32_t a, std::uint32_t b) {
    const std::uint64_t bits = ((std::uint64_t{a} << 32) | b) >> 11;
    return static_cast<double>(bits + 1) * 0x1.0p-53;
  }

  Philox4x32Key key_;
};

}  // namespace qcorr
