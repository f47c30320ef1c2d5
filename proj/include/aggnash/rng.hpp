#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string_view>

namespace aggnash {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// Every draw is a pure function of (key, counter), so streams can be split
/// by reserving part of the counter and any position can be reached in O(1).
/// Traces record `kGeneratorName` together with the seed.
class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr std::string_view kGeneratorName = "philox4x32-10/v1";

  static constexpr Counter block(Counter ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
      const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
      const auto lo0 = static_cast<std::uint32_t>(p0);
      const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
      const auto lo1 = static_cast<std::uint32_t>(p1);
      ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
      key[0] += kW0;
      key[1] += kW1;
    }
    return ctr;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53u;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
  static constexpr std::uint32_t kW0 = 0x9E3779B9u;
  static constexpr std::uint32_t kW1 = 0xBB67AE85u;
};

/// Maps two 32-bit words to a double in [0, 1) with 53 random bits.
constexpr double to_unit_double(std::uint32_t a, std::uint32_t b) noexcept {
  const std::uint64_t hi = a >> 5;  // 27 bits
  const std::uint64_t lo = b >> 6;  // 26 bits
  return static_cast<double>((hi << 26) | lo) * 0x1.0p-53;
}

/// Random access into one (seed, stream) substream: the value at `index` is
/// uniform in [0, 1) and independent of the order of evaluation.
inline double counter_uniform(std::uint64_t seed, std::uint64_t stream,
                              std::uint64_t index) noexcept {
  const Philox4x32::Key key{static_cast<std::uint32_t>(seed),
                            static_cast<std::uint32_t>(seed >> 32)};
  const Philox4x32::Counter ctr{static_cast<std::uint32_t>(index),
                                static_cast<std::uint32_t>(index >> 32),
                                static_cast<std::uint32_t>(stream),
                                static_cast<std::uint32_t>(stream >> 32)};
  const auto out = Philox4x32::block(ctr, key);
  return to_unit_double(out[0], out[1]);
}

/// Sequential view of a Philox substream. Distributions are implemented here
/// rather than with <random> so that draws are identical across standard
/// library implementations.
class RandomStream {
 public:
  RandomStream(std::uint64_t seed, std::uint64_t stream) noexcept
      : seed_(seed), stream_(stream) {}

  std::uint64_t seed() const noexcept { return seed_; }
  std::uint64_t stream() const noexcept { return stream_; }

  double uniform() noexcept { return counter_uniform(seed_, stream_, index_++); }

  double uniform(double lo, double hi) noexcept {
    return lo + (hi - lo) * uniform();
  }

  double log_uniform(double lo, double hi) noexcept {
    return std::exp(uniform(std::log(lo), std::log(hi)));
  }

  /// Box-Muller; the second variate of each pair is discarded so that the
  /// stream position depends only on the number of calls.
  double normal(double mean, double stddev) noexcept {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    return mean + stddev * r * std::cos(2.0 * std::numbers::pi * u2);
  }

  bool bernoulli(double p) noexcept { return uniform() < p; }

 private:
  std::uint64_t seed_;
  std::uint64_t stream_;
  std::uint64_t index_ = 0;
};

/// Fixed stream identifiers so that each randomized ingredient of an
/// experiment draws from its own substream of the run seed.
namespace streams {
inline constexpr std::uint64_t scenario = 1;
inline constexpr std::uint64_t gains = 2;
inline constexpr std::uint64_t graph = 3;
inline constexpr std::uint64_t initial = 4;
inline constexpr std::uint64_t disturbance = 5;
inline constexpr std::uint64_t privacy = 6;
inline constexpr std::uint64_t sampling = 7;
}  // namespace streams

}  // namespace aggnash
