#pragma once

// Counter-based random streams. Every replica draws from its own Philox4x32-10
// stream keyed by the global seed; the replica index lives in the upper half of
// the counter, so a replica's numbers never depend on scheduling.

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>

namespace nos::rng {

class Philox4x32 {
 public:
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static constexpr Counter encrypt(Counter ctr, Key key) {
    for (int round = 0; round < 10; ++round) {
      if (round > 0) {
        key[0] += 0x9E3779B9u;
        key[1] += 0xBB67AE85u;
      }
      const std::uint64_t p0 = std::uint64_t{0xD2511F53u} * ctr[0];
      const std::uint64_t p1 = std::uint64_t{0xCD9E8D57u} * ctr[2];
      ctr = Counter{static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0],
                    static_cast<std::uint32_t>(p1),
                    static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1],
                    static_cast<std::uint32_t>(p0)};
    }
    return ctr;
  }
};

/// Stream identifiers: a 16-bit domain tag (which experiment) and a 48-bit
/// replica index.
constexpr std::uint64_t stream_id(std::uint32_t domain, std::uint64_t index) {
  return (std::uint64_t{domain} << 48) | (index & ((std::uint64_t{1} << 48) - 1));
}

namespace domain {
inline constexpr std::uint32_t walk = 1;
inline constexpr std::uint32_t crude = 2;
inline constexpr std::uint32_t ladder = 3;
inline constexpr std::uint32_t subordinator = 4;
inline constexpr std::uint32_t conditioned = 5;
inline constexpr std::uint32_t xtilde = 6;
inline constexpr std::uint32_t probes = 7;
inline constexpr std::uint32_t increments = 8;
}  // namespace domain

/// A single reproducible stream. Satisfies UniformRandomBitGenerator.
class Stream {
 public:
  using result_type = std::uint64_t;

  Stream(std::uint64_t seed, std::uint64_t id)
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        ctr_{0u, 0u, static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    const std::uint64_t lo = next32();
    const std::uint64_t hi = next32();
    return (hi << 32) | lo;
  }

  /// Uniform on the open interval (0,1); never returns 0 or 1.
  double uniform() { return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate = 1.0) { return -std::log(uniform()) / rate; }

 private:
  std::uint32_t next32() {
    if (pos_ == 4) {
      block_ = Philox4x32::encrypt(ctr_, key_);
      if (++ctr_[0] == 0) ++ctr_[1];
      pos_ = 0;
    }
    return block_[pos_++];
  }

  Philox4x32::Key key_;
  Philox4x32::Counter ctr_;
  Philox4x32::Counter block_{};
  int pos_ = 4;
};

inline Stream substream(std::uint64_t seed, std::uint32_t domain, std::uint64_t index) {
  return Stream(seed, stream_id(domain, index));
}

}  // namespace nos::rng
