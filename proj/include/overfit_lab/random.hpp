#pragma once

// Philox4x32-10 counter-based generator.  A stream is identified by a 64-bit
// key and three 32-bit stream words; the fourth counter word walks through
// the stream.  Distinct stream words give statistically independent streams
// without any shared state, so trial t of size n can be regenerated alone.

#include <array>
#include <cstdint>
#include <limits>

namespace overfit_lab {

class Philox {
 public:
  using result_type = std::uint64_t;

  explicit Philox(std::uint64_t seed, std::array<std::uint32_t, 3> stream = {0, 0, 0})
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, stream[0], stream[1], stream[2]} {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() {
    if (pos_ >= 4) refill();
    const std::uint64_t lo = buffer_[pos_++];
    if (pos_ >= 4) refill();
    const std::uint64_t hi = buffer_[pos_++];
    return (hi << 32) | lo;
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform double in (0, 1).
  double uniform_open() {
    double u;
    do {
      u = uniform();
    } while (u == 0.0);
    return u;
  }

  /// The raw bijection: ten Philox rounds of `counter` under `key`.
  static std::array<std::uint32_t, 4> block(std::array<std::uint32_t, 4> c, std::array<std::uint32_t, 2> k) {
    for (int round = 0; round < 10; ++round) {
      std::uint32_t hi0, lo0, hi1, lo1;
      mulhilo(kM0, c[0], hi0, lo0);
      mulhilo(kM1, c[2], hi1, lo1);
      c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
      k[0] += kW0;
      k[1] += kW1;
    }
    return c;
  }

 private:
  static constexpr std::uint32_t kM0 = 0xD2511F53;
  static constexpr std::uint32_t kM1 = 0xCD9E8D57;
  static constexpr std::uint32_t kW0 = 0x9E3779B9;
  static constexpr std::uint32_t kW1 = 0xBB67AE85;

  static void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(prod >> 32);
    lo = static_cast<std::uint32_t>(prod);
  }

  void refill() {
    buffer_ = block(counter_, key_);
    pos_ = 0;
    ++counter_[0];
  }

  std::array<std::uint32_t, 2> key_;
  std::array<std::uint32_t, 4> counter_;
  std::array<std::uint32_t, 4> buffer_{};
  int pos_ = 4;
};

/// Purpose tags keep the draws for different quantities in separate streams.
enum class StreamPurpose : std::uint32_t { Inputs = 1, Auxiliary = 2, Verification = 3 };

inline Philox substream(std::uint64_t seed, std::uint64_t n, std::uint64_t trial, StreamPurpose purpose) {
  return Philox(seed, {static_cast<std::uint32_t>(n), static_cast<std::uint32_t>(trial),
                       static_cast<std::uint32_t>(purpose) | static_cast<std::uint32_t>((trial >> 32) << 8)});
}

}  // namespace overfit_lab
