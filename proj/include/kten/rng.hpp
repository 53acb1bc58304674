#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace kten {

// Philox4x32-10 (Salmon et al., SC'11). Stateless: output is a pure function
// of (key, counter), which is what makes results independent of scheduling.
inline std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> ctr,
                                               std::array<std::uint32_t, 2> key) {
  constexpr std::uint32_t M0 = 0xD2511F53u, M1 = 0xCD9E8D57u;
  constexpr std::uint32_t W0 = 0x9E3779B9u, W1 = 0xBB67AE85u;
  for (int r = 0; r < 10; ++r) {
    const std::uint64_t p0 = std::uint64_t(M0) * ctr[0];
    const std::uint64_t p1 = std::uint64_t(M1) * ctr[2];
    const auto hi0 = std::uint32_t(p0 >> 32), lo0 = std::uint32_t(p0);
    const auto hi1 = std::uint32_t(p1 >> 32), lo1 = std::uint32_t(p1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
    key[0] += W0;
    key[1] += W1;
  }
  return ctr;
}

// Random stream addressed by (seed, stream tag, a, b). Each (a, b) pair owns
// 2^32 Philox blocks; callers use e.g. a = step, b = candidate index.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint32_t stream, std::uint64_t a, std::uint64_t b)
      : key_{std::uint32_t(seed) ^ (stream * 0x85EBCA6Bu),
             std::uint32_t(seed >> 32) ^ (std::uint32_t(b >> 32) * 0xC2B2AE35u)},
        a_(a),
        b_(b) {}

  std::uint32_t next_u32() {
    if (pos_ == 4) refill();
    return buf_[pos_++];
  }

  std::uint64_t next_u64() {
    const std::uint64_t hi = next_u32();
    return (hi << 32) | next_u32();
  }

  // Uniform on the open interval (0, 1).
  double uniform() { return (double(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double r = std::sqrt(-2.0 * std::log(uniform()));
    const double t = 2.0 * std::numbers::pi * uniform();
    spare_ = r * std::sin(t);
    has_spare_ = true;
    return r * std::cos(t);
  }

  // Uniform integer in [0, n) by rejection on the top bits.
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t lim = UINT64_MAX - UINT64_MAX % n;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x < lim) return x % n;
    }
  }

 private:
  void refill() {
    // the last word counts blocks, so one stream yields 2^32 blocks
    const std::array<std::uint32_t, 4> ctr{std::uint32_t(a_), std::uint32_t(a_ >> 32),
                                           std::uint32_t(b_), block_};
    buf_ = philox4x32(ctr, key_);
    ++block_;
    pos_ = 0;
  }

  std::array<std::uint32_t, 2> key_;
  std::uint64_t a_, b_;
  std::uint32_t block_ = 0;
  std::array<std::uint32_t, 4> buf_{};
  int pos_ = 4;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

namespace streams {
inline constexpr std::uint32_t kInit = 1;
inline constexpr std::uint32_t kCandidates = 2;
inline constexpr std::uint32_t kCollision = 3;
inline constexpr std::uint32_t kMajorant = 4;
inline constexpr std::uint32_t kRegion = 5;
inline constexpr std::uint32_t kSynthetic = 6;
inline constexpr std::uint32_t kGeometry = 7;
}  // namespace streams

}  // namespace kten
