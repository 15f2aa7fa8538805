#pragma once

#include <array>
#include <cmath>
#include <cstdint>

namespace mfldp {

/// Philox4x32-10 counter-based generator (Salmon et al., SC'11).
///
/// The stream is fully determined by (key, counter); split() derives an
/// independent stream for a replica index without consuming state.
class Philox4x32 {
 public:
  using Block = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  explicit Philox4x32(std::uint64_t seed = 0, std::uint64_t stream = 0) noexcept
      : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
        counter_{0, 0, static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)} {}

  static Block bijection(Block ctr, Key key) noexcept {
    for (int round = 0; round < 10; ++round) {
      const std::uint64_t p0 = static_cast<std::uint64_t>(kMul0) * ctr[0];
      const std::uint64_t p1 = static_cast<std::uint64_t>(kMul1) * ctr[2];
      ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ key[0], static_cast<std::uint32_t>(p1),
             static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ key[1], static_cast<std::uint32_t>(p0)};
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    return ctr;
  }

  [[nodiscard]] std::uint64_t seed() const noexcept {
    return static_cast<std::uint64_t>(key_[0]) | (static_cast<std::uint64_t>(key_[1]) << 32);
  }
  [[nodiscard]] std::uint64_t stream() const noexcept {
    return static_cast<std::uint64_t>(counter_[2]) | (static_cast<std::uint64_t>(counter_[3]) << 32);
  }

  /// Stream for sub-task `index`; distinct indices give disjoint counter spaces.
  [[nodiscard]] Philox4x32 split(std::uint64_t index) const noexcept {
    const Block mixed = bijection({counter_[2], counter_[3], static_cast<std::uint32_t>(index),
                                   static_cast<std::uint32_t>(index >> 32)},
                                  {key_[1], key_[0]});
    return Philox4x32(seed(), static_cast<std::uint64_t>(mixed[0]) | (static_cast<std::uint64_t>(mixed[1]) << 32));
  }

  std::uint32_t next_u32() noexcept {
    if (used_ == 4) {
      refill();
    }
    return buffer_[used_++];
  }

  std::uint64_t next_u64() noexcept {
    if (used_ > 2) {
      if (used_ == 3) {
        const std::uint64_t hi = buffer_[3];
        refill();
        return (hi << 32) | buffer_[used_++];
      }
      refill();
    }
    const std::uint64_t hi = buffer_[used_];
    const std::uint64_t lo = buffer_[used_ + 1];
    used_ += 2;
    return (hi << 32) | lo;
  }

  /// Uniform on (0, 1), never exactly 0 or 1.
  double uniform01() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

  double exponential(double rate) noexcept { return -std::log(uniform01()) / rate; }

 private:
  void refill() noexcept {
    buffer_ = bijection(counter_, key_);
    if (++counter_[0] == 0) {
      ++counter_[1];
    }
    used_ = 0;
  }

  static constexpr std::uint32_t kMul0 = 0xD2511F53;
  static constexpr std::uint32_t kMul1 = 0xCD9E8D57;
  static constexpr std::uint32_t kWeyl0 = 0x9E3779B9;
  static constexpr std::uint32_t kWeyl1 = 0xBB67AE85;

  Key key_;
  Block counter_;
  Block buffer_{};
  int used_ = 4;
};

}  // namespace mfldp
