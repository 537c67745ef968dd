#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace auxcodec::entropy {

/// Carry-less 32-bit range coder (Subbotin). Frequencies are expressed
/// against a total of 2^kPrecisionBits.
inline constexpr int kPrecisionBits = 16;
inline constexpr std::uint32_t kTotalFrequency = 1u << kPrecisionBits;

class RangeEncoder {
 public:
  void encode(std::uint32_t cum_freq, std::uint32_t freq);
  /// Flushes the coder state; the encoder must not be used afterwards.
  std::vector<std::uint8_t> finish();

 private:
  void emit();

  std::uint32_t low_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
  std::vector<std::uint8_t> out_;
};

class RangeDecoder {
 public:
  /// Throws a corruption error when the payload is shorter than the coder
  /// flush.
  explicit RangeDecoder(std::span<const std::uint8_t> payload);

  /// Scaled target frequency for the next symbol; call decode() next.
  std::uint32_t target();
  void decode(std::uint32_t cum_freq, std::uint32_t freq);

  std::size_t consumed() const noexcept { return pos_; }

 private:
  std::uint8_t next_byte();

  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
  std::uint32_t low_ = 0;
  std::uint32_t code_ = 0;
  std::uint32_t range_ = 0xFFFFFFFFu;
};

}  // namespace auxcodec::entropy
