#include "auxcodec/range_coder.hpp"

#include <algorithm>

#include "auxcodec/error.hpp"

namespace auxcodec::entropy {
namespace {

constexpr std::uint32_t kTop = 1u << 24;
constexpr std::uint32_t kBot = 1u << 16;

}  // namespace

void RangeEncoder::encode(std::uint32_t cum_freq, std::uint32_t freq) {
  if (freq == 0 || cum_freq + freq > kTotalFrequency) {
    fail(ErrorKind::kDomain, "invalid symbol interval");
  }
  range_ >>= kPrecisionBits;
  low_ += cum_freq * range_;
  range_ *= freq;
  emit();
}

void RangeEncoder::emit() {
  for (;;) {
    if ((low_ ^ (low_ + range_)) >= kTop) {
      if (range_ >= kBot) break;
      range_ = (0u - low_) & (kBot - 1);
    }
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ <<= 8;
    range_ <<= 8;
  }
}

std::vector<std::uint8_t> RangeEncoder::finish() {
  for (int i = 0; i < 4; ++i) {
    out_.push_back(static_cast<std::uint8_t>(low_ >> 24));
    low_ <<= 8;
  }
  return std::move(out_);
}

RangeDecoder::RangeDecoder(std::span<const std::uint8_t> payload)
    : in_(payload) {
  if (in_.size() < 4) {
    fail(ErrorKind::kCorruption, "range-coded payload shorter than 4 bytes");
  }
  for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
}

std::uint8_t RangeDecoder::next_byte() {
  if (pos_ >= in_.size()) {
    fail(ErrorKind::kCorruption, "range-coded payload truncated at byte " +
                                     std::to_string(pos_));
  }
  return in_[pos_++];
}

std::uint32_t RangeDecoder::target() {
  range_ >>= kPrecisionBits;
  const std::uint32_t t = (code_ - low_) / range_;
  return std::min(t, kTotalFrequency - 1);
}

void RangeDecoder::decode(std::uint32_t cum_freq, std::uint32_t freq) {
  low_ += cum_freq * range_;
  range_ *= freq;
  for (;;) {
    if ((low_ ^ (low_ + range_)) >= kTop) {
      if (range_ >= kBot) break;
      range_ = (0u - low_) & (kBot - 1);
    }
    code_ = (code_ << 8) | next_byte();
    low_ <<= 8;
    range_ <<= 8;
  }
}

}  // namespace auxcodec::entropy
