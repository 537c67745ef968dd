#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "auxcodec/random.hpp"
#include "auxcodec/tensor.hpp"

namespace auxcodec::entropy {

inline constexpr double kSigmaMin = 1e-3;
/// Symbols must lie in [-kAlphabetBound, kAlphabetBound).
inline constexpr std::int32_t kAlphabetBound = 1 << 15;
/// Interval likelihoods are floored here before taking logs.
inline constexpr double kLikelihoodFloor = 1e-12;

/// Per-channel Gaussian shared across spatial positions.
struct GaussianModel {
  std::vector<double> mu;
  std::vector<double> log_sigma;

  int channels() const noexcept { return static_cast<int>(mu.size()); }
  double sigma(int c) const noexcept;
  /// False when log_sigma(c) is below the sigma clamp.
  bool sigma_active(int c) const noexcept;

  static GaussianModel standard(int channels);
};

struct LatentShape {
  int height = 0;
  int width = 0;
  int channels = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(height) * width * channels;
  }
  bool operator==(const LatentShape&) const = default;
};

struct LatentCode {
  LatentShape shape;
  std::vector<std::int32_t> symbols;  // (h, w, c) row-major

  bool operator==(const LatentCode&) const = default;
};

/// Round half away from zero, shared by every float-to-integer conversion.
double round_half_away(double v) noexcept;

/// Unit-step uniform quantiser. Throws kOverflow when |round(v)| leaves the
/// coder alphabet.
LatentCode quantize(const Tensor& y);
Tensor dequantize(const LatentCode& code);

/// y + u with u i.i.d. uniform on [-0.5, 0.5).
Tensor noise_relax(const Tensor& y, Rng& rng);

/// Standard normal CDF, 0.5 erfc(-x / sqrt 2).
double normal_cdf(double x) noexcept;
double normal_pdf(double x) noexcept;

/// Probability mass of [v - 0.5, v + 0.5) under N(mu, sigma^2), computed on
/// the tail side that avoids cancellation.
double interval_probability(double v, double mu, double sigma) noexcept;

enum class RateMode { kRelaxed, kDiscrete };

/// Sum of -log2 P(interval around each value). Discrete mode expects
/// integer-valued input (it is not re-rounded); relaxed mode takes noisy
/// values. Both use the same interval formula.
double rate_bits(const Tensor& values, const GaussianModel& model,
                 RateMode mode = RateMode::kDiscrete);
double symbol_bits(double v, double mu, double sigma) noexcept;

/// Reverse mode of rate_bits scaled by `scale`. grad_values may be null.
struct RateGradient {
  std::vector<double> mu;
  std::vector<double> log_sigma;
};
double rate_bits_backward(const Tensor& values, const GaussianModel& model,
                          double scale, Tensor* grad_values,
                          RateGradient& grad_model);

// ---------------------------------------------------------------------------
// Integer coding tables.

/// Quantised CMF for one channel: symbols center-radius .. center+radius
/// followed by an escape entry. Escaped symbols are sent raw in 16 bits.
struct SymbolTable {
  std::int32_t lo = 0;  // first directly coded symbol
  std::vector<std::uint32_t> freq;  // freq.back() is the escape entry
  std::vector<std::uint32_t> cum;   // prefix sums, cum.size() == freq.size()+1

  std::size_t direct_count() const noexcept { return freq.size() - 1; }
};

SymbolTable build_symbol_table(double mu, double sigma);

/// Payload only (no container header).
std::vector<std::uint8_t> encode_latent(const LatentCode& code,
                                        const GaussianModel& model);
LatentCode decode_latent(std::span<const std::uint8_t> payload,
                         const GaussianModel& model, const LatentShape& shape);

// ---------------------------------------------------------------------------
// Container.

inline constexpr std::array<std::uint8_t, 4> kBitstreamMagic = {'A', 'U', 'X',
                                                                 'T'};
inline constexpr std::uint8_t kBitstreamVersion = 1;
/// magic + version + 7 u16 + u64 hash + u32 payload length.
inline constexpr std::size_t kBitstreamHeaderBytes = 4 + 1 + 14 + 8 + 4;

struct BitstreamHeader {
  std::uint16_t orig_h = 0;
  std::uint16_t orig_w = 0;
  std::uint16_t pad_h = 0;
  std::uint16_t pad_w = 0;
  std::uint16_t lat_h = 0;
  std::uint16_t lat_w = 0;
  std::uint16_t lat_c = 0;
  std::uint64_t model_hash = 0;

  LatentShape latent_shape() const noexcept {
    return {lat_h, lat_w, lat_c};
  }
  bool operator==(const BitstreamHeader&) const = default;
};

struct Bitstream {
  BitstreamHeader header;
  std::vector<std::uint8_t> payload;
};

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& b);
/// Throws kFormat on bad magic/version, kCorruption on truncation.
Bitstream parse_bitstream(std::span<const std::uint8_t> bytes);
/// parse_bitstream + hash check (kModelMismatch) + decode_latent.
LatentCode decode_bitstream(std::span<const std::uint8_t> bytes,
                            const GaussianModel& model,
                            std::uint64_t expected_hash,
                            BitstreamHeader* header_out = nullptr);

}  // namespace auxcodec::entropy
