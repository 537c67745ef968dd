#include "auxcodec/entropy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "auxcodec/error.hpp"
#include "auxcodec/range_coder.hpp"

namespace auxcodec::entropy {
namespace {

constexpr std::int32_t kMaxRadius = 8192;
constexpr std::uint32_t kEscapeOffset = 1u << 15;

void check_channels(const Tensor& values, const GaussianModel& model) {
  if (values.channels() != model.channels()) {
    fail(ErrorKind::kDimension, "entropy model has " +
                                    std::to_string(model.channels()) +
                                    " channels, latent is " +
                                    values.shape_string());
  }
}

// p together with the standardised bounds, so callers can differentiate.
struct Interval {
  double p;
  double upper;
  double lower;
};

Interval interval(double v, double mu, double sigma) noexcept {
  const double u = (v + 0.5 - mu) / sigma;
  const double l = (v - 0.5 - mu) / sigma;
  // Upper tail: 1 - Phi(l) - (1 - Phi(u)) keeps both terms small.
  const double p = v > mu ? normal_cdf(-l) - normal_cdf(-u)
                          : normal_cdf(u) - normal_cdf(l);
  return {p, u, l};
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

template <typename T>
T get_le(std::span<const std::uint8_t> b, std::size_t at) {
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<T>(b[at + i]) << (8 * i);
  }
  return v;
}

std::vector<SymbolTable> tables_for(const GaussianModel& model) {
  std::vector<SymbolTable> tables;
  tables.reserve(model.channels());
  for (int c = 0; c < model.channels(); ++c) {
    tables.push_back(build_symbol_table(model.mu[c], model.sigma(c)));
  }
  return tables;
}

}  // namespace

double GaussianModel::sigma(int c) const noexcept {
  return std::max(std::exp(log_sigma[c]), kSigmaMin);
}

bool GaussianModel::sigma_active(int c) const noexcept {
  return std::exp(log_sigma[c]) >= kSigmaMin;
}

GaussianModel GaussianModel::standard(int channels) {
  GaussianModel m;
  m.mu.assign(channels, 0.0);
  m.log_sigma.assign(channels, 0.0);
  return m;
}

double round_half_away(double v) noexcept { return std::round(v); }

LatentCode quantize(const Tensor& y) {
  LatentCode code;
  code.shape = {y.height(), y.width(), y.channels()};
  code.symbols.reserve(y.size());
  for (double v : y.values()) {
    const double r = round_half_away(v);
    if (!std::isfinite(r) || r < -kAlphabetBound || r >= kAlphabetBound) {
      fail(ErrorKind::kOverflow,
           "latent value " + std::to_string(v) + " outside coder alphabet");
    }
    code.symbols.push_back(static_cast<std::int32_t>(r));
  }
  return code;
}

Tensor dequantize(const LatentCode& code) {
  if (code.symbols.size() != code.shape.size()) {
    fail(ErrorKind::kDimension, "latent code size does not match its shape");
  }
  std::vector<double> v(code.symbols.begin(), code.symbols.end());
  return Tensor(code.shape.height, code.shape.width, code.shape.channels,
                std::move(v));
}

Tensor noise_relax(const Tensor& y, Rng& rng) {
  Tensor out = y;
  for (double& v : out.values()) v += rng.uniform() - 0.5;
  return out;
}

double normal_cdf(double x) noexcept {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

double normal_pdf(double x) noexcept {
  return std::exp(-0.5 * x * x) * (std::numbers::inv_sqrtpi / std::numbers::sqrt2);
}

double interval_probability(double v, double mu, double sigma) noexcept {
  return interval(v, mu, sigma).p;
}

double symbol_bits(double v, double mu, double sigma) noexcept {
  return -std::log2(std::max(interval_probability(v, mu, sigma),
                             kLikelihoodFloor));
}

double rate_bits(const Tensor& values, const GaussianModel& model,
                 RateMode /*mode*/) {
  check_channels(values, model);
  const int c = values.channels();
  std::vector<double> sigma(c);
  for (int k = 0; k < c; ++k) sigma[k] = model.sigma(k);
  double bits = 0.0;
  auto v = values.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int k = static_cast<int>(i % c);
    bits += symbol_bits(v[i], model.mu[k], sigma[k]);
  }
  return bits;
}

double rate_bits_backward(const Tensor& values, const GaussianModel& model,
                          double scale, Tensor* grad_values,
                          RateGradient& grad_model) {
  check_channels(values, model);
  const int c = values.channels();
  grad_model.mu.resize(c, 0.0);
  grad_model.log_sigma.resize(c, 0.0);
  std::vector<double> sigma(c);
  std::vector<bool> active(c);
  for (int k = 0; k < c; ++k) {
    sigma[k] = model.sigma(k);
    active[k] = model.sigma_active(k);
  }
  double bits = 0.0;
  auto v = values.values();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const int k = static_cast<int>(i % c);
    const Interval iv = interval(v[i], model.mu[k], sigma[k]);
    if (iv.p < kLikelihoodFloor) {
      bits -= std::log2(kLikelihoodFloor);
      continue;
    }
    bits -= std::log2(iv.p);
    const double dbits_dp = -scale / (iv.p * std::numbers::ln2);
    const double pu = normal_pdf(iv.upper);
    const double pl = normal_pdf(iv.lower);
    const double dp_dv = (pu - pl) / sigma[k];
    if (grad_values) grad_values->values()[i] += dbits_dp * dp_dv;
    grad_model.mu[k] -= dbits_dp * dp_dv;
    if (active[k]) {
      grad_model.log_sigma[k] -= dbits_dp * (pu * iv.upper - pl * iv.lower);
    }
  }
  return bits;
}

SymbolTable build_symbol_table(double mu, double sigma) {
  const double bound = kAlphabetBound;
  const double center = std::clamp(round_half_away(mu), -bound, bound - 1);
  const auto radius = static_cast<std::int32_t>(std::clamp(
      std::ceil(8.0 * sigma + 1.0), 2.0, static_cast<double>(kMaxRadius)));
  SymbolTable t;
  t.lo = static_cast<std::int32_t>(center) - radius;
  const std::size_t n = 2 * static_cast<std::size_t>(radius) + 2;
  std::vector<double> p(n);
  double direct = 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    p[i] = interval_probability(t.lo + static_cast<double>(i), mu, sigma);
    direct += p[i];
  }
  p[n - 1] = std::max(0.0, 1.0 - direct);
  const double spread = static_cast<double>(kTotalFrequency - n);
  t.freq.resize(n);
  std::uint64_t total = 0;
  std::size_t largest = 0;
  for (std::size_t i = 0; i < n; ++i) {
    t.freq[i] = 1 + static_cast<std::uint32_t>(std::floor(p[i] * spread));
    total += t.freq[i];
    if (t.freq[i] > t.freq[largest]) largest = i;
  }
  t.freq[largest] += static_cast<std::uint32_t>(kTotalFrequency - total);
  t.cum.assign(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) t.cum[i + 1] = t.cum[i] + t.freq[i];
  return t;
}

std::vector<std::uint8_t> encode_latent(const LatentCode& code,
                                        const GaussianModel& model) {
  if (code.shape.channels != model.channels()) {
    fail(ErrorKind::kDimension, "latent channels do not match entropy model");
  }
  if (code.symbols.size() != code.shape.size()) {
    fail(ErrorKind::kDimension, "latent code size does not match its shape");
  }
  const auto tables = tables_for(model);
  const int c = code.shape.channels;
  RangeEncoder enc;
  for (std::size_t i = 0; i < code.symbols.size(); ++i) {
    const std::int32_t s = code.symbols[i];
    if (s < -kAlphabetBound || s >= kAlphabetBound) {
      fail(ErrorKind::kOverflow,
           "symbol " + std::to_string(s) + " outside coder alphabet");
    }
    const SymbolTable& t = tables[i % c];
    const std::int64_t idx = static_cast<std::int64_t>(s) - t.lo;
    if (idx >= 0 && idx < static_cast<std::int64_t>(t.direct_count())) {
      enc.encode(t.cum[idx], t.freq[idx]);
    } else {
      const std::size_t esc = t.direct_count();
      enc.encode(t.cum[esc], t.freq[esc]);
      enc.encode(static_cast<std::uint32_t>(s + static_cast<std::int32_t>(kEscapeOffset)), 1);
    }
  }
  return enc.finish();
}

LatentCode decode_latent(std::span<const std::uint8_t> payload,
                         const GaussianModel& model, const LatentShape& shape) {
  if (shape.channels != model.channels()) {
    fail(ErrorKind::kModelMismatch,
         "latent channels do not match entropy model");
  }
  const auto tables = tables_for(model);
  LatentCode code;
  code.shape = shape;
  code.symbols.resize(shape.size());
  const int c = shape.channels;
  RangeDecoder dec(payload);
  for (std::size_t i = 0; i < code.symbols.size(); ++i) {
    const SymbolTable& t = tables[i % c];
    const std::uint32_t target = dec.target();
    const auto it = std::upper_bound(t.cum.begin(), t.cum.end(), target);
    const auto idx = static_cast<std::size_t>(it - t.cum.begin()) - 1;
    dec.decode(t.cum[idx], t.freq[idx]);
    if (idx < t.direct_count()) {
      code.symbols[i] = t.lo + static_cast<std::int32_t>(idx);
    } else {
      const std::uint32_t raw = dec.target();
      dec.decode(raw, 1);
      code.symbols[i] =
          static_cast<std::int32_t>(raw) - static_cast<std::int32_t>(kEscapeOffset);
    }
  }
  if (dec.consumed() != payload.size()) {
    fail(ErrorKind::kCorruption, "payload has " +
                                     std::to_string(payload.size() -
                                                    dec.consumed()) +
                                     " trailing bytes");
  }
  return code;
}

std::vector<std::uint8_t> serialize_bitstream(const Bitstream& b) {
  std::vector<std::uint8_t> out(kBitstreamMagic.begin(), kBitstreamMagic.end());
  out.push_back(kBitstreamVersion);
  const auto& h = b.header;
  for (std::uint16_t v :
       {h.orig_h, h.orig_w, h.pad_h, h.pad_w, h.lat_h, h.lat_w, h.lat_c}) {
    put_u16(out, v);
  }
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>(h.model_hash >> (8 * i)));
  }
  const auto len = static_cast<std::uint32_t>(b.payload.size());
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(len >> (8 * i)));
  out.insert(out.end(), b.payload.begin(), b.payload.end());
  return out;
}

Bitstream parse_bitstream(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < kBitstreamMagic.size()) {
    fail(ErrorKind::kCorruption, "bitstream shorter than its magic");
  }
  if (!std::equal(kBitstreamMagic.begin(), kBitstreamMagic.end(),
                  bytes.begin())) {
    fail(ErrorKind::kFormat, "not an AUXT bitstream (bad magic)");
  }
  if (bytes.size() < 5) fail(ErrorKind::kCorruption, "bitstream truncated");
  if (bytes[4] != kBitstreamVersion) {
    fail(ErrorKind::kFormat,
         "unsupported bitstream version " + std::to_string(bytes[4]));
  }
  if (bytes.size() < kBitstreamHeaderBytes) {
    fail(ErrorKind::kCorruption, "bitstream header truncated");
  }
  Bitstream b;
  auto& h = b.header;
  std::uint16_t* fields[] = {&h.orig_h, &h.orig_w, &h.pad_h, &h.pad_w,
                             &h.lat_h,  &h.lat_w,  &h.lat_c};
  for (std::size_t i = 0; i < 7; ++i) {
    *fields[i] = get_le<std::uint16_t>(bytes, 5 + 2 * i);
  }
  h.model_hash = get_le<std::uint64_t>(bytes, 19);
  const auto len = get_le<std::uint32_t>(bytes, 27);
  const std::size_t available = bytes.size() - kBitstreamHeaderBytes;
  if (len > available) {
    fail(ErrorKind::kCorruption, "payload truncated: header declares " +
                                     std::to_string(len) + " bytes, " +
                                     std::to_string(available) + " present");
  }
  if (len < available) {
    fail(ErrorKind::kCorruption, "unexpected bytes after payload");
  }
  b.payload.assign(bytes.begin() + kBitstreamHeaderBytes, bytes.end());
  return b;
}

LatentCode decode_bitstream(std::span<const std::uint8_t> bytes,
                            const GaussianModel& model,
                            std::uint64_t expected_hash,
                            BitstreamHeader* header_out) {
  Bitstream b = parse_bitstream(bytes);
  if (b.header.model_hash != expected_hash) {
    fail(ErrorKind::kModelMismatch,
         "bitstream was produced by a different model");
  }
  if (header_out) *header_out = b.header;
  return decode_latent(b.payload, model, b.header.latent_shape());
}

}  // namespace auxcodec::entropy
