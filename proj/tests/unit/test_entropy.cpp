#include <cmath>
#include <functional>

#include "auxcodec/entropy.hpp"
#include "auxcodec/error.hpp"
#include "auxcodec/random.hpp"
#include "auxcodec/range_coder.hpp"
#include "doctest.h"

using namespace auxcodec;
using namespace auxcodec::entropy;

namespace {

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::kIo;
}

GaussianModel random_model(Rng& rng, int channels) {
  GaussianModel m;
  for (int c = 0; c < channels; ++c) {
    m.mu.push_back(rng.uniform(-3.0, 3.0));
    m.log_sigma.push_back(rng.uniform(-1.0, 3.0));
  }
  return m;
}

LatentCode sample_code(Rng& rng, const GaussianModel& m, int h, int w) {
  LatentCode code;
  code.shape = {h, w, m.channels()};
  for (int i = 0; i < h * w; ++i) {
    for (int c = 0; c < m.channels(); ++c) {
      code.symbols.push_back(static_cast<std::int32_t>(
          round_half_away(m.mu[c] + m.sigma(c) * rng.normal())));
    }
  }
  return code;
}

}  // namespace

TEST_CASE("rounding") {
  CHECK(round_half_away(0.4) == 0.0);
  CHECK(round_half_away(-0.4) == 0.0);
  CHECK(round_half_away(0.5) == 1.0);
  CHECK(round_half_away(-0.5) == -1.0);
  CHECK(round_half_away(3.0) == 3.0);
  Tensor t(1, 2, 1, std::vector<double>{2.5, -7.49});
  const auto code = quantize(t);
  CHECK(code.symbols == std::vector<std::int32_t>{3, -7});
  CHECK(dequantize(code).storage() == std::vector<double>{3.0, -7.0});
  CHECK(kind_of([] { quantize(Tensor(1, 1, 1, 1e6)); }) == ErrorKind::kOverflow);
}

TEST_CASE("noise relaxation") {
  Tensor y(1000, 1000, 1, 0.25);
  Rng a(9), b(9);
  const Tensor na = noise_relax(y, a);
  const Tensor nb = noise_relax(y, b);
  CHECK(na.storage() == nb.storage());
  double sum = 0.0, worst = 0.0;
  for (std::size_t i = 0; i < na.size(); ++i) {
    const double u = na.storage()[i] - 0.25;
    sum += u;
    worst = std::max(worst, std::abs(u));
  }
  const double n = static_cast<double>(na.size());
  CHECK(std::abs(sum / n) <= 3.0 * std::sqrt(1.0 / 12.0) / std::sqrt(n));
  CHECK(worst < 0.5);
}

TEST_CASE("interval likelihood") {
  CHECK(interval_probability(0.0, 0.0, 1.0) == doctest::Approx(0.3829249).epsilon(1e-7));
  CHECK(symbol_bits(0.0, 0.0, 1.0) == doctest::Approx(1.3848665342909897).epsilon(1e-12));
  CHECK(symbol_bits(2.0, 2.0, kSigmaMin) < 1e-9);
  CHECK(symbol_bits(2.0, 2.0, kSigmaMin) >= 0.0);
  // far tail stays finite through the floor
  CHECK(symbol_bits(1e4, 0.0, 1.0) == doctest::Approx(-std::log2(kLikelihoodFloor)));
  Rng rng(41);
  for (int i = 0; i < 1000; ++i) {
    CHECK(symbol_bits(rng.uniform(-50, 50), rng.uniform(-5, 5),
                      std::exp(rng.uniform(-8, 4))) >= 0.0);
  }
  // symmetric tails agree
  CHECK(interval_probability(7.0, 0.0, 1.0) ==
        doctest::Approx(interval_probability(-7.0, 0.0, 1.0)).epsilon(1e-12));
}

TEST_CASE("rate gradient matches central differences") {
  Rng rng(42);
  GaussianModel m = random_model(rng, 3);
  Tensor v(2, 2, 3);
  for (double& x : v.values()) x = rng.uniform(-4.0, 4.0);
  Tensor gv(2, 2, 3);
  RateGradient gm;
  rate_bits_backward(v, m, 1.0, &gv, gm);
  const double h = 1e-6;
  for (int c = 0; c < 3; ++c) {
    GaussianModel a = m, b = m;
    a.mu[c] += h;
    b.mu[c] -= h;
    CHECK((rate_bits(v, a, RateMode::kRelaxed) - rate_bits(v, b, RateMode::kRelaxed)) / (2 * h) ==
          doctest::Approx(gm.mu[c]).epsilon(1e-5));
    a = m;
    b = m;
    a.log_sigma[c] += h;
    b.log_sigma[c] -= h;
    CHECK((rate_bits(v, a, RateMode::kRelaxed) - rate_bits(v, b, RateMode::kRelaxed)) / (2 * h) ==
          doctest::Approx(gm.log_sigma[c]).epsilon(1e-5));
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    Tensor a = v, b = v;
    a.storage()[i] += h;
    b.storage()[i] -= h;
    CHECK((rate_bits(a, m, RateMode::kRelaxed) - rate_bits(b, m, RateMode::kRelaxed)) / (2 * h) ==
          doctest::Approx(gv.storage()[i]).epsilon(1e-5));
  }
}

TEST_CASE("symbol tables") {
  for (double sigma : {kSigmaMin, 0.3, 1.0, 40.0, 5000.0}) {
    const auto t = build_symbol_table(0.4, sigma);
    std::uint64_t total = 0;
    for (auto f : t.freq) {
      CHECK(f >= 1);
      total += f;
    }
    CHECK(total == kTotalFrequency);
    CHECK(t.cum.back() == kTotalFrequency);
  }
}

TEST_CASE("range coder primitive") {
  Rng rng(43);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> syms;
  RangeEncoder enc;
  for (int i = 0; i < 5000; ++i) {
    const std::uint32_t f = 1 + static_cast<std::uint32_t>(rng.below(4000));
    const std::uint32_t c = static_cast<std::uint32_t>(rng.below(kTotalFrequency - f));
    syms.push_back({c, f});
    enc.encode(c, f);
  }
  const auto bytes = enc.finish();
  RangeDecoder dec(bytes);
  for (const auto& [c, f] : syms) {
    const std::uint32_t t = dec.target();
    REQUIRE(t >= c);
    REQUIRE(t < c + f);
    dec.decode(c, f);
  }
  CHECK(dec.consumed() == bytes.size());
}

TEST_CASE("near-deterministic latent costs almost nothing") {
  GaussianModel m;
  m.mu.assign(8, 0.0);
  m.log_sigma.assign(8, std::log(kSigmaMin));
  LatentCode code;
  code.shape = {16, 16, 8};
  code.symbols.assign(code.shape.size(), 0);
  const auto payload = encode_latent(code, m);
  CHECK(payload.size() <= 8);
  CHECK(decode_latent(payload, m, code.shape) == code);
}

TEST_CASE("latent round trip") {
  Rng rng(44);
  for (int i = 0; i < 1000; ++i) {
    const GaussianModel m = random_model(rng, 1 + static_cast<int>(rng.below(6)));
    LatentCode code = sample_code(rng, m, 1 + static_cast<int>(rng.below(4)),
                                  1 + static_cast<int>(rng.below(4)));
    if (i % 10 == 0) code.symbols[0] = (i % 20 == 0) ? 30000 : -32768;  // escapes
    const auto payload = encode_latent(code, m);
    REQUIRE(decode_latent(payload, m, code.shape) == code);
  }
}

TEST_CASE("coded size tracks the analytic rate") {
  Rng rng(45);
  for (int trial = 0; trial < 5; ++trial) {
    const GaussianModel m = random_model(rng, 32);
    const LatentCode code = sample_code(rng, m, 16, 16);
    const double analytic = rate_bits(dequantize(code), m);
    const double actual = 8.0 * static_cast<double>(encode_latent(code, m).size());
    CHECK(std::abs(actual - analytic) / analytic <= 0.02);
  }
}

TEST_CASE("bitstream container") {
  Rng rng(46);
  const GaussianModel m = random_model(rng, 4);
  const LatentCode code = sample_code(rng, m, 3, 5);
  Bitstream b;
  b.header = {40, 72, 48, 80, 3, 5, 4, 0x1234abcdULL};
  b.payload = encode_latent(code, m);
  const auto bytes = serialize_bitstream(b);
  CHECK(bytes.size() == kBitstreamHeaderBytes + b.payload.size());

  BitstreamHeader h;
  CHECK(decode_bitstream(bytes, m, 0x1234abcdULL, &h) == code);
  CHECK(h == b.header);

  auto bad = bytes;
  bad[0] = 'X';
  CHECK(kind_of([&] { parse_bitstream(bad); }) == ErrorKind::kFormat);
  bad = bytes;
  bad[4] = 9;
  CHECK(kind_of([&] { parse_bitstream(bad); }) == ErrorKind::kFormat);
  CHECK(kind_of([&] { decode_bitstream(bytes, m, 1); }) == ErrorKind::kModelMismatch);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.end() - 1);
  CHECK(kind_of([&] { parse_bitstream(cut); }) == ErrorKind::kCorruption);
  auto longer = bytes;
  longer.push_back(0);
  CHECK(kind_of([&] { parse_bitstream(longer); }) == ErrorKind::kCorruption);
  CHECK(kind_of([&] { parse_bitstream(std::vector<std::uint8_t>{'A', 'U'}); }) ==
        ErrorKind::kCorruption);
}
