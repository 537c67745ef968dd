#include <cmath>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "auxcodec/error.hpp"
#include "auxcodec/image.hpp"
#include "auxcodec/random.hpp"
#include "doctest.h"

using namespace auxcodec;
using namespace auxcodec::image;

namespace {

std::vector<std::uint8_t> pnm(const std::string& head,
                              std::vector<std::uint8_t> body) {
  std::vector<std::uint8_t> out(head.begin(), head.end());
  out.insert(out.end(), body.begin(), body.end());
  return out;
}

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::kIo;
}

}  // namespace

TEST_CASE("P5 samples map to value/255") {
  auto [t, meta] = decode_pnm(pnm("P5\n2 2\n255\n", {0, 255, 128, 64}));
  REQUIRE(t.channels() == 1);
  CHECK(t.at(0, 0, 0) == 0.0);
  CHECK(t.at(0, 1, 0) == 1.0);
  CHECK(t.at(1, 0, 0) == doctest::Approx(0.50196).epsilon(1e-4));
  CHECK(t.at(1, 1, 0) == doctest::Approx(0.25098).epsilon(1e-4));
  CHECK(meta.color == ColorModel::kGray);
  CHECK(meta.original_height == 2);
}

TEST_CASE("P6 pixel") {
  auto [t, meta] = decode_pnm(pnm("P6\n1 1\n255\n", {255, 0, 0}));
  REQUIRE(t.channels() == 3);
  CHECK(t.at(0, 0, 0) == 1.0);
  CHECK(t.at(0, 0, 1) == 0.0);
  CHECK(t.at(0, 0, 2) == 0.0);
  CHECK(meta.color == ColorModel::kRgb);
}

TEST_CASE("header comments are skipped") {
  auto [t, meta] = decode_pnm(pnm("P5 # c\n# line\n1 2\n255\n", {7, 9}));
  CHECK(t.height() == 2);
  CHECK(t.width() == 1);
}

TEST_CASE("malformed files") {
  CHECK(kind_of([] { decode_pnm(pnm("P5\n2 2\n255\n", {1, 2, 3})); }) ==
        ErrorKind::kParse);
  CHECK(kind_of([] { decode_pnm(pnm("P2\n1 1\n255\n", {1})); }) ==
        ErrorKind::kParse);
  CHECK(kind_of([] { decode_pnm(pnm("P5\n1 1\n65535\n", {0, 0})); }) ==
        ErrorKind::kUnsupportedFormat);
  CHECK(kind_of([] { load_image("/nonexistent/x.pgm"); }) == ErrorKind::kIo);
}

TEST_CASE("byte conversion clamps and rounds half away") {
  CHECK(to_byte(0.0) == 0);
  CHECK(to_byte(1.0) == 255);
  CHECK(to_byte(1.7) == 255);
  CHECK(to_byte(-0.2) == 0);
  CHECK(to_byte(0.5) == 128);
  Tensor row(1, 2, 1, std::vector<double>{0.0, 1.0});
  const auto bytes = encode_pnm(row);
  CHECK(bytes[bytes.size() - 2] == 0);
  CHECK(bytes.back() == 255);
}

TEST_CASE("write/read round trip is exact on the byte grid") {
  Rng rng(5);
  Tensor t(7, 5, 3);
  for (double& v : t.values()) v = static_cast<double>(rng.below(256)) / 255.0;
  const auto path = std::filesystem::temp_directory_path() / "auxcodec_rt.ppm";
  save_image(t, ImageMeta{7, 5, 8, ColorModel::kRgb}, path);
  auto [back, meta] = load_image(path);
  std::filesystem::remove(path);
  CHECK(back.storage() == t.storage());
}

TEST_CASE("pad_reflect") {
  Tensor t(5, 5, 1);
  auto [p, meta] = pad_reflect(t, 4);
  CHECK(p.height() == 8);
  CHECK(p.width() == 8);
  CHECK(meta.original_height == 5);

  Tensor s(16, 16, 2, 0.25);
  auto [same, m2] = pad_reflect(s, 16);
  CHECK(same.storage() == s.storage());

  Tensor row(1, 3, 1, std::vector<double>{1.0, 2.0, 3.0});
  auto [r, m3] = pad_reflect(row, 5);
  REQUIRE(r.width() == 5);
  const std::vector<double> want = {1, 2, 3, 2, 1};
  for (int x = 0; x < 5; ++x) CHECK(r.at(0, x, 0) == want[x]);
  CHECK(crop_to(r, m3).storage() == row.storage());
}

TEST_CASE("psnr") {
  Tensor a(4, 4, 1, 0.3);
  CHECK(psnr(a, a) == kLossless);
  Tensor b = a;
  for (double& v : b.values()) v += 1.0 / 255.0;
  CHECK(psnr(a, b) == doctest::Approx(20.0 * std::log10(255.0)).epsilon(1e-12));
  CHECK(psnr(a, b) == doctest::Approx(48.1308).epsilon(1e-5));
  Tensor c = a;
  for (double& v : c.values()) v += 0.1;
  CHECK(psnr(a, c) == doctest::Approx(20.0));
  CHECK_THROWS(psnr(a, Tensor(4, 3, 1)));
}
