#include "auxcodec/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>

#include "auxcodec/error.hpp"

namespace auxcodec::image {
namespace {

class HeaderReader {
 public:
  HeaderReader(std::span<const std::uint8_t> bytes, std::size_t base)
      : bytes_(bytes), base_(base) {}

  std::size_t offset() const noexcept { return pos_; }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      const auto c = bytes_[pos_];
      if (c == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(c)) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  long read_uint(const char* field) {
    skip_space_and_comments();
    const std::size_t start = pos_;
    long value = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) {
        fail(ErrorKind::kParse, std::string(field) + " too large at byte offset " +
                                    std::to_string(base_ + start));
      }
      ++pos_;
    }
    if (pos_ == start) {
      fail(ErrorKind::kParse, std::string("expected ") + field +
                                  " at byte offset " + std::to_string(base_ + start));
    }
    return value;
  }

  /// Exactly one whitespace byte separates maxval from the raster.
  void expect_single_space() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) {
      fail(ErrorKind::kParse, "expected whitespace before raster at byte "
                              "offset " + std::to_string(base_ + pos_));
    }
    ++pos_;
  }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t base_ = 0;
  std::size_t pos_ = 0;
};

}  // namespace

std::pair<Tensor, ImageMeta> decode_pnm(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' ||
      (bytes[1] != '5' && bytes[1] != '6')) {
    fail(ErrorKind::kParse, "bad magic at byte offset 0 (expected P5 or P6)");
  }
  const int channels = bytes[1] == '5' ? 1 : 3;
  std::size_t pos = 2;
  HeaderReader body(bytes.subspan(pos), pos);
  const long width = body.read_uint("width");
  const long height = body.read_uint("height");
  const long maxval = body.read_uint("maxval");
  if (width < 1 || height < 1) {
    fail(ErrorKind::kParse, "zero image extent in header");
  }
  if (maxval != 255) {
    fail(ErrorKind::kUnsupportedFormat,
         "maxval " + std::to_string(maxval) + " (only 8-bit, maxval 255)");
  }
  body.expect_single_space();
  pos += body.offset();

  const std::size_t need = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() - pos < need) {
    fail(ErrorKind::kParse, "raster truncated at byte offset " +
                                std::to_string(bytes.size()) + ": need " +
                                std::to_string(need) + " bytes, have " +
                                std::to_string(bytes.size() - pos));
  }
  Tensor t(static_cast<int>(height), static_cast<int>(width), channels);
  auto values = t.values();
  for (std::size_t i = 0; i < need; ++i) {
    values[i] = static_cast<double>(bytes[pos + i]) / 255.0;
  }
  ImageMeta meta;
  meta.original_height = static_cast<int>(height);
  meta.original_width = static_cast<int>(width);
  meta.bit_depth = 8;
  meta.color = channels == 1 ? ColorModel::kGray : ColorModel::kRgb;
  return {std::move(t), meta};
}

std::pair<Tensor, ImageMeta> load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  try {
    return decode_pnm(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::uint8_t to_byte(double value) noexcept {
  const double clamped = std::clamp(value, 0.0, 1.0) * 255.0;
  // Non-negative here, so half away from zero is floor(v + 0.5).
  return static_cast<std::uint8_t>(std::floor(clamped + 0.5));
}

std::vector<std::uint8_t> encode_pnm(const Tensor& t) {
  if (t.channels() != 1 && t.channels() != 3) {
    fail(ErrorKind::kUnsupportedFormat,
         std::to_string(t.channels()) + " channels (PGM/PPM need 1 or 3)");
  }
  const std::string header = std::string(t.channels() == 1 ? "P5" : "P6") +
                             "\n" + std::to_string(t.width()) + " " +
                             std::to_string(t.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.reserve(out.size() + t.size());
  for (double v : t.values()) out.push_back(to_byte(v));
  return out;
}

void save_image(const Tensor& t, const ImageMeta& meta,
                const std::filesystem::path& path) {
  (void)meta;
  const auto bytes = encode_pnm(t);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorKind::kIo, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * (n - 1);
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

std::pair<Tensor, ImageMeta> pad_reflect(const Tensor& t, int multiple) {
  if (multiple < 1) fail(ErrorKind::kUsage, "padding multiple must be >= 1");
  const int h = t.height();
  const int w = t.width();
  const int ph = (h + multiple - 1) / multiple * multiple;
  const int pw = (w + multiple - 1) / multiple * multiple;
  Tensor out(ph, pw, t.channels());
  for (int y = 0; y < ph; ++y) {
    const int sy = reflect_index(y, h);
    for (int x = 0; x < pw; ++x) {
      const int sx = reflect_index(x, w);
      std::copy_n(t.pixel(sy, sx), t.channels(), out.pixel(y, x));
    }
  }
  ImageMeta meta;
  meta.original_height = h;
  meta.original_width = w;
  meta.color = t.channels() == 3 ? ColorModel::kRgb : ColorModel::kGray;
  return {std::move(out), meta};
}

Tensor crop_to(const Tensor& t, int height, int width) {
  if (height > t.height() || width > t.width() || height < 0 || width < 0) {
    fail(ErrorKind::kDimension, "crop " + std::to_string(height) + "x" +
                                    std::to_string(width) + " of " +
                                    t.shape_string());
  }
  Tensor out(height, width, t.channels());
  for (int y = 0; y < height; ++y) {
    std::copy_n(t.pixel(y, 0), static_cast<std::size_t>(width) * t.channels(),
                out.pixel(y, 0));
  }
  return out;
}

Tensor crop_to(const Tensor& t, const ImageMeta& meta) {
  return crop_to(t, meta.original_height, meta.original_width);
}

double mse(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "mse");
  if (a.size() == 0) return 0.0;
  double s = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double d = av[i] - bv[i];
    s += d * d;
  }
  return s / static_cast<double>(a.size());
}

double psnr(const Tensor& a, const Tensor& b) {
  const double m = mse(a, b);
  if (m == 0.0) return kLossless;
  return 10.0 * std::log10(1.0 / m);
}

}  // namespace auxcodec::image
