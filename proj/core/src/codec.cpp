#include "auxcodec/codec.hpp"

#include <limits>

#include "auxcodec/error.hpp"

namespace auxcodec {
namespace {

std::uint16_t dim16(int v, const char* what) {
  if (v < 0 || v > std::numeric_limits<std::uint16_t>::max()) {
    fail(ErrorKind::kOverflow,
         std::string(what) + " " + std::to_string(v) + " does not fit in 16 bits");
  }
  return static_cast<std::uint16_t>(v);
}

}  // namespace

EncodedImage encode_image(const Model& model, std::uint64_t model_hash,
                          const Tensor& image, const image::ImageMeta& meta) {
  if (image.empty()) fail(ErrorKind::kDimension, "cannot encode an empty image");
  const auto [padded, pad_meta] =
      image::pad_reflect(image, model.config.size_multiple());
  const Tensor y = analyze(model, padded).y;
  EncodedImage out;
  out.code = entropy::quantize(y);
  entropy::Bitstream b;
  b.header.orig_h = dim16(meta.original_height, "height");
  b.header.orig_w = dim16(meta.original_width, "width");
  b.header.pad_h = dim16(padded.height(), "padded height");
  b.header.pad_w = dim16(padded.width(), "padded width");
  b.header.lat_h = dim16(y.height(), "latent height");
  b.header.lat_w = dim16(y.width(), "latent width");
  b.header.lat_c = dim16(y.channels(), "latent channels");
  b.header.model_hash = model_hash;
  b.payload = entropy::encode_latent(out.code, model.params.entropy);
  out.bpp = 8.0 * static_cast<double>(b.payload.size()) /
            (static_cast<double>(meta.original_height) * meta.original_width);
  out.bytes = entropy::serialize_bitstream(b);
  return out;
}

DecodedImage decode_image(const Model& model, std::uint64_t model_hash,
                          std::span<const std::uint8_t> bytes) {
  entropy::BitstreamHeader h;
  const entropy::Bitstream parsed = entropy::parse_bitstream(bytes);
  if (parsed.header.model_hash != model_hash) {
    fail(ErrorKind::kModelMismatch,
         "bitstream was produced by a different model");
  }
  h = parsed.header;
  const int m = model.config.size_multiple();
  if (h.lat_c != model.config.latent_channels() || h.pad_h % m != 0 ||
      h.pad_w % m != 0 || h.lat_h * m != h.pad_h || h.lat_w * m != h.pad_w ||
      h.orig_h == 0 || h.orig_w == 0 || h.orig_h > h.pad_h ||
      h.orig_w > h.pad_w) {
    fail(ErrorKind::kFormat, "bitstream header dimensions are inconsistent");
  }
  DecodedImage out;
  out.code = entropy::decode_latent(parsed.payload, model.params.entropy,
                                    h.latent_shape());
  const Tensor x = synthesize(model, entropy::dequantize(out.code));
  out.meta.original_height = h.orig_h;
  out.meta.original_width = h.orig_w;
  out.meta.color = model.config.source_channels == 3 ? image::ColorModel::kRgb
                                                     : image::ColorModel::kGray;
  out.image = image::crop_to(x, out.meta);
  return out;
}

Tensor to_pixel_grid(const Tensor& t) {
  Tensor out = t;
  for (double& v : out.values()) v = image::to_byte(v) / 255.0;
  return out;
}

}  // namespace auxcodec
