#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "auxcodec/entropy.hpp"
#include "auxcodec/image.hpp"
#include "auxcodec/model.hpp"

namespace auxcodec {

struct EncodedImage {
  std::vector<std::uint8_t> bytes;  // full container
  entropy::LatentCode code;
  /// Payload bits / (original height x width).
  double bpp = 0.0;
};

/// Pads, analyses, rounds, and range-codes one image.
EncodedImage encode_image(const Model& model, std::uint64_t model_hash,
                          const Tensor& image, const image::ImageMeta& meta);

struct DecodedImage {
  Tensor image;  // cropped to the original size, unclamped
  image::ImageMeta meta;
  entropy::LatentCode code;
};

DecodedImage decode_image(const Model& model, std::uint64_t model_hash,
                          std::span<const std::uint8_t> bytes);

/// Quantised reconstruction clamped and rounded like a written file.
Tensor to_pixel_grid(const Tensor& t);

}  // namespace auxcodec
