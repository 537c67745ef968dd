#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "auxcodec/tensor.hpp"

namespace auxcodec::image {

enum class ColorModel { kGray, kRgb };

struct ImageMeta {
  int original_height = 0;
  int original_width = 0;
  int bit_depth = 8;
  ColorModel color = ColorModel::kGray;
};

/// Reads a binary PGM (P5) or PPM (P6) with maxval 255. Samples map to
/// value / 255.
std::pair<Tensor, ImageMeta> load_image(const std::filesystem::path& path);
std::pair<Tensor, ImageMeta> decode_pnm(std::span<const std::uint8_t> bytes);

/// Writes P5 for one channel, P6 for three. Values are clamped to [0, 1]
/// and rounded half away from zero.
void save_image(const Tensor& t, const ImageMeta& meta,
                const std::filesystem::path& path);
std::vector<std::uint8_t> encode_pnm(const Tensor& t);

/// Float-to-byte conversion shared by every writer.
std::uint8_t to_byte(double value) noexcept;

/// Pads bottom/right to the next multiple using mirror reflection that does
/// not repeat the edge sample. Meta records the unpadded size.
std::pair<Tensor, ImageMeta> pad_reflect(const Tensor& t, int multiple);
Tensor crop_to(const Tensor& t, int height, int width);
Tensor crop_to(const Tensor& t, const ImageMeta& meta);

/// Maps an out-of-range index into [0, n) by mirror reflection.
int reflect_index(int i, int n) noexcept;

inline constexpr double kLossless = std::numeric_limits<double>::infinity();

double mse(const Tensor& a, const Tensor& b);
/// 10 log10(1 / MSE) for [0, 1] signals; kLossless when MSE is zero.
double psnr(const Tensor& a, const Tensor& b);

}  // namespace auxcodec::image
