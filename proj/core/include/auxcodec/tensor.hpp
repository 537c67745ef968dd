#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace auxcodec {

/// Dense H x W x C array of doubles, row-major with channels fastest.
class Tensor {
 public:
  Tensor() = default;
  Tensor(int height, int width, int channels, double fill = 0.0);
  Tensor(int height, int width, int channels, std::vector<double> data);

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  int channels() const noexcept { return channels_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int y, int x, int c) noexcept {
    return data_[index(y, x, c)];
  }
  double at(int y, int x, int c) const noexcept {
    return data_[index(y, x, c)];
  }

  /// Pointer to the C contiguous channel values of pixel (y, x).
  double* pixel(int y, int x) noexcept { return data_.data() + index(y, x, 0); }
  const double* pixel(int y, int x) const noexcept {
    return data_.data() + index(y, x, 0);
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }
  std::vector<double>& storage() noexcept { return data_; }
  const std::vector<double>& storage() const noexcept { return data_; }

  bool same_shape(const Tensor& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_ &&
           channels_ == other.channels_;
  }
  std::string shape_string() const;

  /// Sum of squares.
  double energy() const noexcept;
  bool all_finite() const noexcept;

  Tensor& operator+=(const Tensor& other);
  Tensor& operator-=(const Tensor& other);
  Tensor& operator*=(double factor) noexcept;

 private:
  std::size_t index(int y, int x, int c) const noexcept {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int height_ = 0;
  int width_ = 0;
  int channels_ = 0;
  std::vector<double> data_;
};

Tensor operator+(Tensor a, const Tensor& b);
Tensor operator-(Tensor a, const Tensor& b);
Tensor operator*(double factor, Tensor a);

/// Channel-wise concatenation; spatial dims must agree.
Tensor concat_channels(const Tensor& a, const Tensor& b);
/// Channels [first, first + count) of t.
Tensor slice_channels(const Tensor& t, int first, int count);

/// ||a - b|| / max(||b||, tiny).
double relative_error(const Tensor& a, const Tensor& b);

void require_same_shape(const Tensor& a, const Tensor& b, const char* what);

}  // namespace auxcodec
