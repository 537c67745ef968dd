#include "auxcodec/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "auxcodec/error.hpp"

namespace auxcodec {

Tensor::Tensor(int height, int width, int channels, double fill)
    : height_(height), width_(width), channels_(channels) {
  if (height < 0 || width < 0 || channels < 0) {
    fail(ErrorKind::kDimension, "negative tensor extent");
  }
  data_.assign(static_cast<std::size_t>(height) * width * channels, fill);
}

Tensor::Tensor(int height, int width, int channels, std::vector<double> data)
    : height_(height), width_(width), channels_(channels),
      data_(std::move(data)) {
  if (data_.size() != static_cast<std::size_t>(height) * width * channels) {
    fail(ErrorKind::kDimension, "data length does not match " +
                                    shape_string());
  }
}

std::string Tensor::shape_string() const {
  return std::to_string(height_) + "x" + std::to_string(width_) + "x" +
         std::to_string(channels_);
}

double Tensor::energy() const noexcept {
  double e = 0.0;
  for (double v : data_) e += v * v;
  return e;
}

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(),
                     [](double v) { return std::isfinite(v); });
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape(*this, other, "tensor addition");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

Tensor& Tensor::operator-=(const Tensor& other) {
  require_same_shape(*this, other, "tensor subtraction");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

Tensor& Tensor::operator*=(double factor) noexcept {
  for (double& v : data_) v *= factor;
  return *this;
}

Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
Tensor operator*(double factor, Tensor a) { return a *= factor; }

Tensor concat_channels(const Tensor& a, const Tensor& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    fail(ErrorKind::kDimension, "concat of " + a.shape_string() + " and " +
                                    b.shape_string());
  }
  const int ca = a.channels();
  const int cb = b.channels();
  Tensor out(a.height(), a.width(), ca + cb);
  for (int y = 0; y < a.height(); ++y) {
    for (int x = 0; x < a.width(); ++x) {
      double* o = out.pixel(y, x);
      std::copy_n(a.pixel(y, x), ca, o);
      std::copy_n(b.pixel(y, x), cb, o + ca);
    }
  }
  return out;
}

Tensor slice_channels(const Tensor& t, int first, int count) {
  if (first < 0 || count < 0 || first + count > t.channels()) {
    fail(ErrorKind::kDimension, "channel slice out of range for " +
                                    t.shape_string());
  }
  Tensor out(t.height(), t.width(), count);
  for (int y = 0; y < t.height(); ++y) {
    for (int x = 0; x < t.width(); ++x) {
      std::copy_n(t.pixel(y, x) + first, count, out.pixel(y, x));
    }
  }
  return out;
}

double relative_error(const Tensor& a, const Tensor& b) {
  require_same_shape(a, b, "relative error");
  double num = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a.storage()[i] - b.storage()[i];
    num += d * d;
  }
  return std::sqrt(num) / std::max(std::sqrt(b.energy()), 1e-300);
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* what) {
  if (!a.same_shape(b)) {
    fail(ErrorKind::kDimension, std::string(what) + ": " + a.shape_string() +
                                    " vs " + b.shape_string());
  }
}

}  // namespace auxcodec
