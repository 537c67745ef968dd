#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace auxcodec {

/// Small row-major dense matrix used for channel projections.
class Matrix {
 public:
  Matrix() = default;
  Matrix(int rows, int cols, double fill = 0.0)
      : rows_(rows), cols_(cols),
        data_(static_cast<std::size_t>(rows) * cols, fill) {}

  static Matrix identity(int n);

  int rows() const noexcept { return rows_; }
  int cols() const noexcept { return cols_; }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int r, int c) noexcept {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  double operator()(int r, int c) const noexcept {
    return data_[static_cast<std::size_t>(r) * cols_ + c];
  }
  const double* row(int r) const noexcept {
    return data_.data() + static_cast<std::size_t>(r) * cols_;
  }
  double* row(int r) noexcept {
    return data_.data() + static_cast<std::size_t>(r) * cols_;
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  Matrix transposed() const;

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> data_;
};

Matrix operator*(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);
Matrix operator*(double s, Matrix a);

/// A^T A (cols x cols).
Matrix gram(const Matrix& a);
/// A A^T (rows x rows).
Matrix outer_gram(const Matrix& a);
double frobenius_squared(const Matrix& a);

}  // namespace auxcodec
