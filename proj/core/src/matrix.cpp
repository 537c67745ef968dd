#include "auxcodec/matrix.hpp"

#include "auxcodec/error.hpp"

namespace auxcodec {

Matrix Matrix::identity(int n) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (int r = 0; r < rows_; ++r) {
    for (int c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  }
  return t;
}

Matrix operator*(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorKind::kDimension, "matrix product shape mismatch");
  }
  Matrix out(a.rows(), b.cols());
  for (int i = 0; i < a.rows(); ++i) {
    double* o = out.row(i);
    for (int k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      const double* brow = b.row(k);
      for (int j = 0; j < b.cols(); ++j) o[j] += aik * brow[j];
    }
  }
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorKind::kDimension, "matrix difference shape mismatch");
  }
  Matrix out = a;
  auto ov = out.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < ov.size(); ++i) ov[i] -= bv[i];
  return out;
}

Matrix operator*(double s, Matrix a) {
  for (double& v : a.values()) v *= s;
  return a;
}

Matrix gram(const Matrix& a) {
  Matrix g(a.cols(), a.cols());
  for (int r = 0; r < a.rows(); ++r) {
    const double* row = a.row(r);
    for (int i = 0; i < a.cols(); ++i) {
      const double ri = row[i];
      double* gi = g.row(i);
      for (int j = 0; j < a.cols(); ++j) gi[j] += ri * row[j];
    }
  }
  return g;
}

Matrix outer_gram(const Matrix& a) {
  Matrix g(a.rows(), a.rows());
  for (int i = 0; i < a.rows(); ++i) {
    for (int j = 0; j < a.rows(); ++j) {
      double s = 0.0;
      for (int k = 0; k < a.cols(); ++k) s += a(i, k) * a(j, k);
      g(i, j) = s;
    }
  }
  return g;
}

double frobenius_squared(const Matrix& a) {
  double s = 0.0;
  for (double v : a.values()) s += v * v;
  return s;
}

}  // namespace auxcodec
