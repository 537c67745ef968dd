#include "auxcodec/wavelet.hpp"

#include <cmath>
#include <numbers>

#include "auxcodec/error.hpp"

namespace auxcodec::wavelet {
namespace {

constexpr double kInvSqrt2 = 0.70710678118654752440;

// Daubechies, four vanishing moments (8 taps), unit L2 norm, sum sqrt(2).
constexpr double kDb4Low[8] = {
    0.23037781330885523,  0.7148465705525415,   0.6308807679295904,
    -0.02798376941698385, -0.18703481171888114, 0.030841381835986965,
    0.032883011666982945, -0.010597401784997278};

Filter quadrature_mirror(const Filter& low) {
  // g[n] = (-1)^n h[L-1-n]
  Filter high;
  high.start = low.start;
  const int n = static_cast<int>(low.taps.size());
  high.taps.resize(n);
  for (int i = 0; i < n; ++i) {
    high.taps[i] = (i % 2 == 0 ? 1.0 : -1.0) * low.taps[n - 1 - i];
  }
  return high;
}

inline int wrap(int i, int n) noexcept {
  i %= n;
  return i < 0 ? i + n : i;
}

// In-place style 1-D passes over `n` samples spaced `stride` apart.
void analyze_1d(const double* in, std::size_t stride, int n, const Filter& lo,
                const Filter& hi, double* low_out, double* high_out,
                std::size_t out_stride) {
  const int half = n / 2;
  for (int k = 0; k < half; ++k) {
    double a = 0.0;
    for (std::size_t j = 0; j < lo.taps.size(); ++j) {
      a += lo.taps[j] * in[wrap(2 * k + lo.start + static_cast<int>(j), n) *
                           stride];
    }
    double d = 0.0;
    for (std::size_t j = 0; j < hi.taps.size(); ++j) {
      d += hi.taps[j] * in[wrap(2 * k + hi.start + static_cast<int>(j), n) *
                           stride];
    }
    low_out[k * out_stride] = a;
    high_out[k * out_stride] = d;
  }
}

void synthesize_1d(const double* low, const double* high, std::size_t in_stride,
                   int n, const Filter& lo, const Filter& hi, double* out,
                   std::size_t stride) {
  for (int m = 0; m < n; ++m) out[m * stride] = 0.0;
  const int half = n / 2;
  for (int k = 0; k < half; ++k) {
    const double a = low[k * in_stride];
    const double d = high[k * in_stride];
    for (std::size_t j = 0; j < lo.taps.size(); ++j) {
      out[wrap(2 * k + lo.start + static_cast<int>(j), n) * stride] +=
          lo.taps[j] * a;
    }
    for (std::size_t j = 0; j < hi.taps.size(); ++j) {
      out[wrap(2 * k + hi.start + static_cast<int>(j), n) * stride] +=
          hi.taps[j] * d;
    }
  }
}

void require_even(const Tensor& t) {
  if (t.height() % 2 != 0 || t.width() % 2 != 0 || t.height() == 0 ||
      t.width() == 0) {
    fail(ErrorKind::kDimension,
         "DWT needs even, non-zero height and width, got " + t.shape_string());
  }
}

void require_consistent(const SubbandSet& s) {
  if (!s.ll.same_shape(s.lh) || !s.ll.same_shape(s.hl) ||
      !s.ll.same_shape(s.hh)) {
    fail(ErrorKind::kDimension, "subband shapes disagree: " +
                                    s.ll.shape_string() + ", " +
                                    s.lh.shape_string() + ", " +
                                    s.hl.shape_string() + ", " +
                                    s.hh.shape_string());
  }
}

// Generic separable analysis: rows (width axis) then columns (height axis).
SubbandSet separable_analysis(const Tensor& t, const Filter& lo,
                              const Filter& hi) {
  require_even(t);
  const int h = t.height();
  const int w = t.width();
  const int c = t.channels();
  const int h2 = h / 2;
  const int w2 = w / 2;
  // Width pass: L and H are h x w2 x c.
  Tensor lw(h, w2, c), hw(h, w2, c);
  for (int y = 0; y < h; ++y) {
    for (int ch = 0; ch < c; ++ch) {
      analyze_1d(t.pixel(y, 0) + ch, c, w, lo, hi, lw.pixel(y, 0) + ch,
                 hw.pixel(y, 0) + ch, c);
    }
  }
  SubbandSet s{Tensor(h2, w2, c), Tensor(h2, w2, c), Tensor(h2, w2, c),
               Tensor(h2, w2, c)};
  const std::size_t col_stride = static_cast<std::size_t>(w2) * c;
  for (int x = 0; x < w2; ++x) {
    for (int ch = 0; ch < c; ++ch) {
      analyze_1d(lw.pixel(0, x) + ch, col_stride, h, lo, hi,
                 s.ll.pixel(0, x) + ch, s.lh.pixel(0, x) + ch, col_stride);
      analyze_1d(hw.pixel(0, x) + ch, col_stride, h, lo, hi,
                 s.hl.pixel(0, x) + ch, s.hh.pixel(0, x) + ch, col_stride);
    }
  }
  return s;
}

Tensor separable_synthesis(const SubbandSet& s, const Filter& lo,
                           const Filter& hi) {
  require_consistent(s);
  const int h2 = s.ll.height();
  const int w2 = s.ll.width();
  const int c = s.ll.channels();
  const int h = 2 * h2;
  const int w = 2 * w2;
  Tensor lw(h, w2, c), hw(h, w2, c);
  const std::size_t col_stride = static_cast<std::size_t>(w2) * c;
  for (int x = 0; x < w2; ++x) {
    for (int ch = 0; ch < c; ++ch) {
      synthesize_1d(s.ll.pixel(0, x) + ch, s.lh.pixel(0, x) + ch, col_stride,
                    h, lo, hi, lw.pixel(0, x) + ch, col_stride);
      synthesize_1d(s.hl.pixel(0, x) + ch, s.hh.pixel(0, x) + ch, col_stride,
                    h, lo, hi, hw.pixel(0, x) + ch, col_stride);
    }
  }
  Tensor out(h, w, c);
  for (int y = 0; y < h; ++y) {
    for (int ch = 0; ch < c; ++ch) {
      synthesize_1d(lw.pixel(y, 0) + ch, hw.pixel(y, 0) + ch, c, w, lo, hi,
                    out.pixel(y, 0) + ch, c);
    }
  }
  return out;
}

SubbandSet haar_blocks(const Tensor& t) {
  require_even(t);
  const int h2 = t.height() / 2;
  const int w2 = t.width() / 2;
  const int c = t.channels();
  SubbandSet s{Tensor(h2, w2, c), Tensor(h2, w2, c), Tensor(h2, w2, c),
               Tensor(h2, w2, c)};
  for (int i = 0; i < h2; ++i) {
    for (int j = 0; j < w2; ++j) {
      const double* a = t.pixel(2 * i, 2 * j);
      const double* b = t.pixel(2 * i, 2 * j + 1);
      const double* cc = t.pixel(2 * i + 1, 2 * j);
      const double* d = t.pixel(2 * i + 1, 2 * j + 1);
      double* ll = s.ll.pixel(i, j);
      double* lh = s.lh.pixel(i, j);
      double* hl = s.hl.pixel(i, j);
      double* hh = s.hh.pixel(i, j);
      for (int ch = 0; ch < c; ++ch) {
        ll[ch] = 0.5 * (a[ch] + b[ch] + cc[ch] + d[ch]);
        lh[ch] = 0.5 * (a[ch] + b[ch] - cc[ch] - d[ch]);
        hl[ch] = 0.5 * (a[ch] - b[ch] + cc[ch] - d[ch]);
        hh[ch] = 0.5 * (a[ch] - b[ch] - cc[ch] + d[ch]);
      }
    }
  }
  return s;
}

Tensor haar_blocks_inverse(const SubbandSet& s) {
  require_consistent(s);
  const int h2 = s.ll.height();
  const int w2 = s.ll.width();
  const int c = s.ll.channels();
  Tensor out(2 * h2, 2 * w2, c);
  for (int i = 0; i < h2; ++i) {
    for (int j = 0; j < w2; ++j) {
      const double* ll = s.ll.pixel(i, j);
      const double* lh = s.lh.pixel(i, j);
      const double* hl = s.hl.pixel(i, j);
      const double* hh = s.hh.pixel(i, j);
      double* a = out.pixel(2 * i, 2 * j);
      double* b = out.pixel(2 * i, 2 * j + 1);
      double* cc = out.pixel(2 * i + 1, 2 * j);
      double* d = out.pixel(2 * i + 1, 2 * j + 1);
      for (int ch = 0; ch < c; ++ch) {
        a[ch] = 0.5 * (ll[ch] + lh[ch] + hl[ch] + hh[ch]);
        b[ch] = 0.5 * (ll[ch] + lh[ch] - hl[ch] - hh[ch]);
        cc[ch] = 0.5 * (ll[ch] - lh[ch] + hl[ch] - hh[ch]);
        d[ch] = 0.5 * (ll[ch] - lh[ch] - hl[ch] + hh[ch]);
      }
    }
  }
  return out;
}

}  // namespace

WaveletBasis WaveletBasis::haar() {
  WaveletBasis b;
  b.name = "haar";
  b.analysis_lowpass = {0, {kInvSqrt2, kInvSqrt2}};
  b.analysis_highpass = {0, {kInvSqrt2, -kInvSqrt2}};
  b.synthesis_lowpass = b.analysis_lowpass;
  b.synthesis_highpass = b.analysis_highpass;
  b.orthonormal = true;
  return b;
}

WaveletBasis WaveletBasis::db4() {
  WaveletBasis b;
  b.name = "db4";
  b.analysis_lowpass = {0, std::vector<double>(std::begin(kDb4Low),
                                               std::end(kDb4Low))};
  b.analysis_highpass = quadrature_mirror(b.analysis_lowpass);
  b.synthesis_lowpass = b.analysis_lowpass;
  b.synthesis_highpass = b.analysis_highpass;
  b.orthonormal = true;
  return b;
}

WaveletBasis WaveletBasis::bior2_2() {
  // CDF 5/3 pair, normalised so the low-pass DC gain is sqrt(2).
  constexpr double r = std::numbers::sqrt2;
  WaveletBasis b;
  b.name = "bior2_2";
  b.analysis_lowpass = {-2, {-r / 8, r / 4, 3 * r / 4, r / 4, -r / 8}};
  b.analysis_highpass = {0, {-r / 4, r / 2, -r / 4}};
  b.synthesis_lowpass = {-1, {r / 4, r / 2, r / 4}};
  b.synthesis_highpass = {-1, {-r / 8, -r / 4, 3 * r / 4, -r / 4, -r / 8}};
  b.orthonormal = false;
  return b;
}

WaveletBasis WaveletBasis::by_name(std::string_view name) {
  if (name == "haar") return haar();
  if (name == "db4") return db4();
  if (name == "bior2_2" || name == "bior2.2") return bior2_2();
  fail(ErrorKind::kUsage, "unknown wavelet '" + std::string(name) +
                              "' (haar, db4, bior2_2)");
}

SubbandSet dwt2d(const Tensor& t, const WaveletBasis& basis) {
  if (basis.name == "haar") return haar_blocks(t);
  return dwt2d_separable(t, basis);
}

Tensor idwt2d(const SubbandSet& s, const WaveletBasis& basis) {
  if (basis.name == "haar") return haar_blocks_inverse(s);
  return idwt2d_separable(s, basis);
}

SubbandSet dwt2d_separable(const Tensor& t, const WaveletBasis& basis) {
  return separable_analysis(t, basis.analysis_lowpass,
                            basis.analysis_highpass);
}

Tensor idwt2d_separable(const SubbandSet& s, const WaveletBasis& basis) {
  return separable_synthesis(s, basis.synthesis_lowpass,
                             basis.synthesis_highpass);
}

Tensor dwt2d_adjoint(const SubbandSet& grad, const WaveletBasis& basis) {
  if (basis.name == "haar") return haar_blocks_inverse(grad);
  return separable_synthesis(grad, basis.analysis_lowpass,
                             basis.analysis_highpass);
}

SubbandSet idwt2d_adjoint(const Tensor& grad, const WaveletBasis& basis) {
  if (basis.name == "haar") return haar_blocks(grad);
  return separable_analysis(grad, basis.synthesis_lowpass,
                            basis.synthesis_highpass);
}

Tensor concat_subbands(const SubbandSet& s) {
  require_consistent(s);
  const int c = s.ll.channels();
  Tensor out(s.ll.height(), s.ll.width(), 4 * c);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = 0; x < out.width(); ++x) {
      double* o = out.pixel(y, x);
      std::copy_n(s.ll.pixel(y, x), c, o);
      std::copy_n(s.lh.pixel(y, x), c, o + c);
      std::copy_n(s.hl.pixel(y, x), c, o + 2 * c);
      std::copy_n(s.hh.pixel(y, x), c, o + 3 * c);
    }
  }
  return out;
}

SubbandSet split_subbands(const Tensor& t) {
  if (t.channels() % 4 != 0) {
    fail(ErrorKind::kDimension, "subband split needs a multiple of 4 "
                                "channels, got " + t.shape_string());
  }
  const int c = t.channels() / 4;
  SubbandSet s{slice_channels(t, 0, c), slice_channels(t, c, c),
               slice_channels(t, 2 * c, c), slice_channels(t, 3 * c, c)};
  return s;
}

}  // namespace auxcodec::wavelet
