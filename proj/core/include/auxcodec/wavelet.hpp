#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "auxcodec/tensor.hpp"

namespace auxcodec::wavelet {

/// One-dimensional two-channel filter bank in correlation form: the analysis
/// output at index k reads samples 2k + start + j (periodic), and synthesis
/// scatters each coefficient through the dual filter the same way.
struct Filter {
  int start = 0;
  std::vector<double> taps;
};

struct WaveletBasis {
  std::string name;
  Filter analysis_lowpass;
  Filter analysis_highpass;
  Filter synthesis_lowpass;
  Filter synthesis_highpass;
  bool orthonormal = true;

  static WaveletBasis haar();
  static WaveletBasis db4();
  static WaveletBasis bior2_2();
  /// Accepts "haar", "db4", "bior2_2" (and "bior2.2").
  static WaveletBasis by_name(std::string_view name);
};

/// The four half-resolution subbands of one decomposition level. LH is
/// low-pass along rows and high-pass along columns, matching the 2x2 block
/// filters f_LH = 1/2 [[1, 1], [-1, -1]].
struct SubbandSet {
  Tensor ll;
  Tensor lh;
  Tensor hl;
  Tensor hh;

  double energy() const noexcept {
    return ll.energy() + lh.energy() + hl.energy() + hh.energy();
  }
};

SubbandSet dwt2d(const Tensor& t, const WaveletBasis& basis);
Tensor idwt2d(const SubbandSet& s, const WaveletBasis& basis);

/// Separable filter-bank route for any basis, including Haar. dwt2d uses
/// direct 2x2 block products for Haar instead.
SubbandSet dwt2d_separable(const Tensor& t, const WaveletBasis& basis);
Tensor idwt2d_separable(const SubbandSet& s, const WaveletBasis& basis);

/// Adjoint of dwt2d (equal to idwt2d for orthonormal bases). Needed for
/// reverse-mode gradients through biorthogonal bases.
Tensor dwt2d_adjoint(const SubbandSet& grad, const WaveletBasis& basis);
/// Adjoint of idwt2d.
SubbandSet idwt2d_adjoint(const Tensor& grad, const WaveletBasis& basis);

/// Concatenates subbands along channels in the fixed order LL, LH, HL, HH.
Tensor concat_subbands(const SubbandSet& s);
SubbandSet split_subbands(const Tensor& t);

}  // namespace auxcodec::wavelet
