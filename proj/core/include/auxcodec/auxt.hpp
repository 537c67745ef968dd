#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auxcodec/matrix.hpp"
#include "auxcodec/tensor.hpp"
#include "auxcodec/wavelet.hpp"

namespace auxcodec::auxt {

/// What replaces the wavelet split inside a stage. Anything other than
/// kWavelet also disables subband scaling.
enum class Downsampler { kWavelet, kAvgPool, kStridedConv };

std::string to_string(Downsampler d);
Downsampler downsampler_from_string(const std::string& s);

struct AuxTOptions {
  wavelet::WaveletBasis basis = wavelet::WaveletBasis::haar();
  Downsampler downsampler = Downsampler::kWavelet;
  bool scaling = true;
  /// Synthesis reuses the analysis projection transposed.
  bool tied_olp = true;

  bool scaling_active() const noexcept {
    return scaling && downsampler == Downsampler::kWavelet;
  }
};

/// Exponent bound for the subband scales; e^16 is far beyond any useful gain.
inline constexpr double kMaxLogScale = 16.0;

/// Parameters of one analysis stage (and its synthesis mirror).
struct WLSParams {
  std::vector<double> s_ll, s_lh, s_hl, s_hh;  // log-scale exponents, length C
  Matrix olp;            // projected_dim x D, projected_dim = 4C (C for pooling)
  Matrix olp_synthesis;  // used only when tied_olp is false
  Matrix mix;            // 4C x 4C, strided-conv substitute only

  int in_channels() const noexcept { return static_cast<int>(s_ll.size()); }
  int out_channels() const noexcept { return olp.cols(); }
  const Matrix& synthesis_projection(bool tied) const noexcept {
    return tied ? olp : olp_synthesis;
  }
};

struct AuxTParams {
  int source_channels = 0;
  std::vector<int> channels;  // D_k for each stage
  AuxTOptions options;
  std::vector<WLSParams> stages;

  int num_stages() const noexcept { return static_cast<int>(stages.size()); }
  int stage_in_channels(int k) const noexcept {
    return k == 0 ? source_channels : channels[k - 1];
  }
  /// Every projection matrix that the orthogonality penalty covers.
  std::vector<const Matrix*> projections() const;
};

// ---------------------------------------------------------------------------
// Per-pixel channel projection: out = W^T p at each pixel.

Tensor project(const Tensor& p, const Matrix& w);
/// out = W q at each pixel.
Tensor project_transpose(const Tensor& q, const Matrix& w);
/// grad_w += sum over pixels of p grad_out^T.
void accumulate_projection_grad(const Tensor& p, const Tensor& grad_out,
                                Matrix& grad_w);

/// Multiplies (or divides) the four subbands of a LL|LH|HL|HH concat by e^s.
Tensor scale_subbands(const Tensor& concat, const WLSParams& params,
                      bool divide);

// ---------------------------------------------------------------------------
// Stage passes. The tapes hold what reverse mode needs.

struct WLSTape {
  Tensor input;
  Tensor split;      // concat of unscaled subbands (or pooled / blocked input)
  Tensor mixed;      // strided-conv substitute: mix applied to split
  Tensor projected;  // input of the projection
};

struct IWLSTape {
  Tensor input;
  Tensor unprojected;  // W q
  Tensor unmixed;      // strided-conv substitute: mix applied
  Tensor unscaled;     // after division by e^s
};

Tensor wls_forward(const Tensor& p, const WLSParams& params,
                   const AuxTOptions& options, WLSTape* tape = nullptr);
Tensor iwls_forward(const Tensor& q, const WLSParams& params,
                    const AuxTOptions& options, IWLSTape* tape = nullptr);

/// Returns dL/dinput and accumulates parameter gradients into grad.
Tensor wls_backward(const Tensor& grad_out, const WLSParams& params,
                    const AuxTOptions& options, const WLSTape& tape,
                    WLSParams& grad);
Tensor iwls_backward(const Tensor& grad_out, const WLSParams& params,
                     const AuxTOptions& options, const IWLSTape& tape,
                     WLSParams& grad);

// ---------------------------------------------------------------------------

struct AnalysisResult {
  std::vector<Tensor> stage_outputs;
  Tensor final;
};

AnalysisResult auxt_analysis(const Tensor& x, const AuxTParams& params);
Tensor auxt_synthesis(const Tensor& y_aux, const AuxTParams& params);
/// Synthesis that also returns each intermediate: element k is the output at
/// the resolution of analysis stage k's input (element 0 is the image, the
/// last element is y_aux itself).
std::vector<Tensor> auxt_synthesis_stages(const Tensor& y_aux,
                                          const AuxTParams& params);

/// ||W^T W - I_D||_F^2 for W of shape M x D.
double orth_penalty(const Matrix& w);
/// ||W W^T - I_M||_F^2.
double column_orth_penalty(const Matrix& w);
/// d/dW ||W^T W - I||_F^2 = 4 W (W^T W - I).
Matrix orth_penalty_gradient(const Matrix& w);

/// Seeded standard-normal matrix, orthonormalised: orthonormal columns when
/// rows >= cols, orthonormal rows otherwise.
Matrix random_orthonormal(int rows, int cols, std::uint64_t seed);

/// Scales start at (1, 0.5, 0.5, 0) for (LL, LH, HL, HH); zero when scaling
/// is disabled.
AuxTParams init_auxt(std::uint64_t seed, int source_channels,
                     const std::vector<int>& channel_plan,
                     const AuxTOptions& options = {});

/// Clamps every exponent into [-kMaxLogScale, kMaxLogScale].
void clamp_scales(AuxTParams& params);

}  // namespace auxcodec::auxt
