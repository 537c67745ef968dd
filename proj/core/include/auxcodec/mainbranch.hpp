#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "auxcodec/auxt.hpp"
#include "auxcodec/tensor.hpp"

namespace auxcodec::mainbranch {

enum class Activation { kNone, kRelu };
enum class Fusion { kConcatAdd, kNone };

std::string to_string(Activation a);
std::string to_string(Fusion f);
Activation activation_from_string(const std::string& s);
Fusion fusion_from_string(const std::string& s);

/// Stride-2 convolution stage. Kernel layout is [ky][kx][in][out].
struct ConvStage {
  int kernel_size = 3;
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> kernel;
  std::vector<double> bias;
  Activation activation = Activation::kNone;

  double& w(int ky, int kx, int ci, int co) noexcept {
    return kernel[((static_cast<std::size_t>(ky) * kernel_size + kx) *
                       in_channels + ci) * out_channels + co];
  }
  double w(int ky, int kx, int ci, int co) const noexcept {
    return kernel[((static_cast<std::size_t>(ky) * kernel_size + kx) *
                       in_channels + ci) * out_channels + co];
  }
};

struct MainParams {
  std::vector<ConvStage> analysis_stages;
  std::vector<ConvStage> synthesis_stages;  // ordered from the latent outward
  Fusion fusion = Fusion::kConcatAdd;
};

/// Channel layout shared by both branches.
struct ChannelPlan {
  int source_channels = 3;
  std::vector<int> main_channels;  // analysis output channels per stage
  std::vector<int> aux_channels;   // D_k per stage
  int kernel_size = 3;
  Activation activation = Activation::kNone;
  Fusion fusion = Fusion::kConcatAdd;
  bool aux_in_analysis = true;
  bool aux_in_synthesis = true;
};

/// Fan-in scaled uniform kernels, zero biases. The last analysis and last
/// synthesis stage never get an activation.
MainParams init_main(std::uint64_t seed, const ChannelPlan& plan);

// ---------------------------------------------------------------------------
// Layer primitives.

/// Stride-2 convolution with mirror padding; output is H/2 x W/2. No
/// activation is applied here.
Tensor conv_down(const Tensor& in, const ConvStage& stage);
/// Accumulates kernel/bias gradients into grad and returns dL/din.
Tensor conv_down_backward(const Tensor& in, const Tensor& grad_out,
                          const ConvStage& stage, ConvStage& grad);

/// Stride-2 transposed convolution (padding (k-1)/2, output padding 1):
/// output is exactly 2H x 2W.
Tensor conv_up(const Tensor& in, const ConvStage& stage);
Tensor conv_up_backward(const Tensor& in, const Tensor& grad_out,
                        const ConvStage& stage, ConvStage& grad);

Tensor relu(Tensor t);
/// Masks grad where pre_activation <= 0.
Tensor relu_backward(const Tensor& pre_activation, Tensor grad);

inline Tensor activate(Tensor t, Activation a) {
  return a == Activation::kRelu ? relu(std::move(t)) : t;
}

// ---------------------------------------------------------------------------
// Branch passes.

/// Main analysis. With concat_add fusion, stage k > 1 consumes
/// concat(previous output, aux_outputs[k-2]); aux_outputs may be empty when
/// the auxiliary transform is off.
Tensor analysis_main(const Tensor& x, const MainParams& mp,
                     const std::vector<Tensor>& aux_outputs);

/// y = F + P_final.
Tensor compose_latent(const Tensor& f, const Tensor& p_final);

/// Full synthesis: main transposed-conv path plus, when aux is non-null, the
/// inverse auxiliary path. Both consume the whole latent; the reconstructions
/// are summed at image scale and the aux intermediates are concatenated into
/// the main upsampler when fusion is concat_add.
Tensor synthesis_main(const Tensor& y_hat, const MainParams& mp,
                      const auxt::AuxTParams* aux);

}  // namespace auxcodec::mainbranch
