#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "auxcodec/auxt.hpp"
#include "auxcodec/mainbranch.hpp"

namespace auxcodec {

/// Architecture switches, including every ablation axis.
struct ModelConfig {
  int source_channels = 3;
  std::vector<int> main_channels = {8, 16, 32, 32};
  std::vector<int> aux_channels = {8, 16, 32, 32};
  int kernel_size = 3;
  mainbranch::Activation main_activation = mainbranch::Activation::kNone;
  mainbranch::Fusion fusion = mainbranch::Fusion::kConcatAdd;
  bool aux_analysis = true;
  bool aux_synthesis = true;
  std::string wavelet = "haar";
  auxt::Downsampler downsampler = auxt::Downsampler::kWavelet;
  bool scaling = true;
  bool aux_relu = false;
  bool tied_olp = true;
  /// Std-dev of Gaussian noise added to the projections after
  /// orthonormal initialisation.
  double orth_init_noise = 0.0;

  int num_stages() const noexcept {
    return static_cast<int>(main_channels.size());
  }
  bool aux_enabled() const noexcept { return aux_analysis || aux_synthesis; }
  int latent_channels() const noexcept { return main_channels.back(); }
  /// Spatial dims must be a multiple of this.
  int size_multiple() const noexcept { return 1 << num_stages(); }

  /// Throws kUsage on inconsistent settings.
  void validate() const;
  auxt::AuxTOptions aux_options() const;
  mainbranch::ChannelPlan channel_plan() const;
};

struct TrainConfig {
  /// Rate-distortion multiplier; distortion is MSE on the 0..255 scale.
  double lambda_rd = 0.0483;
  double lambda_orth = 0.1;
  double learning_rate = 1e-4;
  /// The learning rate is multiplied by lr_decay_factor from
  /// floor(lr_decay_at * iterations) on.
  double lr_decay_at = 0.9;
  double lr_decay_factor = 0.1;
  /// Learning-rate multiplier for the entropy model (mu, log sigma).
  double entropy_lr_scale = 10.0;
  /// "data": mu / sigma from the initial latent statistics; "standard":
  /// mu = 0, sigma = 1.
  std::string entropy_init = "data";
  int iterations = 2000;
  int batch = 8;
  int patch = 64;
  std::uint64_t seed = 0;
  int log_every = 100;
  int threads = 1;
  ModelConfig model;

  void validate() const;
};

/// The documented lambda grid for MSE-optimised models.
inline constexpr double kLambdaGrid[] = {0.0025, 0.0035, 0.0067,
                                         0.0130, 0.0250, 0.0483};

std::string to_json(const TrainConfig& cfg, int indent = 2);
/// Throws kUsage on unknown keys or wrongly typed values.
TrainConfig train_config_from_json(std::string_view text);
TrainConfig load_train_config(const std::string& path);
/// Applies one "key=value" override. The value is parsed as JSON when
/// possible, otherwise taken as a string.
void apply_override(TrainConfig& cfg, std::string_view assignment);

}  // namespace auxcodec
