#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "auxcodec/auxt.hpp"
#include "auxcodec/config.hpp"
#include "auxcodec/entropy.hpp"
#include "auxcodec/mainbranch.hpp"
#include "auxcodec/random.hpp"
#include "auxcodec/tensor.hpp"

namespace auxcodec {

struct ModelParams {
  auxt::AuxTParams auxt;
  mainbranch::MainParams main;
  entropy::GaussianModel entropy;
};

struct Model {
  ModelConfig config;
  ModelParams params;
};

enum class ParamGroup {
  kScale,
  kProjection,
  kMix,
  kKernel,
  kBias,
  kEntropyMean,
  kEntropyLogScale,
};

const char* to_string(ParamGroup g);

/// Builds a freshly initialised model. Deterministic in (config, seed).
Model init_model(const ModelConfig& config, std::uint64_t seed);

/// Same structure as params, all zeros.
ModelParams zeros_like(const ModelParams& params);

using ParamVisitor =
    std::function<void(std::string_view name, ParamGroup group,
                       bool trainable, std::span<double> values)>;
using ConstParamVisitor =
    std::function<void(std::string_view name, ParamGroup group,
                       bool trainable, std::span<const double> values)>;

/// Visits every parameter array in a fixed order. `trainable` is false for
/// arrays frozen by the configuration (e.g. scales when scaling is off).
void visit_params(const ModelConfig& config, ModelParams& params,
                  const ParamVisitor& visit);
void visit_params(const ModelConfig& config, const ModelParams& params,
                  const ConstParamVisitor& visit);

std::size_t param_count(const ModelConfig& config, const ModelParams& params);
std::vector<double> flatten(const ModelConfig& config,
                            const ModelParams& params);
void unflatten(const ModelConfig& config, std::span<const double> flat,
               ModelParams& params);

/// One entry per flat index range.
struct ParamSlice {
  std::string name;
  ParamGroup group;
  bool trainable;
  std::size_t offset;
  std::size_t size;
};
std::vector<ParamSlice> param_index(const ModelConfig& config,
                                    const ModelParams& params);

// ---------------------------------------------------------------------------
// Forward / reverse pass over the whole codec.

enum class QuantMode {
  kNoise,  // additive uniform noise (training)
  kRound,  // hard rounding (evaluation)
  kNone,   // identity (transform diagnostics)
};

struct ForwardTape {
  // analysis
  std::vector<auxt::WLSTape> wls;
  std::vector<Tensor> aux_pre;  // WLS outputs before the optional ReLU
  std::vector<Tensor> aux_out;
  std::vector<Tensor> main_in;
  std::vector<Tensor> main_pre;
  Tensor f;
  Tensor p_final;
  Tensor y;
  Tensor y_tilde;
  // synthesis
  std::vector<auxt::IWLSTape> iwls;
  std::vector<Tensor> aux_syn;  // aux_syn[k]: iWLS output at stage-k input res
  std::vector<Tensor> syn_in;
  std::vector<Tensor> syn_pre;
  Tensor x_main;
  Tensor x_aux;
  Tensor x_hat;
};

/// Analysis only: returns (y, F, P_final) without the synthesis side.
struct AnalysisOutput {
  Tensor y;
  Tensor f;
  Tensor p_final;  // empty when aux analysis is off
};
AnalysisOutput analyze(const Model& model, const Tensor& x);
Tensor synthesize(const Model& model, const Tensor& y_hat);

ForwardTape forward(const Model& model, const Tensor& x, QuantMode mode,
                    Rng* rng = nullptr);

/// Distortion and rate of one patch.
struct PatchMetrics {
  double bits = 0.0;
  double mse = 0.0;
  double pixels = 0.0;

  double bpp() const noexcept { return bits / pixels; }
};

PatchMetrics patch_metrics(const Model& model, const Tensor& x,
                           const ForwardTape& tape, QuantMode mode);

/// Accumulates into grad the gradient of
///   rate_scale * bits + dist_scale * sum((x_hat - x)^2)
/// through the recorded tape (noise treated as a constant offset).
void backward(const Model& model, const Tensor& x, const ForwardTape& tape,
              double rate_scale, double dist_scale, ModelParams& grad);

}  // namespace auxcodec
