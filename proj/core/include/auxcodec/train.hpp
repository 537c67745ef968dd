#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <vector>

#include "auxcodec/config.hpp"
#include "auxcodec/model.hpp"
#include "auxcodec/tensor.hpp"

namespace auxcodec {

/// rate_bpp + lambda_rd * mse * 255^2.
double rd_loss(double rate_bpp, double mse, double lambda_rd) noexcept;

/// Sum of orth_penalty over every projection of the model.
double orth_loss(const Model& model);
/// Largest single-matrix penalty.
double max_orth_penalty(const Model& model);

struct LossComponents {
  double overall = 0.0;
  double rd = 0.0;
  double orth = 0.0;
  double bpp = 0.0;
  double mse = 0.0;
};

/// Relaxed (noisy) loss over a batch; the same rng stream is consumed by
/// loss_and_gradient so the two agree.
LossComponents overall_loss(const Model& model, std::span<const Tensor> batch,
                            const TrainConfig& config, std::uint64_t noise_seed);

/// Loss plus exact gradient (same layout as the model params). Throws
/// kNumerical naming the parameter when a gradient is not finite.
LossComponents loss_and_gradient(const Model& model,
                                 std::span<const Tensor> batch,
                                 const TrainConfig& config,
                                 std::uint64_t noise_seed, ModelParams& grad);

/// Flat gradient vector in param_index order.
std::vector<double> backward_flat(const Model& model,
                                  std::span<const Tensor> batch,
                                  const TrainConfig& config,
                                  std::uint64_t noise_seed);

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::int64_t step = 0;
};

struct AdamHyper {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update. lr_scale (optional) multiplies the
/// learning rate per coordinate; zero freezes a coordinate.
void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamHyper& hyper,
               std::span<const double> lr_scale = {});

/// Learning rate at a (0-based) iteration under the step schedule.
double scheduled_lr(const TrainConfig& config, int iteration) noexcept;

inline constexpr int kEnergyGroups = 10;

struct TrainRecord {
  int iter = 0;
  double bpp = 0.0;
  double mse = 0.0;
  double rd_loss = 0.0;
  double orth_loss = 0.0;
  double overall = 0.0;
  double top10_ratio = 0.0;
  double aux_energy = 0.0;
  double main_energy = 0.0;
  std::array<double, kEnergyGroups> group_totals{};
};

struct TrainLog {
  std::vector<TrainRecord> records;

  /// iter,bpp,mse,rd_loss,orth_loss,top10_ratio,aux_energy,main_energy
  void write_csv(std::ostream& out) const;
  /// iter,g1..g10,total
  void write_groups_csv(std::ostream& out) const;
};

/// Deterministic evaluation with hard rounding and discrete rate, averaged
/// per image. Images are padded to the model's size multiple.
struct EvalSummary {
  double bpp = 0.0;
  double mse = 0.0;
  double rd_loss = 0.0;
  double top10_ratio = 0.0;
  double aux_energy = 0.0;
  double main_energy = 0.0;
  std::array<double, kEnergyGroups> group_totals{};
};
EvalSummary evaluate(const Model& model, std::span<const Tensor> images,
                     double lambda_rd);

struct TrainHooks {
  /// When non-empty, log records come from evaluate() on this set;
  /// otherwise from the current training batch.
  std::vector<Tensor> eval_set;
  /// Called after iteration `iter` updates (iter counts completed steps).
  std::function<void(int iter, const Model& model)> on_step;
  /// Progress lines; may be null.
  std::ostream* progress = nullptr;
};

struct TrainResult {
  Model model;        // last good model
  TrainLog log;
  int iterations_completed = 0;
  bool diverged = false;
};

/// Builds the initial model for a config: seeded init, optional projection
/// noise, data-driven entropy init from the corpus.
Model initial_model(const TrainConfig& config, std::span<const Tensor> corpus);

TrainResult train(const TrainConfig& config, std::span<const Tensor> corpus,
                  const TrainHooks& hooks = {});

/// Loads every .pgm / .ppm in a directory in lexicographic order.
std::vector<Tensor> load_corpus(const std::string& dir,
                                std::vector<std::string>* names = nullptr);

}  // namespace auxcodec
