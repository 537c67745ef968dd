#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auxcodec/matrix.hpp"
#include "auxcodec/model.hpp"
#include "auxcodec/tensor.hpp"

namespace auxcodec::analysis {

inline constexpr int kGroups = 10;

/// Channel energy statistics of a latent. Energies are squared L2 norms
/// over spatial positions, averaged over the latents given.
struct EnergyReport {
  std::vector<double> per_channel_energy;
  std::vector<int> order;  // channel indices, descending energy
  std::array<double, kGroups> group_totals{};

  double total() const noexcept;
  /// Share of total energy held by the top max(1, floor(f * C)) channels.
  double top_fraction_ratio(double fraction) const;
  /// L2 norm (sqrt of energy) of one channel.
  double l2_norm(int channel) const;
};

/// Groups split the sorted channels into ten equal-count groups; the
/// remainder joins the lowest-energy group.
EnergyReport channel_energy(const Tensor& latent);
EnergyReport channel_energy(std::span<const Tensor> latents);

struct BranchEnergy {
  double aux_energy = 0.0;
  double main_energy = 0.0;
  double total = 0.0;  // ||F + P_final||^2
  double cross = 0.0;  // 2 <F, P_final>
};

/// Averaged over the images; images are padded to the model multiple.
BranchEnergy branch_energy(const Model& model, std::span<const Tensor> images);

struct EffectiveOperator {
  Matrix op;                   // rows: latent samples (h, w, c); cols: pixels
  std::vector<double> offset;  // analysis of the all-zero image
  int patch = 0;
  int latent_channels = 0;

  /// op * vec(x) + offset.
  std::vector<double> apply(const Tensor& x) const;
};

/// Exact linear map of the analysis transform, probed with unit impulses at
/// a square canonical patch (default: the model's size multiple, 16 for
/// four stages). Throws kUnsupportedConfig when any ReLU is present.
EffectiveOperator effective_operator(const Model& model, int patch = 0);

struct SimilarityHistogram {
  std::vector<double> edges;  // bins + 1
  std::vector<long> counts;
  std::vector<double> frequencies;
  std::vector<double> values;  // every pair's |cosine|
  int excluded_rows = 0;
};

/// |cosine| of every unordered row pair, binned uniformly on [0, 1]. Zero
/// rows are excluded (reported in excluded_rows).
SimilarityHistogram pairwise_similarity(const Matrix& rows, int bins = 50);

struct RDPoint {
  double bpp = 0.0;
  double psnr_db = 0.0;
};

struct RDCurve {
  std::vector<RDPoint> points;

  /// Throws kUsage when fewer than four points or bpp not strictly
  /// increasing. Returns false (with a warning string) when PSNR is not
  /// strictly increasing.
  bool validate(std::string* warning = nullptr) const;
};

/// Natural cubic spline through (x, y) knots, x strictly increasing.
class NaturalCubicSpline {
 public:
  NaturalCubicSpline(std::vector<double> x, std::vector<double> y);

  double operator()(double t) const;
  /// Exact integral over [a, b] within the knot range.
  double integrate(double a, double b) const;
  double lo() const noexcept { return x_.front(); }
  double hi() const noexcept { return x_.back(); }

 private:
  std::vector<double> x_, y_, m_;  // m_: second derivatives
};

/// Bjontegaard delta rate in percent (negative = saving): mean difference of
/// spline-interpolated log10 rate over the common PSNR interval.
double bd_rate(const RDCurve& anchor, const RDCurve& test);

RDCurve read_rd_csv(const std::filesystem::path& path);

struct AnalyzeInputs {
  std::vector<Tensor> images;
  std::vector<std::string> names;
  std::optional<std::filesystem::path> group_log;  // training *.groups.csv
  std::uint64_t model_hash = 0;
};

/// Writes channel_energy.csv, branch_energy.csv, similarity.csv (linear
/// models only), rd.csv, optional group_evolution.csv and summary.txt.
/// Returns the list of files written.
std::vector<std::filesystem::path> analyze_checkpoint(
    const Model& model, const AnalyzeInputs& inputs,
    const std::filesystem::path& out_dir);

}  // namespace auxcodec::analysis
