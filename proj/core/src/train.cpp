#include "auxcodec/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iomanip>
#include <ostream>
#include <thread>

#include "auxcodec/analysis.hpp"
#include "auxcodec/error.hpp"
#include "auxcodec/image.hpp"

namespace auxcodec {
namespace {

constexpr double kPixelScale = 255.0 * 255.0;

struct PatchResult {
  double bits = 0.0;
  double se = 0.0;
};

// Runs fn(b) for every patch index, optionally over several threads. Each
// index writes only its own slot, so the caller can reduce in order.
template <typename Fn>
void for_each_patch(std::size_t n, int threads, Fn&& fn) {
  const auto workers = static_cast<std::size_t>(
      std::clamp<std::int64_t>(threads, 1, static_cast<std::int64_t>(n)));
  if (workers <= 1) {
    for (std::size_t b = 0; b < n; ++b) fn(b);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t b = w; b < n; b += workers) fn(b);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

void add_into(ModelParams& dst, const ModelParams& src,
              const ModelConfig& config) {
  std::vector<std::span<const double>> parts;
  visit_params(config, src,
               [&](std::string_view, ParamGroup, bool,
                   std::span<const double> v) { parts.push_back(v); });
  std::size_t i = 0;
  visit_params(config, dst,
               [&](std::string_view, ParamGroup, bool, std::span<double> v) {
                 const auto& s = parts[i++];
                 for (std::size_t k = 0; k < v.size(); ++k) v[k] += s[k];
               });
}

LossComponents assemble(const Model& model, std::span<const Tensor> batch,
                        const TrainConfig& config,
                        const std::vector<PatchResult>& parts) {
  double bits = 0.0;
  double se = 0.0;
  for (const auto& p : parts) {
    bits += p.bits;
    se += p.se;
  }
  double pixels = 0.0;
  for (const auto& x : batch) pixels += static_cast<double>(x.height()) * x.width();
  const double samples = pixels * model.config.source_channels;
  LossComponents l;
  l.bpp = bits / pixels;
  l.mse = se / samples;
  l.rd = rd_loss(l.bpp, l.mse, config.lambda_rd);
  l.orth = orth_loss(model);
  l.overall = l.rd + config.lambda_orth * l.orth;
  return l;
}

double squared_error(const Tensor& a, const Tensor& b) {
  double se = 0.0;
  auto av = a.values();
  auto bv = b.values();
  for (std::size_t i = 0; i < av.size(); ++i) {
    se += (av[i] - bv[i]) * (av[i] - bv[i]);
  }
  return se;
}

Tensor sample_patch(std::span<const Tensor> corpus, int patch, Rng& rng) {
  const Tensor& img = corpus[rng.below(corpus.size())];
  const int y0 = static_cast<int>(rng.below(img.height() - patch + 1));
  const int x0 = static_cast<int>(rng.below(img.width() - patch + 1));
  Tensor out(patch, patch, img.channels());
  for (int y = 0; y < patch; ++y) {
    std::copy_n(img.pixel(y0 + y, x0), static_cast<std::size_t>(patch) * img.channels(),
                out.pixel(y, 0));
  }
  return out;
}

void check_corpus(const TrainConfig& config, std::span<const Tensor> corpus) {
  if (corpus.empty()) fail(ErrorKind::kUsage, "training corpus is empty");
  for (const auto& img : corpus) {
    if (img.channels() != config.model.source_channels) {
      fail(ErrorKind::kUsage, "corpus image " + img.shape_string() +
                                  " does not have " +
                                  std::to_string(config.model.source_channels) +
                                  " channels");
    }
    if (img.height() < config.patch || img.width() < config.patch) {
      fail(ErrorKind::kUsage, "corpus image " + img.shape_string() +
                                  " is smaller than patch " +
                                  std::to_string(config.patch));
    }
  }
}

std::vector<double> lr_scales(const TrainConfig& config, const Model& model) {
  std::vector<double> scale;
  for (const auto& s : param_index(model.config, model.params)) {
    double f = 1.0;
    if (!s.trainable) f = 0.0;
    else if (s.group == ParamGroup::kEntropyMean ||
             s.group == ParamGroup::kEntropyLogScale) {
      f = config.entropy_lr_scale;
    }
    scale.insert(scale.end(), s.size, f);
  }
  return scale;
}

TrainRecord make_record(int iter, const Model& model,
                        std::span<const Tensor> eval_set,
                        const TrainConfig& config) {
  const EvalSummary e = evaluate(model, eval_set, config.lambda_rd);
  TrainRecord r;
  r.iter = iter;
  r.bpp = e.bpp;
  r.mse = e.mse;
  r.rd_loss = e.rd_loss;
  r.orth_loss = orth_loss(model);
  r.overall = r.rd_loss + config.lambda_orth * r.orth_loss;
  r.top10_ratio = e.top10_ratio;
  r.aux_energy = e.aux_energy;
  r.main_energy = e.main_energy;
  r.group_totals = e.group_totals;
  return r;
}

}  // namespace

double rd_loss(double rate_bpp, double mse, double lambda_rd) noexcept {
  return rate_bpp + lambda_rd * mse * kPixelScale;
}

double orth_loss(const Model& model) {
  double sum = 0.0;
  for (const Matrix* w : model.params.auxt.projections()) sum += auxt::orth_penalty(*w);
  return sum;
}

double max_orth_penalty(const Model& model) {
  double worst = 0.0;
  for (const Matrix* w : model.params.auxt.projections()) {
    worst = std::max(worst, auxt::orth_penalty(*w));
  }
  return worst;
}

LossComponents overall_loss(const Model& model, std::span<const Tensor> batch,
                            const TrainConfig& config,
                            std::uint64_t noise_seed) {
  std::vector<PatchResult> parts(batch.size());
  for_each_patch(batch.size(), config.threads, [&](std::size_t b) {
    Rng rng(derive_seed(noise_seed, b));
    const ForwardTape t = forward(model, batch[b], QuantMode::kNoise, &rng);
    parts[b].bits = entropy::rate_bits(t.y_tilde, model.params.entropy,
                                       entropy::RateMode::kRelaxed);
    parts[b].se = squared_error(t.x_hat, batch[b]);
  });
  return assemble(model, batch, config, parts);
}

LossComponents loss_and_gradient(const Model& model,
                                 std::span<const Tensor> batch,
                                 const TrainConfig& config,
                                 std::uint64_t noise_seed, ModelParams& grad) {
  double pixels = 0.0;
  for (const auto& x : batch) pixels += static_cast<double>(x.height()) * x.width();
  const double rate_scale = 1.0 / pixels;
  const double dist_scale = config.lambda_rd * kPixelScale /
                            (pixels * model.config.source_channels);

  std::vector<PatchResult> parts(batch.size());
  std::vector<ModelParams> grads(batch.size());
  for_each_patch(batch.size(), config.threads, [&](std::size_t b) {
    Rng rng(derive_seed(noise_seed, b));
    const ForwardTape t = forward(model, batch[b], QuantMode::kNoise, &rng);
    parts[b].bits = entropy::rate_bits(t.y_tilde, model.params.entropy,
                                       entropy::RateMode::kRelaxed);
    parts[b].se = squared_error(t.x_hat, batch[b]);
    grads[b] = zeros_like(model.params);
    backward(model, batch[b], t, rate_scale, dist_scale, grads[b]);
  });
  grad = zeros_like(model.params);
  for (const auto& g : grads) add_into(grad, g, model.config);

  if (config.lambda_orth > 0.0) {
    for (std::size_t k = 0; k < model.params.auxt.stages.size(); ++k) {
      const auto& st = model.params.auxt.stages[k];
      auto& gst = grad.auxt.stages[k];
      auto add = [&](const Matrix& w, Matrix& gw) {
        const Matrix g = auxt::orth_penalty_gradient(w);
        auto dst = gw.values();
        auto src = g.values();
        for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += config.lambda_orth * src[i];
      };
      add(st.olp, gst.olp);
      if (!st.olp_synthesis.empty()) add(st.olp_synthesis, gst.olp_synthesis);
    }
  }

  visit_params(model.config, grad,
               [&](std::string_view name, ParamGroup, bool,
                   std::span<const double> v) {
                 for (double d : v) {
                   if (!std::isfinite(d)) {
                     fail(ErrorKind::kNumerical,
                          "non-finite gradient in " + std::string(name));
                   }
                 }
               });
  return assemble(model, batch, config, parts);
}

std::vector<double> backward_flat(const Model& model,
                                  std::span<const Tensor> batch,
                                  const TrainConfig& config,
                                  std::uint64_t noise_seed) {
  ModelParams grad;
  loss_and_gradient(model, batch, config, noise_seed, grad);
  return flatten(model.config, grad);
}

void adam_step(std::span<double> params, std::span<const double> grads,
               AdamState& state, const AdamHyper& hyper,
               std::span<const double> lr_scale) {
  if (grads.size() != params.size() ||
      (!lr_scale.empty() && lr_scale.size() != params.size())) {
    fail(ErrorKind::kDimension, "adam_step size mismatch");
  }
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  ++state.step;
  const double c1 = 1.0 - std::pow(hyper.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(hyper.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grads[i];
    state.m[i] = hyper.beta1 * state.m[i] + (1.0 - hyper.beta1) * g;
    state.v[i] = hyper.beta2 * state.v[i] + (1.0 - hyper.beta2) * g * g;
    const double lr = lr_scale.empty() ? hyper.lr : hyper.lr * lr_scale[i];
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
  }
}

double scheduled_lr(const TrainConfig& config, int iteration) noexcept {
  const int decay_at =
      static_cast<int>(std::floor(config.lr_decay_at * config.iterations));
  return iteration < decay_at ? config.learning_rate
                              : config.learning_rate * config.lr_decay_factor;
}

void TrainLog::write_csv(std::ostream& out) const {
  out << "iter,bpp,mse,rd_loss,orth_loss,top10_ratio,aux_energy,main_energy\n";
  out << std::setprecision(17);
  for (const auto& r : records) {
    out << r.iter << ',' << r.bpp << ',' << r.mse << ',' << r.rd_loss << ','
        << r.orth_loss << ',' << r.top10_ratio << ',' << r.aux_energy << ','
        << r.main_energy << '\n';
  }
}

void TrainLog::write_groups_csv(std::ostream& out) const {
  out << "iter";
  for (int g = 1; g <= kEnergyGroups; ++g) out << ",g" << g;
  out << ",total\n" << std::setprecision(17);
  for (const auto& r : records) {
    out << r.iter;
    double total = 0.0;
    for (double v : r.group_totals) {
      out << ',' << v;
      total += v;
    }
    out << ',' << total << '\n';
  }
}

EvalSummary evaluate(const Model& model, std::span<const Tensor> images,
                     double lambda_rd) {
  if (images.empty()) fail(ErrorKind::kUsage, "evaluation set is empty");
  EvalSummary s;
  std::vector<Tensor> latents;
  const double n = static_cast<double>(images.size());
  for (const auto& img : images) {
    const auto [padded, meta] =
        image::pad_reflect(img, model.config.size_multiple());
    const ForwardTape t = forward(model, padded, QuantMode::kRound);
    const double bits = entropy::rate_bits(t.y_tilde, model.params.entropy,
                                           entropy::RateMode::kDiscrete);
    s.bpp += bits / (static_cast<double>(img.height()) * img.width()) / n;
    s.mse += image::mse(image::crop_to(t.x_hat, meta), img) / n;
    s.aux_energy += (t.p_final.empty() ? 0.0 : t.p_final.energy()) / n;
    s.main_energy += t.f.energy() / n;
    latents.push_back(t.y);
  }
  s.rd_loss = rd_loss(s.bpp, s.mse, lambda_rd);
  const auto report = analysis::channel_energy(latents);
  s.top10_ratio = report.top_fraction_ratio(0.1);
  s.group_totals = report.group_totals;
  return s;
}

Model initial_model(const TrainConfig& config, std::span<const Tensor> corpus) {
  config.validate();
  check_corpus(config, corpus);
  Model model = init_model(config.model, config.seed);
  if (config.entropy_init == "standard") return model;
  // Moments of the initial latent over a fixed patch sample; the 1/12 term
  // is the variance added by the training noise.
  Rng rng(derive_seed(config.seed, 0x45494e));
  const int c = config.model.latent_channels();
  std::vector<double> sum(c, 0.0), sq(c, 0.0);
  double count = 0.0;
  for (int i = 0; i < 16; ++i) {
    const Tensor y = analyze(model, sample_patch(corpus, config.patch, rng)).y;
    auto v = y.values();
    for (std::size_t k = 0; k < v.size(); ++k) {
      sum[k % c] += v[k];
      sq[k % c] += v[k] * v[k];
    }
    count += static_cast<double>(y.height()) * y.width();
  }
  for (int k = 0; k < c; ++k) {
    const double mu = sum[k] / count;
    const double var = std::max(sq[k] / count - mu * mu, 0.0) + 1.0 / 12.0;
    model.params.entropy.mu[k] = mu;
    model.params.entropy.log_sigma[k] = 0.5 * std::log(var);
  }
  return model;
}

TrainResult train(const TrainConfig& config, std::span<const Tensor> corpus,
                  const TrainHooks& hooks) {
  TrainResult result;
  result.model = initial_model(config, corpus);
  Model& model = result.model;
  Model trial = model;
  std::vector<double> flat = flatten(model.config, model.params);
  const std::vector<double> scale = lr_scales(config, model);
  AdamState adam;
  Rng sampler(derive_seed(config.seed, 0x534d50));
  std::vector<Tensor> batch(config.batch);

  auto log = [&](int iter) {
    const std::span<const Tensor> set =
        hooks.eval_set.empty() ? std::span<const Tensor>(batch)
                               : std::span<const Tensor>(hooks.eval_set);
    if (set.empty() || set.front().empty()) return;
    result.log.records.push_back(make_record(iter, model, set, config));
    if (hooks.progress) {
      const auto& r = result.log.records.back();
      *hooks.progress << "iter " << r.iter << " bpp " << r.bpp << " mse "
                      << r.mse << " rd " << r.rd_loss << " orth "
                      << r.orth_loss << '\n';
    }
  };

  if (!hooks.eval_set.empty()) log(0);
  if (hooks.on_step) hooks.on_step(0, model);
  for (int it = 0; it < config.iterations; ++it) {
    for (auto& p : batch) p = sample_patch(corpus, config.patch, sampler);
    if (hooks.eval_set.empty() && it == 0) log(0);
    const std::uint64_t noise_seed = derive_seed(config.seed, 0x4e5a, it);
    try {
      ModelParams grad;
      const LossComponents l =
          loss_and_gradient(model, batch, config, noise_seed, grad);
      if (!std::isfinite(l.overall)) {
        fail(ErrorKind::kDivergence,
             "loss is not finite at iteration " + std::to_string(it));
      }
      const std::vector<double> g = flatten(model.config, grad);
      AdamHyper hyper;
      hyper.lr = scheduled_lr(config, it);
      std::vector<double> next = flat;
      adam_step(next, g, adam, hyper, scale);
      unflatten(model.config, next, trial.params);
      auxt::clamp_scales(trial.params.auxt);
      for (double v : flatten(trial.config, trial.params)) {
        if (!std::isfinite(v)) {
          fail(ErrorKind::kDivergence,
               "parameters not finite after iteration " + std::to_string(it));
        }
      }
      model.params = trial.params;
      flat = flatten(model.config, model.params);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::kNumerical &&
          e.kind() != ErrorKind::kOverflow &&
          e.kind() != ErrorKind::kDivergence) {
        throw;
      }
      result.diverged = true;
      if (hooks.progress) *hooks.progress << "diverged: " << e.what() << '\n';
      break;
    }
    result.iterations_completed = it + 1;
    if (hooks.on_step) hooks.on_step(it + 1, model);
    if ((it + 1) % config.log_every == 0 || it + 1 == config.iterations) {
      log(it + 1);
    }
  }
  return result;
}

std::vector<Tensor> load_corpus(const std::string& dir,
                                std::vector<std::string>* names) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    fail(ErrorKind::kUsage, "corpus directory '" + dir + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto ext = entry.path().extension().string();
    if (entry.is_regular_file() && (ext == ".ppm" || ext == ".pgm")) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  std::vector<Tensor> images;
  for (const auto& f : files) {
    images.push_back(image::load_image(f).first);
    if (names) names->push_back(f.filename().string());
  }
  return images;
}

}  // namespace auxcodec
