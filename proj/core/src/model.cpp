#include "auxcodec/model.hpp"

#include <algorithm>

#include "auxcodec/error.hpp"

namespace auxcodec {
namespace {

using mainbranch::Activation;
using mainbranch::Fusion;

template <typename Params, typename Fn>
void visit_impl(const ModelConfig& config, Params& params, Fn&& visit) {
  const bool scales = config.aux_options().scaling_active();
  auto& aux = params.auxt;
  for (std::size_t k = 0; k < aux.stages.size(); ++k) {
    auto& st = aux.stages[k];
    const std::string base = "auxt.stage" + std::to_string(k + 1) + ".";
    visit(base + "s_ll", ParamGroup::kScale, scales, st.s_ll);
    visit(base + "s_lh", ParamGroup::kScale, scales, st.s_lh);
    visit(base + "s_hl", ParamGroup::kScale, scales, st.s_hl);
    visit(base + "s_hh", ParamGroup::kScale, scales, st.s_hh);
    visit(base + "olp", ParamGroup::kProjection, true, st.olp.values());
    if (!st.olp_synthesis.empty()) {
      visit(base + "olp_synthesis", ParamGroup::kProjection, true,
            st.olp_synthesis.values());
    }
    if (!st.mix.empty()) {
      visit(base + "mix", ParamGroup::kMix, true, st.mix.values());
    }
  }
  for (std::size_t k = 0; k < params.main.analysis_stages.size(); ++k) {
    auto& st = params.main.analysis_stages[k];
    const std::string base = "main.analysis" + std::to_string(k + 1) + ".";
    visit(base + "kernel", ParamGroup::kKernel, true, st.kernel);
    visit(base + "bias", ParamGroup::kBias, true, st.bias);
  }
  for (std::size_t k = 0; k < params.main.synthesis_stages.size(); ++k) {
    auto& st = params.main.synthesis_stages[k];
    const std::string base = "main.synthesis" + std::to_string(k + 1) + ".";
    visit(base + "kernel", ParamGroup::kKernel, true, st.kernel);
    visit(base + "bias", ParamGroup::kBias, true, st.bias);
  }
  visit("entropy.mu", ParamGroup::kEntropyMean, true, params.entropy.mu);
  visit("entropy.log_sigma", ParamGroup::kEntropyLogScale, true,
        params.entropy.log_sigma);
}

void zero(std::vector<double>& v) { std::fill(v.begin(), v.end(), 0.0); }
void zero(Matrix& m) { std::fill(m.values().begin(), m.values().end(), 0.0); }

bool fuse_analysis(const ModelConfig& c) {
  return c.aux_analysis && c.fusion == Fusion::kConcatAdd;
}
bool fuse_synthesis(const ModelConfig& c) {
  return c.aux_synthesis && c.fusion == Fusion::kConcatAdd;
}

void check_input(const Model& model, const Tensor& x) {
  const auto& c = model.config;
  if (x.channels() != c.source_channels) {
    fail(ErrorKind::kDimension, "model expects " +
                                    std::to_string(c.source_channels) +
                                    " channels, got " + x.shape_string());
  }
  const int m = c.size_multiple();
  if (x.height() == 0 || x.width() == 0 || x.height() % m != 0 ||
      x.width() % m != 0) {
    fail(ErrorKind::kDimension, "input " + x.shape_string() +
                                    " is not a multiple of " +
                                    std::to_string(m));
  }
}

void run_analysis(const Model& model, const Tensor& x, ForwardTape& t) {
  const auto& c = model.config;
  const auto& p = model.params;
  const int s = c.num_stages();
  const auto opts = c.aux_options();
  if (c.aux_analysis) {
    t.wls.resize(s);
    Tensor cur = x;
    for (int k = 0; k < s; ++k) {
      Tensor out = auxt::wls_forward(cur, p.auxt.stages[k], opts, &t.wls[k]);
      t.aux_pre.push_back(out);
      if (c.aux_relu) out = mainbranch::relu(std::move(out));
      t.aux_out.push_back(out);
      cur = std::move(out);
    }
    t.p_final = t.aux_out.back();
  }
  Tensor h = x;
  for (int k = 0; k < s; ++k) {
    const auto& st = p.main.analysis_stages[k];
    Tensor in = k > 0 && fuse_analysis(c) ? concat_channels(h, t.aux_out[k - 1])
                                          : std::move(h);
    Tensor pre = mainbranch::conv_down(in, st);
    h = mainbranch::activate(pre, st.activation);
    t.main_in.push_back(std::move(in));
    t.main_pre.push_back(std::move(pre));
  }
  t.f = std::move(h);
  t.y = mainbranch::compose_latent(t.f, t.p_final);
}

void run_synthesis(const Model& model, const Tensor& y_tilde, ForwardTape& t) {
  const auto& c = model.config;
  const auto& p = model.params;
  const int s = c.num_stages();
  const auto opts = c.aux_options();
  if (c.aux_synthesis) {
    t.iwls.resize(s);
    t.aux_syn.assign(s + 1, Tensor());
    t.aux_syn[s] = y_tilde;
    for (int k = s - 1; k >= 0; --k) {
      t.aux_syn[k] =
          auxt::iwls_forward(t.aux_syn[k + 1], p.auxt.stages[k], opts, &t.iwls[k]);
    }
    t.x_aux = t.aux_syn[0];
  }
  Tensor h = y_tilde;
  for (int j = 0; j < s; ++j) {
    const auto& st = p.main.synthesis_stages[j];
    Tensor in = j > 0 && fuse_synthesis(c) ? concat_channels(h, t.aux_syn[s - j])
                                           : std::move(h);
    Tensor pre = mainbranch::conv_up(in, st);
    h = mainbranch::activate(pre, st.activation);
    t.syn_in.push_back(std::move(in));
    t.syn_pre.push_back(std::move(pre));
  }
  t.x_main = std::move(h);
  t.x_hat = c.aux_synthesis ? t.x_main + t.x_aux : t.x_main;
}

}  // namespace

const char* to_string(ParamGroup g) {
  switch (g) {
    case ParamGroup::kScale: return "scale";
    case ParamGroup::kProjection: return "projection";
    case ParamGroup::kMix: return "mix";
    case ParamGroup::kKernel: return "kernel";
    case ParamGroup::kBias: return "bias";
    case ParamGroup::kEntropyMean: return "entropy_mu";
    case ParamGroup::kEntropyLogScale: return "entropy_log_sigma";
  }
  return "?";
}

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Model m;
  m.config = config;
  if (config.aux_enabled()) {
    m.params.auxt = auxt::init_auxt(derive_seed(seed, 0x415558), config.source_channels,
                                    config.aux_channels, config.aux_options());
    if (config.orth_init_noise > 0.0) {
      Rng rng(derive_seed(seed, 0x4e4f49));
      for (auto& st : m.params.auxt.stages) {
        for (double& v : st.olp.values()) v += config.orth_init_noise * rng.normal();
        for (double& v : st.olp_synthesis.values()) {
          v += config.orth_init_noise * rng.normal();
        }
      }
    }
  } else {
    m.params.auxt.source_channels = config.source_channels;
    m.params.auxt.options = config.aux_options();
  }
  m.params.main = mainbranch::init_main(derive_seed(seed, 0x4d4149), config.channel_plan());
  m.params.entropy = entropy::GaussianModel::standard(config.latent_channels());
  return m;
}

ModelParams zeros_like(const ModelParams& params) {
  ModelParams z = params;
  for (auto& st : z.auxt.stages) {
    zero(st.s_ll);
    zero(st.s_lh);
    zero(st.s_hl);
    zero(st.s_hh);
    zero(st.olp);
    zero(st.olp_synthesis);
    zero(st.mix);
  }
  for (auto* stages : {&z.main.analysis_stages, &z.main.synthesis_stages}) {
    for (auto& st : *stages) {
      zero(st.kernel);
      zero(st.bias);
    }
  }
  zero(z.entropy.mu);
  zero(z.entropy.log_sigma);
  return z;
}

void visit_params(const ModelConfig& config, ModelParams& params,
                  const ParamVisitor& visit) {
  visit_impl(config, params,
             [&](const std::string& name, ParamGroup g, bool trainable,
                 std::span<double> v) { visit(name, g, trainable, v); });
}

void visit_params(const ModelConfig& config, const ModelParams& params,
                  const ConstParamVisitor& visit) {
  visit_impl(config, params,
             [&](const std::string& name, ParamGroup g, bool trainable,
                 std::span<const double> v) { visit(name, g, trainable, v); });
}

std::size_t param_count(const ModelConfig& config, const ModelParams& params) {
  std::size_t n = 0;
  visit_params(config, params,
               [&](std::string_view, ParamGroup, bool,
                   std::span<const double> v) { n += v.size(); });
  return n;
}

std::vector<double> flatten(const ModelConfig& config,
                            const ModelParams& params) {
  std::vector<double> flat;
  flat.reserve(param_count(config, params));
  visit_params(config, params,
               [&](std::string_view, ParamGroup, bool,
                   std::span<const double> v) {
                 flat.insert(flat.end(), v.begin(), v.end());
               });
  return flat;
}

void unflatten(const ModelConfig& config, std::span<const double> flat,
               ModelParams& params) {
  const std::size_t n = param_count(config, params);
  if (flat.size() != n) {
    fail(ErrorKind::kDimension, "flat parameter vector has " +
                                    std::to_string(flat.size()) +
                                    " entries, model needs " +
                                    std::to_string(n));
  }
  std::size_t at = 0;
  visit_params(config, params,
               [&](std::string_view, ParamGroup, bool, std::span<double> v) {
                 std::copy_n(flat.begin() + at, v.size(), v.begin());
                 at += v.size();
               });
}

std::vector<ParamSlice> param_index(const ModelConfig& config,
                                    const ModelParams& params) {
  std::vector<ParamSlice> out;
  std::size_t at = 0;
  visit_params(config, params,
               [&](std::string_view name, ParamGroup g, bool trainable,
                   std::span<const double> v) {
                 out.push_back({std::string(name), g, trainable, at, v.size()});
                 at += v.size();
               });
  return out;
}

AnalysisOutput analyze(const Model& model, const Tensor& x) {
  check_input(model, x);
  ForwardTape t;
  run_analysis(model, x, t);
  return {std::move(t.y), std::move(t.f), std::move(t.p_final)};
}

Tensor synthesize(const Model& model, const Tensor& y_hat) {
  if (y_hat.channels() != model.config.latent_channels()) {
    fail(ErrorKind::kDimension, "latent has " + y_hat.shape_string() +
                                    ", model expects " +
                                    std::to_string(model.config.latent_channels()) +
                                    " channels");
  }
  ForwardTape t;
  run_synthesis(model, y_hat, t);
  return std::move(t.x_hat);
}

ForwardTape forward(const Model& model, const Tensor& x, QuantMode mode,
                    Rng* rng) {
  check_input(model, x);
  ForwardTape t;
  run_analysis(model, x, t);
  switch (mode) {
    case QuantMode::kNoise:
      if (!rng) fail(ErrorKind::kUsage, "noise quantisation needs an Rng");
      t.y_tilde = entropy::noise_relax(t.y, *rng);
      break;
    case QuantMode::kRound:
      t.y_tilde = t.y;
      for (double& v : t.y_tilde.values()) v = entropy::round_half_away(v);
      break;
    case QuantMode::kNone:
      t.y_tilde = t.y;
      break;
  }
  run_synthesis(model, t.y_tilde, t);
  return t;
}

PatchMetrics patch_metrics(const Model& model, const Tensor& x,
                           const ForwardTape& tape, QuantMode mode) {
  PatchMetrics m;
  m.bits = entropy::rate_bits(tape.y_tilde, model.params.entropy,
                              mode == QuantMode::kRound
                                  ? entropy::RateMode::kDiscrete
                                  : entropy::RateMode::kRelaxed);
  double se = 0.0;
  auto a = tape.x_hat.values();
  auto b = x.values();
  for (std::size_t i = 0; i < a.size(); ++i) se += (a[i] - b[i]) * (a[i] - b[i]);
  m.mse = se / static_cast<double>(a.size());
  m.pixels = static_cast<double>(x.height()) * x.width();
  return m;
}

void backward(const Model& model, const Tensor& x, const ForwardTape& tape,
              double rate_scale, double dist_scale, ModelParams& grad) {
  const auto& c = model.config;
  const auto& p = model.params;
  const int s = c.num_stages();
  const auto opts = c.aux_options();

  Tensor g_xhat = tape.x_hat - x;
  g_xhat *= 2.0 * dist_scale;

  // Main synthesis, outermost stage first.
  std::vector<Tensor> g_aux_syn(s + 1);
  Tensor g = g_xhat;
  for (int j = s - 1; j >= 0; --j) {
    const auto& st = p.main.synthesis_stages[j];
    if (st.activation == Activation::kRelu) {
      g = mainbranch::relu_backward(tape.syn_pre[j], std::move(g));
    }
    Tensor g_in = mainbranch::conv_up_backward(tape.syn_in[j], g, st,
                                               grad.main.synthesis_stages[j]);
    if (j > 0 && fuse_synthesis(c)) {
      const int hc = g_in.channels() - tape.aux_syn[s - j].channels();
      g_aux_syn[s - j] = slice_channels(g_in, hc, g_in.channels() - hc);
      g = slice_channels(g_in, 0, hc);
    } else {
      g = std::move(g_in);
    }
  }
  Tensor g_y = std::move(g);

  if (c.aux_synthesis) {
    Tensor ga = g_xhat;
    for (int k = 0; k < s; ++k) {
      Tensor up = auxt::iwls_backward(ga, p.auxt.stages[k], opts, tape.iwls[k],
                                      grad.auxt.stages[k]);
      if (!g_aux_syn[k + 1].empty()) up += g_aux_syn[k + 1];
      ga = std::move(up);
    }
    g_y += ga;
  }

  entropy::RateGradient rg;
  entropy::rate_bits_backward(tape.y_tilde, p.entropy, rate_scale, &g_y, rg);
  for (std::size_t i = 0; i < rg.mu.size(); ++i) {
    grad.entropy.mu[i] += rg.mu[i];
    grad.entropy.log_sigma[i] += rg.log_sigma[i];
  }

  // Main analysis, deepest stage first.
  std::vector<Tensor> g_aux_out(s);
  g = g_y;
  for (int k = s - 1; k >= 0; --k) {
    const auto& st = p.main.analysis_stages[k];
    if (st.activation == Activation::kRelu) {
      g = mainbranch::relu_backward(tape.main_pre[k], std::move(g));
    }
    Tensor g_in = mainbranch::conv_down_backward(tape.main_in[k], g, st,
                                                 grad.main.analysis_stages[k]);
    if (k == 0) break;
    if (fuse_analysis(c)) {
      const int hc = g_in.channels() - tape.aux_out[k - 1].channels();
      g_aux_out[k - 1] = slice_channels(g_in, hc, g_in.channels() - hc);
      g = slice_channels(g_in, 0, hc);
    } else {
      g = std::move(g_in);
    }
  }

  if (c.aux_analysis) {
    Tensor ga = g_y;
    for (int k = s - 1; k >= 0; --k) {
      if (c.aux_relu) ga = mainbranch::relu_backward(tape.aux_pre[k], std::move(ga));
      Tensor down = auxt::wls_backward(ga, p.auxt.stages[k], opts, tape.wls[k],
                                       grad.auxt.stages[k]);
      if (k == 0) break;
      if (!g_aux_out[k - 1].empty()) down += g_aux_out[k - 1];
      ga = std::move(down);
    }
  }
}

}  // namespace auxcodec
