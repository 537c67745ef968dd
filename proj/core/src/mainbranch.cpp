#include "auxcodec/mainbranch.hpp"

#include <cmath>

#include "auxcodec/error.hpp"
#include "auxcodec/image.hpp"
#include "auxcodec/random.hpp"

namespace auxcodec::mainbranch {
namespace {

ConvStage make_stage(Rng& rng, int k, int in, int out, Activation act) {
  ConvStage s;
  s.kernel_size = k;
  s.in_channels = in;
  s.out_channels = out;
  s.activation = act;
  s.kernel.resize(static_cast<std::size_t>(k) * k * in * out);
  s.bias.assign(out, 0.0);
  const double bound = 1.0 / std::sqrt(static_cast<double>(k * k * in));
  for (double& v : s.kernel) v = rng.uniform(-bound, bound);
  return s;
}

void check_input(const Tensor& in, const ConvStage& stage, const char* what) {
  if (in.channels() != stage.in_channels) {
    fail(ErrorKind::kDimension, std::string(what) + " expects " +
                                    std::to_string(stage.in_channels) +
                                    " channels, got " + in.shape_string());
  }
}

}  // namespace

std::string to_string(Activation a) {
  return a == Activation::kRelu ? "relu" : "none";
}

std::string to_string(Fusion f) {
  return f == Fusion::kConcatAdd ? "concat_add" : "none";
}

Activation activation_from_string(const std::string& s) {
  if (s == "none") return Activation::kNone;
  if (s == "relu") return Activation::kRelu;
  fail(ErrorKind::kUsage, "unknown activation '" + s + "' (none, relu)");
}

Fusion fusion_from_string(const std::string& s) {
  if (s == "concat_add") return Fusion::kConcatAdd;
  if (s == "none") return Fusion::kNone;
  fail(ErrorKind::kUsage, "unknown fusion '" + s + "' (concat_add, none)");
}

MainParams init_main(std::uint64_t seed, const ChannelPlan& plan) {
  const int n = static_cast<int>(plan.main_channels.size());
  if (n == 0) fail(ErrorKind::kUsage, "main branch needs at least one stage");
  if (plan.kernel_size < 1 || plan.kernel_size % 2 == 0) {
    fail(ErrorKind::kUsage, "kernel_size must be odd and positive");
  }
  const bool concat = plan.fusion == Fusion::kConcatAdd;
  MainParams mp;
  mp.fusion = plan.fusion;
  for (int k = 0; k < n; ++k) {
    int in = k == 0 ? plan.source_channels : plan.main_channels[k - 1];
    if (k > 0 && concat && plan.aux_in_analysis) in += plan.aux_channels[k - 1];
    Rng rng(derive_seed(seed, 0x4d41, k));
    mp.analysis_stages.push_back(
        make_stage(rng, plan.kernel_size, in, plan.main_channels[k],
                   k + 1 < n ? plan.activation : Activation::kNone));
  }
  for (int j = 0; j < n; ++j) {
    // Stage j runs at the resolution of analysis stage n-1-j's output.
    const int src = n - 1 - j;
    int in = plan.main_channels[src];
    if (j > 0 && concat && plan.aux_in_synthesis) in += plan.aux_channels[src];
    const int out = src == 0 ? plan.source_channels : plan.main_channels[src - 1];
    Rng rng(derive_seed(seed, 0x4d53, j));
    mp.synthesis_stages.push_back(
        make_stage(rng, plan.kernel_size, in, out,
                   j + 1 < n ? plan.activation : Activation::kNone));
  }
  return mp;
}

Tensor conv_down(const Tensor& in, const ConvStage& stage) {
  check_input(in, stage, "conv_down");
  if (in.height() % 2 != 0 || in.width() % 2 != 0) {
    fail(ErrorKind::kDimension,
         "conv_down needs even spatial dims, got " + in.shape_string());
  }
  const int k = stage.kernel_size;
  const int pad = (k - 1) / 2;
  const int cin = stage.in_channels;
  const int cout = stage.out_channels;
  Tensor out(in.height() / 2, in.width() / 2, cout);
  for (int i = 0; i < out.height(); ++i) {
    for (int j = 0; j < out.width(); ++j) {
      double* __restrict o = out.pixel(i, j);
      for (int co = 0; co < cout; ++co) o[co] = stage.bias[co];
      for (int ky = 0; ky < k; ++ky) {
        const int y = image::reflect_index(2 * i + ky - pad, in.height());
        for (int kx = 0; kx < k; ++kx) {
          const int x = image::reflect_index(2 * j + kx - pad, in.width());
          const double* src = in.pixel(y, x);
          const double* wk =
              stage.kernel.data() +
              (static_cast<std::size_t>(ky) * k + kx) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const double v = src[ci];
            const double* __restrict row = wk + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) o[co] += v * row[co];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv_down_backward(const Tensor& in, const Tensor& grad_out,
                          const ConvStage& stage, ConvStage& grad) {
  const int k = stage.kernel_size;
  const int pad = (k - 1) / 2;
  const int cin = stage.in_channels;
  const int cout = stage.out_channels;
  Tensor gin(in.height(), in.width(), cin);
  for (int i = 0; i < grad_out.height(); ++i) {
    for (int j = 0; j < grad_out.width(); ++j) {
      const double* __restrict g = grad_out.pixel(i, j);
      for (int co = 0; co < cout; ++co) grad.bias[co] += g[co];
      for (int ky = 0; ky < k; ++ky) {
        const int y = image::reflect_index(2 * i + ky - pad, in.height());
        for (int kx = 0; kx < k; ++kx) {
          const int x = image::reflect_index(2 * j + kx - pad, in.width());
          const double* src = in.pixel(y, x);
          double* gsrc = gin.pixel(y, x);
          const std::size_t off =
              (static_cast<std::size_t>(ky) * k + kx) * cin * cout;
          const double* wk = stage.kernel.data() + off;
          double* gk = grad.kernel.data() + off;
          for (int ci = 0; ci < cin; ++ci) {
            const double v = src[ci];
            const double* __restrict row = wk + static_cast<std::size_t>(ci) * cout;
            double* __restrict grow = gk + static_cast<std::size_t>(ci) * cout;
            double s = 0.0;
            for (int co = 0; co < cout; ++co) {
              grow[co] += v * g[co];
              s += row[co] * g[co];
            }
            gsrc[ci] += s;
          }
        }
      }
    }
  }
  return gin;
}

Tensor conv_up(const Tensor& in, const ConvStage& stage) {
  check_input(in, stage, "conv_up");
  const int k = stage.kernel_size;
  const int pad = (k - 1) / 2;
  const int cin = stage.in_channels;
  const int cout = stage.out_channels;
  const int oh = 2 * in.height();
  const int ow = 2 * in.width();
  Tensor out(oh, ow, cout);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double* o = out.pixel(y, x);
      for (int co = 0; co < cout; ++co) o[co] = stage.bias[co];
    }
  }
  for (int i = 0; i < in.height(); ++i) {
    for (int j = 0; j < in.width(); ++j) {
      const double* src = in.pixel(i, j);
      for (int ky = 0; ky < k; ++ky) {
        const int y = 2 * i + ky - pad;
        if (y < 0 || y >= oh) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int x = 2 * j + kx - pad;
          if (x < 0 || x >= ow) continue;
          double* __restrict o = out.pixel(y, x);
          const double* wk =
              stage.kernel.data() +
              (static_cast<std::size_t>(ky) * k + kx) * cin * cout;
          for (int ci = 0; ci < cin; ++ci) {
            const double v = src[ci];
            const double* __restrict row = wk + static_cast<std::size_t>(ci) * cout;
            for (int co = 0; co < cout; ++co) o[co] += v * row[co];
          }
        }
      }
    }
  }
  return out;
}

Tensor conv_up_backward(const Tensor& in, const Tensor& grad_out,
                        const ConvStage& stage, ConvStage& grad) {
  const int k = stage.kernel_size;
  const int pad = (k - 1) / 2;
  const int cin = stage.in_channels;
  const int cout = stage.out_channels;
  const int oh = grad_out.height();
  const int ow = grad_out.width();
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      const double* g = grad_out.pixel(y, x);
      for (int co = 0; co < cout; ++co) grad.bias[co] += g[co];
    }
  }
  Tensor gin(in.height(), in.width(), cin);
  for (int i = 0; i < in.height(); ++i) {
    for (int j = 0; j < in.width(); ++j) {
      const double* src = in.pixel(i, j);
      double* gsrc = gin.pixel(i, j);
      for (int ky = 0; ky < k; ++ky) {
        const int y = 2 * i + ky - pad;
        if (y < 0 || y >= oh) continue;
        for (int kx = 0; kx < k; ++kx) {
          const int x = 2 * j + kx - pad;
          if (x < 0 || x >= ow) continue;
          const double* __restrict g = grad_out.pixel(y, x);
          const std::size_t off =
              (static_cast<std::size_t>(ky) * k + kx) * cin * cout;
          const double* wk = stage.kernel.data() + off;
          double* gk = grad.kernel.data() + off;
          for (int ci = 0; ci < cin; ++ci) {
            const double v = src[ci];
            const double* __restrict row = wk + static_cast<std::size_t>(ci) * cout;
            double* __restrict grow = gk + static_cast<std::size_t>(ci) * cout;
            double s = 0.0;
            for (int co = 0; co < cout; ++co) {
              grow[co] += v * g[co];
              s += row[co] * g[co];
            }
            gsrc[ci] += s;
          }
        }
      }
    }
  }
  return gin;
}

Tensor relu(Tensor t) {
  for (double& v : t.values()) v = v > 0.0 ? v : 0.0;
  return t;
}

Tensor relu_backward(const Tensor& pre_activation, Tensor grad) {
  auto g = grad.values();
  auto p = pre_activation.values();
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (p[i] <= 0.0) g[i] = 0.0;
  }
  return grad;
}

Tensor analysis_main(const Tensor& x, const MainParams& mp,
                     const std::vector<Tensor>& aux_outputs) {
  Tensor h = x;
  for (std::size_t k = 0; k < mp.analysis_stages.size(); ++k) {
    const auto& st = mp.analysis_stages[k];
    if (k > 0 && mp.fusion == Fusion::kConcatAdd && !aux_outputs.empty()) {
      h = concat_channels(h, aux_outputs[k - 1]);
    }
    h = activate(conv_down(h, st), st.activation);
  }
  return h;
}

Tensor compose_latent(const Tensor& f, const Tensor& p_final) {
  if (p_final.empty()) return f;
  require_same_shape(f, p_final, "latent composition");
  return f + p_final;
}

Tensor synthesis_main(const Tensor& y_hat, const MainParams& mp,
                      const auxt::AuxTParams* aux) {
  const int n = static_cast<int>(mp.synthesis_stages.size());
  std::vector<Tensor> aux_stages;
  if (aux) aux_stages = auxt::auxt_synthesis_stages(y_hat, *aux);
  Tensor h = y_hat;
  for (int j = 0; j < n; ++j) {
    const auto& st = mp.synthesis_stages[j];
    if (j > 0 && aux && mp.fusion == Fusion::kConcatAdd) {
      h = concat_channels(h, aux_stages[n - j]);
    }
    h = activate(conv_up(h, st), st.activation);
  }
  if (aux) h += aux_stages.front();
  return h;
}

}  // namespace auxcodec::mainbranch
