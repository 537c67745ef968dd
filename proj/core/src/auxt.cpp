#include "auxcodec/auxt.hpp"

#include <algorithm>
#include <cmath>

#include "auxcodec/error.hpp"
#include "auxcodec/random.hpp"

namespace auxcodec::auxt {
namespace {

const std::vector<double>* scale_group(const WLSParams& p, int g) {
  switch (g) {
    case 0: return &p.s_ll;
    case 1: return &p.s_lh;
    case 2: return &p.s_hl;
    default: return &p.s_hh;
  }
}

std::vector<double>* scale_group(WLSParams& p, int g) {
  return const_cast<std::vector<double>*>(
      scale_group(static_cast<const WLSParams&>(p), g));
}

// Per-channel multipliers for a LL|LH|HL|HH concat.
std::vector<double> channel_factors(const WLSParams& params, bool divide) {
  const int c = params.in_channels();
  std::vector<double> f(4 * static_cast<std::size_t>(c));
  for (int g = 0; g < 4; ++g) {
    const auto& s = *scale_group(params, g);
    for (int j = 0; j < c; ++j) {
      f[g * c + j] = std::exp(divide ? -s[j] : s[j]);
    }
  }
  return f;
}

Tensor multiply_channels(Tensor t, const std::vector<double>& factors) {
  const int c = t.channels();
  auto v = t.values();
  for (std::size_t i = 0; i < v.size(); ++i) v[i] *= factors[i % c];
  return t;
}

Tensor avg_pool(const Tensor& p) {
  const int h2 = p.height() / 2;
  const int w2 = p.width() / 2;
  const int c = p.channels();
  Tensor out(h2, w2, c);
  for (int i = 0; i < h2; ++i) {
    for (int j = 0; j < w2; ++j) {
      double* o = out.pixel(i, j);
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          const double* s = p.pixel(2 * i + dy, 2 * j + dx);
          for (int ch = 0; ch < c; ++ch) o[ch] += 0.25 * s[ch];
        }
      }
    }
  }
  return out;
}

// Spreads each coarse sample over its 2x2 block scaled by `weight`.
Tensor upsample_blocks(const Tensor& q, double weight) {
  const int c = q.channels();
  Tensor out(2 * q.height(), 2 * q.width(), c);
  for (int i = 0; i < q.height(); ++i) {
    for (int j = 0; j < q.width(); ++j) {
      const double* s = q.pixel(i, j);
      for (int dy = 0; dy < 2; ++dy) {
        for (int dx = 0; dx < 2; ++dx) {
          double* o = out.pixel(2 * i + dy, 2 * j + dx);
          for (int ch = 0; ch < c; ++ch) o[ch] = weight * s[ch];
        }
      }
    }
  }
  return out;
}

// Sum over each 2x2 block (adjoint of upsample_blocks with weight 1).
Tensor block_sum(const Tensor& g) {
  Tensor out = avg_pool(g);
  out *= 4.0;
  return out;
}

// Block offsets (0,0), (0,1), (1,0), (1,1) become channel groups.
Tensor space_to_depth(const Tensor& p) {
  const int c = p.channels();
  Tensor out(p.height() / 2, p.width() / 2, 4 * c);
  for (int i = 0; i < out.height(); ++i) {
    for (int j = 0; j < out.width(); ++j) {
      double* o = out.pixel(i, j);
      for (int b = 0; b < 4; ++b) {
        std::copy_n(p.pixel(2 * i + b / 2, 2 * j + b % 2), c, o + b * c);
      }
    }
  }
  return out;
}

Tensor depth_to_space(const Tensor& q) {
  const int c = q.channels() / 4;
  Tensor out(2 * q.height(), 2 * q.width(), c);
  for (int i = 0; i < q.height(); ++i) {
    for (int j = 0; j < q.width(); ++j) {
      const double* s = q.pixel(i, j);
      for (int b = 0; b < 4; ++b) {
        std::copy_n(s + b * c, c, out.pixel(2 * i + b / 2, 2 * j + b % 2));
      }
    }
  }
  return out;
}

void require_even(const Tensor& p) {
  if (p.height() % 2 != 0 || p.width() % 2 != 0 || p.height() == 0 ||
      p.width() == 0) {
    fail(ErrorKind::kDimension,
         "WLS input needs even height and width, got " + p.shape_string());
  }
}

// Orthonormalises the columns of m in place (modified Gram-Schmidt, two
// passes). Assumes rows >= cols.
void orthonormalize_columns(Matrix& m) {
  for (int pass = 0; pass < 2; ++pass) {
    for (int j = 0; j < m.cols(); ++j) {
      for (int k = 0; k < j; ++k) {
        double dot = 0.0;
        for (int i = 0; i < m.rows(); ++i) dot += m(i, j) * m(i, k);
        for (int i = 0; i < m.rows(); ++i) m(i, j) -= dot * m(i, k);
      }
      double norm = 0.0;
      for (int i = 0; i < m.rows(); ++i) norm += m(i, j) * m(i, j);
      norm = std::sqrt(norm);
      if (norm < 1e-12) fail(ErrorKind::kNumerical, "rank-deficient draw");
      for (int i = 0; i < m.rows(); ++i) m(i, j) /= norm;
    }
  }
}

}  // namespace

std::string to_string(Downsampler d) {
  switch (d) {
    case Downsampler::kWavelet: return "wavelet";
    case Downsampler::kAvgPool: return "avgpool";
    case Downsampler::kStridedConv: return "strided_conv";
  }
  return "wavelet";
}

Downsampler downsampler_from_string(const std::string& s) {
  if (s == "wavelet") return Downsampler::kWavelet;
  if (s == "avgpool") return Downsampler::kAvgPool;
  if (s == "strided_conv") return Downsampler::kStridedConv;
  fail(ErrorKind::kUsage, "unknown downsampler '" + s +
                              "' (wavelet, avgpool, strided_conv)");
}

std::vector<const Matrix*> AuxTParams::projections() const {
  std::vector<const Matrix*> out;
  for (const auto& st : stages) {
    out.push_back(&st.olp);
    if (!options.tied_olp && !st.olp_synthesis.empty()) {
      out.push_back(&st.olp_synthesis);
    }
  }
  return out;
}

Tensor project(const Tensor& p, const Matrix& w) {
  if (p.channels() != w.rows()) {
    fail(ErrorKind::kDimension, "projection expects " +
                                    std::to_string(w.rows()) +
                                    " channels, got " + p.shape_string());
  }
  const int m = w.rows();
  const int d = w.cols();
  Tensor out(p.height(), p.width(), d);
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      const double* in = p.pixel(y, x);
      double* o = out.pixel(y, x);
      for (int i = 0; i < m; ++i) {
        const double v = in[i];
        const double* row = w.row(i);
        for (int j = 0; j < d; ++j) o[j] += v * row[j];
      }
    }
  }
  return out;
}

Tensor project_transpose(const Tensor& q, const Matrix& w) {
  if (q.channels() != w.cols()) {
    fail(ErrorKind::kDimension, "transposed projection expects " +
                                    std::to_string(w.cols()) +
                                    " channels, got " + q.shape_string());
  }
  const int m = w.rows();
  const int d = w.cols();
  Tensor out(q.height(), q.width(), m);
  for (int y = 0; y < q.height(); ++y) {
    for (int x = 0; x < q.width(); ++x) {
      const double* in = q.pixel(y, x);
      double* o = out.pixel(y, x);
      for (int i = 0; i < m; ++i) {
        const double* row = w.row(i);
        double s = 0.0;
        for (int j = 0; j < d; ++j) s += row[j] * in[j];
        o[i] = s;
      }
    }
  }
  return out;
}

void accumulate_projection_grad(const Tensor& p, const Tensor& grad_out,
                                Matrix& grad_w) {
  const int m = grad_w.rows();
  const int d = grad_w.cols();
  for (int y = 0; y < p.height(); ++y) {
    for (int x = 0; x < p.width(); ++x) {
      const double* in = p.pixel(y, x);
      const double* g = grad_out.pixel(y, x);
      for (int i = 0; i < m; ++i) {
        const double v = in[i];
        double* row = grad_w.row(i);
        for (int j = 0; j < d; ++j) row[j] += v * g[j];
      }
    }
  }
}

Tensor scale_subbands(const Tensor& concat, const WLSParams& params,
                      bool divide) {
  if (concat.channels() != 4 * params.in_channels()) {
    fail(ErrorKind::kDimension, "subband scaling expects " +
                                    std::to_string(4 * params.in_channels()) +
                                    " channels, got " + concat.shape_string());
  }
  return multiply_channels(concat, channel_factors(params, divide));
}

Tensor wls_forward(const Tensor& p, const WLSParams& params,
                   const AuxTOptions& options, WLSTape* tape) {
  if (p.channels() != params.in_channels()) {
    fail(ErrorKind::kDimension, "WLS stage expects " +
                                    std::to_string(params.in_channels()) +
                                    " channels, got " + p.shape_string());
  }
  require_even(p);
  Tensor split;
  Tensor mixed;
  Tensor projected;
  switch (options.downsampler) {
    case Downsampler::kWavelet:
      split = wavelet::concat_subbands(wavelet::dwt2d(p, options.basis));
      projected = options.scaling_active() ? scale_subbands(split, params, false)
                                           : split;
      break;
    case Downsampler::kAvgPool:
      split = avg_pool(p);
      projected = split;
      break;
    case Downsampler::kStridedConv:
      split = space_to_depth(p);
      mixed = project(split, params.mix);
      projected = mixed;
      break;
  }
  Tensor out = project(projected, params.olp);
  if (tape) {
    tape->input = p;
    tape->split = std::move(split);
    tape->mixed = std::move(mixed);
    tape->projected = std::move(projected);
  }
  return out;
}

Tensor wls_backward(const Tensor& grad_out, const WLSParams& params,
                    const AuxTOptions& options, const WLSTape& tape,
                    WLSParams& grad) {
  accumulate_projection_grad(tape.projected, grad_out, grad.olp);
  Tensor g_proj = project_transpose(grad_out, params.olp);
  switch (options.downsampler) {
    case Downsampler::kWavelet: {
      Tensor g_split = std::move(g_proj);
      if (options.scaling_active()) {
        const int c = params.in_channels();
        const int cc = 4 * c;
        std::vector<double> gs(cc, 0.0);
        auto gv = g_split.values();
        auto pv = tape.projected.values();
        for (std::size_t i = 0; i < gv.size(); ++i) gs[i % cc] += gv[i] * pv[i];
        for (int g = 0; g < 4; ++g) {
          auto& dst = *scale_group(grad, g);
          for (int j = 0; j < c; ++j) dst[j] += gs[g * c + j];
        }
        g_split = multiply_channels(std::move(g_split),
                                    channel_factors(params, false));
      }
      return wavelet::dwt2d_adjoint(wavelet::split_subbands(g_split),
                                    options.basis);
    }
    case Downsampler::kAvgPool:
      return upsample_blocks(g_proj, 0.25);
    case Downsampler::kStridedConv: {
      accumulate_projection_grad(tape.split, g_proj, grad.mix);
      return depth_to_space(project_transpose(g_proj, params.mix));
    }
  }
  return {};
}

Tensor iwls_forward(const Tensor& q, const WLSParams& params,
                    const AuxTOptions& options, IWLSTape* tape) {
  const Matrix& w = params.synthesis_projection(options.tied_olp);
  Tensor unprojected = project_transpose(q, w);
  Tensor unmixed;
  Tensor unscaled;
  Tensor out;
  switch (options.downsampler) {
    case Downsampler::kWavelet:
      unscaled = options.scaling_active()
                     ? scale_subbands(unprojected, params, true)
                     : unprojected;
      out = wavelet::idwt2d(wavelet::split_subbands(unscaled), options.basis);
      break;
    case Downsampler::kAvgPool:
      out = upsample_blocks(unprojected, 1.0);
      break;
    case Downsampler::kStridedConv:
      unmixed = project_transpose(unprojected, params.mix);
      out = depth_to_space(unmixed);
      break;
  }
  if (tape) {
    tape->input = q;
    tape->unprojected = std::move(unprojected);
    tape->unmixed = std::move(unmixed);
    tape->unscaled = std::move(unscaled);
  }
  return out;
}

Tensor iwls_backward(const Tensor& grad_out, const WLSParams& params,
                     const AuxTOptions& options, const IWLSTape& tape,
                     WLSParams& grad) {
  const bool tied = options.tied_olp;
  const Matrix& w = params.synthesis_projection(tied);
  Matrix& gw = tied ? grad.olp : grad.olp_synthesis;
  Tensor g_unprojected;
  switch (options.downsampler) {
    case Downsampler::kWavelet: {
      Tensor g_unscaled = wavelet::concat_subbands(
          wavelet::idwt2d_adjoint(grad_out, options.basis));
      if (options.scaling_active()) {
        const int c = params.in_channels();
        const int cc = 4 * c;
        std::vector<double> gs(cc, 0.0);
        auto gv = g_unscaled.values();
        auto uv = tape.unscaled.values();
        for (std::size_t i = 0; i < gv.size(); ++i) gs[i % cc] -= gv[i] * uv[i];
        for (int g = 0; g < 4; ++g) {
          auto& dst = *scale_group(grad, g);
          for (int j = 0; j < c; ++j) dst[j] += gs[g * c + j];
        }
        g_unprojected = multiply_channels(std::move(g_unscaled),
                                          channel_factors(params, true));
      } else {
        g_unprojected = std::move(g_unscaled);
      }
      break;
    }
    case Downsampler::kAvgPool:
      g_unprojected = block_sum(grad_out);
      break;
    case Downsampler::kStridedConv: {
      Tensor g_unmixed = space_to_depth(grad_out);
      accumulate_projection_grad(g_unmixed, tape.unprojected, grad.mix);
      g_unprojected = project(g_unmixed, params.mix);
      break;
    }
  }
  accumulate_projection_grad(g_unprojected, tape.input, gw);
  return project(g_unprojected, w);
}

AnalysisResult auxt_analysis(const Tensor& x, const AuxTParams& params) {
  const int s = params.num_stages();
  const int multiple = 1 << s;
  if (x.height() % multiple != 0 || x.width() % multiple != 0) {
    fail(ErrorKind::kDimension, "input " + x.shape_string() +
                                    " not divisible by " +
                                    std::to_string(multiple));
  }
  AnalysisResult result;
  Tensor cur = x;
  for (const auto& stage : params.stages) {
    cur = wls_forward(cur, stage, params.options);
    result.stage_outputs.push_back(cur);
  }
  result.final = std::move(cur);
  return result;
}

std::vector<Tensor> auxt_synthesis_stages(const Tensor& y_aux,
                                          const AuxTParams& params) {
  const int s = params.num_stages();
  std::vector<Tensor> out(s + 1);
  out[s] = y_aux;
  for (int k = s - 1; k >= 0; --k) {
    out[k] = iwls_forward(out[k + 1], params.stages[k], params.options);
  }
  return out;
}

Tensor auxt_synthesis(const Tensor& y_aux, const AuxTParams& params) {
  return auxt_synthesis_stages(y_aux, params).front();
}

double orth_penalty(const Matrix& w) {
  Matrix g = gram(w);
  for (int i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return frobenius_squared(g);
}

double column_orth_penalty(const Matrix& w) {
  Matrix g = outer_gram(w);
  for (int i = 0; i < g.rows(); ++i) g(i, i) -= 1.0;
  return frobenius_squared(g);
}

Matrix orth_penalty_gradient(const Matrix& w) {
  Matrix e = gram(w);
  for (int i = 0; i < e.rows(); ++i) e(i, i) -= 1.0;
  return 4.0 * (w * e);
}

Matrix random_orthonormal(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = rng.normal();
  if (rows >= cols) {
    orthonormalize_columns(m);
    return m;
  }
  Matrix t = m.transposed();
  orthonormalize_columns(t);
  return t.transposed();
}

AuxTParams init_auxt(std::uint64_t seed, int source_channels,
                     const std::vector<int>& channel_plan,
                     const AuxTOptions& options) {
  if (source_channels < 1) {
    fail(ErrorKind::kUsage, "source channels must be >= 1");
  }
  AuxTParams p;
  p.source_channels = source_channels;
  p.channels = channel_plan;
  p.options = options;
  const bool scaled = options.scaling_active();
  for (std::size_t k = 0; k < channel_plan.size(); ++k) {
    const int c = p.stage_in_channels(static_cast<int>(k));
    const int d = channel_plan[k];
    if (d < 1) fail(ErrorKind::kUsage, "stage channels must be >= 1");
    WLSParams st;
    st.s_ll.assign(c, scaled ? 1.0 : 0.0);
    st.s_lh.assign(c, scaled ? 0.5 : 0.0);
    st.s_hl.assign(c, scaled ? 0.5 : 0.0);
    st.s_hh.assign(c, 0.0);
    const int projected =
        options.downsampler == Downsampler::kAvgPool ? c : 4 * c;
    st.olp = random_orthonormal(projected, d, derive_seed(seed, 0x4f4c50, k));
    if (!options.tied_olp) st.olp_synthesis = st.olp;
    if (options.downsampler == Downsampler::kStridedConv) {
      Rng rng(derive_seed(seed, 0x4d4958, k));
      const double bound = 1.0 / std::sqrt(static_cast<double>(4 * c));
      st.mix = Matrix(4 * c, 4 * c);
      for (double& v : st.mix.values()) v = rng.uniform(-bound, bound);
    }
    p.stages.push_back(std::move(st));
  }
  return p;
}

void clamp_scales(AuxTParams& params) {
  for (auto& st : params.stages) {
    for (int g = 0; g < 4; ++g) {
      for (double& v : *scale_group(st, g)) {
        v = std::clamp(v, -kMaxLogScale, kMaxLogScale);
      }
    }
  }
}

}  // namespace auxcodec::auxt
