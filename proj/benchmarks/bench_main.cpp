#include <benchmark/benchmark.h>

#include "auxcodec/auxt.hpp"
#include "auxcodec/entropy.hpp"
#include "auxcodec/mainbranch.hpp"
#include "auxcodec/model.hpp"
#include "auxcodec/random.hpp"
#include "auxcodec/train.hpp"
#include "auxcodec/wavelet.hpp"

using namespace auxcodec;

namespace {

Tensor noise(int h, int w, int c, std::uint64_t seed = 1) {
  Rng rng(seed);
  Tensor t(h, w, c);
  for (double& v : t.values()) v = rng.uniform();
  return t;
}

void BM_Dwt(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const Tensor x = noise(n, n, 3);
  const auto basis = state.range(1) ? wavelet::WaveletBasis::db4()
                                    : wavelet::WaveletBasis::haar();
  for (auto _ : state) {
    auto s = wavelet::dwt2d(x, basis);
    benchmark::DoNotOptimize(wavelet::idwt2d(s, basis));
  }
  state.SetItemsProcessed(state.iterations() * x.size());
}
BENCHMARK(BM_Dwt)->Args({64, 0})->Args({256, 0})->Args({64, 1})->Args({256, 1});

void BM_ConvDown(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  mainbranch::ChannelPlan plan;
  plan.source_channels = c;
  plan.main_channels = {c};
  plan.aux_channels = {c};
  plan.aux_in_analysis = plan.aux_in_synthesis = false;
  const auto mp = mainbranch::init_main(1, plan);
  const Tensor x = noise(n, n, c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mainbranch::conv_down(x, mp.analysis_stages[0]));
  }
}
BENCHMARK(BM_ConvDown)->Args({32, 16})->Args({64, 32});

void BM_ConvUp(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  const int c = static_cast<int>(state.range(1));
  mainbranch::ChannelPlan plan;
  plan.source_channels = c;
  plan.main_channels = {c};
  plan.aux_channels = {c};
  plan.aux_in_analysis = plan.aux_in_synthesis = false;
  const auto mp = mainbranch::init_main(1, plan);
  const Tensor x = noise(n, n, c);
  for (auto _ : state) {
    benchmark::DoNotOptimize(mainbranch::conv_up(x, mp.synthesis_stages[0]));
  }
}
BENCHMARK(BM_ConvUp)->Args({16, 16})->Args({32, 32});

void BM_RangeCoder(benchmark::State& state) {
  Rng rng(3);
  entropy::GaussianModel m;
  for (int c = 0; c < 32; ++c) {
    m.mu.push_back(rng.uniform(-2, 2));
    m.log_sigma.push_back(rng.uniform(-1, 3));
  }
  entropy::LatentCode code;
  code.shape = {16, 16, 32};
  for (int i = 0; i < 16 * 16; ++i) {
    for (int c = 0; c < 32; ++c) {
      code.symbols.push_back(static_cast<std::int32_t>(
          entropy::round_half_away(m.mu[c] + m.sigma(c) * rng.normal())));
    }
  }
  for (auto _ : state) {
    const auto bytes = entropy::encode_latent(code, m);
    benchmark::DoNotOptimize(entropy::decode_latent(bytes, m, code.shape));
  }
  state.SetItemsProcessed(state.iterations() * code.symbols.size());
}
BENCHMARK(BM_RangeCoder);

void BM_TrainStep(benchmark::State& state) {
  TrainConfig cfg;
  cfg.patch = 32;
  cfg.batch = 4;
  cfg.model.aux_analysis = cfg.model.aux_synthesis = state.range(0) != 0;
  const Model m = init_model(cfg.model, 0);
  std::vector<Tensor> batch;
  for (int b = 0; b < cfg.batch; ++b) batch.push_back(noise(32, 32, 3, b));
  std::uint64_t seed = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(backward_flat(m, batch, cfg, seed++));
  }
}
BENCHMARK(BM_TrainStep)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
