#include <cmath>

#include "auxcodec/auxt.hpp"
#include "auxcodec/random.hpp"
#include "doctest.h"

using namespace auxcodec;
using namespace auxcodec::auxt;

namespace {

Tensor random_tensor(Rng& rng, int h, int w, int c) {
  Tensor t(h, w, c);
  for (double& v : t.values()) v = rng.normal();
  return t;
}

WLSParams identity_stage(int c) {
  WLSParams p;
  p.s_ll = p.s_lh = p.s_hl = p.s_hh = std::vector<double>(c, 0.0);
  p.olp = Matrix::identity(4 * c);
  return p;
}

// Square orthogonal chain: D_k = 4 D_{k-1}.
AuxTParams square_chain(int stages, int source, std::uint64_t seed) {
  std::vector<int> plan;
  int d = source;
  for (int k = 0; k < stages; ++k) plan.push_back(d *= 4);
  return init_auxt(seed, source, plan);
}

void zero_scales(AuxTParams& p) {
  for (auto& st : p.stages) {
    for (auto* s : {&st.s_ll, &st.s_lh, &st.s_hl, &st.s_hh}) {
      std::fill(s->begin(), s->end(), 0.0);
    }
  }
}

}  // namespace

TEST_CASE("init scales") {
  const auto p = init_auxt(1, 3, {8, 16});
  for (const auto& st : p.stages) {
    for (double v : st.s_ll) CHECK(v == 1.0);
    for (double v : st.s_lh) CHECK(v == 0.5);
    for (double v : st.s_hl) CHECK(v == 0.5);
    for (double v : st.s_hh) CHECK(v == 0.0);
  }
  CHECK(std::exp(p.stages[0].s_ll[0]) == doctest::Approx(2.71828).epsilon(1e-5));
  CHECK(std::exp(p.stages[0].s_lh[0]) == doctest::Approx(1.64872).epsilon(1e-5));

  AuxTOptions off;
  off.scaling = false;
  const auto unscaled = init_auxt(1, 3, {8}, off);
  for (double v : unscaled.stages[0].s_ll) CHECK(v == 0.0);
}

TEST_CASE("init projections are orthonormal and deterministic") {
  for (std::uint64_t seed : {0u, 1u, 77u}) {
    const auto a = init_auxt(seed, 3, {8, 16, 32, 32});
    for (const Matrix* w : a.projections()) CHECK(orth_penalty(*w) <= 1e-12);
    const auto b = init_auxt(seed, 3, {8, 16, 32, 32});
    for (int k = 0; k < a.num_stages(); ++k) {
      CHECK(std::equal(a.stages[k].olp.values().begin(), a.stages[k].olp.values().end(),
                       b.stages[k].olp.values().begin()));
    }
  }
  // overcomplete: more outputs than inputs gives orthonormal rows
  const Matrix w = random_orthonormal(4, 8, 3);
  CHECK(column_orth_penalty(w) <= 1e-12);
}

TEST_CASE("zero scales and identity projection reduce to the DWT") {
  Rng rng(21);
  const Tensor x = random_tensor(rng, 8, 8, 2);
  const AuxTOptions opt;
  const auto stage = identity_stage(2);
  const Tensor q = wls_forward(x, stage, opt);
  const Tensor want = wavelet::concat_subbands(wavelet::dwt2d(x, opt.basis));
  CHECK(relative_error(q, want) < 1e-15);
  CHECK(relative_error(iwls_forward(want, stage, opt), x) < 1e-14);
}

TEST_CASE("constant input energy picks up e^(2 s_ll)") {
  const AuxTOptions opt;
  WLSParams st = identity_stage(1);
  st.s_ll = {1.0};
  st.s_lh = st.s_hl = {0.5};
  st.olp = random_orthonormal(4, 4, 9);
  Tensor x(4, 4, 1, 0.6);
  const Tensor q = wls_forward(x, st, opt);
  CHECK(q.energy() == doctest::Approx(x.energy() * std::exp(2.0)).epsilon(1e-12));
  CHECK(relative_error(iwls_forward(q, st, opt), x) < 1e-12);
}

TEST_CASE("stage round trip with orthogonal projection") {
  Rng rng(22);
  AuxTOptions opt;
  for (Downsampler d : {Downsampler::kWavelet, Downsampler::kAvgPool,
                        Downsampler::kStridedConv}) {
    opt.downsampler = d;
    const auto p = init_auxt(4, 3, {d == Downsampler::kAvgPool ? 3 : 12}, opt);
    const Tensor x = random_tensor(rng, 8, 8, 3);
    const Tensor back = iwls_forward(wls_forward(x, p.stages[0], opt), p.stages[0], opt);
    if (d == Downsampler::kAvgPool) {
      // pooling is lossy; the inverse is nearest upsampling
      CHECK(back.height() == 8);
    } else if (d == Downsampler::kWavelet) {
      CHECK(relative_error(back, x) <= 1e-6);
    } else {
      CHECK(back.same_shape(x));
    }
  }
}

TEST_CASE("analysis chain shapes and energy") {
  const auto p = init_auxt(2, 1, {8, 16, 32, 32});
  Rng rng(23);
  const auto r = auxt_analysis(random_tensor(rng, 32, 32, 1), p);
  CHECK(r.final.height() == 2);
  CHECK(r.final.width() == 2);
  CHECK(r.final.channels() == 32);
  CHECK(r.stage_outputs.size() == 4);

  auto sq = square_chain(3, 1, 5);
  zero_scales(sq);
  const Tensor x = random_tensor(rng, 16, 16, 1);
  const auto fin = auxt_analysis(x, sq).final;
  CHECK(std::sqrt(fin.energy()) == doctest::Approx(std::sqrt(x.energy())).epsilon(1e-6));
}

TEST_CASE("synthesis inverts analysis for a square orthogonal chain") {
  Rng rng(24);
  const auto p = square_chain(2, 2, 6);  // scales at their init values
  const Tensor x = random_tensor(rng, 16, 16, 2);
  const Tensor y = auxt_analysis(x, p).final;
  CHECK(relative_error(auxt_synthesis(y, p), x) <= 1e-5);
  CHECK(auxt_synthesis(Tensor(y.height(), y.width(), y.channels()), p).energy() == 0.0);

  const auto stages = auxt_synthesis_stages(y, p);
  REQUIRE(stages.size() == 3);
  CHECK(stages[2].storage() == y.storage());
  CHECK(relative_error(stages[0], x) <= 1e-5);
}

TEST_CASE("orthogonality penalties") {
  CHECK(orth_penalty(Matrix::identity(5)) == 0.0);
  Matrix two = Matrix::identity(6);
  for (double& v : two.values()) v *= 2.0;
  CHECK(orth_penalty(two) == doctest::Approx(9.0 * 6));

  Matrix w(3, 2);
  w(0, 0) = 1.0;
  w(1, 1) = 1.0;
  CHECK(orth_penalty(w) == 0.0);
  CHECK(column_orth_penalty(w) == doctest::Approx(1.0));
  CHECK(orth_penalty(w) - column_orth_penalty(w) == doctest::Approx(2.0 - 3.0));

  const Matrix g = orth_penalty_gradient(random_orthonormal(8, 4, 1));
  for (double v : g.values()) CHECK(std::abs(v) < 1e-12);
}

TEST_CASE("orth gradient matches central differences") {
  Rng rng(25);
  Matrix w(5, 3);
  for (double& v : w.values()) v = rng.normal();
  const Matrix g = orth_penalty_gradient(w);
  const double h = 1e-6;
  for (std::size_t i = 0; i < w.values().size(); ++i) {
    Matrix a = w, b = w;
    a.values()[i] += h;
    b.values()[i] -= h;
    const double fd = (orth_penalty(a) - orth_penalty(b)) / (2 * h);
    CHECK(fd == doctest::Approx(g.values()[i]).epsilon(1e-6));
  }
}

TEST_CASE("wls backward matches central differences") {
  Rng rng(26);
  AuxTOptions opt;
  opt.basis = wavelet::WaveletBasis::db4();
  auto p = init_auxt(8, 2, {6}, opt);
  auto& st = p.stages[0];
  for (double& v : st.s_lh) v = rng.normal();
  const Tensor x = random_tensor(rng, 8, 8, 2);
  const Tensor gout = random_tensor(rng, 4, 4, 6);
  auto loss = [&](const WLSParams& s, const Tensor& in) {
    const Tensor q = wls_forward(in, s, opt);
    double acc = 0.0;
    for (std::size_t i = 0; i < q.size(); ++i) acc += q.storage()[i] * gout.storage()[i];
    return acc;
  };
  WLSTape tape;
  wls_forward(x, st, opt, &tape);
  WLSParams grad = st;
  for (auto* s : {&grad.s_ll, &grad.s_lh, &grad.s_hl, &grad.s_hh}) {
    std::fill(s->begin(), s->end(), 0.0);
  }
  std::fill(grad.olp.values().begin(), grad.olp.values().end(), 0.0);
  const Tensor gx = wls_backward(gout, st, opt, tape, grad);

  const double h = 1e-6;
  for (int c = 0; c < 2; ++c) {
    WLSParams a = st, b = st;
    a.s_lh[c] += h;
    b.s_lh[c] -= h;
    CHECK((loss(a, x) - loss(b, x)) / (2 * h) ==
          doctest::Approx(grad.s_lh[c]).epsilon(1e-6));
  }
  for (std::size_t i = 0; i < 8; ++i) {
    WLSParams a = st, b = st;
    a.olp.values()[i] += h;
    b.olp.values()[i] -= h;
    CHECK((loss(a, x) - loss(b, x)) / (2 * h) ==
          doctest::Approx(grad.olp.values()[i]).epsilon(1e-6));
  }
  for (std::size_t i = 0; i < x.size(); i += 7) {
    Tensor a = x, b = x;
    a.storage()[i] += h;
    b.storage()[i] -= h;
    CHECK((loss(st, a) - loss(st, b)) / (2 * h) ==
          doctest::Approx(gx.storage()[i]).epsilon(1e-6));
  }
}

TEST_CASE("scales are clamped") {
  auto p = init_auxt(1, 1, {4});
  p.stages[0].s_ll[0] = 100.0;
  p.stages[0].s_hh[0] = -100.0;
  clamp_scales(p);
  CHECK(p.stages[0].s_ll[0] == kMaxLogScale);
  CHECK(p.stages[0].s_hh[0] == -kMaxLogScale);
}

TEST_CASE("round-trip error grows with the orthogonality penalty") {
  Rng rng(27);
  const Matrix q = random_orthonormal(8, 8, 2);
  Matrix n(8, 8);
  for (double& v : n.values()) v = rng.normal();
  auto perturbed = [&](double t) {
    Matrix w = q;
    for (std::size_t i = 0; i < w.values().size(); ++i) w.values()[i] += t * n.values()[i];
    return w;
  };
  const Tensor x = random_tensor(rng, 8, 8, 2);
  const AuxTOptions opt;
  double last = -1.0;
  for (double eps : {1e-6, 1e-4, 1e-2}) {
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 100; ++i) {
      const double mid = 0.5 * (lo + hi);
      (orth_penalty(perturbed(mid)) < eps ? lo : hi) = mid;
    }
    WLSParams st = identity_stage(2);
    st.olp = perturbed(lo);
    CAPTURE(eps);
    CHECK(orth_penalty(st.olp) <= eps);
    const double err = relative_error(iwls_forward(wls_forward(x, st, opt), st, opt), x);
    CHECK(err <= std::sqrt(eps));
    CHECK(err > last);
    last = err;
  }
}
