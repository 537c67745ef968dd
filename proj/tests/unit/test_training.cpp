#include <cmath>
#include <filesystem>
#include <functional>
#include <sstream>

#include "auxcodec/checkpoint.hpp"
#include "auxcodec/config.hpp"
#include "auxcodec/error.hpp"
#include "auxcodec/random.hpp"
#include "auxcodec/train.hpp"
#include "doctest.h"

using namespace auxcodec;

namespace {

const std::filesystem::path kToy = std::filesystem::path(AUXCODEC_DATA_DIR) / "toy";

ErrorKind kind_of(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::kIo;
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.model.main_channels = {4, 8};
  cfg.model.aux_channels = {4, 8};
  cfg.patch = 8;
  cfg.batch = 2;
  return cfg;
}

std::vector<Tensor> random_batch(Rng& rng, int n, int patch) {
  std::vector<Tensor> out;
  for (int i = 0; i < n; ++i) {
    Tensor t(patch, patch, 3);
    for (double& v : t.values()) v = rng.uniform();
    out.push_back(std::move(t));
  }
  return out;
}

}  // namespace

TEST_CASE("rd loss convention") {
  CHECK(rd_loss(1.0, 0.0, 0.0483) == 1.0);
  CHECK(rd_loss(0.0, 1.0 / (255.0 * 255.0), 0.0483) == doctest::Approx(0.0483).epsilon(1e-12));
  const double a = rd_loss(0.0, 0.01, 0.02);
  CHECK(rd_loss(0.0, 0.01, 0.04) == doctest::Approx(2.0 * a).epsilon(1e-15));
}

TEST_CASE("orth term") {
  Rng rng(51);
  TrainConfig cfg = small_config();
  const Model m = init_model(cfg.model, 1);
  const auto batch = random_batch(rng, 2, 8);
  CHECK(orth_loss(m) <= 1e-12);
  cfg.lambda_orth = 0.0;
  Model noisy = m;
  for (double& v : noisy.params.auxt.stages[0].olp.values()) v += 0.2;
  const auto l = overall_loss(noisy, batch, cfg, 3);
  CHECK(l.overall == l.rd);
  cfg.lambda_orth = 0.5;
  const auto l2 = overall_loss(noisy, batch, cfg, 3);
  CHECK(l2.overall == doctest::Approx(l2.rd + 0.5 * orth_loss(noisy)).epsilon(1e-12));
  CHECK(max_orth_penalty(noisy) > 0.0);
}

TEST_CASE("gradient matches central differences") {
  Rng rng(52);
  for (int variant = 0; variant < 3; ++variant) {
    TrainConfig cfg = small_config();
    if (variant == 1) cfg.model.wavelet = "db4";
    if (variant == 2) cfg.model.tied_olp = false;
    CAPTURE(variant);
    Model m = init_model(cfg.model, 2);
    for (auto& st : m.params.auxt.stages) {
      for (double& v : st.olp.values()) v += 0.1 * rng.normal();
    }
    const auto batch = random_batch(rng, 2, 8);
    const auto g = backward_flat(m, batch, cfg, 17);
    const auto flat = flatten(m.config, m.params);
    Model probe = m;
    const double h = 1e-5;
    double worst = 0.0;
    for (std::size_t i = 0; i < flat.size(); i += 1 + flat.size() / 60) {
      auto f = flat;
      f[i] += h;
      unflatten(m.config, f, probe.params);
      const double up = overall_loss(probe, batch, cfg, 17).overall;
      f[i] -= 2 * h;
      unflatten(m.config, f, probe.params);
      const double down = overall_loss(probe, batch, cfg, 17).overall;
      const double fd = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(fd - g[i]) /
                                  std::max({std::abs(fd), std::abs(g[i]), 1e-8}));
    }
    CHECK(worst <= 1e-4);
  }
}

TEST_CASE("zero input gives zero analysis kernel gradients") {
  TrainConfig cfg = small_config();
  Model m = init_model(cfg.model, 3);
  std::vector<Tensor> batch(2, Tensor(8, 8, 3));
  const auto g = backward_flat(m, batch, cfg, 5);
  for (const auto& s : param_index(m.config, m.params)) {
    if (s.name.rfind("main.analysis", 0) == 0 && s.group == ParamGroup::kKernel) {
      for (std::size_t i = 0; i < s.size; ++i) CHECK(g[s.offset + i] == 0.0);
    }
  }
}

TEST_CASE("adam") {
  std::vector<double> p = {1.0, -2.0, 3.0};
  AdamState st;
  AdamHyper hy;
  hy.lr = 1e-3;
  adam_step(p, std::vector<double>{0.0, 0.0, 0.0}, st, hy);
  CHECK(p == std::vector<double>{1.0, -2.0, 3.0});

  std::vector<double> q = {0.0, 0.0, 0.0, 0.0};
  AdamState s2;
  adam_step(q, std::vector<double>{5.0, -0.3, 1e3, 2.0}, s2, hy,
            std::vector<double>{1.0, 1.0, 1.0, 0.0});
  CHECK(q[0] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(q[1] == doctest::Approx(1e-3).epsilon(1e-6));
  CHECK(q[2] == doctest::Approx(-1e-3).epsilon(1e-6));
  CHECK(q[3] == 0.0);
  // moments decay under zero gradient
  const double m0 = s2.m[0];
  adam_step(q, std::vector<double>{0.0, 0.0, 0.0, 0.0}, s2, hy);
  CHECK(s2.m[0] == doctest::Approx(0.9 * m0));
}

TEST_CASE("learning rate schedule") {
  TrainConfig cfg;
  cfg.iterations = 100;
  CHECK(scheduled_lr(cfg, 0) == cfg.learning_rate);
  CHECK(scheduled_lr(cfg, 89) == cfg.learning_rate);
  CHECK(scheduled_lr(cfg, 90) == doctest::Approx(cfg.learning_rate * 0.1));
}

TEST_CASE("config json") {
  TrainConfig cfg;
  cfg.lambda_rd = 0.013;
  cfg.model.aux_channels = {4, 8, 16, 32};
  cfg.model.downsampler = auxt::Downsampler::kAvgPool;
  const TrainConfig back = train_config_from_json(to_json(cfg));
  CHECK(to_json(back) == to_json(cfg));
  CHECK(kind_of([] { train_config_from_json(R"({"lamda_rd": 1})"); }) == ErrorKind::kUsage);
  CHECK(kind_of([] { train_config_from_json(R"({"iterations": "x"})"); }) == ErrorKind::kUsage);

  apply_override(cfg, "wavelet=db4");
  apply_override(cfg, "main_channels=[2,4]");
  apply_override(cfg, "aux_channels=[2,4]");
  apply_override(cfg, "batch=3");
  CHECK(cfg.model.wavelet == "db4");
  CHECK(cfg.model.main_channels == std::vector<int>{2, 4});
  CHECK(cfg.batch == 3);
  CHECK(kind_of([&] { apply_override(cfg, "nokey"); }) == ErrorKind::kUsage);

  TrainConfig bad;
  bad.model.aux_channels = {8, 16, 32, 16};
  CHECK(kind_of([&] { bad.validate(); }) == ErrorKind::kUsage);
}

TEST_CASE("checkpoint round trip") {
  TrainConfig cfg = small_config();
  cfg.model.tied_olp = false;
  Checkpoint ck{cfg, init_model(cfg.model, 8)};
  ck.model.params.entropy.mu[1] = 0.125;
  const auto bytes = serialize_checkpoint(ck);
  const Checkpoint back = parse_checkpoint(bytes);
  CHECK(flatten(back.model.config, back.model.params) ==
        flatten(ck.model.config, ck.model.params));
  CHECK(model_hash(back.model) == model_hash(ck.model));
  CHECK(serialize_checkpoint(back) == bytes);

  auto bad = bytes;
  bad[0] = 'Z';
  CHECK(kind_of([&] { parse_checkpoint(bad); }) == ErrorKind::kFormat);
  const std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
  CHECK_THROWS_AS(parse_checkpoint(cut), Error);

  Model other = ck.model;
  other.params.entropy.mu[0] += 1e-9;
  CHECK(model_hash(other) != model_hash(ck.model));
}

TEST_CASE("zero iterations returns the initial model") {
  const auto corpus = load_corpus((kToy / "train").string());
  TrainConfig cfg = small_config();
  cfg.iterations = 0;
  const auto r = train(cfg, corpus);
  const Model init = initial_model(cfg, corpus);
  CHECK(flatten(r.model.config, r.model.params) == flatten(init.config, init.params));
  CHECK(r.iterations_completed == 0);
}

TEST_CASE("training is deterministic") {
  const auto corpus = load_corpus((kToy / "train").string());
  TrainConfig cfg = small_config();
  cfg.iterations = 20;
  cfg.log_every = 5;
  const auto a = train(cfg, corpus);
  const auto b = train(cfg, corpus);
  CHECK(flatten(a.model.config, a.model.params) == flatten(b.model.config, b.model.params));
  std::ostringstream la, lb;
  a.log.write_csv(la);
  b.log.write_csv(lb);
  CHECK(la.str() == lb.str());
  CHECK(a.log.records.size() == 5);
  cfg.seed = 1;
  const auto c = train(cfg, corpus);
  CHECK(flatten(c.model.config, c.model.params) != flatten(a.model.config, a.model.params));
}

TEST_CASE("divergence keeps the last good model") {
  const auto corpus = load_corpus((kToy / "train").string());
  TrainConfig cfg = small_config();
  cfg.iterations = 20;
  cfg.learning_rate = 1e300;
  const auto r = train(cfg, corpus);
  CHECK(r.diverged);
  CHECK(r.iterations_completed < 20);
  for (double v : flatten(r.model.config, r.model.params)) REQUIRE(std::isfinite(v));
}

TEST_CASE("rd loss falls over 2000 iterations") {
  const auto train_set = load_corpus((kToy / "train").string());
  const auto test_set = load_corpus((kToy / "test").string());
  for (std::uint64_t seed : {0u, 1u, 2u}) {
    TrainConfig cfg;
    cfg.patch = 32;
    cfg.batch = 4;
    cfg.iterations = 2000;
    cfg.log_every = 2000;
    cfg.seed = seed;
    TrainHooks hooks;
    hooks.eval_set = test_set;
    const auto r = train(cfg, train_set, hooks);
    REQUIRE(r.log.records.size() == 2);
    CAPTURE(seed);
    CHECK(r.log.records.back().rd_loss < r.log.records.front().rd_loss);
  }
}

TEST_CASE("corpus loading") {
  std::vector<std::string> names;
  const auto c = load_corpus((kToy / "test").string(), &names);
  CHECK(c.size() == 4);
  CHECK(names.front() == "00_coffee.ppm");
  CHECK(kind_of([] { load_corpus("/nonexistent"); }) == ErrorKind::kUsage);
}
