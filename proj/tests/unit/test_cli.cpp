#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "auxcodec/checkpoint.hpp"
#include "auxcodec/entropy.hpp"
#include "auxcodec/image.hpp"
#include "auxcodec/model.hpp"
#include "cli.hpp"
#include "doctest.h"

using namespace auxcodec;
namespace fs = std::filesystem;

namespace {

const fs::path kToy = fs::path(AUXCODEC_DATA_DIR) / "toy";

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines(const std::string& s) {
  std::vector<std::string> v;
  std::stringstream ss(s);
  for (std::string l; std::getline(ss, l);) v.push_back(l);
  return v;
}

double field(const std::string& line, int index) {
  std::stringstream ss(line);
  std::string f;
  for (int i = 0; i <= index; ++i) std::getline(ss, f, ',');
  return std::stod(f);
}

class Workspace {
 public:
  Workspace() : dir_(fs::temp_directory_path() / "auxcodec_cli_test") {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  ~Workspace() { fs::remove_all(dir_); }
  std::string operator/(const std::string& name) const { return (dir_ / name).string(); }

 private:
  fs::path dir_;
};

std::vector<std::string> train_args(const std::string& ckpt, const std::string& seed) {
  return {"--seed", seed, "--set", "iterations=10", "--set", "patch=32",
          "--set", "batch=2", "--log-every", "5", "train", (kToy / "train").string(), ckpt};
}

}  // namespace

TEST_CASE("usage errors") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"train", "/nonexistent/corpus", "/tmp/x.auxc"}).code == cli::kExitUsage);
  CHECK(run({"--set", "bogus=1", "train", (kToy / "train").string(), "/tmp/x.auxc"}).code ==
        cli::kExitUsage);
}

TEST_CASE("train, encode, decode, eval") {
  Workspace ws;
  const auto a = run(train_args(ws / "a.auxc", "4"));
  REQUIRE(a.code == 0);
  CHECK(lines(a.out).front() == "iterations 10");
  CHECK(a.err.find("config: {") != std::string::npos);
  CHECK(fs::exists(ws / "a.csv"));
  CHECK(fs::exists(ws / "a.groups.csv"));
  REQUIRE(run(train_args(ws / "b.auxc", "4")).code == 0);
  CHECK(read_file(ws / "a.auxc") == read_file(ws / "b.auxc"));
  REQUIRE(run(train_args(ws / "c.auxc", "5")).code == 0);
  CHECK(read_file(ws / "a.auxc") != read_file(ws / "c.auxc"));

  const std::string img = (kToy / "test" / "02_rocket.ppm").string();
  const auto enc = run({"encode", ws / "a.auxc", img, ws / "x.auxt"});
  REQUIRE(enc.code == 0);
  CHECK(enc.out.rfind("bpp ", 0) == 0);
  const auto dec = run({"decode", ws / "a.auxc", ws / "x.auxt", ws / "x.ppm", "--reference", img});
  REQUIRE(dec.code == 0);
  const std::string psnr = lines(dec.out).back().substr(5);

  const auto ev = run({"eval", ws / "a.auxc", (kToy / "test").string()});
  REQUIRE(ev.code == 0);
  const auto rows = lines(ev.out);
  REQUIRE(rows.size() == 6);
  CHECK(rows.front() == "image,bpp,psnr");
  CHECK(rows[3].rfind("02_rocket.ppm,", 0) == 0);
  CHECK(rows[3].substr(rows[3].rfind(',') + 1) == psnr);
  CHECK(enc.out == "bpp " + rows[3].substr(14, rows[3].rfind(',') - 14) + "\n");
  double bpp = 0.0, p = 0.0;
  for (int i = 1; i <= 4; ++i) {
    bpp += field(rows[i], 1) / 4;
    p += field(rows[i], 2) / 4;
  }
  CHECK(rows.back().rfind("mean,", 0) == 0);
  CHECK(field(rows.back(), 1) == doctest::Approx(bpp).epsilon(1e-5));
  CHECK(field(rows.back(), 2) == doctest::Approx(p).epsilon(1e-5));

  // decoding with another model's checkpoint
  CHECK(run({"decode", ws / "c.auxc", ws / "x.auxt", ws / "y.ppm"}).code ==
        cli::kExitModelMismatch);
  auto bytes = read_file(ws / "x.auxt");
  bytes[1] = '?';
  write_file(ws / "bad.auxt", bytes);
  CHECK(run({"decode", ws / "a.auxc", ws / "bad.auxt", ws / "y.ppm"}).code == cli::kExitFormat);
  CHECK(run({"encode", ws / "a.auxt", img, ws / "z.auxt"}).code != 0);

  // a 1x1 image still produces a valid stream
  image::save_image(Tensor(1, 1, 3, 0.5), {1, 1, 8, image::ColorModel::kRgb}, ws / "one.ppm");
  REQUIRE(run({"encode", ws / "a.auxc", ws / "one.ppm", ws / "one.auxt"}).code == 0);
  REQUIRE(run({"decode", ws / "a.auxc", ws / "one.auxt", ws / "one_out.ppm"}).code == 0);
  const auto [back, meta] = image::load_image(ws / "one_out.ppm");
  CHECK(back.height() == 1);
  CHECK(back.width() == 1);

  const auto an = run({"analyze", ws / "a.auxc", (kToy / "test").string(), ws / "report",
                       "--groups", ws / "a.groups.csv"});
  REQUIRE(an.code == 0);
  CHECK(fs::exists(ws / "report/summary.txt"));
  CHECK(fs::exists(ws / "report/group_evolution.csv"));
}

TEST_CASE("trivial latent costs only the coder flush") {
  Workspace ws;
  TrainConfig cfg;
  Checkpoint ck{cfg, init_model(cfg.model, 0)};
  auto& e = ck.model.params.entropy;
  std::fill(e.mu.begin(), e.mu.end(), 0.0);
  std::fill(e.log_sigma.begin(), e.log_sigma.end(), std::log(entropy::kSigmaMin));
  save_checkpoint(ck, ws / "z.auxc");
  fs::create_directories(ws / "black");
  image::save_image(Tensor(64, 64, 3, 0.0), {64, 64, 8, image::ColorModel::kRgb},
                    ws / "black/k.ppm");
  const auto ev = run({"eval", ws / "z.auxc", ws / "black"});
  REQUIRE(ev.code == 0);
  const auto rows = lines(ev.out);
  REQUIRE(rows.size() == 3);
  CHECK(field(rows[1], 1) * 64 * 64 / 8 <= 8.0);
}

TEST_CASE("eval flags unreadable files") {
  Workspace ws;
  TrainConfig cfg;
  save_checkpoint({cfg, init_model(cfg.model, 0)}, ws / "m.auxc");
  fs::create_directories(ws / "imgs");
  fs::copy_file(kToy / "test" / "00_coffee.ppm", ws / "imgs/a.ppm");
  std::ofstream(ws / "imgs/b.ppm") << "not an image";
  const auto ev = run({"eval", ws / "m.auxc", ws / "imgs"});
  CHECK(ev.code == cli::kExitFormat);
  CHECK(lines(ev.out).size() == 3);
  CHECK(ev.err.find("skipping b.ppm") != std::string::npos);
}

TEST_CASE("bdrate") {
  Workspace ws;
  {
    std::ofstream a(ws / "a.csv"), t(ws / "t.csv"), s(ws / "s.csv");
    a << "bpp,psnr\n0.1,26\n0.2,28.5\n0.4,31\n0.8,33\n";
    t << "bpp,psnr\n0.09,26\n0.18,28.5\n0.36,31\n0.72,33\n";
    s << "bpp,psnr\n0.1,26\n0.2,28.5\n0.4,31\n";
  }
  CHECK(run({"bdrate", ws / "a.csv", ws / "a.csv"}).out == "+0.00%\n");
  CHECK(run({"bdrate", ws / "a.csv", ws / "t.csv"}).out == "-10.00%\n");
  CHECK(run({"bdrate", ws / "a.csv", ws / "s.csv"}).code == cli::kExitUsage);
}
