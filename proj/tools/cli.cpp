#include "cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "auxcodec/analysis.hpp"
#include "auxcodec/checkpoint.hpp"
#include "auxcodec/codec.hpp"
#include "auxcodec/error.hpp"
#include "auxcodec/image.hpp"
#include "auxcodec/train.hpp"

namespace auxcodec::cli {
namespace {

namespace fs = std::filesystem;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  std::optional<int> log_every;
};

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kUsage:
    case ErrorKind::kUnsupportedConfig:
      return kExitUsage;
    case ErrorKind::kParse:
    case ErrorKind::kUnsupportedFormat:
    case ErrorKind::kFormat:
    case ErrorKind::kCorruption:
      return kExitFormat;
    case ErrorKind::kModelMismatch:
      return kExitModelMismatch;
    case ErrorKind::kDivergence:
      return kExitDivergence;
    default:
      return kExitRuntime;
  }
}

void print_resolved(std::ostream& err, const TrainConfig& cfg) {
  err << "config: " << to_json(cfg, -1) << '\n';
  err << "seed: " << cfg.seed << '\n';
}

TrainConfig resolve_train_config(const Common& c) {
  TrainConfig cfg = c.config.empty() ? TrainConfig{} : load_train_config(c.config);
  for (const auto& o : c.overrides) apply_override(cfg, o);
  if (c.seed) cfg.seed = *c.seed;
  if (c.log_every) cfg.log_every = *c.log_every;
  cfg.validate();
  return cfg;
}

Checkpoint open_checkpoint(const std::string& path, std::ostream& err) {
  Checkpoint ckpt = load_checkpoint(path);
  print_resolved(err, ckpt.config);
  return ckpt;
}

void require_file(const std::string& path, const char* what) {
  if (!fs::is_regular_file(path)) {
    fail(ErrorKind::kUsage, std::string(what) + " '" + path + "' not found");
  }
}

fs::path sibling(const fs::path& p, const std::string& suffix) {
  fs::path out = p;
  out.replace_extension();
  return out.string() + suffix;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

int cmd_train(const Common& c, const std::string& corpus,
              const std::string& out_path, const std::string& eval_dir,
              std::ostream& out, std::ostream& err) {
  TrainConfig cfg = resolve_train_config(c);
  print_resolved(err, cfg);
  const auto images = load_corpus(corpus);
  TrainHooks hooks;
  if (!eval_dir.empty()) hooks.eval_set = load_corpus(eval_dir);
  hooks.progress = &err;
  const TrainResult r = train(cfg, images, hooks);
  save_checkpoint({cfg, r.model}, out_path);
  {
    std::ofstream log(sibling(out_path, ".csv"));
    r.log.write_csv(log);
    std::ofstream groups(sibling(out_path, ".groups.csv"));
    r.log.write_groups_csv(groups);
  }
  out << "iterations " << r.iterations_completed << '\n';
  out << "model_hash " << std::hex << std::setw(16) << std::setfill('0')
      << model_hash(r.model) << std::dec << std::setfill(' ') << '\n';
  if (r.diverged) {
    err << "training diverged; wrote the last good checkpoint\n";
    return kExitDivergence;
  }
  return kExitOk;
}

int cmd_encode(const std::string& ckpt_path, const std::string& image_path,
               const std::string& out_path, std::ostream& out,
               std::ostream& err) {
  const Checkpoint ckpt = open_checkpoint(ckpt_path, err);
  const auto [img, meta] = image::load_image(image_path);
  const EncodedImage enc =
      encode_image(ckpt.model, model_hash(ckpt.model), img, meta);
  write_file(out_path, enc.bytes);
  out << "bpp " << fmt(enc.bpp) << '\n';
  return kExitOk;
}

int cmd_decode(const std::string& ckpt_path, const std::string& in_path,
               const std::string& out_path, const std::string& reference,
               std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = open_checkpoint(ckpt_path, err);
  const auto bytes = read_file(in_path);
  const DecodedImage dec = decode_image(ckpt.model, model_hash(ckpt.model), bytes);
  image::save_image(dec.image, dec.meta, out_path);
  if (!reference.empty()) {
    const auto ref = image::load_image(reference).first;
    out << "psnr " << fmt(image::psnr(to_pixel_grid(dec.image), ref)) << '\n';
  }
  return kExitOk;
}

int cmd_eval(const std::string& ckpt_path, const std::string& dir,
             std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = open_checkpoint(ckpt_path, err);
  if (!fs::is_directory(dir)) {
    fail(ErrorKind::kUsage, "image directory '" + dir + "' does not exist");
  }
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file()) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  const std::uint64_t hash = model_hash(ckpt.model);
  out << "image,bpp,psnr\n";
  double sum_bpp = 0.0, sum_psnr = 0.0;
  int count = 0, skipped = 0;
  for (const auto& f : files) {
    std::pair<Tensor, image::ImageMeta> loaded;
    try {
      loaded = image::load_image(f);
    } catch (const Error& e) {
      err << "warning: skipping " << f.filename().string() << ": " << e.what()
          << '\n';
      ++skipped;
      continue;
    }
    const auto& [img, meta] = loaded;
    const EncodedImage enc = encode_image(ckpt.model, hash, img, meta);
    const DecodedImage dec = decode_image(ckpt.model, hash, enc.bytes);
    const double p = image::psnr(to_pixel_grid(dec.image), img);
    out << f.filename().string() << ',' << fmt(enc.bpp) << ',' << fmt(p) << '\n';
    sum_bpp += enc.bpp;
    sum_psnr += p;
    ++count;
  }
  if (count == 0) {
    err << "no readable images in '" << dir << "'\n";
    return kExitFormat;
  }
  out << "mean," << fmt(sum_bpp / count) << ',' << fmt(sum_psnr / count) << '\n';
  return skipped > 0 ? kExitFormat : kExitOk;
}

int cmd_analyze(const std::string& ckpt_path, const std::string& dir,
                const std::string& out_dir, const std::string& groups,
                std::ostream& out, std::ostream& err) {
  const Checkpoint ckpt = open_checkpoint(ckpt_path, err);
  analysis::AnalyzeInputs in;
  in.images = load_corpus(dir, &in.names);
  in.model_hash = model_hash(ckpt.model);
  if (!groups.empty()) in.group_log = groups;
  for (const auto& p : analysis::analyze_checkpoint(ckpt.model, in, out_dir)) {
    out << "wrote " << p.filename().string() << '\n';
  }
  return kExitOk;
}

int cmd_bdrate(const std::string& anchor, const std::string& test,
               std::ostream& out, std::ostream& err) {
  err << "config: {}\nseed: none\n";
  const auto a = analysis::read_rd_csv(anchor);
  const auto t = analysis::read_rd_csv(test);
  for (const auto* c : {&a, &t}) {
    std::string warning;
    if (!c->validate(&warning)) err << "warning: " << warning << '\n';
  }
  double v = analysis::bd_rate(a, t);
  if (std::abs(v) < 0.005) v = 0.0;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%+.2f%%", v);
  out << buf << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Learned image codec with an auxiliary wavelet transform"};
  app.require_subcommand(1);
  app.fallthrough();
  Common common;
  app.add_option("--config", common.config, "JSON training config");
  app.add_option("--seed", common.seed, "Seed for every random stream");
  app.add_option("--set", common.overrides, "Config override key=value")
      ->allow_extra_args(false);
  app.add_option("--log-every", common.log_every, "Iterations between log rows");

  std::string a, b, c, extra;

  auto* train = app.add_subcommand("train", "Train a model on a corpus");
  train->add_option("corpus", a, "Directory of .ppm/.pgm images")->required();
  train->add_option("checkpoint", b, "Output checkpoint")->required();
  train->add_option("--eval-dir", extra, "Held-out images used for log rows");

  auto* encode = app.add_subcommand("encode", "Compress one image");
  encode->add_option("checkpoint", a)->required();
  encode->add_option("image", b)->required();
  encode->add_option("output", c)->required();

  auto* decode = app.add_subcommand("decode", "Reconstruct one image");
  decode->add_option("checkpoint", a)->required();
  decode->add_option("bitstream", b)->required();
  decode->add_option("output", c)->required();
  decode->add_option("--reference", extra, "Original image; prints PSNR");

  auto* eval = app.add_subcommand("eval", "Per-image bpp and PSNR as CSV");
  eval->add_option("checkpoint", a)->required();
  eval->add_option("images", b)->required();

  auto* analyze = app.add_subcommand("analyze", "Write diagnostic tables");
  analyze->add_option("checkpoint", a)->required();
  analyze->add_option("images", b)->required();
  analyze->add_option("output_dir", c)->required();
  analyze->add_option("--groups", extra, "Training *.groups.csv log");

  auto* bdrate = app.add_subcommand("bdrate", "BD-rate of test vs anchor");
  bdrate->add_option("anchor", a)->required();
  bdrate->add_option("test", b)->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (*train) {
      if (!fs::is_directory(a)) {
        fail(ErrorKind::kUsage, "corpus directory '" + a + "' does not exist");
      }
      return cmd_train(common, a, b, extra, out, err);
    }
    if (*encode) {
      require_file(a, "checkpoint");
      require_file(b, "image");
      return cmd_encode(a, b, c, out, err);
    }
    if (*decode) {
      require_file(a, "checkpoint");
      require_file(b, "bitstream");
      return cmd_decode(a, b, c, extra, out, err);
    }
    if (*eval) {
      require_file(a, "checkpoint");
      return cmd_eval(a, b, out, err);
    }
    if (*analyze) {
      require_file(a, "checkpoint");
      return cmd_analyze(a, b, c, extra, out, err);
    }
    require_file(a, "anchor curve");
    require_file(b, "test curve");
    return cmd_bdrate(a, b, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

}  // namespace auxcodec::cli
