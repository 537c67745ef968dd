#include "auxcodec/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "auxcodec/error.hpp"
#include "json.hpp"

namespace auxcodec {
namespace {

using nlohmann::ordered_json;
using Setter = std::function<void(TrainConfig&, const ordered_json&)>;

template <typename T>
T as(const ordered_json& v, const std::string& key) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw std::invalid_argument("bool");
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw std::invalid_argument("int");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_integer() && !v.is_number_unsigned() &&
            v.get<std::int64_t>() < 0) {
          throw std::invalid_argument("unsigned");
        }
      }
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw std::invalid_argument("number");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw std::invalid_argument("string");
    } else {
      if (!v.is_array()) throw std::invalid_argument("array");
      for (const auto& e : v) {
        if (!e.is_number_integer()) throw std::invalid_argument("array");
      }
    }
    return v.get<T>();
  } catch (const std::exception& e) {
    fail(ErrorKind::kUsage, "config key '" + key + "' has the wrong type (" +
                                v.dump() + ")");
  }
}

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"lambda_rd", [](TrainConfig& c, const ordered_json& v) { c.lambda_rd = as<double>(v, "lambda_rd"); }},
      {"lambda_orth", [](TrainConfig& c, const ordered_json& v) { c.lambda_orth = as<double>(v, "lambda_orth"); }},
      {"learning_rate", [](TrainConfig& c, const ordered_json& v) { c.learning_rate = as<double>(v, "learning_rate"); }},
      {"lr_decay_at", [](TrainConfig& c, const ordered_json& v) { c.lr_decay_at = as<double>(v, "lr_decay_at"); }},
      {"lr_decay_factor", [](TrainConfig& c, const ordered_json& v) { c.lr_decay_factor = as<double>(v, "lr_decay_factor"); }},
      {"entropy_lr_scale", [](TrainConfig& c, const ordered_json& v) { c.entropy_lr_scale = as<double>(v, "entropy_lr_scale"); }},
      {"entropy_init", [](TrainConfig& c, const ordered_json& v) { c.entropy_init = as<std::string>(v, "entropy_init"); }},
      {"iterations", [](TrainConfig& c, const ordered_json& v) { c.iterations = as<int>(v, "iterations"); }},
      {"batch", [](TrainConfig& c, const ordered_json& v) { c.batch = as<int>(v, "batch"); }},
      {"patch", [](TrainConfig& c, const ordered_json& v) { c.patch = as<int>(v, "patch"); }},
      {"seed", [](TrainConfig& c, const ordered_json& v) { c.seed = as<std::uint64_t>(v, "seed"); }},
      {"log_every", [](TrainConfig& c, const ordered_json& v) { c.log_every = as<int>(v, "log_every"); }},
      {"threads", [](TrainConfig& c, const ordered_json& v) { c.threads = as<int>(v, "threads"); }},
      {"source_channels", [](TrainConfig& c, const ordered_json& v) { c.model.source_channels = as<int>(v, "source_channels"); }},
      {"main_channels", [](TrainConfig& c, const ordered_json& v) { c.model.main_channels = as<std::vector<int>>(v, "main_channels"); }},
      {"aux_channels", [](TrainConfig& c, const ordered_json& v) { c.model.aux_channels = as<std::vector<int>>(v, "aux_channels"); }},
      {"kernel_size", [](TrainConfig& c, const ordered_json& v) { c.model.kernel_size = as<int>(v, "kernel_size"); }},
      {"main_activation", [](TrainConfig& c, const ordered_json& v) { c.model.main_activation = mainbranch::activation_from_string(as<std::string>(v, "main_activation")); }},
      {"fusion", [](TrainConfig& c, const ordered_json& v) { c.model.fusion = mainbranch::fusion_from_string(as<std::string>(v, "fusion")); }},
      {"aux_analysis", [](TrainConfig& c, const ordered_json& v) { c.model.aux_analysis = as<bool>(v, "aux_analysis"); }},
      {"aux_synthesis", [](TrainConfig& c, const ordered_json& v) { c.model.aux_synthesis = as<bool>(v, "aux_synthesis"); }},
      {"wavelet", [](TrainConfig& c, const ordered_json& v) { c.model.wavelet = as<std::string>(v, "wavelet"); }},
      {"downsampler", [](TrainConfig& c, const ordered_json& v) { c.model.downsampler = auxt::downsampler_from_string(as<std::string>(v, "downsampler")); }},
      {"scaling", [](TrainConfig& c, const ordered_json& v) { c.model.scaling = as<bool>(v, "scaling"); }},
      {"aux_relu", [](TrainConfig& c, const ordered_json& v) { c.model.aux_relu = as<bool>(v, "aux_relu"); }},
      {"tied_olp", [](TrainConfig& c, const ordered_json& v) { c.model.tied_olp = as<bool>(v, "tied_olp"); }},
      {"orth_init_noise", [](TrainConfig& c, const ordered_json& v) { c.model.orth_init_noise = as<double>(v, "orth_init_noise"); }},
  };
  return table;
}

void set_key(TrainConfig& cfg, const std::string& key, const ordered_json& v) {
  const auto& table = setters();
  const auto it = table.find(key);
  if (it == table.end()) {
    fail(ErrorKind::kUsage, "unknown config key '" + key + "'");
  }
  it->second(cfg, v);
}

void require(bool ok, const std::string& msg) {
  if (!ok) fail(ErrorKind::kUsage, msg);
}

}  // namespace

void ModelConfig::validate() const {
  require(source_channels == 1 || source_channels == 3,
          "source_channels must be 1 or 3");
  require(!main_channels.empty(), "main_channels must not be empty");
  require(main_channels.size() == aux_channels.size(),
          "main_channels and aux_channels need the same stage count");
  require(num_stages() <= 8, "at most 8 stages are supported");
  for (std::size_t k = 0; k < main_channels.size(); ++k) {
    require(main_channels[k] >= 1 && aux_channels[k] >= 1,
            "channel counts must be positive");
  }
  require(!aux_enabled() || aux_channels.back() == main_channels.back(),
          "last aux and main channel counts must match to form the latent");
  require(kernel_size >= 1 && kernel_size % 2 == 1 && kernel_size <= 9,
          "kernel_size must be odd, between 1 and 9");
  require(orth_init_noise >= 0.0, "orth_init_noise must be >= 0");
  (void)wavelet::WaveletBasis::by_name(wavelet);
}

auxt::AuxTOptions ModelConfig::aux_options() const {
  auxt::AuxTOptions o;
  o.basis = wavelet::WaveletBasis::by_name(wavelet);
  o.downsampler = downsampler;
  o.scaling = scaling;
  o.tied_olp = tied_olp;
  return o;
}

mainbranch::ChannelPlan ModelConfig::channel_plan() const {
  mainbranch::ChannelPlan p;
  p.source_channels = source_channels;
  p.main_channels = main_channels;
  p.aux_channels = aux_channels;
  p.kernel_size = kernel_size;
  p.activation = main_activation;
  p.fusion = fusion;
  p.aux_in_analysis = aux_analysis;
  p.aux_in_synthesis = aux_synthesis;
  return p;
}

void TrainConfig::validate() const {
  model.validate();
  require(lambda_rd > 0.0, "lambda_rd must be > 0");
  require(lambda_orth >= 0.0, "lambda_orth must be >= 0");
  require(learning_rate > 0.0, "learning_rate must be > 0");
  require(lr_decay_at >= 0.0 && lr_decay_at <= 1.0,
          "lr_decay_at must lie in [0, 1]");
  require(lr_decay_factor > 0.0, "lr_decay_factor must be > 0");
  require(entropy_lr_scale > 0.0, "entropy_lr_scale must be > 0");
  require(entropy_init == "data" || entropy_init == "standard",
          "entropy_init must be 'data' or 'standard'");
  require(iterations >= 0, "iterations must be >= 0");
  require(batch >= 1, "batch must be >= 1");
  require(patch >= model.size_multiple() &&
              patch % model.size_multiple() == 0,
          "patch must be a positive multiple of " +
              std::to_string(model.size_multiple()));
  require(log_every >= 1, "log_every must be >= 1");
  require(threads >= 1, "threads must be >= 1");
}

std::string to_json(const TrainConfig& cfg, int indent) {
  const auto& m = cfg.model;
  ordered_json j;
  j["lambda_rd"] = cfg.lambda_rd;
  j["lambda_orth"] = cfg.lambda_orth;
  j["learning_rate"] = cfg.learning_rate;
  j["lr_decay_at"] = cfg.lr_decay_at;
  j["lr_decay_factor"] = cfg.lr_decay_factor;
  j["entropy_lr_scale"] = cfg.entropy_lr_scale;
  j["entropy_init"] = cfg.entropy_init;
  j["iterations"] = cfg.iterations;
  j["batch"] = cfg.batch;
  j["patch"] = cfg.patch;
  j["seed"] = cfg.seed;
  j["log_every"] = cfg.log_every;
  j["threads"] = cfg.threads;
  j["source_channels"] = m.source_channels;
  j["main_channels"] = m.main_channels;
  j["aux_channels"] = m.aux_channels;
  j["kernel_size"] = m.kernel_size;
  j["main_activation"] = mainbranch::to_string(m.main_activation);
  j["fusion"] = mainbranch::to_string(m.fusion);
  j["aux_analysis"] = m.aux_analysis;
  j["aux_synthesis"] = m.aux_synthesis;
  j["wavelet"] = m.wavelet;
  j["downsampler"] = auxt::to_string(m.downsampler);
  j["scaling"] = m.scaling;
  j["aux_relu"] = m.aux_relu;
  j["tied_olp"] = m.tied_olp;
  j["orth_init_noise"] = m.orth_init_noise;
  return j.dump(indent);
}

TrainConfig train_config_from_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    fail(ErrorKind::kUsage, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) fail(ErrorKind::kUsage, "config must be a JSON object");
  TrainConfig cfg;
  for (const auto& [key, value] : j.items()) set_key(cfg, key, value);
  return cfg;
}

TrainConfig load_train_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::kUsage, "cannot open config '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return train_config_from_json(ss.str());
}

void apply_override(TrainConfig& cfg, std::string_view assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    fail(ErrorKind::kUsage, "override must look like key=value, got '" +
                                std::string(assignment) + "'");
  }
  const std::string key(assignment.substr(0, eq));
  const std::string raw(assignment.substr(eq + 1));
  ordered_json value = ordered_json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  set_key(cfg, key, value);
}

}  // namespace auxcodec
