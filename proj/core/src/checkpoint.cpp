#include "auxcodec/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "auxcodec/error.hpp"

namespace auxcodec {
namespace {

constexpr std::uint8_t kMagic[4] = {'A', 'U', 'X', 'C'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
}

void put_f64(std::vector<std::uint8_t>& out, double d) {
  put(out, std::bit_cast<std::uint64_t>(d));
}

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> b) : b_(b) {}

  template <typename T>
  T get() {
    need(sizeof(T));
    T v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      v |= static_cast<T>(b_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(T);
    return v;
  }

  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const noexcept { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (b_.size() - pos_ < n) {
      fail(ErrorKind::kCorruption,
           "checkpoint truncated at byte " + std::to_string(pos_));
    }
  }

  std::span<const std::uint8_t> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t state) {
  for (std::uint8_t b : bytes) {
    state ^= b;
    state *= 0x100000001b3ULL;
  }
  return state;
}

std::uint64_t model_hash(const Model& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<std::uint8_t> buf;
  visit_params(model.config, model.params,
               [&](std::string_view, ParamGroup, bool,
                   std::span<const double> v) {
                 buf.clear();
                 for (double d : v) put_f64(buf, d);
                 h = fnv1a64(buf, h);
               });
  return h;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  out.push_back(kCheckpointVersion);
  TrainConfig cfg = ckpt.config;
  cfg.model = ckpt.model.config;
  const std::string json = to_json(cfg, -1);
  put(out, static_cast<std::uint32_t>(json.size()));
  out.insert(out.end(), json.begin(), json.end());
  const auto slices = param_index(ckpt.model.config, ckpt.model.params);
  put(out, static_cast<std::uint32_t>(slices.size()));
  visit_params(ckpt.model.config, ckpt.model.params,
               [&](std::string_view name, ParamGroup, bool,
                   std::span<const double> v) {
                 put(out, static_cast<std::uint16_t>(name.size()));
                 out.insert(out.end(), name.begin(), name.end());
                 out.push_back(1);
                 put(out, static_cast<std::uint32_t>(v.size()));
                 for (double d : v) put_f64(out, d);
               });
  return out;
}

Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 5 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    fail(ErrorKind::kFormat, "not an AUXC checkpoint (bad magic)");
  }
  if (bytes[4] != kCheckpointVersion) {
    fail(ErrorKind::kFormat,
         "unsupported checkpoint version " + std::to_string(bytes[4]));
  }
  Reader r(bytes.subspan(5));
  const auto json_len = r.get<std::uint32_t>();
  Checkpoint ckpt;
  try {
    ckpt.config = train_config_from_json(r.str(json_len));
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kCorruption) throw;
    fail(ErrorKind::kFormat, std::string("checkpoint config: ") + e.what());
  }
  ckpt.model = init_model(ckpt.config.model, 0);
  const auto expected = param_index(ckpt.model.config, ckpt.model.params);
  const auto count = r.get<std::uint32_t>();
  if (count != expected.size()) {
    fail(ErrorKind::kFormat, "checkpoint has " + std::to_string(count) +
                                 " sections, config implies " +
                                 std::to_string(expected.size()));
  }
  std::vector<double> flat;
  for (const auto& slice : expected) {
    const std::string name = r.str(r.get<std::uint16_t>());
    const auto rank = r.get<std::uint8_t>();
    std::size_t size = 1;
    for (int d = 0; d < rank; ++d) size *= r.get<std::uint32_t>();
    if (name != slice.name || size != slice.size) {
      fail(ErrorKind::kFormat, "checkpoint section '" + name +
                                   "' does not match expected '" +
                                   slice.name + "'");
    }
    for (std::size_t i = 0; i < size; ++i) {
      flat.push_back(std::bit_cast<double>(r.get<std::uint64_t>()));
    }
  }
  if (!r.done()) fail(ErrorKind::kCorruption, "trailing bytes in checkpoint");
  unflatten(ckpt.model.config, flat, ckpt.model.params);
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot write '" + path.string() + "'");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write to '" + path.string() + "' failed");
}

}  // namespace auxcodec
