#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "auxcodec/config.hpp"
#include "auxcodec/model.hpp"

namespace auxcodec {

inline constexpr std::uint8_t kCheckpointVersion = 1;

/// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes,
                      std::uint64_t state = 0xcbf29ce484222325ULL);

/// FNV-1a over the little-endian f64 bytes of every parameter array in
/// visit order. Stored in bitstream headers.
std::uint64_t model_hash(const Model& model);

struct Checkpoint {
  TrainConfig config;
  Model model;
};

/// "AUXC" | version u8 | u32 json length | config JSON | u32 section count |
/// sections (u16 name length, name, u8 rank, u32 dims, f64 LE data).
std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path,
                std::span<const std::uint8_t> bytes);

}  // namespace auxcodec
