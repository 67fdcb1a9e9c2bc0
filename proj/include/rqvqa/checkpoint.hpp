#pragma once

#include <filesystem>

#include "rqvqa/fusion.hpp"
#include "rqvqa/train.hpp"

namespace rqvqa {

struct Checkpoint {
  fusion::Model model;
  TrainConfig config;
};

/// Binary container, little-endian: "RQVC" | u16 version | layout descriptor |
/// MLP/attention shapes | TrainConfig echo (including seed) | every parameter
/// tensor as f64 | u32 CRC32 of all preceding bytes.
std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(std::span<const std::byte> bytes);

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace rqvqa
