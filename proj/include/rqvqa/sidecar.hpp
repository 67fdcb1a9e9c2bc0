#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace rqvqa {

enum class Granularity : std::uint8_t { KeyFrame = 0, Tokens = 1, Chunk = 2, Video = 3 };

std::string_view to_string(Granularity g);
Granularity parse_granularity(std::string_view text);

/// One feature matrix for one video, as stored on disk.
///
/// RQVF layout, little-endian:
///   "RQVF" | u16 version=1 | u16 name_len | name bytes | u8 granularity |
///   u32 count | u32 token_count (0 unless Tokens) | u32 dim |
///   count * max(token_count, 1) * dim f32 | u32 CRC32 of the f32 payload
struct SidecarSlice {
  std::string name;
  Granularity granularity = Granularity::KeyFrame;
  std::uint32_t count = 0;
  std::uint32_t token_count = 0;
  std::uint32_t dim = 0;
  std::vector<float> values;

  std::size_t rows() const noexcept {
    return static_cast<std::size_t>(count) * (token_count > 0 ? token_count : 1);
  }

  friend bool operator==(const SidecarSlice&, const SidecarSlice&) = default;
};

inline constexpr std::uint16_t kSidecarVersion = 1;

std::vector<std::byte> encode_sidecar(const SidecarSlice& slice);
SidecarSlice decode_sidecar(std::span<const std::byte> bytes);

void save_sidecar(const SidecarSlice& slice, const std::filesystem::path& path);
SidecarSlice load_sidecar(const std::filesystem::path& path);

}  // namespace rqvqa
