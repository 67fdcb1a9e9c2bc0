#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace rqvqa {

/// 8-bit interleaved RGB image, row-major.
struct Frame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // height * width * 3

  Frame() = default;
  Frame(int w, int h) : width(w), height(h), pixels(static_cast<std::size_t>(w) * h * 3, 0) {}

  std::uint8_t& at(int x, int y, int c) {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  std::uint8_t at(int x, int y, int c) const {
    return pixels[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  bool empty() const noexcept { return width <= 0 || height <= 0; }

  friend bool operator==(const Frame&, const Frame&) = default;
};

Frame constant_frame(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b);

struct VideoFrames {
  std::vector<Frame> frames;
  int width = 0;
  int height = 0;
  int frame_rate = 0;

  std::size_t frame_count() const noexcept { return frames.size(); }
};

/// Throws unless every VideoFrames invariant holds.
void validate(const VideoFrames& video);

struct KeyFrameSet {
  std::vector<Frame> frames;
  std::vector<std::size_t> source_indices;

  std::size_t count() const noexcept { return frames.size(); }
};

/// One second of video. Views into the VideoFrames it was cut from, which
/// must outlive it.
struct Chunk {
  std::size_t first_index = 0;
  std::span<const Frame> frames;
};

struct ChunkSet {
  std::vector<Chunk> chunks;

  std::size_t count() const noexcept { return chunks.size(); }
};

/// Number of whole seconds, floor(N / r).
std::size_t whole_seconds(const VideoFrames& video);

KeyFrameSet extract_key_frames(const VideoFrames& video);
ChunkSet extract_chunks(const VideoFrames& video);

// Geometry. Both resizes are bilinear with half-pixel centers; a same-size
// resize returns the input unchanged.
Frame resize_exact(const Frame& frame, int width, int height);
Frame resize_min_side(const Frame& frame, int target);

enum class CropMode { Center, Random };

struct CropWindow {
  int x = 0;
  int y = 0;
  int size = 0;
};

CropWindow crop_window(int width, int height, int size, CropMode mode, std::uint64_t seed);
Frame crop(const Frame& frame, int size, CropMode mode, std::uint64_t seed = 0);

// Raw video directory: meta.txt + frame_%06d.rgb.
VideoFrames load_raw_video(const std::filesystem::path& dir);
void save_raw_video(const VideoFrames& video, const std::filesystem::path& dir);

}  // namespace rqvqa
