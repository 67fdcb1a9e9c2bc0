#include "rqvqa/preproc.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <string>

#include "rqvqa/error.hpp"
#include "rqvqa/kernels.hpp"
#include "rqvqa/random.hpp"

namespace rqvqa {

namespace fs = std::filesystem;

Frame constant_frame(int width, int height, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  Frame f(width, height);
  for (std::size_t i = 0; i < f.pixels.size(); i += 3) {
    f.pixels[i] = r;
    f.pixels[i + 1] = g;
    f.pixels[i + 2] = b;
  }
  return f;
}

void validate(const VideoFrames& video) {
  if (video.frame_rate < 1) fail(ErrorCode::Metadata, "frame rate must be a positive integer");
  if (video.width < 1 || video.height < 1) fail(ErrorCode::Metadata, "frame size must be positive");
  const std::size_t bytes = static_cast<std::size_t>(video.width) * video.height * 3;
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    const Frame& f = video.frames[i];
    if (f.width != video.width || f.height != video.height || f.pixels.size() != bytes) {
      fail(ErrorCode::Metadata, "frame " + std::to_string(i) + " does not match video geometry");
    }
  }
  if (video.frame_count() < static_cast<std::size_t>(video.frame_rate)) {
    fail(ErrorCode::ShortVideo, "video shorter than one second");
  }
}

std::size_t whole_seconds(const VideoFrames& video) {
  if (video.frame_rate < 1) fail(ErrorCode::Metadata, "frame rate must be a positive integer");
  const std::size_t n = video.frame_count() / static_cast<std::size_t>(video.frame_rate);
  if (n == 0) fail(ErrorCode::ShortVideo, "video shorter than one second");
  return n;
}

KeyFrameSet extract_key_frames(const VideoFrames& video) {
  const std::size_t n = whole_seconds(video);
  const auto r = static_cast<std::size_t>(video.frame_rate);
  KeyFrameSet set;
  set.frames.reserve(n);
  set.source_indices.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    set.frames.push_back(video.frames[i * r]);
    set.source_indices.push_back(i * r);
  }
  return set;
}

ChunkSet extract_chunks(const VideoFrames& video) {
  const std::size_t n = whole_seconds(video);
  const auto r = static_cast<std::size_t>(video.frame_rate);
  ChunkSet set;
  set.chunks.reserve(n);
  const std::span<const Frame> all(video.frames);
  for (std::size_t i = 0; i < n; ++i) set.chunks.push_back({i * r, all.subspan(i * r, r)});
  return set;
}

Frame resize_exact(const Frame& frame, int width, int height) {
  if (frame.empty()) fail(ErrorCode::Geometry, "cannot resize an empty frame");
  if (width < 1 || height < 1) fail(ErrorCode::InvalidArgument, "resize target must be positive");
  if (width == frame.width && height == frame.height) return frame;
  return kernels::resize_bilinear(frame, width, height);
}

Frame resize_min_side(const Frame& frame, int target) {
  if (frame.empty()) fail(ErrorCode::Geometry, "cannot resize an empty frame");
  if (target < 1) fail(ErrorCode::InvalidArgument, "resize target must be positive");
  const std::int64_t w = frame.width;
  const std::int64_t h = frame.height;
  const std::int64_t t = target;
  // Round-half-up of long * t / short, in integers.
  if (w <= h) {
    return resize_exact(frame, target, static_cast<int>((2 * h * t + w) / (2 * w)));
  }
  return resize_exact(frame, static_cast<int>((2 * w * t + h) / (2 * h)), target);
}

CropWindow crop_window(int width, int height, int size, CropMode mode, std::uint64_t seed) {
  if (size < 1) fail(ErrorCode::InvalidArgument, "crop size must be positive");
  if (width < size || height < size) {
    fail(ErrorCode::Geometry, "frame " + std::to_string(width) + "x" + std::to_string(height) +
                                  " smaller than crop " + std::to_string(size));
  }
  if (mode == CropMode::Center) return {(width - size) / 2, (height - size) / 2, size};
  Rng rng(seed);
  std::uniform_int_distribution<int> dx(0, width - size);
  std::uniform_int_distribution<int> dy(0, height - size);
  const int x = dx(rng);
  return {x, dy(rng), size};
}

Frame crop(const Frame& frame, int size, CropMode mode, std::uint64_t seed) {
  const CropWindow w = crop_window(frame.width, frame.height, size, mode, seed);
  if (size == frame.width && size == frame.height) return frame;
  Frame out(size, size);
  for (int y = 0; y < size; ++y) {
    const auto* from = &frame.pixels[(static_cast<std::size_t>(w.y + y) * frame.width + w.x) * 3];
    std::copy(from, from + static_cast<std::size_t>(size) * 3,
              &out.pixels[static_cast<std::size_t>(y) * size * 3]);
  }
  return out;
}

namespace {

std::string frame_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06zu.rgb", index);
  return buf;
}

int parse_meta_int(const std::map<std::string, std::string>& meta, const std::string& key) {
  const auto it = meta.find(key);
  if (it == meta.end()) fail(ErrorCode::Metadata, "meta.txt missing key '" + key + "'");
  const std::string& s = it->second;
  int value = 0;
  const auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc() || end != s.data() + s.size()) {
    fail(ErrorCode::Metadata, "meta.txt key '" + key + "' is not an integer: " + s);
  }
  return value;
}

}  // namespace

VideoFrames load_raw_video(const fs::path& dir) {
  std::ifstream meta_in(dir / "meta.txt");
  if (!meta_in) fail(ErrorCode::Io, "cannot open " + (dir / "meta.txt").string());
  std::map<std::string, std::string> meta;
  for (std::string line; std::getline(meta_in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) fail(ErrorCode::Metadata, "malformed meta.txt line: " + line);
    meta[line.substr(0, eq)] = line.substr(eq + 1);
  }

  VideoFrames video;
  video.width = parse_meta_int(meta, "width");
  video.height = parse_meta_int(meta, "height");
  video.frame_rate = parse_meta_int(meta, "fps");
  const int count = parse_meta_int(meta, "frames");
  if (video.width < 1 || video.height < 1 || video.frame_rate < 1 || count < 1) {
    fail(ErrorCode::Metadata, "meta.txt values must be positive");
  }

  const std::size_t bytes = static_cast<std::size_t>(video.width) * video.height * 3;
  video.frames.reserve(count);
  for (int i = 0; i < count; ++i) {
    const fs::path p = dir / frame_name(i);
    std::ifstream in(p, std::ios::binary);
    if (!in) fail(ErrorCode::MissingFrame, "frame " + std::to_string(i) + " missing");
    Frame f(video.width, video.height);
    in.read(reinterpret_cast<char*>(f.pixels.data()), static_cast<std::streamsize>(bytes));
    if (static_cast<std::size_t>(in.gcount()) != bytes) {
      fail(ErrorCode::TruncatedFrame, "frame " + std::to_string(i) + " truncated");
    }
    if (in.peek() != std::ifstream::traits_type::eof()) {
      fail(ErrorCode::Metadata, "frame " + std::to_string(i) + " larger than declared geometry");
    }
    video.frames.push_back(std::move(f));
  }
  validate(video);
  return video;
}

void save_raw_video(const VideoFrames& video, const fs::path& dir) {
  validate(video);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::Io, "cannot create " + dir.string() + ": " + ec.message());
  {
    std::ofstream meta(dir / "meta.txt");
    meta << "width=" << video.width << "\nheight=" << video.height << "\nfps=" << video.frame_rate
         << "\nframes=" << video.frame_count() << "\n";
    if (!meta) fail(ErrorCode::Io, "cannot write " + (dir / "meta.txt").string());
  }
  for (std::size_t i = 0; i < video.frames.size(); ++i) {
    std::ofstream out(dir / frame_name(i), std::ios::binary);
    const auto& px = video.frames[i].pixels;
    out.write(reinterpret_cast<const char*>(px.data()), static_cast<std::streamsize>(px.size()));
    if (!out) fail(ErrorCode::Io, "cannot write frame " + std::to_string(i));
  }
}

}  // namespace rqvqa
