#include "rqvqa/sidecar.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

#include "rqvqa/error.hpp"

namespace rqvqa {

static_assert(std::endian::native == std::endian::little, "RQVF I/O assumes a little-endian host");

std::string_view to_string(Granularity g) {
  switch (g) {
    case Granularity::KeyFrame: return "keyframe";
    case Granularity::Tokens: return "tokens";
    case Granularity::Chunk: return "chunk";
    case Granularity::Video: return "video";
  }
  return "unknown";
}

Granularity parse_granularity(std::string_view text) {
  if (text == "keyframe") return Granularity::KeyFrame;
  if (text == "tokens") return Granularity::Tokens;
  if (text == "chunk") return Granularity::Chunk;
  if (text == "video") return Granularity::Video;
  fail(ErrorCode::Config, "unknown granularity '" + std::string(text) + "'");
}

namespace {

template <typename T>
void put(std::vector<std::byte>& out, T value) {
  const auto* p = reinterpret_cast<const std::byte*>(&value);
  out.insert(out.end(), p, p + sizeof(T));
}

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}

  template <typename T>
  T get(const char* what) {
    need(sizeof(T), what);
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }

  std::span<const std::byte> take(std::size_t n, const char* what) {
    need(n, what);
    auto s = bytes_.subspan(pos_, n);
    pos_ += n;
    return s;
  }

  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  void need(std::size_t n, const char* what) {
    if (remaining() < n) fail(ErrorCode::TruncatedPayload, std::string("truncated payload (") + what + ")");
  }

  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::byte> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size()));
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::byte> encode_sidecar(const SidecarSlice& s) {
  if (s.name.empty() || s.name.size() > 0xFFFF) fail(ErrorCode::InvalidArgument, "sidecar name length out of range");
  if (s.dim == 0) fail(ErrorCode::InvalidArgument, "sidecar dim must be >= 1");
  if ((s.granularity == Granularity::Tokens) != (s.token_count > 0)) {
    fail(ErrorCode::GranularityMismatch, "token_count must be > 0 exactly for token granularity");
  }
  if (s.values.size() != s.rows() * s.dim) fail(ErrorCode::CountMismatch, "sidecar value count does not match header");

  std::vector<std::byte> out;
  out.reserve(32 + s.name.size() + s.values.size() * 4);
  for (char c : std::string_view("RQVF")) out.push_back(static_cast<std::byte>(c));
  put<std::uint16_t>(out, kSidecarVersion);
  put<std::uint16_t>(out, static_cast<std::uint16_t>(s.name.size()));
  for (char c : s.name) out.push_back(static_cast<std::byte>(c));
  put<std::uint8_t>(out, static_cast<std::uint8_t>(s.granularity));
  put<std::uint32_t>(out, s.count);
  put<std::uint32_t>(out, s.token_count);
  put<std::uint32_t>(out, s.dim);
  const std::size_t payload_at = out.size();
  const auto* p = reinterpret_cast<const std::byte*>(s.values.data());
  out.insert(out.end(), p, p + s.values.size() * sizeof(float));
  put<std::uint32_t>(out, crc_of(std::span(out).subspan(payload_at)));
  return out;
}

SidecarSlice decode_sidecar(std::span<const std::byte> bytes) {
  Reader in(bytes);
  const auto magic = in.take(4, "magic");
  if (std::memcmp(magic.data(), "RQVF", 4) != 0) fail(ErrorCode::BadMagic, "bad magic (expected RQVF)");
  const auto version = in.get<std::uint16_t>("version");
  if (version != kSidecarVersion) {
    fail(ErrorCode::VersionMismatch, "version mismatch: file has " + std::to_string(version) + ", reader supports " +
                                         std::to_string(kSidecarVersion));
  }

  SidecarSlice s;
  const auto name_len = in.get<std::uint16_t>("name length");
  const auto name = in.take(name_len, "name");
  s.name.assign(reinterpret_cast<const char*>(name.data()), name.size());
  const auto g = in.get<std::uint8_t>("granularity");
  if (g > 3) fail(ErrorCode::GranularityMismatch, "unknown granularity code " + std::to_string(g));
  s.granularity = static_cast<Granularity>(g);
  s.count = in.get<std::uint32_t>("count");
  s.token_count = in.get<std::uint32_t>("token_count");
  s.dim = in.get<std::uint32_t>("dim");
  if ((s.granularity == Granularity::Tokens) != (s.token_count > 0)) {
    fail(ErrorCode::GranularityMismatch, "token_count inconsistent with granularity");
  }
  if (s.dim == 0) fail(ErrorCode::DimMismatch, "dim mismatch: header dim is 0");

  const std::size_t n = s.rows() * s.dim;
  if (n > in.remaining() / sizeof(float)) fail(ErrorCode::TruncatedPayload, "truncated payload");
  const auto payload = in.take(n * sizeof(float), "payload");
  const auto stored_crc = in.get<std::uint32_t>("checksum");
  if (in.remaining() != 0) fail(ErrorCode::CountMismatch, "trailing bytes after checksum");
  if (stored_crc != crc_of(payload)) fail(ErrorCode::ChecksumMismatch, "checksum mismatch");
  s.values.resize(n);
  std::memcpy(s.values.data(), payload.data(), payload.size());
  return s;
}

void save_sidecar(const SidecarSlice& slice, const std::filesystem::path& path) {
  const auto bytes = encode_sidecar(slice);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
}

SidecarSlice load_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_sidecar(std::as_bytes(std::span(raw)));
}

}  // namespace rqvqa
