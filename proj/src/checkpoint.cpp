#include "rqvqa/checkpoint.hpp"

#include <zlib.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "rqvqa/error.hpp"

namespace rqvqa {

namespace {

constexpr std::uint16_t kVersion = 1;

class Writer {
 public:
  template <typename T>
  void put(T value) {
    const auto* p = reinterpret_cast<const std::byte*>(&value);
    bytes.insert(bytes.end(), p, p + sizeof(T));
  }
  void put_string(const std::string& s) {
    put<std::uint16_t>(static_cast<std::uint16_t>(s.size()));
    for (char c : s) bytes.push_back(static_cast<std::byte>(c));
  }
  std::vector<std::byte> bytes;
};

class Reader {
 public:
  explicit Reader(std::span<const std::byte> bytes) : bytes_(bytes) {}
  template <typename T>
  T get() {
    if (bytes_.size() - pos_ < sizeof(T)) fail(ErrorCode::TruncatedPayload, "checkpoint truncated");
    T value;
    std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return value;
  }
  std::string get_string() {
    const auto n = get<std::uint16_t>();
    if (bytes_.size() - pos_ < n) fail(ErrorCode::TruncatedPayload, "checkpoint truncated");
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::byte> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::byte> data) {
  uLong crc = crc32(0L, Z_NULL, 0);
  return static_cast<std::uint32_t>(
      crc32(crc, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace

std::vector<std::byte> encode_checkpoint(const Checkpoint& ckpt) {
  const fusion::Model& m = ckpt.model;
  const TrainConfig& c = ckpt.config;
  Writer w;
  for (char ch : std::string_view("RQVC")) w.bytes.push_back(static_cast<std::byte>(ch));
  w.put<std::uint16_t>(kVersion);

  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.layout.entries().size()));
  for (const auto& e : m.layout.entries()) {
    w.put<std::uint8_t>(static_cast<std::uint8_t>(e.role));
    w.put_string(e.source);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(e.granularity));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.dim));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(e.token_count));
  }
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.mlp.input_dim()));
  w.put<std::uint32_t>(static_cast<std::uint32_t>(m.mlp.hidden()));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(m.mlp.activation));
  w.put<std::uint8_t>(m.mhsa ? 1 : 0);
  w.put<std::uint32_t>(m.mhsa ? static_cast<std::uint32_t>(m.mhsa->dim) : 0);
  w.put<std::uint32_t>(m.mhsa ? static_cast<std::uint32_t>(m.mhsa->heads) : 0);

  w.put<double>(c.learning_rate);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.batch_size));
  w.put<std::int32_t>(c.epochs);
  w.put<double>(c.lr_decay_factor);
  w.put<std::int32_t>(c.lr_decay_epoch);
  w.put<double>(c.adam_beta1);
  w.put<double>(c.adam_beta2);
  w.put<double>(c.adam_epsilon);
  w.put<std::uint64_t>(c.seed);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.hidden));
  w.put<std::uint8_t>(c.use_mhsa ? 1 : 0);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(c.mhsa_heads));
  w.put<std::uint8_t>(static_cast<std::uint8_t>(c.loss));

  for (const auto t : fusion::parameters(m)) {
    for (double v : t) w.put<double>(v);
  }
  w.put<std::uint32_t>(crc_of(w.bytes));
  return std::move(w.bytes);
}

Checkpoint decode_checkpoint(std::span<const std::byte> bytes) {
  if (bytes.size() < 10 || std::memcmp(bytes.data(), "RQVC", 4) != 0) {
    fail(ErrorCode::BadMagic, "not a checkpoint (bad magic)");
  }
  std::uint32_t stored;
  std::memcpy(&stored, bytes.data() + bytes.size() - 4, 4);
  if (stored != crc_of(bytes.first(bytes.size() - 4))) fail(ErrorCode::ChecksumMismatch, "checkpoint checksum mismatch");

  Reader r(bytes.subspan(4, bytes.size() - 8));
  if (const auto v = r.get<std::uint16_t>(); v != kVersion) {
    fail(ErrorCode::VersionMismatch, "checkpoint version " + std::to_string(v) + " unsupported");
  }

  std::vector<std::pair<fusion::Role, FeatureSource>> slots;
  const auto entries = r.get<std::uint32_t>();
  for (std::uint32_t k = 0; k < entries; ++k) {
    const auto role = static_cast<fusion::Role>(r.get<std::uint8_t>());
    FeatureSource s;
    s.name = r.get_string();
    s.granularity = static_cast<Granularity>(r.get<std::uint8_t>());
    s.dim = r.get<std::uint32_t>();
    s.token_count = r.get<std::uint32_t>();
    slots.emplace_back(role, s);
  }

  Checkpoint ckpt;
  fusion::Model& m = ckpt.model;
  m.layout = fusion::ConcatLayout::build(std::move(slots));
  const auto input_dim = r.get<std::uint32_t>();
  const auto hidden = r.get<std::uint32_t>();
  if (input_dim != m.layout.total_dim()) fail(ErrorCode::LayoutMismatch, "checkpoint MLP width disagrees with its layout");
  m.mlp.w1 = Matrix(input_dim, hidden);
  m.mlp.b1.assign(hidden, 0.0);
  m.mlp.w2.assign(hidden, 0.0);
  m.mlp.activation = static_cast<fusion::Activation>(r.get<std::uint8_t>());
  const bool has_mhsa = r.get<std::uint8_t>() != 0;
  const auto mhsa_dim = r.get<std::uint32_t>();
  const auto mhsa_heads = r.get<std::uint32_t>();
  if (has_mhsa) {
    if (mhsa_heads == 0 || mhsa_dim % mhsa_heads != 0) fail(ErrorCode::LayoutMismatch, "bad attention shape");
    m.mhsa = fusion::MhsaPool{mhsa_dim, mhsa_heads, Matrix(mhsa_dim, mhsa_dim), Matrix(mhsa_dim, mhsa_dim),
                              Matrix(mhsa_dim, mhsa_dim), Matrix(mhsa_dim, mhsa_dim)};
  }

  TrainConfig& c = ckpt.config;
  c.learning_rate = r.get<double>();
  c.batch_size = r.get<std::uint32_t>();
  c.epochs = r.get<std::int32_t>();
  c.lr_decay_factor = r.get<double>();
  c.lr_decay_epoch = r.get<std::int32_t>();
  c.adam_beta1 = r.get<double>();
  c.adam_beta2 = r.get<double>();
  c.adam_epsilon = r.get<double>();
  c.seed = r.get<std::uint64_t>();
  c.hidden = r.get<std::uint32_t>();
  c.use_mhsa = r.get<std::uint8_t>() != 0;
  c.mhsa_heads = r.get<std::uint32_t>();
  c.loss = static_cast<fusion::LossKind>(r.get<std::uint8_t>());

  for (auto t : fusion::parameters(m)) {
    for (double& v : t) v = r.get<double>();
  }
  if (r.remaining() != 0) fail(ErrorCode::CountMismatch, "trailing bytes in checkpoint");
  return ckpt;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::Io, "cannot write " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::Io, "cannot open " + path.string());
  std::vector<char> raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(std::as_bytes(std::span(raw)));
}

}  // namespace rqvqa
