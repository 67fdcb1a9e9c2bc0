#include <gtest/gtest.h>

#include <bit>
#include <cstring>
#include <random>

#include "oracles.hpp"
#include "rqvqa/error.hpp"
#include "rqvqa/sidecar.hpp"

using namespace rqvqa;

namespace {

SidecarSlice random_slice(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> g(0, 3), n(1, 6), d(1, 40), t(1, 5);
  SidecarSlice s;
  s.name = "src" + std::to_string(rng() % 1000);
  s.granularity = static_cast<Granularity>(g(rng));
  s.count = s.granularity == Granularity::Video ? 1 : n(rng);
  s.token_count = s.granularity == Granularity::Tokens ? t(rng) : 0;
  s.dim = d(rng);
  s.values.resize(s.rows() * s.dim);
  // arbitrary bit patterns, NaN payloads included, to test bit-exactness
  for (auto& v : s.values) v = std::bit_cast<float>(static_cast<std::uint32_t>(rng()));
  return s;
}

bool bit_equal(const SidecarSlice& a, const SidecarSlice& b) {
  return a.name == b.name && a.granularity == b.granularity && a.count == b.count && a.token_count == b.token_count &&
         a.dim == b.dim && a.values.size() == b.values.size() &&
         std::memcmp(a.values.data(), b.values.data(), a.values.size() * sizeof(float)) == 0;
}

ErrorCode decode_error(const std::vector<std::byte>& bytes) {
  try {
    decode_sidecar(bytes);
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "decode succeeded";
  return ErrorCode::InvalidArgument;
}

SidecarSlice small_slice() {
  SidecarSlice s;
  s.name = "pixelstats";
  s.granularity = Granularity::KeyFrame;
  s.count = 2;
  s.dim = 3;
  s.values = {0.f, 1.f, 2.f, 3.f, 4.f, 5.f};
  return s;
}

}  // namespace

TEST(Sidecar, HeaderLayout) {
  const auto bytes = encode_sidecar(small_slice());
  // 4 magic + 2 version + 2 name_len + 10 name + 1 gran + 12 counts + 24 payload + 4 crc
  ASSERT_EQ(bytes.size(), 59u);
  EXPECT_EQ(std::memcmp(bytes.data(), "RQVF", 4), 0);
  EXPECT_EQ(bytes[4], std::byte{1});
  EXPECT_EQ(bytes[5], std::byte{0});
  EXPECT_EQ(bytes[6], std::byte{10});
  EXPECT_EQ(bytes[18], std::byte{0});
  EXPECT_EQ(bytes[19], std::byte{2});
  EXPECT_EQ(bytes[27], std::byte{3});
}

TEST(Sidecar, RoundTripRandomMatrices) {
  std::mt19937_64 rng(99);
  for (int i = 0; i < 1000; ++i) {
    const SidecarSlice s = random_slice(rng);
    ASSERT_TRUE(bit_equal(decode_sidecar(encode_sidecar(s)), s)) << i;
  }
}

TEST(Sidecar, FileRoundTrip) {
  const auto dir = oracle::temp_dir("sidecar");
  std::mt19937_64 rng(7);
  const SidecarSlice s = random_slice(rng);
  save_sidecar(s, dir / "a.rqvf");
  EXPECT_TRUE(bit_equal(load_sidecar(dir / "a.rqvf"), s));
  EXPECT_THROW(load_sidecar(dir / "missing.rqvf"), Error);
}

TEST(Sidecar, TruncatedByOneByte) {
  auto bytes = encode_sidecar(small_slice());
  bytes.pop_back();
  try {
    decode_sidecar(bytes);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::TruncatedPayload);
    EXPECT_NE(std::string(e.what()).find("truncated payload"), std::string::npos);
  }
  for (std::size_t keep = 0; keep < bytes.size(); ++keep) {
    std::vector<std::byte> cut(bytes.begin(), bytes.begin() + keep);
    const ErrorCode c = decode_error(cut);
    EXPECT_TRUE(c == ErrorCode::TruncatedPayload || c == ErrorCode::BadMagic) << keep;
  }
}

TEST(Sidecar, CorruptionCodes) {
  const auto good = encode_sidecar(small_slice());
  auto bad = good;
  bad[0] = std::byte{'X'};
  EXPECT_EQ(decode_error(bad), ErrorCode::BadMagic);
  bad = good;
  bad[4] = std::byte{2};
  EXPECT_EQ(decode_error(bad), ErrorCode::VersionMismatch);
  bad = good;
  bad[35] ^= std::byte{0x40};
  EXPECT_EQ(decode_error(bad), ErrorCode::ChecksumMismatch);
  bad = good;
  bad.push_back(std::byte{0});
  EXPECT_EQ(decode_error(bad), ErrorCode::CountMismatch);
  bad = good;
  bad[18] = std::byte{9};
  EXPECT_EQ(decode_error(bad), ErrorCode::GranularityMismatch);
  bad = good;
  bad[19] = std::byte{3};  // count 2 -> 3 without more payload
  EXPECT_EQ(decode_error(bad), ErrorCode::TruncatedPayload);
}

TEST(Sidecar, EncodeRejectsInconsistentSlices) {
  SidecarSlice s = small_slice();
  s.values.pop_back();
  EXPECT_THROW(encode_sidecar(s), Error);
  s = small_slice();
  s.token_count = 4;
  EXPECT_THROW(encode_sidecar(s), Error);
  s = small_slice();
  s.dim = 0;
  s.values.clear();
  EXPECT_THROW(encode_sidecar(s), Error);
}

TEST(Sidecar, GranularityNames) {
  for (auto g : {Granularity::KeyFrame, Granularity::Tokens, Granularity::Chunk, Granularity::Video}) {
    EXPECT_EQ(parse_granularity(to_string(g)), g);
  }
  EXPECT_THROW(parse_granularity("frame"), Error);
}
