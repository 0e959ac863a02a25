#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>

#include <zlib.h>

#include "gaitgate/model_io.hpp"
#include "test_util.hpp"

namespace gaitgate {
namespace {

using testing::expect_error;

ParameterSet sample_params() {
  ParameterSet p;
  p.tensors.push_back({"a", {2, 3}, {1.0f, -2.5f, 3.25f, 0.0f, 1e-30f, -7.0f}});
  p.tensors.push_back({"b.bias", {1}, {0.5f}});
  return p;
}

// Independent little-endian writer for the documented layout.
std::vector<std::uint8_t> hand_encode(const ParameterSet& p, std::uint32_t version) {
  std::vector<std::uint8_t> out{'G', 'A', 'I', 'T'};
  auto u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  u32(version);
  u32(static_cast<std::uint32_t>(p.tensors.size()));
  for (const auto& t : p.tensors) {
    out.push_back(static_cast<std::uint8_t>(t.name.size()));
    out.push_back(static_cast<std::uint8_t>(t.name.size() >> 8));
    out.insert(out.end(), t.name.begin(), t.name.end());
    out.push_back(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) u32(static_cast<std::uint32_t>(d));
    for (float v : t.values) {
      std::uint32_t bits;
      std::memcpy(&bits, &v, 4);
      u32(bits);
    }
  }
  u32(static_cast<std::uint32_t>(::crc32(0L, out.data(), static_cast<uInt>(out.size()))));
  return out;
}

TEST(ModelIo, EncodingMatchesDocumentedLayout) {
  EXPECT_EQ(encode_params(sample_params()), hand_encode(sample_params(), 1));
}

TEST(ModelIo, RoundTripIsBitExact) {
  const auto p = sample_params();
  EXPECT_EQ(decode_params(encode_params(p)), p);
}

TEST(ModelIo, KnownCrc) {
  const std::string s = "123456789";
  EXPECT_EQ(crc32_of(std::span(reinterpret_cast<const std::uint8_t*>(s.data()), s.size())),
            0xCBF43926u);
}

TEST(ModelIo, BadMagic) {
  auto bytes = encode_params(sample_params());
  bytes[0] = 'X';
  expect_error([&] { decode_params(bytes); }, ErrorKind::kFormat, "bad magic");
}

TEST(ModelIo, UnsupportedVersion) {
  const auto bytes = hand_encode(sample_params(), 2);
  expect_error([&] { decode_params(bytes); }, ErrorKind::kFormat, "unsupported version");
}

TEST(ModelIo, TruncationAtEveryLength) {
  const auto bytes = encode_params(sample_params());
  for (std::size_t n = 4; n < bytes.size(); ++n) {
    std::span<const std::uint8_t> cut(bytes.data(), n);
    try {
      decode_params(cut);
      ADD_FAILURE() << "accepted " << n << " of " << bytes.size() << " bytes";
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::kFormat);
    }
  }
}

TEST(ModelIo, FlippedBitFailsCrc) {
  auto bytes = encode_params(sample_params());
  bytes[bytes.size() - 6] ^= 0x01;  // inside the last float
  expect_error([&] { decode_params(bytes); }, ErrorKind::kFormat, "crc mismatch");
}

TEST(ModelIo, TrailingBytes) {
  auto bytes = encode_params(sample_params());
  bytes.push_back(0);
  expect_error([&] { decode_params(bytes); }, ErrorKind::kFormat, "");
}

TEST(ModelIo, SaveLoadModel) {
  EncoderConfig c;
  c.init_seed = 4;
  const Model m{c, init_params(c)};
  const auto path = std::filesystem::temp_directory_path() / "gaitgate_test_model.gait";
  save_model(m, path);
  const Model back = load_model(path);
  EXPECT_EQ(back.params, m.params);
  EXPECT_EQ(back.config.input_freq, c.input_freq);
  EXPECT_EQ(back.config.input_frames, c.input_frames);
  EXPECT_EQ(back.config.conv_channels, c.conv_channels);
  // load_params sees the extra shape tensor and still verifies the CRC
  const auto raw = load_params(path);
  EXPECT_NE(raw.find(kInputShapeTensor), nullptr);
  std::filesystem::remove(path);
}

TEST(ModelIo, MissingFileIsIoError) {
  expect_error([] { load_params("/nonexistent/dir/model.gait"); }, ErrorKind::kIo, "");
}

}  // namespace
}  // namespace gaitgate
