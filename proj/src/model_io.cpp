#include "gaitgate/model_io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "gaitgate/error.hpp"

namespace gaitgate {

namespace {

constexpr char kMagic[4] = {'G', 'A', 'I', 'T'};

class Writer {
 public:
  void bytes(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out_.insert(out_.end(), b, b + n);
  }
  template <typename U>
  void le(U v) {
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      out_.push_back(static_cast<std::uint8_t>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xff));
    }
  }
  void f32(float v) { le(std::bit_cast<std::uint32_t>(v)); }
  std::vector<std::uint8_t> take() { return std::move(out_); }
  std::span<const std::uint8_t> view() const { return out_; }

 private:
  std::vector<std::uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void need(std::size_t n) const {
    if (pos_ + n > in_.size()) fail(ErrorKind::kFormat, "unexpected end of file");
  }
  template <typename U>
  U le() {
    need(sizeof(U));
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) {
      v |= static_cast<std::uint64_t>(in_[pos_ + i]) << (8 * i);
    }
    pos_ += sizeof(U);
    return static_cast<U>(v);
  }
  float f32() { return std::bit_cast<float>(le<std::uint32_t>()); }
  std::span<const std::uint8_t> take(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return in_.size() - pos_; }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  crc = crc32(crc, bytes.data(), static_cast<uInt>(bytes.size()));
  return static_cast<std::uint32_t>(crc);
}

std::vector<std::uint8_t> encode_params(const ParameterSet& params) {
  Writer w;
  w.bytes(kMagic, 4);
  w.le<std::uint32_t>(kModelFormatVersion);
  w.le<std::uint32_t>(static_cast<std::uint32_t>(params.tensors.size()));
  for (const auto& t : params.tensors) {
    require(t.name.size() <= 0xffff, "tensor name too long: " + t.name);
    require(t.shape.size() <= 0xff, "tensor rank too large: " + t.name);
    require(t.values.size() == t.numel(), "tensor size does not match shape: " + t.name);
    w.le<std::uint16_t>(static_cast<std::uint16_t>(t.name.size()));
    w.bytes(t.name.data(), t.name.size());
    w.le<std::uint8_t>(static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) {
      require(d <= 0xffffffffULL, "tensor dimension too large: " + t.name);
      w.le<std::uint32_t>(static_cast<std::uint32_t>(d));
    }
    for (float v : t.values) {
      if (!std::isfinite(v)) fail(ErrorKind::kNumeric, "non-finite value in tensor " + t.name);
      w.f32(v);
    }
  }
  const std::uint32_t crc = crc32_of(w.view());
  w.le<std::uint32_t>(crc);
  return w.take();
}

ParameterSet decode_params(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  const auto magic = r.take(4);
  if (std::memcmp(magic.data(), kMagic, 4) != 0) fail(ErrorKind::kFormat, "bad magic");
  const auto version = r.le<std::uint32_t>();
  if (version != kModelFormatVersion) {
    fail(ErrorKind::kFormat, "unsupported version " + std::to_string(version) +
                                 " (expected " + std::to_string(kModelFormatVersion) + ")");
  }
  const auto count = r.le<std::uint32_t>();
  ParameterSet params;
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor<float> t;
    const auto name_len = r.le<std::uint16_t>();
    const auto name = r.take(name_len);
    t.name.assign(name.begin(), name.end());
    const auto rank = r.le<std::uint8_t>();
    for (std::uint8_t k = 0; k < rank; ++k) t.shape.push_back(r.le<std::uint32_t>());
    const std::size_t n = t.numel();
    r.need(n * 4);
    t.values.resize(n);
    for (auto& v : t.values) v = r.f32();
    params.tensors.push_back(std::move(t));
  }
  const std::size_t body_len = r.pos();
  const auto stored = r.le<std::uint32_t>();
  if (stored != crc32_of(bytes.first(body_len))) fail(ErrorKind::kFormat, "crc mismatch");
  if (r.remaining() != 0) fail(ErrorKind::kFormat, "trailing bytes after checksum");
  for (const auto& t : params.tensors) {
    for (float v : t.values) {
      if (!std::isfinite(v)) fail(ErrorKind::kFormat, "non-finite value in tensor " + t.name);
    }
  }
  return params;
}

void save_params(const ParameterSet& params, const std::filesystem::path& path) {
  const auto bytes = encode_params(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorKind::kIo, "cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorKind::kIo, "write failed: " + path.string());
}

ParameterSet load_params(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_params(bytes);
}

void save_model(const Model& model, const std::filesystem::path& path) {
  ParameterSet out = model.params;
  out.tensors.push_back({std::string(kInputShapeTensor),
                         {2},
                         {static_cast<float>(model.config.input_freq),
                          static_cast<float>(model.config.input_frames)}});
  save_params(out, path);
}

Model load_model(const std::filesystem::path& path) {
  ParameterSet params = load_params(path);
  const auto* shape = params.find(kInputShapeTensor);
  if (shape == nullptr || shape->values.size() != 2) {
    fail(ErrorKind::kFormat, "model file lacks " + std::string(kInputShapeTensor));
  }
  const auto freq = static_cast<std::size_t>(shape->values[0]);
  const auto frames = static_cast<std::size_t>(shape->values[1]);
  std::erase_if(params.tensors, [](const auto& t) { return t.name == kInputShapeTensor; });
  Model m;
  m.config = infer_config(params, freq, frames);
  m.params = std::move(params);
  return m;
}

}  // namespace gaitgate
