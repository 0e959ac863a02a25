#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "gaitgate/encoder.hpp"

namespace gaitgate {

// "GAIT" parameter file, version 1, all integers little-endian:
//   "GAIT" | u32 version | u32 tensor count |
//   per tensor: u16 name length | name bytes | u8 rank | u32 dims[rank] |
//               f32 values (row-major)
//   | u32 CRC32 of every preceding byte
inline constexpr std::uint32_t kModelFormatVersion = 1;

// Name of the extra rank-1 tensor holding (freq_bins, frames) of the input.
inline constexpr std::string_view kInputShapeTensor = "meta.input_shape";

std::vector<std::uint8_t> encode_params(const ParameterSet& params);
// Distinct kFormat messages: "bad magic", "unsupported version",
// "unexpected end of file", "crc mismatch".
ParameterSet decode_params(std::span<const std::uint8_t> bytes);

void save_params(const ParameterSet& params, const std::filesystem::path& path);
ParameterSet load_params(const std::filesystem::path& path);

// Model = encoder tensors plus the input-shape tensor.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

std::uint32_t crc32_of(std::span<const std::uint8_t> bytes);

}  // namespace gaitgate
