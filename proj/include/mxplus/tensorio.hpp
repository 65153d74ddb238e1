// SPDX-License-Identifier: Apache-2.0
//
// On-disk containers, little-endian throughout.
//
// Tensor file (.mxtn):
//   "MXTN" | u16 version=1 | u8 dtype (0 = f32) | u8 rank | rank x u32 dims |
//   f32 payload, row-major
//
// Block file (.mxbk):
//   "MXBK" | u16 version=1 | u8 format id | u8 block size | u8 variant |
//   u8 rank | rank x u32 dims | [f64 tensor scale, NVFP4 formats only] |
//   packed blocks (Format::pack layout) | u8 tail_pad
#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "json.hpp"
#include "mxplus/tensor.hpp"

namespace mx {

inline constexpr uint16_t kFileVersion = 1;

std::vector<uint8_t> serialize_tensor(const Tensor& t);
Tensor parse_tensor(std::span<const uint8_t> bytes);

std::vector<uint8_t> serialize_blocks(const EncodedTensor& et);
EncodedTensor parse_blocks(std::span<const uint8_t> bytes);

/// Size of the packed block payload inside a block file.
size_t block_payload_bytes(const EncodedTensor& et);

void write_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor read_tensor(const std::filesystem::path& path);
void write_blocks(const std::filesystem::path& path, const EncodedTensor& et);
EncodedTensor read_blocks(const std::filesystem::path& path);

enum class FileKind : uint8_t { tensor, blocks };
/// Inspects the magic bytes.
FileKind sniff_file(const std::filesystem::path& path);

std::vector<uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes);
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace mx
