// SPDX-License-Identifier: Apache-2.0
//
// Named block formats: one handle over the MX-family, NVFP4 and legacy codecs,
// with the packed little-endian wire layout for block streams.
//
// Wire layout per block: [scale byte][element codes packed LSB-first][meta].
// MXFP4 therefore packs element 2i in the low nibble and 2i + 1 in the high
// nibble; MXFP6 packs four 6-bit codes per three bytes. NVFP4+ stores one meta
// byte after each pair of consecutive blocks (low nibble = first block's BM
// index); an odd trailing block is followed by its own meta byte.
#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mxplus/blockcodec.hpp"
#include "mxplus/legacy.hpp"

namespace mx {

enum class FormatId : uint8_t {
  mxfp4 = 1,
  mxfp4_plus,
  mxfp4_plusplus,
  mxfp6,
  mxfp6_plus,
  mxfp6_plusplus,
  mxfp6_e3m2,
  mxfp8,
  mxfp8_plus,
  mxfp8_plusplus,
  mxfp8_e5m2,
  mxint8,
  mxint8_plus,
  mxint4,
  mxint4_plus,
  nvfp4,
  nvfp4_plus,
  msfp12,
  msfp14,
  msfp16,
  smx4,
  smx6,
  smx9,
};

class Format {
 public:
  /// Throws unknown_format for names outside all_format_names().
  static Format from_name(std::string_view name);
  static Format from_id(uint8_t id);
  static const std::vector<std::string_view>& all_names();

  FormatId id() const { return id_; }
  std::string_view name() const;
  size_t block_size() const;
  Variant variant() const;
  bool is_legacy() const { return !std::holds_alternative<MxFormatConfig>(cfg_); }
  /// Underlying MX-family configuration; throws for legacy formats.
  const MxFormatConfig& mx_config() const;

  EncodedBlock encode(std::span<const double> values) const;
  std::vector<double> decode(const EncodedBlock& block) const;

  size_t element_bits() const;
  bool has_meta() const;
  size_t bytes_for_blocks(size_t block_count) const;
  /// Serialized bits per element over a stream of `block_count` blocks.
  double average_bits(size_t block_count = 1024) const;

  std::vector<uint8_t> pack(std::span<const EncodedBlock> blocks) const;
  std::vector<EncodedBlock> unpack(std::span<const uint8_t> bytes, size_t block_count) const;

 private:
  Format(FormatId id, std::variant<MxFormatConfig, MsfpConfig, SmxConfig> cfg)
      : id_(id), cfg_(std::move(cfg)) {}

  FormatId id_;
  std::variant<MxFormatConfig, MsfpConfig, SmxConfig> cfg_;
};

}  // namespace mx
