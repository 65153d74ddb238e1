// SPDX-License-Identifier: Apache-2.0
//
// Block-level codecs for the MX family (FP and integer element types), the
// BM-extended variants (plus / plusplus) and NVFP4.
//
// In the extended variants the block max (BM) is stored without an exponent
// field: its exponent is always the element's e_max, so the exponent bits are
// reused as additional mantissa bits. A metadata byte carries the BM index in
// bits [4:0] and, for plusplus, the NBM scale offset in bits [7:5].
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "mxplus/formats.hpp"

namespace mx {

enum class ScaleKind : uint8_t { e8m0 = 0, e4m3 = 1 };
enum class Variant : uint8_t { plain = 0, plus = 1, plusplus = 2 };

struct MxFormatConfig {
  ElementFormat element;
  size_t block_size = 32;
  ScaleKind scale_kind = ScaleKind::e8m0;
  Variant variant = Variant::plain;
  bool flush_small_blocks = false;

  /// Throws invalid_config when the combination is not a defined format.
  void validate() const;

  static MxFormatConfig mx(ElementFormat element, Variant variant);
  static MxFormatConfig nvfp4(bool plus);
};

struct EncodedBlock {
  uint8_t scale_code = 0;
  std::vector<uint8_t> elem_codes;
  std::optional<uint8_t> meta;

  bool operator==(const EncodedBlock&) const = default;
};

constexpr uint8_t make_meta(size_t bm_index, int delta) {
  return static_cast<uint8_t>((bm_index & 0x1F) | ((delta & 0x7) << 5));
}
constexpr size_t meta_bm_index(uint8_t meta) { return meta & 0x1F; }
constexpr int meta_delta(uint8_t meta) { return meta >> 5; }

/// NVFP4+ keeps the extended BM only when the E4M3 scale code exceeds this.
constexpr uint8_t kNvfp4PlainFallbackMaxScale = 0b00000010;

/// Index of the largest |x|; ties resolve to the lowest index.
size_t find_block_max(std::span<const double> values);

/// max floor(log2|x|) - e_max clamped to [-127, 127]; nullopt is the all-zero
/// flag (every value zero, or flush enabled and the BM exponent <= -127 + e_max).
std::optional<int> compute_shared_exponent(std::span<const double> values, int e_max,
                                           bool flush_small_blocks = false);

struct NbmExponent {
  std::optional<int> candidate;  // nullopt when every NBM is zero
  int shared_exp_new = 0;
  int delta = 0;
};

/// NBM scale exponent for plusplus: max2(floor(log2|x|)) - e_max + offset,
/// clipped to [shared_exp - 7, shared_exp].
NbmExponent compute_nbm_exponent(std::span<const double> values, size_t bm_index, int e_max,
                                 int shared_exp, int offset = 1);

EncodedBlock encode_block(std::span<const double> values, const MxFormatConfig& cfg);
std::vector<double> decode_block(const EncodedBlock& block, const MxFormatConfig& cfg);

EncodedBlock encode_block_nvfp4(std::span<const double> values, bool plus);

/// Position of the element stored with the extended mantissa, if any.
std::optional<size_t> extended_bm_index(const EncodedBlock& block, const MxFormatConfig& cfg);

/// Block scale exponent used for the BM (log2 of X), for E8M0 blocks that are
/// not all-zero.
int block_shared_exponent(const EncodedBlock& block, const MxFormatConfig& cfg);

struct BmSplit {
  double bm_h = 0.0;  // scaled value, on the block's E2M1 grid
  double bm_l = 0.0;
  uint8_t h_code = 0;  // E2M1 codes of bm_h / X and bm_l / X
  uint8_t l_code = 0;
  uint8_t um = 0;  // 4-bit mantissa with explicit leading one in bit 3
  uint8_t sign = 0;
};

/// Splits the extended BM of an E2M1 plus block into two E2M1-representable
/// halves whose sum is the decoded BM.
BmSplit split_bm(const EncodedBlock& block, const MxFormatConfig& cfg);

}  // namespace mx
