// SPDX-License-Identifier: Apache-2.0
//
// Comparison codecs for the older shared-exponent formats:
//
//   MSFP<N>  16 elements, one 8-bit shared exponent, sign + (N - 9) magnitude
//            bits per element with no implicit leading bit.
//            value = (-1)^s * M * 2^(shared_exp - (w - 2)),  w = N - 8.
//
//   SMX<n>   16 elements, one 8-bit shared exponent plus a 1-bit
//            microexponent d per pair of elements; the pair decodes at
//            2^(shared_exp - d). Elements are sign + magnitude, MSFP style.
//
// Both reuse EncodedBlock: scale_code holds shared_exp + 127, elem_codes hold
// sign|magnitude codes, and for SMX meta holds the eight pair bits (bit p is
// the microexponent of elements 2p and 2p + 1).
#pragma once

#include <span>
#include <string>
#include <vector>

#include "mxplus/blockcodec.hpp"

namespace mx {

struct MsfpConfig {
  int total_bits = 12;  // 12, 14 or 16
  size_t block_size = 16;

  int element_bits() const { return total_bits - 8; }
  double average_bits() const { return element_bits() + 8.0 / static_cast<double>(block_size); }
  static MsfpConfig msfp(int total_bits);
};

struct SmxConfig {
  std::string name = "SMX4";
  int element_bits = 3;  // 3, 5 or 8
  size_t block_size = 16;
  size_t subgroup_size = 2;

  double average_bits() const {
    return element_bits + 8.0 / static_cast<double>(block_size) + 1.0 / static_cast<double>(subgroup_size);
  }
  /// smx(4), smx(6) or smx(9).
  static SmxConfig smx(int nominal_bits);
};

EncodedBlock msfp_encode_block(std::span<const double> values, const MsfpConfig& cfg);
std::vector<double> msfp_decode_block(const EncodedBlock& block, const MsfpConfig& cfg);

EncodedBlock smx_encode_block(std::span<const double> values, const SmxConfig& cfg);
std::vector<double> smx_decode_block(const EncodedBlock& block, const SmxConfig& cfg);

}  // namespace mx
