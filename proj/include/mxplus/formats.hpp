// SPDX-License-Identifier: Apache-2.0
//
// Scalar element encodings used inside microscaling blocks: the OCP FP4/FP6/FP8
// element types, the sign-magnitude block-integer types, and the E8M0 / E4M3
// scale codes. All encoders round to nearest, ties to even, and saturate.
#pragma once

#include <cstdint>
#include <optional>
#include <string>

namespace mx {

struct ElementFormat {
  std::string name;
  int exp_bits = 0;
  int man_bits = 0;
  int bias = 0;
  int e_max = 0;
  double max_norm = 0.0;
  bool has_subnormals = true;
  bool integer_mode = false;
  int frac_bits = 0;

  /// Total code width in bits, sign included.
  int width() const { return integer_mode ? 2 + frac_bits : 1 + exp_bits + man_bits; }
  /// Smallest normal exponent (FP) or the fixed integer-bit exponent.
  int min_exp() const { return integer_mode ? 0 : 1 - bias; }

  static ElementFormat e2m1();
  static ElementFormat e2m3();
  static ElementFormat e3m2();
  static ElementFormat e4m3();
  static ElementFormat e5m2();
  /// 1 sign + 1 integer + 6 fraction bits.
  static ElementFormat int8();
  /// 1 sign + 1 integer + 2 fraction bits.
  static ElementFormat int4();

  bool operator==(const ElementFormat& o) const { return name == o.name; }
};

struct ScalarCode {
  uint32_t bits = 0;
  uint8_t width = 0;

  bool operator==(const ScalarCode&) const = default;
};

/// Decoded value of an element code, or nullopt for the NaN/Inf patterns
/// (E4M3 S.1111.111 and the E5M2 all-ones exponent).
std::optional<double> decode_element(ScalarCode code, const ElementFormat& fmt);
double decode_element_or_throw(ScalarCode code, const ElementFormat& fmt);

ScalarCode encode_element(double value, const ElementFormat& fmt);

/// Sign bit position and the mask of the remaining bits for a format.
inline uint32_t sign_mask(const ElementFormat& fmt) { return 1u << (fmt.width() - 1); }
inline uint32_t magnitude_mask(const ElementFormat& fmt) { return sign_mask(fmt) - 1; }

struct ScaleE8M0 {
  enum class Kind { exponent, all_zero, nan };
  Kind kind = Kind::exponent;
  int exponent = 0;
};

constexpr int kE8M0Bias = 127;
constexpr uint8_t kE8M0Nan = 0xFF;
constexpr uint8_t kE8M0AllZero = 0x00;

ScaleE8M0 decode_scale_e8m0(uint8_t code);
uint8_t encode_scale_e8m0(int exponent);

/// E4M3 scale code, RNE with saturation at 448. Tiny values may round to the
/// zero code; callers choose how to treat that.
uint8_t encode_scale_e4m3(double value);
double decode_scale_e4m3(uint8_t code);

/// decode_element(encode_element(value)).
double round_to_format(double value, const ElementFormat& fmt);

}  // namespace mx
