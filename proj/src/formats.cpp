// SPDX-License-Identifier: Apache-2.0
#include "mxplus/formats.hpp"

#include <algorithm>
#include <cmath>

#include "mxplus/error.hpp"

namespace mx {
namespace {

ElementFormat make_fp(std::string name, int e, int m, int bias, int e_max, double max_norm) {
  ElementFormat f;
  f.name = std::move(name);
  f.exp_bits = e;
  f.man_bits = m;
  f.bias = bias;
  f.e_max = e_max;
  f.max_norm = max_norm;
  return f;
}

ElementFormat make_int(std::string name, int frac_bits) {
  ElementFormat f;
  f.name = std::move(name);
  f.integer_mode = true;
  f.has_subnormals = false;
  f.frac_bits = frac_bits;
  f.e_max = 0;
  f.max_norm = std::ldexp(static_cast<double>((1 << (frac_bits + 1)) - 1), -frac_bits);
  return f;
}

bool is_nonfinite_pattern(uint32_t magnitude, const ElementFormat& fmt) {
  if (fmt.integer_mode) return false;
  const uint32_t field = magnitude >> fmt.man_bits;
  const uint32_t mant = magnitude & ((1u << fmt.man_bits) - 1);
  const uint32_t all_ones = (1u << fmt.exp_bits) - 1;
  if (fmt.name == "E4M3") return field == all_ones && mant == ((1u << fmt.man_bits) - 1);
  if (fmt.name == "E5M2") return field == all_ones;
  return false;
}

}  // namespace

ElementFormat ElementFormat::e2m1() { return make_fp("E2M1", 2, 1, 1, 2, 6.0); }
ElementFormat ElementFormat::e2m3() { return make_fp("E2M3", 2, 3, 1, 2, 7.5); }
ElementFormat ElementFormat::e3m2() { return make_fp("E3M2", 3, 2, 3, 4, 28.0); }
ElementFormat ElementFormat::e4m3() { return make_fp("E4M3", 4, 3, 7, 8, 448.0); }
ElementFormat ElementFormat::e5m2() { return make_fp("E5M2", 5, 2, 15, 15, 57344.0); }
ElementFormat ElementFormat::int8() { return make_int("INT8", 6); }
ElementFormat ElementFormat::int4() { return make_int("INT4", 2); }

std::optional<double> decode_element(ScalarCode code, const ElementFormat& fmt) {
  const uint32_t sign = code.bits & sign_mask(fmt);
  const uint32_t mag = code.bits & magnitude_mask(fmt);
  double v = 0.0;
  if (fmt.integer_mode) {
    v = std::ldexp(static_cast<double>(mag), -fmt.frac_bits);
  } else {
    if (is_nonfinite_pattern(mag, fmt)) return std::nullopt;
    const int field = static_cast<int>(mag >> fmt.man_bits);
    const uint32_t mant = mag & ((1u << fmt.man_bits) - 1);
    if (field == 0) {
      v = std::ldexp(static_cast<double>(mant), 1 - fmt.bias - fmt.man_bits);
    } else {
      v = std::ldexp(static_cast<double>(mant | (1u << fmt.man_bits)),
                     field - fmt.bias - fmt.man_bits);
    }
  }
  return sign ? -v : v;
}

double decode_element_or_throw(ScalarCode code, const ElementFormat& fmt) {
  auto v = decode_element(code, fmt);
  if (!v) throw Error(ErrorCode::non_finite_input, "non-finite " + fmt.name + " code");
  return *v;
}

ScalarCode encode_element(double value, const ElementFormat& fmt) {
  if (!std::isfinite(value)) throw Error(ErrorCode::non_finite_input, "cannot encode non-finite value");
  const auto width = static_cast<uint8_t>(fmt.width());
  const uint32_t sign = std::signbit(value) ? sign_mask(fmt) : 0u;
  const double a = std::fabs(value);

  if (fmt.integer_mode) {
    const double limit = static_cast<double>((1u << (fmt.frac_bits + 1)) - 1);
    double n = std::nearbyint(std::ldexp(a, fmt.frac_bits));
    if (n > limit) n = limit;
    return {sign | static_cast<uint32_t>(n), width};
  }

  const uint32_t max_code = [&] {
    // Largest finite magnitude code.
    const int field = static_cast<int>(std::ilogb(fmt.max_norm)) + fmt.bias;
    const double frac = std::ldexp(fmt.max_norm, -(field - fmt.bias)) - 1.0;
    const auto mant = static_cast<uint32_t>(std::ldexp(frac, fmt.man_bits));
    return (static_cast<uint32_t>(field) << fmt.man_bits) | mant;
  }();
  if (a >= fmt.max_norm) return {sign | max_code, width};
  if (a == 0.0) return {sign, width};

  int e = std::max(static_cast<int>(std::ilogb(a)), fmt.min_exp());
  double n = std::nearbyint(std::ldexp(a, fmt.man_bits - e));
  if (n >= std::ldexp(1.0, fmt.man_bits + 1)) {
    ++e;
    n = std::ldexp(1.0, fmt.man_bits);
  }
  if (std::ldexp(n, e - fmt.man_bits) > fmt.max_norm) return {sign | max_code, width};

  const auto ni = static_cast<uint32_t>(n);
  uint32_t mag = 0;
  if (ni >= (1u << fmt.man_bits)) {
    mag = (static_cast<uint32_t>(e + fmt.bias) << fmt.man_bits) | (ni - (1u << fmt.man_bits));
  } else {
    mag = ni;  // subnormal, exponent field zero
  }
  return {sign | mag, width};
}

double round_to_format(double value, const ElementFormat& fmt) {
  return decode_element_or_throw(encode_element(value, fmt), fmt);
}

ScaleE8M0 decode_scale_e8m0(uint8_t code) {
  if (code == kE8M0AllZero) return {ScaleE8M0::Kind::all_zero, 0};
  if (code == kE8M0Nan) return {ScaleE8M0::Kind::nan, 0};
  return {ScaleE8M0::Kind::exponent, static_cast<int>(code) - kE8M0Bias};
}

uint8_t encode_scale_e8m0(int exponent) {
  if (exponent < -kE8M0Bias || exponent > kE8M0Bias) {
    throw Error(ErrorCode::invalid_config, "E8M0 exponent out of range");
  }
  return static_cast<uint8_t>(exponent + kE8M0Bias);
}

uint8_t encode_scale_e4m3(double value) {
  if (!std::isfinite(value)) throw Error(ErrorCode::non_finite_input, "E4M3 scale must be finite");
  if (value <= 0.0) throw Error(ErrorCode::invalid_config, "E4M3 scale must be positive");
  return static_cast<uint8_t>(encode_element(value, ElementFormat::e4m3()).bits);
}

double decode_scale_e4m3(uint8_t code) {
  return decode_element_or_throw({code, 8}, ElementFormat::e4m3());
}

}  // namespace mx
