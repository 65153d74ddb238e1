// SPDX-License-Identifier: Apache-2.0
#include "mxplus/blockcodec.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>

#include "mxplus/error.hpp"

namespace mx {
namespace {

void require_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite_input, "block contains a non-finite value");
  }
}

int ext_bits(const ElementFormat& f) { return f.width() - 1; }

// Magnitude of an extended-mantissa BM field, in units of the block scale.
double ext_value(uint32_t field, const ElementFormat& f) {
  return std::ldexp(1.0 + std::ldexp(static_cast<double>(field), -ext_bits(f)), f.e_max);
}

// Nearest extended value to |target| that is >= floor_mag and accepted by the
// predicate. Ties go to the even field, matching RNE.
uint32_t choose_ext_field(double target, double floor_mag, const ElementFormat& f,
                          const std::function<bool(double)>& admissible) {
  const uint32_t count = 1u << ext_bits(f);
  std::optional<uint32_t> best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (uint32_t field = 0; field < count; ++field) {
    const double v = ext_value(field, f);
    if (v < floor_mag || !admissible(v)) continue;
    const double d = std::fabs(v - target);
    if (d < best_dist || (d == best_dist && (field & 1u) == 0)) {
      best = field;
      best_dist = d;
    }
  }
  if (!best) throw Error(ErrorCode::invalid_config, "no admissible extended BM value");
  return *best;
}

// Encodes NBMs on the element grid at nbm_scale and the BM with the extended
// mantissa at bm_scale. The decoded BM never falls below a decoded NBM; when
// a lower-index NBM decodes to the same magnitude, the roles are swapped so
// the stored index is always the first position holding the decoded maximum.
size_t encode_extended(std::span<const double> values, size_t bm, double bm_scale, double nbm_scale,
                       const ElementFormat& f, EncodedBlock& out,
                       const std::function<bool(double)>& admissible) {
  const size_t k = values.size();
  std::vector<double> dec(k, 0.0);
  double floor_mag = 0.0;
  for (size_t i = 0; i < k; ++i) {
    if (i == bm) continue;
    const ScalarCode c = encode_element(values[i] / nbm_scale, f);
    out.elem_codes[i] = static_cast<uint8_t>(c.bits);
    dec[i] = decode_element_or_throw(c, f) * nbm_scale;
    floor_mag = std::max(floor_mag, std::fabs(dec[i]));
  }

  const uint32_t sign = std::signbit(values[bm]) ? sign_mask(f) : 0u;
  const uint32_t field =
      choose_ext_field(std::fabs(values[bm]) / bm_scale, floor_mag / bm_scale, f, admissible);
  out.elem_codes[bm] = static_cast<uint8_t>(sign | field);
  const double bm_mag = ext_value(field, f) * bm_scale;
  dec[bm] = sign ? -bm_mag : bm_mag;

  for (size_t j = 0; j < bm; ++j) {
    if (std::fabs(dec[j]) != bm_mag) continue;
    const double units = std::ldexp(bm_mag / bm_scale, -f.e_max) - 1.0;
    const double jf = std::ldexp(units, ext_bits(f));
    const ScalarCode as_plain = encode_element(dec[bm] / nbm_scale, f);
    if (jf != std::floor(jf) || decode_element_or_throw(as_plain, f) * nbm_scale != dec[bm]) break;
    const uint32_t jsign = std::signbit(dec[j]) ? sign_mask(f) : 0u;
    out.elem_codes[j] = static_cast<uint8_t>(jsign | static_cast<uint32_t>(jf));
    out.elem_codes[bm] = static_cast<uint8_t>(as_plain.bits);
    return j;
  }
  return bm;
}

bool accept_all(double) { return true; }

EncodedBlock encode_e8m0(std::span<const double> values, const MxFormatConfig& cfg) {
  const ElementFormat& f = cfg.element;
  EncodedBlock out;
  out.elem_codes.assign(cfg.block_size, 0);
  const bool extended = cfg.variant != Variant::plain;

  auto se = compute_shared_exponent(values, f.e_max, cfg.flush_small_blocks);
  if (!se) {
    if (extended) {
      out.scale_code = kE8M0AllZero;
      out.meta = 0;
      return out;
    }
    se = -kE8M0Bias;
  }
  out.scale_code = encode_scale_e8m0(*se);

  if (!extended) {
    for (size_t i = 0; i < values.size(); ++i) {
      out.elem_codes[i] = static_cast<uint8_t>(encode_element(std::ldexp(values[i], -*se), f).bits);
    }
    return out;
  }

  const size_t bm = find_block_max(values);
  int delta = 0;
  if (cfg.variant == Variant::plusplus) delta = compute_nbm_exponent(values, bm, f.e_max, *se).delta;
  const size_t stored = encode_extended(values, bm, std::ldexp(1.0, *se), std::ldexp(1.0, *se - delta),
                                        f, out, accept_all);
  out.meta = make_meta(stored, delta);
  return out;
}

uint8_t nvfp4_scale_code(double absmax) {
  if (absmax == 0.0) return 1;
  const uint8_t code = encode_scale_e4m3(absmax / 6.0);
  return code == 0 ? uint8_t{1} : code;
}

EncodedBlock encode_e4m3(std::span<const double> values, const MxFormatConfig& cfg) {
  const ElementFormat& f = cfg.element;
  EncodedBlock out;
  out.elem_codes.assign(cfg.block_size, 0);

  double absmax = 0.0;
  for (double v : values) absmax = std::max(absmax, std::fabs(v));
  out.scale_code = nvfp4_scale_code(absmax);
  const double s = decode_scale_e4m3(out.scale_code);

  const bool extended = cfg.variant == Variant::plus && out.scale_code > kNvfp4PlainFallbackMaxScale;
  if (!extended) {
    for (size_t i = 0; i < values.size(); ++i) {
      out.elem_codes[i] = static_cast<uint8_t>(encode_element(values[i] / s, f).bits);
    }
    if (cfg.variant == Variant::plus) out.meta = 0;
    return out;
  }

  // Restrict the BM to values that reproduce the same scale code on re-encode.
  const uint8_t code = out.scale_code;
  auto same_scale = [code, s](double ext) { return nvfp4_scale_code(ext * s) == code; };
  const size_t stored = encode_extended(values, find_block_max(values), s, s, f, out, same_scale);
  out.meta = static_cast<uint8_t>(stored & 0x0F);
  return out;
}

}  // namespace

void MxFormatConfig::validate() const {
  if (element.width() > 8) throw Error(ErrorCode::invalid_config, "element wider than 8 bits");
  if (scale_kind == ScaleKind::e8m0) {
    if (block_size != 32) throw Error(ErrorCode::invalid_config, "MX blocks hold 32 elements");
  } else {
    if (block_size != 16) throw Error(ErrorCode::invalid_config, "NVFP4 blocks hold 16 elements");
    if (!(element == ElementFormat::e2m1())) {
      throw Error(ErrorCode::invalid_config, "NVFP4 elements are E2M1");
    }
    if (variant == Variant::plusplus) {
      throw Error(ErrorCode::invalid_config, "plusplus requires an E8M0 scale");
    }
  }
}

MxFormatConfig MxFormatConfig::mx(ElementFormat element, Variant variant) {
  MxFormatConfig cfg;
  cfg.element = std::move(element);
  cfg.block_size = 32;
  cfg.scale_kind = ScaleKind::e8m0;
  cfg.variant = variant;
  cfg.flush_small_blocks = variant != Variant::plain;
  return cfg;
}

MxFormatConfig MxFormatConfig::nvfp4(bool plus) {
  MxFormatConfig cfg;
  cfg.element = ElementFormat::e2m1();
  cfg.block_size = 16;
  cfg.scale_kind = ScaleKind::e4m3;
  cfg.variant = plus ? Variant::plus : Variant::plain;
  return cfg;
}

size_t find_block_max(std::span<const double> values) {
  size_t best = 0;
  for (size_t i = 1; i < values.size(); ++i) {
    if (std::fabs(values[i]) > std::fabs(values[best])) best = i;
  }
  return best;
}

std::optional<int> compute_shared_exponent(std::span<const double> values, int e_max,
                                           bool flush_small_blocks) {
  if (values.empty()) throw Error(ErrorCode::size_mismatch, "empty block");
  require_finite(values);
  std::optional<int> max_exp;
  for (double v : values) {
    if (v == 0.0) continue;
    const int e = std::ilogb(v);
    if (!max_exp || e > *max_exp) max_exp = e;
  }
  if (!max_exp) return std::nullopt;
  if (flush_small_blocks && *max_exp <= -kE8M0Bias + e_max) return std::nullopt;
  return std::clamp(*max_exp - e_max, -kE8M0Bias, kE8M0Bias);
}

NbmExponent compute_nbm_exponent(std::span<const double> values, size_t bm_index, int e_max,
                                 int shared_exp, int offset) {
  NbmExponent out;
  std::optional<int> max2;
  for (size_t i = 0; i < values.size(); ++i) {
    if (i == bm_index || values[i] == 0.0) continue;
    const int e = std::ilogb(values[i]);
    if (!max2 || e > *max2) max2 = e;
  }
  out.shared_exp_new = shared_exp;
  if (!max2) return out;
  out.candidate = *max2 - e_max + offset;
  out.shared_exp_new = std::clamp(*out.candidate, shared_exp - 7, shared_exp);
  out.delta = shared_exp - out.shared_exp_new;
  return out;
}

EncodedBlock encode_block(std::span<const double> values, const MxFormatConfig& cfg) {
  cfg.validate();
  if (values.size() != cfg.block_size) throw Error(ErrorCode::size_mismatch, "block length mismatch");
  require_finite(values);
  return cfg.scale_kind == ScaleKind::e8m0 ? encode_e8m0(values, cfg) : encode_e4m3(values, cfg);
}

EncodedBlock encode_block_nvfp4(std::span<const double> values, bool plus) {
  return encode_block(values, MxFormatConfig::nvfp4(plus));
}

int block_shared_exponent(const EncodedBlock& block, const MxFormatConfig& cfg) {
  if (cfg.scale_kind != ScaleKind::e8m0) throw Error(ErrorCode::invalid_config, "not an E8M0 block");
  const ScaleE8M0 sc = decode_scale_e8m0(block.scale_code);
  if (sc.kind == ScaleE8M0::Kind::nan) throw Error(ErrorCode::nan_scale, "E8M0 NaN scale");
  return sc.kind == ScaleE8M0::Kind::all_zero ? -kE8M0Bias : sc.exponent;
}

std::optional<size_t> extended_bm_index(const EncodedBlock& block, const MxFormatConfig& cfg) {
  if (cfg.variant == Variant::plain || !block.meta) return std::nullopt;
  if (cfg.scale_kind == ScaleKind::e8m0) {
    if (block.scale_code == kE8M0AllZero) return std::nullopt;
    return meta_bm_index(*block.meta);
  }
  if (block.scale_code <= kNvfp4PlainFallbackMaxScale) return std::nullopt;
  return static_cast<size_t>(*block.meta & 0x0F);
}

std::vector<double> decode_block(const EncodedBlock& block, const MxFormatConfig& cfg) {
  cfg.validate();
  const ElementFormat& f = cfg.element;
  if (block.elem_codes.size() != cfg.block_size) {
    throw Error(ErrorCode::size_mismatch, "block length mismatch");
  }
  if (cfg.variant != Variant::plain && !block.meta) {
    throw Error(ErrorCode::invalid_config, "extended block without metadata");
  }
  std::vector<double> out(cfg.block_size, 0.0);

  double bm_scale = 1.0;
  double nbm_scale = 1.0;
  if (cfg.scale_kind == ScaleKind::e8m0) {
    const ScaleE8M0 sc = decode_scale_e8m0(block.scale_code);
    if (sc.kind == ScaleE8M0::Kind::nan) throw Error(ErrorCode::nan_scale, "E8M0 NaN scale");
    if (sc.kind == ScaleE8M0::Kind::all_zero && cfg.variant != Variant::plain) return out;
    const int se = sc.kind == ScaleE8M0::Kind::all_zero ? -kE8M0Bias : sc.exponent;
    const int delta = cfg.variant == Variant::plusplus ? meta_delta(*block.meta) : 0;
    bm_scale = std::ldexp(1.0, se);
    nbm_scale = std::ldexp(1.0, se - delta);
  } else {
    const auto s = decode_element(ScalarCode{block.scale_code, 8}, ElementFormat::e4m3());
    if (!s) throw Error(ErrorCode::nan_scale, "E4M3 NaN scale");
    bm_scale = nbm_scale = *s;
  }

  const auto bm = extended_bm_index(block, cfg);
  for (size_t i = 0; i < cfg.block_size; ++i) {
    const uint32_t code = block.elem_codes[i];
    if (bm && i == *bm) {
      const double mag = ext_value(code & magnitude_mask(f), f) * bm_scale;
      out[i] = (code & sign_mask(f)) ? -mag : mag;
    } else {
      out[i] = decode_element_or_throw({code, static_cast<uint8_t>(f.width())}, f) * nbm_scale;
    }
  }
  return out;
}

BmSplit split_bm(const EncodedBlock& block, const MxFormatConfig& cfg) {
  if (cfg.variant != Variant::plus || !(cfg.element == ElementFormat::e2m1())) {
    throw Error(ErrorCode::variant_mismatch, "BM split needs an E2M1 plus block");
  }
  const auto bm = extended_bm_index(block, cfg);
  if (!bm) throw Error(ErrorCode::invalid_config, "block carries no extended BM");

  const ElementFormat f = cfg.element;
  const double scale = cfg.scale_kind == ScaleKind::e8m0
                           ? std::ldexp(1.0, block_shared_exponent(block, cfg))
                           : decode_scale_e4m3(block.scale_code);
  const uint8_t code = block.elem_codes[*bm];
  BmSplit out;
  out.sign = (code & sign_mask(f)) ? 1 : 0;
  out.um = static_cast<uint8_t>(0x8 | (code & magnitude_mask(f)));
  // um[3:2] weighs 2^e_max * 2^-1 per unit, um[1:0] weighs 2^(e_max-2) * 2^-1.
  const double hi = std::ldexp(static_cast<double>(out.um >> 2), f.e_max - 1);
  const double lo = std::ldexp(static_cast<double>(out.um & 0x3), f.e_max - 3);
  const double sgn = out.sign ? -1.0 : 1.0;
  out.h_code = static_cast<uint8_t>(encode_element(sgn * hi, f).bits);
  out.l_code = static_cast<uint8_t>(encode_element(sgn * lo, f).bits);
  out.bm_h = sgn * hi * scale;
  out.bm_l = sgn * lo * scale;
  return out;
}

}  // namespace mx
