// SPDX-License-Identifier: Apache-2.0
#include "mxplus/legacy.hpp"

#include <algorithm>
#include <cmath>

#include "mxplus/error.hpp"

namespace mx {
namespace {

void check_block(std::span<const double> values, size_t block_size) {
  if (values.size() != block_size) throw Error(ErrorCode::size_mismatch, "block length mismatch");
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::non_finite_input, "block contains a non-finite value");
  }
}

int legacy_shared_exponent(std::span<const double> values) {
  int se = -kE8M0Bias;
  bool any = false;
  for (double v : values) {
    if (v == 0.0) continue;
    const int e = std::ilogb(v);
    se = any ? std::max(se, e) : e;
    any = true;
  }
  return std::clamp(se, -kE8M0Bias, kE8M0Bias);
}

// Sign-magnitude code for |x| on the grid M * 2^lsb_exp, M < 2^(w-1).
uint8_t encode_fixed(double x, int w, int lsb_exp) {
  const double limit = std::ldexp(1.0, w - 1) - 1.0;
  const double m = std::min(std::nearbyint(std::ldexp(std::fabs(x), -lsb_exp)), limit);
  const uint32_t sign = std::signbit(x) ? (1u << (w - 1)) : 0u;
  return static_cast<uint8_t>(sign | static_cast<uint32_t>(m));
}

double decode_fixed(uint8_t code, int w, int lsb_exp) {
  const uint32_t sign_bit = 1u << (w - 1);
  const double v = std::ldexp(static_cast<double>(code & (sign_bit - 1)), lsb_exp);
  return (code & sign_bit) ? -v : v;
}

int scale_exponent(uint8_t code) { return static_cast<int>(code) - kE8M0Bias; }

}  // namespace

MsfpConfig MsfpConfig::msfp(int total_bits) {
  if (total_bits != 12 && total_bits != 14 && total_bits != 16) {
    throw Error(ErrorCode::invalid_config, "MSFP width must be 12, 14 or 16");
  }
  return MsfpConfig{total_bits, 16};
}

SmxConfig SmxConfig::smx(int nominal_bits) {
  switch (nominal_bits) {
    case 4: return SmxConfig{"SMX4", 3, 16, 2};
    case 6: return SmxConfig{"SMX6", 5, 16, 2};
    case 9: return SmxConfig{"SMX9", 8, 16, 2};
    default: throw Error(ErrorCode::invalid_config, "SMX width must be 4, 6 or 9");
  }
}

EncodedBlock msfp_encode_block(std::span<const double> values, const MsfpConfig& cfg) {
  check_block(values, cfg.block_size);
  const int w = cfg.element_bits();
  const int se = legacy_shared_exponent(values);
  EncodedBlock out;
  out.scale_code = static_cast<uint8_t>(se + kE8M0Bias);
  out.elem_codes.reserve(values.size());
  for (double v : values) out.elem_codes.push_back(encode_fixed(v, w, se - (w - 2)));
  return out;
}

std::vector<double> msfp_decode_block(const EncodedBlock& block, const MsfpConfig& cfg) {
  if (block.elem_codes.size() != cfg.block_size) throw Error(ErrorCode::size_mismatch, "block length mismatch");
  const int w = cfg.element_bits();
  const int lsb = scale_exponent(block.scale_code) - (w - 2);
  std::vector<double> out;
  out.reserve(cfg.block_size);
  for (uint8_t c : block.elem_codes) out.push_back(decode_fixed(c, w, lsb));
  return out;
}

EncodedBlock smx_encode_block(std::span<const double> values, const SmxConfig& cfg) {
  check_block(values, cfg.block_size);
  const int w = cfg.element_bits;
  const int se = legacy_shared_exponent(values);
  const size_t bm_pair = find_block_max(values) / cfg.subgroup_size;

  EncodedBlock out;
  out.scale_code = static_cast<uint8_t>(se + kE8M0Bias);
  out.elem_codes.assign(values.size(), 0);
  uint8_t micro = 0;
  for (size_t p = 0; p * cfg.subgroup_size < values.size(); ++p) {
    const auto group = values.subspan(p * cfg.subgroup_size, cfg.subgroup_size);
    // The pair holding the BM keeps the first-level scale. Other pairs take the
    // microexponent with the lower SSE, preferring the finer one on ties.
    int d = 0;
    if (p != bm_pair) {
      double sse[2] = {0.0, 0.0};
      for (int cand = 0; cand < 2; ++cand) {
        const int lsb = se - cand - (w - 2);
        for (double v : group) {
          const double err = decode_fixed(encode_fixed(v, w, lsb), w, lsb) - v;
          sse[cand] += err * err;
        }
      }
      d = sse[1] <= sse[0] ? 1 : 0;
    }
    micro |= static_cast<uint8_t>(d << p);
    const int lsb = se - d - (w - 2);
    for (size_t i = 0; i < group.size(); ++i) {
      out.elem_codes[p * cfg.subgroup_size + i] = encode_fixed(group[i], w, lsb);
    }
  }
  out.meta = micro;
  return out;
}

std::vector<double> smx_decode_block(const EncodedBlock& block, const SmxConfig& cfg) {
  if (block.elem_codes.size() != cfg.block_size) throw Error(ErrorCode::size_mismatch, "block length mismatch");
  if (!block.meta) throw Error(ErrorCode::invalid_config, "SMX block without microexponents");
  const int w = cfg.element_bits;
  const int se = scale_exponent(block.scale_code);
  std::vector<double> out(cfg.block_size);
  for (size_t i = 0; i < cfg.block_size; ++i) {
    const int d = (*block.meta >> (i / cfg.subgroup_size)) & 1;
    out[i] = decode_fixed(block.elem_codes[i], w, se - d - (w - 2));
  }
  return out;
}

}  // namespace mx
