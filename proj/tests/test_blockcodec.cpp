// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "mxplus/blockcodec.hpp"
#include "mxplus/error.hpp"
#include "mxplus/format.hpp"
#include "mxplus/tensor.hpp"

using mx::ElementFormat;
using mx::EncodedBlock;
using mx::MxFormatConfig;
using mx::Variant;

namespace {

std::vector<double> golden_block() {
  std::vector<double> v(32, 0.0);
  v[0] = 8.44;
  v[1] = 0.99;
  v[2] = -0.39;
  return v;
}

double sse(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

std::vector<double> random_block(std::mt19937_64& rng, size_t k, bool outlier) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::uniform_int_distribution<int> e(-6, 6);
  const double scale = std::ldexp(1.0, e(rng));
  std::vector<double> v(k);
  for (auto& x : v) x = g(rng) * scale;
  if (outlier) v[rng() % k] *= 64.0;
  return v;
}

}  // namespace

TEST(SharedExponent, Examples) {
  EXPECT_EQ(mx::compute_shared_exponent(golden_block(), 2), 1);
  EXPECT_FALSE(mx::compute_shared_exponent(std::vector<double>(32, 0.0), 2).has_value());
  std::vector<double> one(32, 0.0);
  one[5] = 1.0;
  EXPECT_EQ(mx::compute_shared_exponent(one, 2), -2);
}

TEST(SharedExponent, FlushAndClamp) {
  std::vector<double> tiny(32, 0.0);
  tiny[0] = std::ldexp(1.0, -126);
  EXPECT_FALSE(mx::compute_shared_exponent(tiny, 2, true).has_value());
  EXPECT_EQ(mx::compute_shared_exponent(tiny, 2, false), -127);
  tiny[0] = std::ldexp(1.0, -124);
  EXPECT_EQ(mx::compute_shared_exponent(tiny, 2, true), -126);
  std::vector<double> bad(32, 0.0);
  bad[3] = std::nan("");
  EXPECT_THROW(mx::compute_shared_exponent(bad, 2), mx::Error);
}

TEST(BlockCodec, GoldenWalkthrough) {
  const auto values = golden_block();
  const auto plain = MxFormatConfig::mx(ElementFormat::e2m1(), Variant::plain);
  const auto dp = mx::decode_block(mx::encode_block(values, plain), plain);
  EXPECT_EQ(dp[2], 0.0);

  const auto nbm0 = mx::compute_nbm_exponent(values, 0, 2, 1, 0);
  EXPECT_EQ(nbm0.candidate, -3);
  EXPECT_EQ(std::ldexp(0.99, 3), 7.92);
  EXPECT_EQ(mx::round_to_format(7.92, ElementFormat::e2m1()), 6.0);
  const auto nbm = mx::compute_nbm_exponent(values, 0, 2, 1);
  EXPECT_EQ(nbm.shared_exp_new, -2);
  EXPECT_EQ(nbm.delta, 3);

  const auto pp = MxFormatConfig::mx(ElementFormat::e2m1(), Variant::plusplus);
  const auto blk = mx::encode_block(values, pp);
  ASSERT_TRUE(blk.meta.has_value());
  EXPECT_EQ(mx::meta_delta(*blk.meta), 3);
  EXPECT_EQ(mx::meta_bm_index(*blk.meta), 0u);
  EXPECT_EQ(blk.scale_code, 128);
  EXPECT_EQ(std::ldexp(0.99, 2), 3.96);
  const auto d = mx::decode_block(blk, pp);
  EXPECT_EQ(d[1], 1.0);
  EXPECT_EQ(d[2], -0.375);
  EXPECT_EQ(std::ldexp(d[2], 2), -1.5);
}

TEST(BlockCodec, AllZeroBlocks) {
  const std::vector<double> zeros(32, 0.0);
  for (auto v : {Variant::plain, Variant::plus, Variant::plusplus}) {
    const auto cfg = MxFormatConfig::mx(ElementFormat::e2m1(), v);
    const auto blk = mx::encode_block(zeros, cfg);
    EXPECT_EQ(blk.scale_code, 0x00);
    for (auto c : blk.elem_codes) EXPECT_EQ(c, 0);
    if (v != Variant::plain) EXPECT_EQ(blk.meta, uint8_t{0});
    for (double x : mx::decode_block(blk, cfg)) EXPECT_EQ(x, 0.0);
  }
}

TEST(BlockCodec, ExtendedBmDecode) {
  const auto cfg = MxFormatConfig::mx(ElementFormat::e2m1(), Variant::plus);
  EncodedBlock blk;
  blk.scale_code = 0x7F;
  blk.elem_codes.assign(32, 0);
  blk.elem_codes[3] = 0b0011;
  blk.meta = mx::make_meta(3, 0);
  const auto d = mx::decode_block(blk, cfg);
  EXPECT_EQ(d[3], 5.5);

  std::vector<double> v(32, 0.25);
  v[3] = 5.5;
  const auto enc = mx::encode_block(v, cfg);
  EXPECT_EQ(enc.elem_codes[3], 0b0011);
  EXPECT_EQ(mx::meta_bm_index(*enc.meta), 3u);
  EXPECT_EQ(mx::decode_block(enc, cfg)[3], 5.5);
}

TEST(BlockCodec, NanScaleRejected) {
  const auto cfg = MxFormatConfig::mx(ElementFormat::e2m1(), Variant::plus);
  EncodedBlock blk{0xFF, std::vector<uint8_t>(32, 0), uint8_t{0}};
  try {
    mx::decode_block(blk, cfg);
    FAIL();
  } catch (const mx::Error& e) {
    EXPECT_EQ(e.code(), mx::ErrorCode::nan_scale);
  }
}

TEST(BlockCodec, InputErrors) {
  const auto cfg = MxFormatConfig::mx(ElementFormat::e2m1(), Variant::plain);
  EXPECT_THROW(mx::encode_block(std::vector<double>(31, 1.0), cfg), mx::Error);
  std::vector<double> v(32, 1.0);
  v[7] = INFINITY;
  EXPECT_THROW(mx::encode_block(v, cfg), mx::Error);
  auto bad = cfg;
  bad.block_size = 16;
  EXPECT_THROW(bad.validate(), mx::Error);
  auto nv = MxFormatConfig::nvfp4(true);
  nv.variant = Variant::plusplus;
  EXPECT_THROW(nv.validate(), mx::Error);
}

TEST(BmSplit, Examples) {
  const auto cfg = MxFormatConfig::mx(ElementFormat::e2m1(), Variant::plus);
  EncodedBlock blk{0x7F, std::vector<uint8_t>(32, 0), mx::make_meta(3, 0)};
  blk.elem_codes[3] = 0b0011;
  auto s = mx::split_bm(blk, cfg);
  EXPECT_EQ(s.bm_h, 4.0);
  EXPECT_EQ(s.bm_l, 1.5);
  EXPECT_EQ(s.um, 0b1011);
  blk.elem_codes[3] = 0b0000;
  s = mx::split_bm(blk, cfg);
  EXPECT_EQ(s.bm_h, 4.0);
  EXPECT_EQ(s.bm_l, 0.0);

  const auto plain = MxFormatConfig::mx(ElementFormat::e2m1(), Variant::plain);
  EXPECT_THROW(mx::split_bm(blk, plain), mx::Error);
}

TEST(BmSplit, ExhaustiveMantissas) {
  const auto cfg = MxFormatConfig::mx(ElementFormat::e2m1(), Variant::plus);
  const auto e2m1 = ElementFormat::e2m1();
  for (uint8_t m = 0; m < 8; ++m) {
    EncodedBlock blk{0x7F, std::vector<uint8_t>(32, 0), mx::make_meta(0, 0)};
    blk.elem_codes[0] = m;
    const double bm = mx::decode_block(blk, cfg)[0];
    const auto s = mx::split_bm(blk, cfg);
    EXPECT_EQ(s.bm_h + s.bm_l, bm);
    EXPECT_EQ(mx::round_to_format(s.bm_h, e2m1), s.bm_h);
    EXPECT_EQ(mx::round_to_format(s.bm_l, e2m1), s.bm_l);
  }
}

TEST(BlockCodec, MxInt) {
  std::vector<double> v(32, 0.0);
  v[4] = 1.8125;
  v[9] = -0.25;
  const auto plain = MxFormatConfig::mx(ElementFormat::int8(), Variant::plain);
  const auto bp = mx::encode_block(v, plain);
  EXPECT_EQ(bp.scale_code, 127);
  EXPECT_EQ(bp.elem_codes[4], 116);
  const auto plus = MxFormatConfig::mx(ElementFormat::int8(), Variant::plus);
  const auto bq = mx::encode_block(v, plus);
  EXPECT_EQ(bq.elem_codes[4], 104);
  EXPECT_EQ(mx::decode_block(bq, plus)[4], 1.8125);

  v[4] = 1.875;
  const auto p4 = MxFormatConfig::mx(ElementFormat::int4(), Variant::plus);
  const auto b4 = mx::encode_block(v, p4);
  EXPECT_EQ(b4.elem_codes[4] & 0x7, 0b111);
  EXPECT_EQ(mx::decode_block(b4, p4)[4], 1.875);
  const auto i4 = MxFormatConfig::mx(ElementFormat::int4(), Variant::plain);
  EXPECT_EQ(mx::decode_block(mx::encode_block(v, i4), i4)[4], 1.75);
}

TEST(BlockCodec, Nvfp4) {
  const auto plain = MxFormatConfig::nvfp4(false);
  const auto plus = MxFormatConfig::nvfp4(true);
  std::vector<double> v(16, 0.3);
  v[2] = 6.0;
  const auto b = mx::encode_block_nvfp4(v, false);
  EXPECT_EQ(mx::decode_scale_e4m3(b.scale_code), 1.0);
  EXPECT_EQ(mx::decode_block(b, plain)[2], 6.0);

  // absmax 5.5 gives scale 0.9375; 5.5 / 0.9375 sits nearest 6 on both grids.
  v[2] = 5.5;
  auto bp = mx::encode_block_nvfp4(v, true);
  auto b0 = mx::encode_block_nvfp4(v, false);
  EXPECT_EQ(mx::decode_scale_e4m3(bp.scale_code), 0.9375);
  EXPECT_EQ(mx::decode_block(bp, plus)[2], 5.625);
  EXPECT_EQ(mx::decode_block(b0, plain)[2], 5.625);
  EXPECT_LE(sse(mx::decode_block(bp, plus), v), sse(mx::decode_block(b0, plain), v));
  EXPECT_EQ(bp.meta, uint8_t{2});

  // Scale code 3 (3 * 2^-9) with the BM at 6.5 scale units: 1.101b * 2^2 is exact.
  std::fill(v.begin(), v.end(), std::ldexp(1.0, -9));
  v[7] = -std::ldexp(19.5, -9);
  bp = mx::encode_block_nvfp4(v, true);
  b0 = mx::encode_block_nvfp4(v, false);
  EXPECT_EQ(bp.scale_code, 3);
  EXPECT_EQ(bp.elem_codes[7], 0b1101);
  EXPECT_EQ(mx::decode_block(bp, plus)[7], v[7]);
  EXPECT_LT(sse(mx::decode_block(bp, plus), v), sse(mx::decode_block(b0, plain), v));
}

TEST(BlockCodec, Nvfp4Fallback) {
  // absmax / 6 = 2^-8 rounds to E4M3 code 0b00000010.
  std::vector<double> v(16, 0.0);
  v[5] = 6.0 * std::ldexp(1.0, -8);
  v[6] = -0.004;
  v[9] = 0.0011;
  const auto bp = mx::encode_block_nvfp4(v, true);
  const auto b0 = mx::encode_block_nvfp4(v, false);
  EXPECT_LE(bp.scale_code, mx::kNvfp4PlainFallbackMaxScale);
  EXPECT_EQ(bp.scale_code, b0.scale_code);
  EXPECT_EQ(bp.elem_codes, b0.elem_codes);
  EXPECT_FALSE(mx::extended_bm_index(bp, MxFormatConfig::nvfp4(true)).has_value());
  EXPECT_EQ(mx::decode_block(bp, MxFormatConfig::nvfp4(true)), mx::decode_block(b0, MxFormatConfig::nvfp4(false)));
}

TEST(BlockCodecProperty, DominanceOrderingIdempotence) {
  std::mt19937_64 rng(1234);
  const std::vector<std::pair<std::string, std::string>> chains = {
      {"mxfp4", "mxfp4+"}, {"mxfp4+", "mxfp4++"}, {"mxfp6", "mxfp6+"}, {"mxfp6+", "mxfp6++"},
      {"mxfp8", "mxfp8+"}, {"mxint8", "mxint8+"}, {"mxint4", "mxint4+"}, {"nvfp4", "nvfp4+"}};
  for (const auto& [base_name, ext_name] : chains) {
    const auto base = mx::Format::from_name(base_name);
    const auto ext = mx::Format::from_name(ext_name);
    const auto& cfg = ext.mx_config();
    for (int i = 0; i < 3000; ++i) {
      const auto v = random_block(rng, base.block_size(), i % 10 == 0);
      const auto eb = ext.encode(v);
      const auto db = base.decode(base.encode(v));
      const auto de = ext.decode(eb);
      ASSERT_LE(sse(de, v), sse(db, v)) << ext_name << " block " << i;

      if (const auto bm = mx::extended_bm_index(eb, cfg)) {
        for (double x : de) ASSERT_LE(std::fabs(x), std::fabs(de[*bm])) << ext_name;
      }
      // Plain NVFP4 itself is not idempotent once the scale reaches code 2.
      const bool tiny_nv = cfg.scale_kind == mx::ScaleKind::e4m3 && eb.scale_code <= 2;
      if (cfg.variant == Variant::plus && !tiny_nv) {
        ASSERT_EQ(ext.encode(de), eb) << ext_name << " block " << i;
      }
    }
  }
}

TEST(BlockCodecProperty, FlushConsistency) {
  std::mt19937_64 rng(5);
  for (const char* name : {"mxfp4+", "mxfp4++", "mxfp6+", "mxfp8+", "mxint8+"}) {
    const auto f = mx::Format::from_name(name);
    const int e_max = f.mx_config().element.e_max;
    for (int i = 0; i < 200; ++i) {
      auto v = random_block(rng, 32, false);
      double amax = 0.0;
      for (double x : v) amax = std::max(amax, std::fabs(x));
      // Shift the block so its BM exponent lands at or below -127 + e_max.
      const int shift = -127 + e_max - std::ilogb(amax) - static_cast<int>(rng() % 5);
      for (auto& x : v) x = std::ldexp(x, shift);
      const auto b = f.encode(v);
      EXPECT_EQ(b.scale_code, 0x00) << name;
      for (double x : f.decode(b)) EXPECT_EQ(x, 0.0);
    }
  }
}

TEST(WireFormat, Mxfp4NibbleLayout) {
  const auto f = mx::Format::from_name("mxfp4");
  EncodedBlock blk{0x7F, {}, std::nullopt};
  for (int i = 0; i < 32; ++i) blk.elem_codes.push_back(static_cast<uint8_t>(i % 16));
  const auto bytes = f.pack(std::vector<EncodedBlock>{blk});
  ASSERT_EQ(bytes.size(), 17u);
  EXPECT_EQ(bytes[0], 0x7F);
  const uint8_t expected[8] = {0b00010000, 0b00110010, 0b01010100, 0b01110110,
                               0b10011000, 0b10111010, 0b11011100, 0b11111110};
  for (int i = 0; i < 8; ++i) EXPECT_EQ(bytes[1 + i], expected[i]);
}

TEST(WireFormat, Mxfp6Packing) {
  const auto f = mx::Format::from_name("mxfp6+");
  EncodedBlock blk{0x80, std::vector<uint8_t>(32, 0), mx::make_meta(31, 0)};
  blk.elem_codes[0] = 0x3F;
  blk.elem_codes[1] = 0x01;
  const auto bytes = f.pack(std::vector<EncodedBlock>{blk});
  ASSERT_EQ(bytes.size(), 1u + 24u + 1u);
  EXPECT_EQ(bytes[1], 0x7F);  // code0 in bits 0..5, low bit of code1 in bit 6
  EXPECT_EQ(bytes[2], 0x00);
  EXPECT_EQ(bytes[25], 31);
}

TEST(WireFormat, Nvfp4PlusPairsMeta) {
  const auto f = mx::Format::from_name("nvfp4+");
  std::vector<EncodedBlock> blocks(3, EncodedBlock{0x38, std::vector<uint8_t>(16, 0), uint8_t{0}});
  blocks[0].meta = 5;
  blocks[1].meta = 12;
  blocks[2].meta = 9;
  const auto bytes = f.pack(blocks);
  ASSERT_EQ(bytes.size(), f.bytes_for_blocks(3));
  ASSERT_EQ(bytes.size(), 3u * 9u + 2u);
  EXPECT_EQ(bytes[18], 5 | (12 << 4));
  EXPECT_EQ(bytes[28], 9);
  EXPECT_EQ(f.unpack(bytes, 3), blocks);
}

TEST(WireFormat, PackUnpackAllFormats) {
  std::mt19937_64 rng(99);
  for (auto name : mx::Format::all_names()) {
    const auto f = mx::Format::from_name(name);
    std::vector<EncodedBlock> blocks;
    for (int i = 0; i < 7; ++i) blocks.push_back(f.encode(random_block(rng, f.block_size(), i == 3)));
    const auto bytes = f.pack(blocks);
    EXPECT_EQ(bytes.size(), f.bytes_for_blocks(blocks.size())) << name;
    EXPECT_EQ(f.unpack(bytes, blocks.size()), blocks) << name;
    EXPECT_THROW(f.unpack(std::span(bytes).first(bytes.size() - 1), blocks.size()), mx::Error);
  }
}

TEST(WireFormat, AverageBits) {
  EXPECT_DOUBLE_EQ(mx::Format::from_name("mxfp4").average_bits(), 4.25);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("mxfp4+").average_bits(), 4.5);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("mxfp6").average_bits(), 6.25);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("mxfp8").average_bits(), 8.25);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("nvfp4").average_bits(), 4.5);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("nvfp4+").average_bits(), 4.75);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("msfp12").average_bits(), 4.5);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("msfp16").average_bits(), 8.5);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("smx4").average_bits(), 4.0);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("smx6").average_bits(), 6.0);
  EXPECT_DOUBLE_EQ(mx::Format::from_name("smx9").average_bits(), 9.0);
}

TEST(EncodeTensor, BlockingAndPadding) {
  const auto f = mx::Format::from_name("mxfp4");
  auto et = mx::encode_tensor(mx::Tensor::zeros({1, 64}), f);
  EXPECT_EQ(et.blocks.size(), 2u);
  EXPECT_EQ(et.tail_pad, 0u);

  std::vector<double> data(40);
  for (size_t i = 0; i < data.size(); ++i) data[i] = 0.1 * static_cast<double>(i) - 1.7;
  et = mx::encode_tensor(mx::Tensor({1, 40}, data), f);
  EXPECT_EQ(et.blocks.size(), 2u);
  EXPECT_EQ(et.tail_pad, 24u);
  const auto row = mx::decode_row_unscaled(et, 0);
  for (size_t i = 40; i < 64; ++i) EXPECT_EQ(row[i], 0.0);
  const auto back = mx::decode_tensor(et);
  EXPECT_EQ(back.shape, (std::vector<size_t>{1, 40}));

  EXPECT_THROW(mx::encode_tensor(mx::Tensor{}, f), mx::Error);
}

TEST(EncodeTensor, MatchesBlockCodec) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 2.0);
  std::vector<double> data(8 * 128);
  for (auto& x : data) x = g(rng);
  const mx::Tensor t({8, 128}, data);
  for (const char* name : {"mxfp4", "mxfp4++", "nvfp4+", "smx4"}) {
    const auto f = mx::Format::from_name(name);
    const auto back = mx::decode_tensor(mx::encode_tensor(t, f));
    const size_t k = f.block_size();
    for (size_t r = 0; r < 8; ++r) {
      for (size_t b = 0; b < 128 / k; ++b) {
        const std::span<const double> src(data.data() + r * 128 + b * k, k);
        const auto ref = f.decode(f.encode(src));
        for (size_t i = 0; i < k; ++i) ASSERT_EQ(back.at(r, b * k + i), ref[i]) << name;
      }
    }
  }
}

TEST(EncodeTensor, TensorScaleOnlyForNvfp4) {
  const mx::Tensor t({1, 16}, std::vector<double>(16, 1e-4));
  EXPECT_THROW(mx::encode_tensor(t, mx::Format::from_name("mxfp4"), 2.0), mx::Error);
  const auto et = mx::encode_tensor(t, mx::Format::from_name("nvfp4+"), 4096.0);
  EXPECT_GT(et.blocks[0].scale_code, mx::kNvfp4PlainFallbackMaxScale);
  EXPECT_NEAR(mx::decode_tensor(et).data[0], 1e-4, 1e-5);
}
