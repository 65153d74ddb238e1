// SPDX-License-Identifier: Apache-2.0
#include "mxplus/format.hpp"

#include <array>

#include "mxplus/error.hpp"

namespace mx {
namespace {

struct Entry {
  FormatId id;
  std::string_view name;
};

constexpr std::array kEntries = {
    Entry{FormatId::mxfp4, "mxfp4"},
    Entry{FormatId::mxfp4_plus, "mxfp4+"},
    Entry{FormatId::mxfp4_plusplus, "mxfp4++"},
    Entry{FormatId::mxfp6, "mxfp6"},
    Entry{FormatId::mxfp6_plus, "mxfp6+"},
    Entry{FormatId::mxfp6_plusplus, "mxfp6++"},
    Entry{FormatId::mxfp6_e3m2, "mxfp6-e3m2"},
    Entry{FormatId::mxfp8, "mxfp8"},
    Entry{FormatId::mxfp8_plus, "mxfp8+"},
    Entry{FormatId::mxfp8_plusplus, "mxfp8++"},
    Entry{FormatId::mxfp8_e5m2, "mxfp8-e5m2"},
    Entry{FormatId::mxint8, "mxint8"},
    Entry{FormatId::mxint8_plus, "mxint8+"},
    Entry{FormatId::mxint4, "mxint4"},
    Entry{FormatId::mxint4_plus, "mxint4+"},
    Entry{FormatId::nvfp4, "nvfp4"},
    Entry{FormatId::nvfp4_plus, "nvfp4+"},
    Entry{FormatId::msfp12, "msfp12"},
    Entry{FormatId::msfp14, "msfp14"},
    Entry{FormatId::msfp16, "msfp16"},
    Entry{FormatId::smx4, "smx4"},
    Entry{FormatId::smx6, "smx6"},
    Entry{FormatId::smx9, "smx9"},
};

std::variant<MxFormatConfig, MsfpConfig, SmxConfig> config_for(FormatId id) {
  using EF = ElementFormat;
  using MC = MxFormatConfig;
  switch (id) {
    case FormatId::mxfp4: return MC::mx(EF::e2m1(), Variant::plain);
    case FormatId::mxfp4_plus: return MC::mx(EF::e2m1(), Variant::plus);
    case FormatId::mxfp4_plusplus: return MC::mx(EF::e2m1(), Variant::plusplus);
    case FormatId::mxfp6: return MC::mx(EF::e2m3(), Variant::plain);
    case FormatId::mxfp6_plus: return MC::mx(EF::e2m3(), Variant::plus);
    case FormatId::mxfp6_plusplus: return MC::mx(EF::e2m3(), Variant::plusplus);
    case FormatId::mxfp6_e3m2: return MC::mx(EF::e3m2(), Variant::plain);
    case FormatId::mxfp8: return MC::mx(EF::e4m3(), Variant::plain);
    case FormatId::mxfp8_plus: return MC::mx(EF::e4m3(), Variant::plus);
    case FormatId::mxfp8_plusplus: return MC::mx(EF::e4m3(), Variant::plusplus);
    case FormatId::mxfp8_e5m2: return MC::mx(EF::e5m2(), Variant::plain);
    case FormatId::mxint8: return MC::mx(EF::int8(), Variant::plain);
    case FormatId::mxint8_plus: return MC::mx(EF::int8(), Variant::plus);
    case FormatId::mxint4: return MC::mx(EF::int4(), Variant::plain);
    case FormatId::mxint4_plus: return MC::mx(EF::int4(), Variant::plus);
    case FormatId::nvfp4: return MC::nvfp4(false);
    case FormatId::nvfp4_plus: return MC::nvfp4(true);
    case FormatId::msfp12: return MsfpConfig::msfp(12);
    case FormatId::msfp14: return MsfpConfig::msfp(14);
    case FormatId::msfp16: return MsfpConfig::msfp(16);
    case FormatId::smx4: return SmxConfig::smx(4);
    case FormatId::smx6: return SmxConfig::smx(6);
    case FormatId::smx9: return SmxConfig::smx(9);
  }
  throw Error(ErrorCode::unknown_format, "unknown format id");
}

void pack_codes(std::span<const uint8_t> codes, size_t width, std::vector<uint8_t>& out) {
  const size_t base = out.size();
  out.resize(base + (codes.size() * width + 7) / 8, 0);
  size_t bit = 0;
  for (uint8_t c : codes) {
    for (size_t b = 0; b < width; ++b, ++bit) {
      if ((c >> b) & 1u) out[base + bit / 8] |= static_cast<uint8_t>(1u << (bit % 8));
    }
  }
}

std::vector<uint8_t> unpack_codes(std::span<const uint8_t> bytes, size_t count, size_t width) {
  std::vector<uint8_t> codes(count, 0);
  size_t bit = 0;
  for (size_t i = 0; i < count; ++i) {
    for (size_t b = 0; b < width; ++b, ++bit) {
      if ((bytes[bit / 8] >> (bit % 8)) & 1u) codes[i] |= static_cast<uint8_t>(1u << b);
    }
  }
  return codes;
}

}  // namespace

Format Format::from_name(std::string_view name) {
  for (const auto& e : kEntries) {
    if (e.name == name) return Format(e.id, config_for(e.id));
  }
  throw Error(ErrorCode::unknown_format, "unknown format '" + std::string(name) + "'");
}

Format Format::from_id(uint8_t id) {
  for (const auto& e : kEntries) {
    if (static_cast<uint8_t>(e.id) == id) return Format(e.id, config_for(e.id));
  }
  throw Error(ErrorCode::unknown_format, "unknown format id " + std::to_string(id));
}

const std::vector<std::string_view>& Format::all_names() {
  static const std::vector<std::string_view> names = [] {
    std::vector<std::string_view> v;
    for (const auto& e : kEntries) v.push_back(e.name);
    return v;
  }();
  return names;
}

std::string_view Format::name() const {
  for (const auto& e : kEntries) {
    if (e.id == id_) return e.name;
  }
  return "?";
}

size_t Format::block_size() const {
  return std::visit([](const auto& c) { return c.block_size; }, cfg_);
}

Variant Format::variant() const {
  if (const auto* mc = std::get_if<MxFormatConfig>(&cfg_)) return mc->variant;
  return Variant::plain;
}

const MxFormatConfig& Format::mx_config() const {
  if (const auto* mc = std::get_if<MxFormatConfig>(&cfg_)) return *mc;
  throw Error(ErrorCode::variant_mismatch, std::string(name()) + " is not an MX-family format");
}

EncodedBlock Format::encode(std::span<const double> values) const {
  if (const auto* mc = std::get_if<MxFormatConfig>(&cfg_)) return encode_block(values, *mc);
  if (const auto* ms = std::get_if<MsfpConfig>(&cfg_)) return msfp_encode_block(values, *ms);
  return smx_encode_block(values, std::get<SmxConfig>(cfg_));
}

std::vector<double> Format::decode(const EncodedBlock& block) const {
  if (const auto* mc = std::get_if<MxFormatConfig>(&cfg_)) return decode_block(block, *mc);
  if (const auto* ms = std::get_if<MsfpConfig>(&cfg_)) return msfp_decode_block(block, *ms);
  return smx_decode_block(block, std::get<SmxConfig>(cfg_));
}

size_t Format::element_bits() const {
  if (const auto* mc = std::get_if<MxFormatConfig>(&cfg_)) return static_cast<size_t>(mc->element.width());
  if (const auto* ms = std::get_if<MsfpConfig>(&cfg_)) return static_cast<size_t>(ms->element_bits());
  return static_cast<size_t>(std::get<SmxConfig>(cfg_).element_bits);
}

bool Format::has_meta() const {
  return variant() != Variant::plain || std::holds_alternative<SmxConfig>(cfg_);
}

size_t Format::bytes_for_blocks(size_t block_count) const {
  const size_t body = 1 + (block_size() * element_bits() + 7) / 8;
  if (id_ == FormatId::nvfp4_plus) return block_count * body + (block_count + 1) / 2;
  return block_count * (body + (has_meta() ? 1 : 0));
}

double Format::average_bits(size_t block_count) const {
  return static_cast<double>(bytes_for_blocks(block_count)) * 8.0 /
         static_cast<double>(block_count * block_size());
}

std::vector<uint8_t> Format::pack(std::span<const EncodedBlock> blocks) const {
  std::vector<uint8_t> out;
  out.reserve(bytes_for_blocks(blocks.size()));
  const bool paired_meta = id_ == FormatId::nvfp4_plus;
  for (size_t b = 0; b < blocks.size(); ++b) {
    const EncodedBlock& blk = blocks[b];
    if (blk.elem_codes.size() != block_size()) throw Error(ErrorCode::size_mismatch, "block length mismatch");
    if (has_meta() && !blk.meta) throw Error(ErrorCode::invalid_config, "block is missing metadata");
    out.push_back(blk.scale_code);
    pack_codes(blk.elem_codes, element_bits(), out);
    if (!paired_meta) {
      if (has_meta()) out.push_back(*blk.meta);
    } else if (b % 2 == 1) {
      out.push_back(static_cast<uint8_t>((*blocks[b - 1].meta & 0x0F) | ((*blk.meta & 0x0F) << 4)));
    } else if (b + 1 == blocks.size()) {
      out.push_back(static_cast<uint8_t>(*blk.meta & 0x0F));
    }
  }
  return out;
}

std::vector<EncodedBlock> Format::unpack(std::span<const uint8_t> bytes, size_t block_count) const {
  if (bytes.size() != bytes_for_blocks(block_count)) {
    throw Error(bytes.size() < bytes_for_blocks(block_count) ? ErrorCode::truncated : ErrorCode::size_mismatch,
                "block payload has the wrong length");
  }
  const size_t elem_bytes = (block_size() * element_bits() + 7) / 8;
  const bool paired_meta = id_ == FormatId::nvfp4_plus;
  std::vector<EncodedBlock> blocks(block_count);
  size_t pos = 0;
  for (size_t b = 0; b < block_count; ++b) {
    EncodedBlock& blk = blocks[b];
    blk.scale_code = bytes[pos++];
    blk.elem_codes = unpack_codes(bytes.subspan(pos, elem_bytes), block_size(), element_bits());
    pos += elem_bytes;
    if (!paired_meta) {
      if (has_meta()) blk.meta = bytes[pos++];
    } else if (b % 2 == 1) {
      const uint8_t m = bytes[pos++];
      blocks[b - 1].meta = static_cast<uint8_t>(m & 0x0F);
      blk.meta = static_cast<uint8_t>(m >> 4);
    } else if (b + 1 == block_count) {
      blk.meta = static_cast<uint8_t>(bytes[pos++] & 0x0F);
    }
  }
  return blocks;
}

}  // namespace mx
