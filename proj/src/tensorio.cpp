// SPDX-License-Identifier: Apache-2.0
#include "mxplus/tensorio.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "mxplus/error.hpp"

namespace mx {
namespace {

constexpr char kTensorMagic[4] = {'M', 'X', 'T', 'N'};
constexpr char kBlockMagic[4] = {'M', 'X', 'B', 'K'};
constexpr uint8_t kDtypeF32 = 0;

class Writer {
 public:
  void bytes(const char* p, size_t n) { out_.insert(out_.end(), p, p + n); }
  void u8(uint8_t v) { out_.push_back(v); }
  void u16(uint16_t v) { le(v, 2); }
  void u32(uint32_t v) { le(v, 4); }
  void f32(float v) { le(std::bit_cast<uint32_t>(v), 4); }
  void f64(double v) { le(std::bit_cast<uint64_t>(v), 8); }
  void append(std::span<const uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
  std::vector<uint8_t> take() { return std::move(out_); }

 private:
  void le(uint64_t v, int n) {
    for (int i = 0; i < n; ++i) out_.push_back(static_cast<uint8_t>(v >> (8 * i)));
  }
  std::vector<uint8_t> out_;
};

class Reader {
 public:
  explicit Reader(std::span<const uint8_t> b) : b_(b) {}
  std::span<const uint8_t> take(size_t n) {
    if (remaining() < n) throw Error(ErrorCode::truncated, "file ends early");
    const auto s = b_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  uint8_t u8() { return take(1)[0]; }
  uint16_t u16() { return static_cast<uint16_t>(le(2)); }
  uint32_t u32() { return static_cast<uint32_t>(le(4)); }
  float f32() { return std::bit_cast<float>(static_cast<uint32_t>(le(4))); }
  double f64() { return std::bit_cast<double>(le(8)); }
  size_t remaining() const { return b_.size() - pos_; }

 private:
  uint64_t le(int n) {
    const auto s = take(static_cast<size_t>(n));
    uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<uint64_t>(s[static_cast<size_t>(i)]) << (8 * i);
    return v;
  }
  std::span<const uint8_t> b_;
  size_t pos_ = 0;
};

void check_magic(Reader& r, const char (&magic)[4]) {
  if (r.remaining() < 4) throw Error(ErrorCode::truncated, "file ends before the magic");
  const auto m = r.take(4);
  if (std::memcmp(m.data(), magic, 4) != 0) {
    throw Error(ErrorCode::bad_magic, "expected magic '" + std::string(magic, 4) + "'");
  }
  const uint16_t version = r.u16();
  if (version != kFileVersion) throw Error(ErrorCode::unknown_version, "unsupported version " + std::to_string(version));
}

void write_shape(Writer& w, const std::vector<size_t>& shape) {
  if (shape.empty() || shape.size() > 255) throw Error(ErrorCode::shape_mismatch, "rank must be 1..255");
  w.u8(static_cast<uint8_t>(shape.size()));
  for (size_t d : shape) {
    if (d > UINT32_MAX) throw Error(ErrorCode::shape_mismatch, "dimension exceeds 32 bits");
    w.u32(static_cast<uint32_t>(d));
  }
}

std::vector<size_t> read_shape(Reader& r) {
  const uint8_t rank = r.u8();
  if (rank == 0) throw Error(ErrorCode::shape_mismatch, "rank 0 is not allowed");
  std::vector<size_t> shape(rank);
  for (auto& d : shape) d = r.u32();
  return shape;
}

size_t product(const std::vector<size_t>& shape) {
  size_t n = 1;
  for (size_t d : shape) n *= d;
  return n;
}

bool has_tensor_scale(const Format& f) { return f.id() == FormatId::nvfp4 || f.id() == FormatId::nvfp4_plus; }

}  // namespace

std::vector<uint8_t> serialize_tensor(const Tensor& t) {
  Writer w;
  w.bytes(kTensorMagic, 4);
  w.u16(kFileVersion);
  w.u8(kDtypeF32);
  write_shape(w, t.shape);
  if (product(t.shape) != t.numel()) throw Error(ErrorCode::shape_mismatch, "tensor data does not match its shape");
  for (double x : t.data) w.f32(static_cast<float>(x));
  return w.take();
}

Tensor parse_tensor(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, kTensorMagic);
  const uint8_t dtype = r.u8();
  if (dtype != kDtypeF32) throw Error(ErrorCode::bad_dtype, "unsupported dtype " + std::to_string(dtype));
  auto shape = read_shape(r);
  const size_t n = product(shape);
  if (r.remaining() < 4 * n) throw Error(ErrorCode::truncated, "tensor payload is short");
  if (r.remaining() > 4 * n) throw Error(ErrorCode::size_mismatch, "trailing bytes after tensor payload");
  std::vector<double> data(n);
  for (auto& x : data) x = r.f32();
  return Tensor(std::move(shape), std::move(data));
}

size_t block_payload_bytes(const EncodedTensor& et) { return et.format.bytes_for_blocks(et.blocks.size()); }

std::vector<uint8_t> serialize_blocks(const EncodedTensor& et) {
  if (et.tail_pad > 255) throw Error(ErrorCode::shape_mismatch, "tail padding exceeds one byte");
  Writer w;
  w.bytes(kBlockMagic, 4);
  w.u16(kFileVersion);
  w.u8(static_cast<uint8_t>(et.format.id()));
  w.u8(static_cast<uint8_t>(et.format.block_size()));
  w.u8(static_cast<uint8_t>(et.format.variant()));
  write_shape(w, et.shape);
  if (has_tensor_scale(et.format)) w.f64(et.tensor_scale);
  w.append(et.format.pack(et.blocks));
  w.u8(static_cast<uint8_t>(et.tail_pad));
  return w.take();
}

EncodedTensor parse_blocks(std::span<const uint8_t> bytes) {
  Reader r(bytes);
  check_magic(r, kBlockMagic);
  const Format format = Format::from_id(r.u8());
  const uint8_t k = r.u8();
  const uint8_t variant = r.u8();
  if (k != format.block_size() || variant != static_cast<uint8_t>(format.variant())) {
    throw Error(ErrorCode::unknown_format, "block size or variant does not match the format id");
  }
  auto shape = read_shape(r);
  const double tensor_scale = has_tensor_scale(format) ? r.f64() : 1.0;
  if (!(tensor_scale > 0.0) || !std::isfinite(tensor_scale)) {
    throw Error(ErrorCode::invalid_config, "tensor scale must be positive and finite");
  }

  const size_t cols = shape.back();
  const size_t rows = cols == 0 ? 0 : product(shape) / cols;
  const size_t per_row = (cols + k - 1) / k;
  const size_t count = rows * per_row;
  const size_t payload = format.bytes_for_blocks(count);
  if (r.remaining() < payload + 1) throw Error(ErrorCode::truncated, "block payload is short");
  if (r.remaining() > payload + 1) throw Error(ErrorCode::size_mismatch, "trailing bytes after block payload");
  auto blocks = format.unpack(r.take(payload), count);
  const uint8_t tail_pad = r.u8();
  if (tail_pad != per_row * k - cols) throw Error(ErrorCode::shape_mismatch, "tail padding does not match the shape");
  return EncodedTensor{format, std::move(shape), std::move(blocks), tail_pad, tensor_scale};
}

std::vector<uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "'");
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw Error(ErrorCode::io_failure, "cannot read '" + path.string() + "'");
  return bytes;
}

void write_file(const std::filesystem::path& path, std::span<const uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io_failure, "cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorCode::io_failure, "cannot write '" + path.string() + "'");
}

void write_tensor(const std::filesystem::path& path, const Tensor& t) { write_file(path, serialize_tensor(t)); }
Tensor read_tensor(const std::filesystem::path& path) { return parse_tensor(read_file(path)); }
void write_blocks(const std::filesystem::path& path, const EncodedTensor& et) {
  write_file(path, serialize_blocks(et));
}
EncodedTensor read_blocks(const std::filesystem::path& path) { return parse_blocks(read_file(path)); }

FileKind sniff_file(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kTensorMagic, 4) == 0) return FileKind::tensor;
  if (bytes.size() >= 4 && std::memcmp(bytes.data(), kBlockMagic, 4) == 0) return FileKind::blocks;
  if (bytes.size() < 4) throw Error(ErrorCode::truncated, "'" + path.string() + "' is too short");
  throw Error(ErrorCode::bad_magic, "'" + path.string() + "' is neither a tensor nor a block file");
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  const std::string text = j.dump(2) + "\n";
  write_file(path, std::span(reinterpret_cast<const uint8_t*>(text.data()), text.size()));
}

}  // namespace mx
