// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <vector>

#include "mxplus/format.hpp"

namespace mx {

/// Dense row-major tensor. Blocks always run along the last axis.
struct Tensor {
  std::vector<size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::vector<size_t> shape, std::vector<double> data);
  static Tensor zeros(std::vector<size_t> shape);

  size_t numel() const { return data.size(); }
  size_t cols() const { return shape.empty() ? 0 : shape.back(); }
  size_t rows() const { return cols() == 0 ? 0 : numel() / cols(); }
  double& at(size_t r, size_t c) { return data[r * cols() + c]; }
  double at(size_t r, size_t c) const { return data[r * cols() + c]; }
};

struct EncodedTensor {
  Format format;
  std::vector<size_t> shape;
  std::vector<EncodedBlock> blocks;
  size_t tail_pad = 0;
  /// Per-tensor pre-scale applied before NVFP4 block scaling (values are
  /// multiplied by it on encode and divided on decode).
  double tensor_scale = 1.0;

  size_t cols() const { return shape.back(); }
  size_t rows() const;
  size_t blocks_per_row() const { return blocks.size() / rows(); }
  const EncodedBlock& block(size_t row, size_t b) const { return blocks[row * blocks_per_row() + b]; }
};

EncodedTensor encode_tensor(const Tensor& t, const Format& format, double tensor_scale = 1.0);
Tensor decode_tensor(const EncodedTensor& et);

/// Decoded values of one row including the zero padding, without the
/// per-tensor scale applied.
std::vector<double> decode_row_unscaled(const EncodedTensor& et, size_t row);

}  // namespace mx
