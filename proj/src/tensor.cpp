// SPDX-License-Identifier: Apache-2.0
#include "mxplus/tensor.hpp"

#include <cmath>
#include <functional>
#include <numeric>

#include "mxplus/error.hpp"

namespace mx {
namespace {

size_t product(const std::vector<size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), size_t{1}, std::multiplies<>());
}

}  // namespace

Tensor::Tensor(std::vector<size_t> s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
  if (shape.empty() || product(shape) != data.size()) {
    throw Error(ErrorCode::shape_mismatch, "tensor data does not match its shape");
  }
}

Tensor Tensor::zeros(std::vector<size_t> shape) {
  const size_t n = product(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0));
}

size_t EncodedTensor::rows() const {
  size_t r = 1;
  for (size_t i = 0; i + 1 < shape.size(); ++i) r *= shape[i];
  return r;
}

EncodedTensor encode_tensor(const Tensor& t, const Format& format, double tensor_scale) {
  if (t.shape.empty() || t.numel() == 0) throw Error(ErrorCode::empty_tensor, "cannot encode an empty tensor");
  if (product(t.shape) != t.numel()) throw Error(ErrorCode::shape_mismatch, "tensor data does not match its shape");
  if (!(tensor_scale > 0.0) || !std::isfinite(tensor_scale)) {
    throw Error(ErrorCode::invalid_config, "tensor scale must be positive and finite");
  }
  const bool nvfp4 = format.id() == FormatId::nvfp4 || format.id() == FormatId::nvfp4_plus;
  if (tensor_scale != 1.0 && !nvfp4) {
    throw Error(ErrorCode::invalid_config, "a tensor scale is only defined for NVFP4");
  }

  const size_t k = format.block_size();
  const size_t cols = t.cols();
  const size_t per_row = (cols + k - 1) / k;
  EncodedTensor et{format, t.shape, {}, per_row * k - cols, tensor_scale};
  et.blocks.reserve(t.rows() * per_row);

  std::vector<double> buf(k);
  for (size_t r = 0; r < t.rows(); ++r) {
    for (size_t b = 0; b < per_row; ++b) {
      for (size_t i = 0; i < k; ++i) {
        const size_t c = b * k + i;
        buf[i] = c < cols ? t.at(r, c) * tensor_scale : 0.0;
      }
      et.blocks.push_back(format.encode(buf));
    }
  }
  return et;
}

std::vector<double> decode_row_unscaled(const EncodedTensor& et, size_t row) {
  const size_t k = et.format.block_size();
  std::vector<double> out;
  out.reserve(et.blocks_per_row() * k);
  for (size_t b = 0; b < et.blocks_per_row(); ++b) {
    const auto vals = et.format.decode(et.block(row, b));
    out.insert(out.end(), vals.begin(), vals.end());
  }
  return out;
}

Tensor decode_tensor(const EncodedTensor& et) {
  const size_t k = et.format.block_size();
  if (et.shape.empty() || et.blocks.size() != et.rows() * ((et.cols() + k - 1) / k)) {
    throw Error(ErrorCode::shape_mismatch, "block count does not match the tensor shape");
  }
  Tensor t = Tensor::zeros(et.shape);
  for (size_t r = 0; r < et.rows(); ++r) {
    const auto row = decode_row_unscaled(et, r);
    for (size_t c = 0; c < et.cols(); ++c) t.at(r, c) = row[c] / et.tensor_scale;
  }
  return t;
}

}  // namespace mx
