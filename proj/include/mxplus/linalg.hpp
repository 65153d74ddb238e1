// SPDX-License-Identifier: Apache-2.0
//
// Emulated matrix multiplication over encoded tensors.
//
// Operands are blocked along the reduction axis, so B is passed transposed:
// A is M x K and b_t is N x K, both encoded along K. The result D is M x N
// with D[i, j] = sum_k A[i, k] * B[k, j].
//
// Every block pair is reduced exactly (products of decoded values are dyadic,
// and their sum is formed in a 128-bit integer) and rounded once to double.
// The per-block partials are then added in block order. All three paths
// therefore produce identical bits whenever they are mathematically equal.
#pragma once

#include <string_view>

#include "mxplus/tensor.hpp"

namespace mx {

enum class MatmulPath : uint8_t { reference, decomposed, bcu };

MatmulPath matmul_path_from_name(std::string_view name);
std::string_view to_string(MatmulPath path);

/// Dequantize-then-multiply oracle.
Tensor matmul_reference(const EncodedTensor& a, const EncodedTensor& b_t);

/// Dense product with A's BM replaced by BM_L plus a sparse BM_H * B term.
/// A must be an E2M1 plus format (mxfp4+ or nvfp4+).
Tensor matmul_decomposed(const EncodedTensor& a, const EncodedTensor& b_t);

/// Adder tree over the non-BM positions plus the two BM products of the
/// block-max compute unit. Both operands must carry BM metadata.
Tensor matmul_bcu(const EncodedTensor& a, const EncodedTensor& b_t);

Tensor matmul(const EncodedTensor& a, const EncodedTensor& b_t, MatmulPath path);

/// Element-wise comparison; rel_tol 0 demands identical values.
bool tensors_match(const Tensor& x, const Tensor& y, double rel_tol = 0.0);

}  // namespace mx
