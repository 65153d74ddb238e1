// SPDX-License-Identifier: Apache-2.0
#include "mxplus/linalg.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>

#include "mxplus/error.hpp"

namespace mx {
namespace {

// Exact sum of dyadic doubles, rounded once on read.
class ExactSum {
 public:
  void add(double x) {
    if (x == 0.0) return;
    int e = 0;
    const double frac = std::frexp(x, &e);
    auto m = static_cast<int64_t>(std::ldexp(frac, 53));
    e -= 53;
    const int tz = std::countr_zero(static_cast<uint64_t>(m < 0 ? -m : m));
    m >>= tz;
    e += tz;
    if (!any_) {
      base_ = e;
      any_ = true;
    }
    if (e < base_) {
      shift_acc(base_ - e);
      base_ = e;
    }
    acc_ += shifted(m, e - base_);
  }

  double value() const {
    if (!any_ || acc_ == 0) return 0.0;
    return std::ldexp(static_cast<double>(acc_), base_);
  }

 private:
  static constexpr int kHeadroom = 120;

  static __int128 shifted(int64_t m, int s) {
    const int bits = 64 - std::countl_zero(static_cast<uint64_t>(m < 0 ? -m : m));
    if (s + bits > kHeadroom) throw Error(ErrorCode::precision_overflow, "block exponent spread too wide");
    return static_cast<__int128>(m) * (static_cast<__int128>(1) << s);
  }

  void shift_acc(int s) {
    if (acc_ == 0) return;
    const unsigned __int128 mag = acc_ < 0 ? -static_cast<unsigned __int128>(acc_) : acc_;
    const int bits = 128 - (static_cast<uint64_t>(mag >> 64) ? std::countl_zero(static_cast<uint64_t>(mag >> 64))
                                                           : 64 + std::countl_zero(static_cast<uint64_t>(mag)));
    if (s + bits > kHeadroom) throw Error(ErrorCode::precision_overflow, "block exponent spread too wide");
    acc_ *= static_cast<__int128>(1) << s;
  }

  __int128 acc_ = 0;
  int base_ = 0;
  bool any_ = false;
};

bool is_plus_e2m1(const Format& f) { return f.id() == FormatId::mxfp4_plus || f.id() == FormatId::nvfp4_plus; }

bool carries_bm(const Format& f) { return !f.is_legacy() && f.variant() != Variant::plain; }

std::optional<size_t> bm_index(const EncodedTensor& t, const EncodedBlock& blk) {
  if (!carries_bm(t.format)) return std::nullopt;
  return extended_bm_index(blk, t.format.mx_config());
}

void check_operands(const EncodedTensor& a, const EncodedTensor& b) {
  if (a.shape.empty() || b.shape.empty()) throw Error(ErrorCode::shape_mismatch, "operands need a shape");
  if (a.cols() != b.cols()) {
    throw Error(ErrorCode::shape_mismatch, "inner dimensions differ: " + std::to_string(a.cols()) + " vs " +
                                               std::to_string(b.cols()));
  }
  if (a.format.block_size() != b.format.block_size()) {
    throw Error(ErrorCode::shape_mismatch, "operands use different block sizes");
  }
  for (const auto* t : {&a, &b}) {
    const size_t k = t->format.block_size();
    if (t->blocks.size() != t->rows() * ((t->cols() + k - 1) / k)) {
      throw Error(ErrorCode::shape_mismatch, "block count does not match the tensor shape");
    }
  }
}

// Adds one block pair's products to the accumulator.
using BlockKernel = void (*)(const EncodedTensor&, const EncodedBlock&, const std::vector<double>&,
                             const EncodedTensor&, const EncodedBlock&, const std::vector<double>&, ExactSum&);

void kernel_reference(const EncodedTensor&, const EncodedBlock&, const std::vector<double>& av,
                      const EncodedTensor&, const EncodedBlock&, const std::vector<double>& bv, ExactSum& acc) {
  for (size_t i = 0; i < av.size(); ++i) acc.add(av[i] * bv[i]);
}

void kernel_decomposed(const EncodedTensor& a, const EncodedBlock& ab, const std::vector<double>& av,
                       const EncodedTensor&, const EncodedBlock&, const std::vector<double>& bv, ExactSum& acc) {
  const auto idx = bm_index(a, ab);
  if (!idx) {
    kernel_reference(a, ab, av, a, ab, bv, acc);
    return;
  }
  const BmSplit split = split_bm(ab, a.format.mx_config());
  // Dense step: A with its BM replaced by BM_L.
  for (size_t i = 0; i < av.size(); ++i) acc.add((i == *idx ? split.bm_l : av[i]) * bv[i]);
  // Sparse step: the single BM_H term.
  acc.add(split.bm_h * bv[*idx]);
}

void kernel_bcu(const EncodedTensor& a, const EncodedBlock& ab, const std::vector<double>& av,
                const EncodedTensor& b, const EncodedBlock& bb, const std::vector<double>& bv, ExactSum& acc) {
  const auto ia = bm_index(a, ab);
  const auto ib = bm_index(b, bb);
  // Adder tree with both BM lanes zeroed.
  for (size_t i = 0; i < av.size(); ++i) {
    if (i == ia || i == ib) continue;
    acc.add(av[i] * bv[i]);
  }
  if (ia && ib && *ia == *ib) {
    acc.add(av[*ia] * bv[*ib]);
    return;
  }
  if (ia) acc.add(av[*ia] * bv[*ia]);
  if (ib) acc.add(bv[*ib] * av[*ib]);
}

Tensor run(const EncodedTensor& a, const EncodedTensor& b, BlockKernel kernel) {
  check_operands(a, b);
  const size_t m = a.rows();
  const size_t n = b.rows();
  const size_t nb = a.blocks_per_row();

  std::vector<std::vector<double>> a_dec(m * nb), b_dec(n * nb);
  for (size_t r = 0; r < m; ++r) {
    for (size_t t = 0; t < nb; ++t) a_dec[r * nb + t] = a.format.decode(a.block(r, t));
  }
  for (size_t r = 0; r < n; ++r) {
    for (size_t t = 0; t < nb; ++t) b_dec[r * nb + t] = b.format.decode(b.block(r, t));
  }

  const double epilogue = a.tensor_scale * b.tensor_scale;
  Tensor d = Tensor::zeros({m, n});
  for (size_t i = 0; i < m; ++i) {
    for (size_t j = 0; j < n; ++j) {
      double total = 0.0;
      for (size_t t = 0; t < nb; ++t) {
        ExactSum acc;
        kernel(a, a.block(i, t), a_dec[i * nb + t], b, b.block(j, t), b_dec[j * nb + t], acc);
        total += acc.value();
      }
      d.at(i, j) = epilogue == 1.0 ? total : total / epilogue;
    }
  }
  return d;
}

}  // namespace

MatmulPath matmul_path_from_name(std::string_view name) {
  if (name == "reference") return MatmulPath::reference;
  if (name == "decomposed") return MatmulPath::decomposed;
  if (name == "bcu") return MatmulPath::bcu;
  throw Error(ErrorCode::usage, "unknown matmul path '" + std::string(name) + "'");
}

std::string_view to_string(MatmulPath path) {
  switch (path) {
    case MatmulPath::reference: return "reference";
    case MatmulPath::decomposed: return "decomposed";
    case MatmulPath::bcu: return "bcu";
  }
  return "?";
}

Tensor matmul_reference(const EncodedTensor& a, const EncodedTensor& b_t) { return run(a, b_t, kernel_reference); }

Tensor matmul_decomposed(const EncodedTensor& a, const EncodedTensor& b_t) {
  if (!is_plus_e2m1(a.format)) {
    throw Error(ErrorCode::variant_mismatch,
                "decomposed path needs A in mxfp4+ or nvfp4+, got " + std::string(a.format.name()));
  }
  return run(a, b_t, kernel_decomposed);
}

Tensor matmul_bcu(const EncodedTensor& a, const EncodedTensor& b_t) {
  if (!carries_bm(a.format) || !carries_bm(b_t.format)) {
    throw Error(ErrorCode::variant_mismatch, "bcu path needs plus or plusplus operands, got " +
                                                 std::string(a.format.name()) + " and " +
                                                 std::string(b_t.format.name()));
  }
  return run(a, b_t, kernel_bcu);
}

Tensor matmul(const EncodedTensor& a, const EncodedTensor& b_t, MatmulPath path) {
  switch (path) {
    case MatmulPath::reference: return matmul_reference(a, b_t);
    case MatmulPath::decomposed: return matmul_decomposed(a, b_t);
    case MatmulPath::bcu: return matmul_bcu(a, b_t);
  }
  throw Error(ErrorCode::usage, "unknown matmul path");
}

bool tensors_match(const Tensor& x, const Tensor& y, double rel_tol) {
  if (x.shape != y.shape) return false;
  for (size_t i = 0; i < x.numel(); ++i) {
    const double p = x.data[i], q = y.data[i];
    if (rel_tol == 0.0) {
      if (p != q) return false;
    } else if (std::fabs(p - q) > rel_tol * std::max(std::fabs(p), std::fabs(q))) {
      return false;
    }
  }
  return true;
}

}  // namespace mx
