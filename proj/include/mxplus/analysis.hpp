// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "mxplus/tensor.hpp"

namespace mx {

struct MseReport {
  std::string format;
  std::vector<double> per_block_sse;
  double total_mse = 0.0;
  /// Share of the total squared error at each block's BM position.
  double bm_contribution_pct = 0.0;
  /// Share of the total squared error from each block's worst element.
  double max_elem_contribution_pct = 0.0;
};

/// Encodes and decodes `original` with `format`. The BM of a block is the
/// largest-magnitude original element (lowest index on ties). Padding
/// elements are excluded from every figure.
MseReport mse_report(const Tensor& original, const Format& format);

struct OutlierStats {
  double mu = 0.0;
  double sigma = 0.0;
  size_t total_outliers = 0;
  std::vector<size_t> per_channel_counts;
  double pct_blocks_with_multiple_outliers = 0.0;
  double pct_outliers_as_bm = 0.0;
};

/// 3-sigma outliers with population mean and deviation over the whole
/// tensor. Channels are the last axis; blocks run along it.
OutlierStats outlier_stats(const Tensor& t, size_t block_size);

struct HybridReport {
  size_t k_hi = 0;
  double mse = 0.0;
  double pct_outliers_covered = 0.0;
};

/// Per 32-element block, the k_hi largest magnitudes are encoded as E2M3 and
/// the rest as E2M1, both under the block's E2M1 shared exponent.
HybridReport topk_hybrid_sse(const Tensor& t, size_t k_hi);

struct Permutation {
  std::vector<size_t> forward;  // new position -> original channel
  std::vector<size_t> inverse;  // original channel -> new position

  static Permutation from_forward(std::vector<size_t> forward);
  bool valid() const;
};

/// Spreads high-count channels one per block. The top ceil(C / block_size)
/// channels take positions 0, block_size, 2 * block_size, ...; the rest fill
/// the remaining slots, lower half (fewer outliers) first unless
/// `upper_first` is set. Both halves keep descending order.
Permutation reorder_channels(const std::vector<double>& counts, size_t block_size, bool upper_first = false);

/// Permutes the last axis: out[..., p] = t[..., forward[p]].
Tensor apply_permutation(const Tensor& t, const Permutation& perm);
Tensor invert_permutation(const Tensor& t, const Permutation& perm);

/// Mean per-channel outlier counts over several calibration tensors.
std::vector<double> average_channel_counts(const std::vector<OutlierStats>& stats);

struct SyntheticSpec {
  size_t rows = 64;
  size_t cols = 1024;
  double outlier_frac = 0.01;
  double outlier_scale = 64.0;
  uint64_t seed = 0;
  /// Place the outlier channels next to each other instead of at random.
  bool adjacent = false;
};

/// Standard-normal tensor whose outlier channels are multiplied by
/// outlier_scale. Deterministic in the seed.
Tensor synthetic_tensor(const SyntheticSpec& spec);
std::vector<size_t> synthetic_outlier_channels(const SyntheticSpec& spec);

nlohmann::json to_json(const MseReport& r);
nlohmann::json to_json(const OutlierStats& s);
nlohmann::json to_json(const HybridReport& h);
nlohmann::json to_json(const Permutation& p);

}  // namespace mx
