// SPDX-License-Identifier: Apache-2.0
#include "mxplus/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mxplus/error.hpp"

namespace mx {
namespace {

constexpr size_t kHybridBlock = 32;

double pct(double part, double whole) { return whole > 0.0 ? 100.0 * part / whole : 0.0; }

// Index of the largest magnitude in [begin, end) of row r, lowest on ties.
size_t row_block_max(const Tensor& t, size_t r, size_t begin, size_t end) {
  size_t best = begin;
  for (size_t c = begin + 1; c < end; ++c) {
    if (std::fabs(t.at(r, c)) > std::fabs(t.at(r, best))) best = c;
  }
  return best;
}

void require_finite(const Tensor& t) {
  if (t.numel() == 0) throw Error(ErrorCode::empty_tensor, "tensor is empty");
  for (double x : t.data) {
    if (!std::isfinite(x)) throw Error(ErrorCode::non_finite_input, "tensor contains a non-finite value");
  }
}

struct Moments {
  double mu = 0.0;
  double sigma = 0.0;
};

Moments population_moments(const Tensor& t) {
  const double n = static_cast<double>(t.numel());
  const double mu = std::accumulate(t.data.begin(), t.data.end(), 0.0) / n;
  double var = 0.0;
  for (double x : t.data) var += (x - mu) * (x - mu);
  return {mu, std::sqrt(var / n)};
}

bool is_outlier(double x, const Moments& m) { return m.sigma > 0.0 && std::fabs(x - m.mu) > 3.0 * m.sigma; }

}  // namespace

MseReport mse_report(const Tensor& original, const Format& format) {
  require_finite(original);
  const EncodedTensor et = encode_tensor(original, format);
  const size_t k = format.block_size();
  const size_t cols = original.cols();

  MseReport rep;
  rep.format = std::string(format.name());
  double total = 0.0, bm_part = 0.0, max_part = 0.0;
  for (size_t r = 0; r < original.rows(); ++r) {
    const auto dec = decode_row_unscaled(et, r);
    for (size_t begin = 0; begin < cols; begin += k) {
      const size_t end = std::min(begin + k, cols);
      const size_t bm = row_block_max(original, r, begin, end);
      double sse = 0.0, worst = 0.0, at_bm = 0.0;
      for (size_t c = begin; c < end; ++c) {
        const double e = dec[c] - original.at(r, c);
        const double e2 = e * e;
        sse += e2;
        worst = std::max(worst, e2);
        if (c == bm) at_bm = e2;
      }
      rep.per_block_sse.push_back(sse);
      total += sse;
      bm_part += at_bm;
      max_part += worst;
    }
  }
  rep.total_mse = total / static_cast<double>(original.numel());
  rep.bm_contribution_pct = pct(bm_part, total);
  rep.max_elem_contribution_pct = pct(max_part, total);
  return rep;
}

OutlierStats outlier_stats(const Tensor& t, size_t block_size) {
  require_finite(t);
  if (block_size == 0) throw Error(ErrorCode::invalid_config, "block size must be positive");
  const Moments m = population_moments(t);
  const size_t cols = t.cols();

  OutlierStats s;
  s.mu = m.mu;
  s.sigma = m.sigma;
  s.per_channel_counts.assign(cols, 0);
  size_t blocks_with_any = 0, blocks_with_multi = 0, as_bm = 0;
  for (size_t r = 0; r < t.rows(); ++r) {
    for (size_t begin = 0; begin < cols; begin += block_size) {
      const size_t end = std::min(begin + block_size, cols);
      const size_t bm = row_block_max(t, r, begin, end);
      size_t in_block = 0;
      for (size_t c = begin; c < end; ++c) {
        if (!is_outlier(t.at(r, c), m)) continue;
        ++in_block;
        ++s.per_channel_counts[c];
        if (c == bm) ++as_bm;
      }
      s.total_outliers += in_block;
      if (in_block > 0) ++blocks_with_any;
      if (in_block > 1) ++blocks_with_multi;
    }
  }
  s.pct_blocks_with_multiple_outliers =
      pct(static_cast<double>(blocks_with_multi), static_cast<double>(blocks_with_any));
  s.pct_outliers_as_bm = pct(static_cast<double>(as_bm), static_cast<double>(s.total_outliers));
  return s;
}

HybridReport topk_hybrid_sse(const Tensor& t, size_t k_hi) {
  require_finite(t);
  if (k_hi > kHybridBlock) throw Error(ErrorCode::invalid_config, "k_hi must be in [0, 32]");
  const ElementFormat lo = ElementFormat::e2m1();
  const ElementFormat hi = ElementFormat::e2m3();
  const Moments m = population_moments(t);
  const size_t cols = t.cols();

  HybridReport rep;
  rep.k_hi = k_hi;
  double total = 0.0;
  size_t outliers = 0, covered = 0;
  std::vector<double> block(kHybridBlock);
  std::vector<size_t> order(kHybridBlock);
  std::vector<bool> high(kHybridBlock);
  for (size_t r = 0; r < t.rows(); ++r) {
    for (size_t begin = 0; begin < cols; begin += kHybridBlock) {
      const size_t n = std::min(kHybridBlock, cols - begin);
      for (size_t i = 0; i < kHybridBlock; ++i) block[i] = i < n ? t.at(r, begin + i) : 0.0;
      const int se = compute_shared_exponent(block, lo.e_max, false).value_or(-kE8M0Bias);

      std::iota(order.begin(), order.end(), size_t{0});
      std::stable_sort(order.begin(), order.end(),
                       [&](size_t a, size_t b) { return std::fabs(block[a]) > std::fabs(block[b]); });
      std::fill(high.begin(), high.end(), false);
      for (size_t i = 0; i < k_hi; ++i) high[order[i]] = true;

      double sse = 0.0;
      for (size_t i = 0; i < n; ++i) {
        const double q = std::ldexp(round_to_format(std::ldexp(block[i], -se), high[i] ? hi : lo), se);
        const double e = q - block[i];
        sse += e * e;
        if (is_outlier(block[i], m)) {
          ++outliers;
          if (high[i]) ++covered;
        }
      }
      total += sse;
    }
  }
  rep.mse = total / static_cast<double>(t.numel());
  rep.pct_outliers_covered = pct(static_cast<double>(covered), static_cast<double>(outliers));
  return rep;
}

Permutation Permutation::from_forward(std::vector<size_t> forward) {
  Permutation p;
  p.inverse.assign(forward.size(), forward.size());
  for (size_t i = 0; i < forward.size(); ++i) {
    if (forward[i] >= forward.size() || p.inverse[forward[i]] != forward.size()) {
      throw Error(ErrorCode::invalid_config, "not a permutation");
    }
    p.inverse[forward[i]] = i;
  }
  p.forward = std::move(forward);
  return p;
}

bool Permutation::valid() const {
  if (forward.size() != inverse.size()) return false;
  for (size_t i = 0; i < forward.size(); ++i) {
    if (forward[i] >= forward.size() || inverse[forward[i]] != i) return false;
  }
  return true;
}

Permutation reorder_channels(const std::vector<double>& counts, size_t block_size, bool upper_first) {
  if (block_size == 0) throw Error(ErrorCode::invalid_config, "block size must be positive");
  const size_t c = counts.size();
  std::vector<size_t> sorted(c);
  std::iota(sorted.begin(), sorted.end(), size_t{0});
  std::stable_sort(sorted.begin(), sorted.end(), [&](size_t a, size_t b) { return counts[a] > counts[b]; });

  const size_t anchors = std::min(c, (c + block_size - 1) / block_size);
  std::vector<size_t> forward(c, c);
  for (size_t b = 0; b < anchors; ++b) forward[b * block_size] = sorted[b];

  const auto rest_begin = sorted.begin() + static_cast<std::ptrdiff_t>(anchors);
  const auto split = rest_begin + static_cast<std::ptrdiff_t>((c - anchors) / 2);
  std::vector<size_t> fill;
  if (upper_first) {
    fill.assign(rest_begin, split);
    fill.insert(fill.end(), split, sorted.end());
  } else {
    fill.assign(split, sorted.end());
    fill.insert(fill.end(), rest_begin, split);
  }
  size_t next = 0;
  for (size_t p = 0; p < c; ++p) {
    if (p % block_size != 0) forward[p] = fill[next++];
  }
  return Permutation::from_forward(std::move(forward));
}

Tensor apply_permutation(const Tensor& t, const Permutation& perm) {
  if (perm.forward.size() != t.cols()) throw Error(ErrorCode::shape_mismatch, "permutation size mismatch");
  Tensor out = Tensor::zeros(t.shape);
  for (size_t r = 0; r < t.rows(); ++r) {
    for (size_t p = 0; p < t.cols(); ++p) out.at(r, p) = t.at(r, perm.forward[p]);
  }
  return out;
}

Tensor invert_permutation(const Tensor& t, const Permutation& perm) {
  if (perm.inverse.size() != t.cols()) throw Error(ErrorCode::shape_mismatch, "permutation size mismatch");
  Tensor out = Tensor::zeros(t.shape);
  for (size_t r = 0; r < t.rows(); ++r) {
    for (size_t ch = 0; ch < t.cols(); ++ch) out.at(r, ch) = t.at(r, perm.inverse[ch]);
  }
  return out;
}

std::vector<double> average_channel_counts(const std::vector<OutlierStats>& stats) {
  if (stats.empty()) return {};
  const size_t c = stats.front().per_channel_counts.size();
  std::vector<double> avg(c, 0.0);
  for (const auto& s : stats) {
    if (s.per_channel_counts.size() != c) throw Error(ErrorCode::shape_mismatch, "channel counts differ in length");
    for (size_t i = 0; i < c; ++i) avg[i] += static_cast<double>(s.per_channel_counts[i]);
  }
  for (auto& x : avg) x /= static_cast<double>(stats.size());
  return avg;
}

std::vector<size_t> synthetic_outlier_channels(const SyntheticSpec& spec) {
  if (spec.rows == 0 || spec.cols == 0) throw Error(ErrorCode::empty_tensor, "synthetic tensor needs rows and cols");
  if (!(spec.outlier_frac >= 0.0 && spec.outlier_frac <= 1.0)) {
    throw Error(ErrorCode::invalid_config, "outlier fraction must be in [0, 1]");
  }
  std::mt19937_64 rng(spec.seed);
  size_t n = 0;
  if (spec.outlier_frac > 0.0) {
    n = std::clamp<size_t>(static_cast<size_t>(std::llround(spec.outlier_frac * static_cast<double>(spec.cols))), 1,
                           spec.cols);
  }
  std::vector<size_t> channels;
  if (spec.adjacent) {
    const size_t start = n == 0 ? 0 : static_cast<size_t>(rng() % (spec.cols - n + 1));
    for (size_t i = 0; i < n; ++i) channels.push_back(start + i);
  } else {
    std::vector<size_t> all(spec.cols);
    std::iota(all.begin(), all.end(), size_t{0});
    std::shuffle(all.begin(), all.end(), rng);
    channels.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
    std::sort(channels.begin(), channels.end());
  }
  return channels;
}

Tensor synthetic_tensor(const SyntheticSpec& spec) {
  if (!std::isfinite(spec.outlier_scale)) throw Error(ErrorCode::invalid_config, "outlier scale must be finite");
  const auto channels = synthetic_outlier_channels(spec);
  std::vector<double> mult(spec.cols, 1.0);
  for (size_t c : channels) mult[c] = spec.outlier_scale;

  // Values draw from a stream independent of the channel choice.
  std::mt19937_64 rng(spec.seed ^ 0x9E3779B97F4A7C15ull);
  std::normal_distribution<double> g(0.0, 1.0);
  Tensor t = Tensor::zeros({spec.rows, spec.cols});
  for (size_t r = 0; r < spec.rows; ++r) {
    for (size_t c = 0; c < spec.cols; ++c) t.at(r, c) = g(rng) * mult[c];
  }
  return t;
}

nlohmann::json to_json(const MseReport& r) {
  return {{"format", r.format},
          {"total_mse", r.total_mse},
          {"bm_contribution_pct", r.bm_contribution_pct},
          {"max_elem_contribution_pct", r.max_elem_contribution_pct},
          {"per_block_sse", r.per_block_sse}};
}

nlohmann::json to_json(const OutlierStats& s) {
  return {{"mu", s.mu},
          {"sigma", s.sigma},
          {"total_outliers", s.total_outliers},
          {"per_channel_counts", s.per_channel_counts},
          {"pct_blocks_with_multiple_outliers", s.pct_blocks_with_multiple_outliers},
          {"pct_outliers_as_bm", s.pct_outliers_as_bm}};
}

nlohmann::json to_json(const HybridReport& h) {
  return {{"k_hi", h.k_hi}, {"mse", h.mse}, {"pct_outliers_covered", h.pct_outliers_covered}};
}

nlohmann::json to_json(const Permutation& p) { return {{"forward", p.forward}, {"inverse", p.inverse}}; }

}  // namespace mx
