#pragma once

#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "epi/control.hpp"

namespace epi {

namespace detail {

struct SegmentStats {
  // Prefix sums over the series for O(1) segment SSE queries.
  std::vector<double> sum, sum_sq;

  explicit SegmentStats(std::span<const double> y) : sum(y.size() + 1, 0.0), sum_sq(y.size() + 1, 0.0) {
    for (std::size_t j = 0; j < y.size(); ++j) {
      sum[j + 1] = sum[j] + y[j];
      sum_sq[j + 1] = sum_sq[j] + y[j] * y[j];
    }
  }
  double mean(int lo, int hi) const {  // [lo, hi)
    return (sum[hi] - sum[lo]) / (hi - lo);
  }
  double sse(int lo, int hi) const {
    const double s = sum[hi] - sum[lo];
    const double n = hi - lo;
    return (sum_sq[hi] - sum_sq[lo]) - s * s / n;
  }
  // Rounding-noise floor of the prefix-sum SSE on a segment.
  double noise(int lo, int hi) const {
    return 1e-12 * std::max(1.0, sum_sq[hi] - sum_sq[lo]);
  }
};

// Greedy binary regression tree on the index axis; each node takes the split
// with the largest squared-error reduction. depth levels give <= 2^depth leaves.
inline void tree_fit_segment(const SegmentStats& stats, int lo, int hi, int depth,
                             std::span<double> out) {
  const double node_sse = stats.sse(lo, hi);
  const double eps = stats.noise(lo, hi);
  if (depth == 0 || hi - lo <= 1 || node_sse <= eps) {
    const double m = stats.mean(lo, hi);
    for (int j = lo; j < hi; ++j) out[j] = m;
    return;
  }
  int best_split = -1;
  double best_sse = node_sse;
  for (int split = lo + 1; split < hi; ++split) {
    const double candidate = stats.sse(lo, split) + stats.sse(split, hi);
    if (candidate < best_sse - eps) {
      best_sse = candidate;
      best_split = split;
    }
  }
  if (best_split < 0) {
    const double m = stats.mean(lo, hi);
    for (int j = lo; j < hi; ++j) out[j] = m;
    return;
  }
  tree_fit_segment(stats, lo, best_split, depth - 1, out);
  tree_fit_segment(stats, best_split, hi, depth - 1, out);
}

}  // namespace detail

// Piecewise-constant least-squares fit by a depth-limited greedy regression
// tree; leaf predictions are segment means.
inline std::vector<double> fit_piecewise_constant(std::span<const double> y, int depth) {
  if (y.empty()) throw std::invalid_argument("fit_piecewise_constant: empty input");
  detail::SegmentStats stats(y);
  std::vector<double> out(y.size());
  detail::tree_fit_segment(stats, 0, static_cast<int>(y.size()), depth, out);
  return out;
}

// Approximates a dense schedule by two piecewise-constant policies with at
// most max_pieces values each (b and k fitted independently).
inline ControlSchedule compress_control(const ControlSchedule& dense, int max_pieces = 8) {
  dense.validate();
  if (max_pieces < 1) throw std::invalid_argument("compress_control: max_pieces must be >= 1");
  int depth = 0;
  while ((1 << depth) < max_pieces) ++depth;
  ControlSchedule out = dense;
  out.b = fit_piecewise_constant(dense.b, depth);
  out.k = fit_piecewise_constant(dense.k, depth);
  return out;
}

}  // namespace epi
