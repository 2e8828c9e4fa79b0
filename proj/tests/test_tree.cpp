#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>

#include "epi/tree.hpp"

using namespace epi;

namespace {

double sse_of(std::span<const double> y, std::span<const double> fit) {
  double acc = 0.0;
  for (std::size_t j = 0; j < y.size(); ++j) acc += (y[j] - fit[j]) * (y[j] - fit[j]);
  return acc;
}

// Exhaustive optimal K-segment segmentation by dynamic programming.
double dp_optimal_sse(std::span<const double> y, int k_max) {
  const int n = static_cast<int>(y.size());
  std::vector<double> pre(n + 1, 0.0), pre2(n + 1, 0.0);
  for (int j = 0; j < n; ++j) {
    pre[j + 1] = pre[j] + y[j];
    pre2[j + 1] = pre2[j] + y[j] * y[j];
  }
  auto seg_sse = [&](int lo, int hi) {  // [lo, hi)
    const double s = pre[hi] - pre[lo];
    return (pre2[hi] - pre2[lo]) - s * s / (hi - lo);
  };
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> dp(k_max + 1, std::vector<double>(n + 1, inf));
  dp[0][0] = 0.0;
  for (int k = 1; k <= k_max; ++k)
    for (int hi = 1; hi <= n; ++hi)
      for (int lo = k - 1; lo < hi; ++lo)
        dp[k][hi] = std::min(dp[k][hi], dp[k - 1][lo] + seg_sse(lo, hi));
  double best = inf;
  for (int k = 1; k <= k_max; ++k) best = std::min(best, dp[k][n]);
  return best;
}

int distinct_count(std::span<const double> v) {
  return static_cast<int>(std::set<double>(v.begin(), v.end()).size());
}

}  // namespace

TEST_CASE("a staircase with eight pieces is recovered exactly") {
  std::vector<double> y;
  for (int piece = 0; piece < 8; ++piece)
    for (int j = 0; j < 6; ++j) y.push_back(0.1 * piece);
  const auto fit = fit_piecewise_constant(y, 3);
  CHECK(sse_of(y, fit) < 1e-20);
  for (std::size_t j = 0; j < y.size(); ++j) CHECK(std::abs(fit[j] - y[j]) < 1e-12);
}

TEST_CASE("constant input stays constant") {
  const std::vector<double> y(40, 0.7);
  const auto fit = fit_piecewise_constant(y, 3);
  for (std::size_t j = 0; j < y.size(); ++j) CHECK(std::abs(fit[j] - 0.7) < 1e-14);
  CHECK(distinct_count(fit) == 1);
}

TEST_CASE("greedy splits stay near the optimal segmentation on a ramp") {
  std::vector<double> y(64);
  for (int j = 0; j < 64; ++j) y[j] = j / 63.0;
  const auto fit = fit_piecewise_constant(y, 3);
  const double greedy = sse_of(y, fit);
  const double optimal = dp_optimal_sse(y, 8);
  CHECK(distinct_count(fit) <= 8);
  CHECK(greedy <= 1.05 * optimal);
}

TEST_CASE("compression clamps the policy to at most eight values per channel") {
  ControlSchedule dense = ControlSchedule::constant(1.0, 200.0, 697, 1.0, 1.0);
  for (int m = 0; m < dense.size(); ++m) {
    const double t = dense.times[m];
    dense.b[m] = 0.55 + 0.45 * std::cos(t / 17.0) * std::exp(-t / 90.0);
    dense.k[m] = 5.5 - 4.0 * std::tanh((t - 60.0) / 25.0);
  }
  const ControlSchedule comp = compress_control(dense, 8);
  CHECK(comp.distinct_values_b() <= 8);
  CHECK(comp.distinct_values_k() <= 8);
  CHECK(comp.feasible(ControlBounds{0.1, 10.0}));
  CHECK(comp.times == dense.times);

  // Piecewise-constant input with few pieces passes through unchanged.
  ControlSchedule coarse = dense;
  for (int m = 0; m < coarse.size(); ++m) {
    coarse.b[m] = coarse.times[m] < 60.0 ? 0.4 : 0.9;
    coarse.k[m] = coarse.times[m] < 100.0 ? 2.0 : 1.0;
  }
  const ControlSchedule same = compress_control(coarse, 8);
  for (int m = 0; m < same.size(); ++m) {
    CHECK(std::abs(same.b[m] - coarse.b[m]) < 1e-12);
    CHECK(std::abs(same.k[m] - coarse.k[m]) < 1e-12);
  }
}
