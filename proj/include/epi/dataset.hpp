#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epi/averaging.hpp"
#include "epi/csv.hpp"
#include "epi/gillespie.hpp"
#include "epi/parallel.hpp"
#include "epi/rng.hpp"

namespace epi {

struct TrainingSample {
  double s, i, n, beta, kappa;
  double target;  // empirical rate (S^m - S^{m+1}) / (dt * S^m * I^m)
};

using Dataset = std::vector<TrainingSample>;

// Sampling boxes for the dataset configurations; n and beta uniform, kappa and
// i0 log-uniform.
struct DatasetRanges {
  double n_lo = 0.1, n_hi = 1.0;
  double beta_lo = 0.075, beta_hi = 0.9;
  double kappa_lo = 0.1, kappa_hi = 10.0;
  double i0_lo = 1e-4, i0_hi = 1e-3;
};

struct DatasetConfig {
  DatasetRanges ranges;
  int n_configs = 140;
  int replicas_per_config = 50;
  double horizon = 150.0;
  double sample_dt = 2.0 / 7.0;
  double alpha = 10.0;
  double gamma = 1.0 / 6.0;
  int n_max = 20000;
  double si_guard = 1e-8;  // samples with S*I below this are 0/0 ratios; dropped
  EdgeRateConvention edge_rate = EdgeRateConvention::beta_over_alpha;

  void validate() const {
    if (n_configs < 1) throw std::invalid_argument("dataset: n_configs must be >= 1");
    if (replicas_per_config < 1) throw std::invalid_argument("dataset: replicas must be >= 1");
    if (!(ranges.n_lo > 0 && ranges.n_hi <= 1 && ranges.n_lo <= ranges.n_hi))
      throw std::invalid_argument("dataset: n range invalid");
    if (!(ranges.beta_lo > 0 && ranges.beta_lo <= ranges.beta_hi))
      throw std::invalid_argument("dataset: beta range invalid");
    if (!(ranges.kappa_lo > 0 && ranges.kappa_lo <= ranges.kappa_hi))
      throw std::invalid_argument("dataset: kappa range invalid");
    if (!(ranges.i0_lo > 0 && ranges.i0_lo <= ranges.i0_hi && ranges.i0_hi < 1))
      throw std::invalid_argument("dataset: i0 range invalid");
  }
};

struct DatasetBuildStats {
  int configs_total = 0;
  int configs_empty = 0;       // all grid pairs below the S*I guard
  int configs_degenerate = 0;  // averaging fell back to the naive mean
  std::int64_t samples = 0;
};

// One sample per consecutive grid pair of (s, i), tagged with the parameters in
// force on the left endpoint of the pair. Returns the number appended.
inline std::int64_t append_rate_samples(Dataset& out, std::span<const double> s,
                                        std::span<const double> i, double dt, double n,
                                        std::span<const double> beta_at,
                                        std::span<const double> kappa_at, double guard) {
  std::int64_t added = 0;
  for (std::size_t m = 0; m + 1 < s.size(); ++m) {
    const double si = s[m] * i[m];
    if (si < guard) continue;
    TrainingSample sample;
    sample.s = s[m];
    sample.i = i[m];
    sample.n = n;
    sample.beta = beta_at.size() == 1 ? beta_at[0] : beta_at[m];
    sample.kappa = kappa_at.size() == 1 ? kappa_at[0] : kappa_at[m];
    sample.target = (s[m] - s[m + 1]) / (dt * si);
    out.push_back(sample);
    ++added;
  }
  return added;
}

// Draws (n, beta, kappa, I0) configurations, runs a replica batch for each,
// averages with onset alignment and emits the rate samples. Deterministic for
// a fixed (config, master_seed): per-config work is independent and results
// are concatenated in configuration order.
inline Dataset build_dataset(const DatasetConfig& cfg, std::uint64_t master_seed, int threads = 0,
                             DatasetBuildStats* stats = nullptr) {
  cfg.validate();
  std::vector<Dataset> per_config(cfg.n_configs);
  std::vector<int> empty_flag(cfg.n_configs, 0), degen_flag(cfg.n_configs, 0);

  parallel_for(
      cfg.n_configs,
      [&](std::int64_t c) {
        Rng rng = make_rng(derive_seed(master_seed, c, 0));
        const double n = std::uniform_real_distribution<double>(cfg.ranges.n_lo, cfg.ranges.n_hi)(rng);
        const double beta =
            std::uniform_real_distribution<double>(cfg.ranges.beta_lo, cfg.ranges.beta_hi)(rng);
        const double kappa = std::exp(std::uniform_real_distribution<double>(
            std::log(cfg.ranges.kappa_lo), std::log(cfg.ranges.kappa_hi))(rng));
        const double i0 = std::exp(std::uniform_real_distribution<double>(
            std::log(cfg.ranges.i0_lo), std::log(cfg.ranges.i0_hi))(rng));

        DegreeParams dp;
        dp.alpha = cfg.alpha;
        dp.kappa = kappa;
        dp.n_nodes = static_cast<int>(std::lround(n * cfg.n_max));

        IbmParams ip;
        ip.beta = beta;
        ip.gamma = cfg.gamma;
        ip.alpha = cfg.alpha;
        ip.i0_fraction = i0;
        ip.horizon = cfg.horizon;
        ip.sample_dt = cfg.sample_dt;
        ip.edge_rate = cfg.edge_rate;

        TrajectoryBundle bundle;
        bundle.replicas = run_batch(dp, ip, nullptr, cfg.replicas_per_config,
                                    derive_seed(master_seed, c, 1), 1);
        AveragedTrajectory avg = align_and_average(bundle);
        if (avg.degenerate) degen_flag[c] = 1;
        const double beta_c[1] = {beta}, kappa_c[1] = {kappa};
        const std::int64_t added = append_rate_samples(per_config[c], avg.s, avg.i, cfg.sample_dt,
                                                       n, beta_c, kappa_c, cfg.si_guard);
        if (added == 0) empty_flag[c] = 1;
      },
      threads);

  Dataset out;
  std::int64_t total = 0;
  for (const auto& d : per_config) total += static_cast<std::int64_t>(d.size());
  out.reserve(total);
  for (auto& d : per_config) out.insert(out.end(), d.begin(), d.end());
  if (stats) {
    stats->configs_total = cfg.n_configs;
    stats->samples = total;
    stats->configs_empty = 0;
    stats->configs_degenerate = 0;
    for (int c = 0; c < cfg.n_configs; ++c) {
      stats->configs_empty += empty_flag[c];
      stats->configs_degenerate += degen_flag[c];
    }
  }
  return out;
}

inline void write_dataset_csv(const std::string& path, const Dataset& data) {
  CsvTable t;
  t.header = {"s", "i", "n", "beta", "kappa", "target"};
  t.rows.reserve(data.size());
  for (const auto& d : data) t.rows.push_back({d.s, d.i, d.n, d.beta, d.kappa, d.target});
  write_csv(path, t);
}

inline Dataset read_dataset_csv(const std::string& path) {
  CsvTable t = read_csv_file(path);
  const int cs = t.column("s"), ci = t.column("i"), cn = t.column("n");
  const int cb = t.column("beta"), ck = t.column("kappa"), ct = t.column("target");
  Dataset out;
  out.reserve(t.rows.size());
  for (const auto& r : t.rows)
    out.push_back({r[cs], r[ci], r[cn], r[cb], r[ck], r[ct]});
  return out;
}

}  // namespace epi
