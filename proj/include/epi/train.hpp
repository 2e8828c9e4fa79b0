#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

#include "epi/dataset.hpp"
#include "epi/incidence.hpp"

namespace epi {

struct TrainConfig {
  double learning_rate = 1e-3;
  double lr_decay = 0.9;  // multiplicative, per epoch
  int batch_size = 512;
  int epochs = 15;
  double validation_fraction = 0.15;
  std::vector<int> hidden = {64, 128, 64, 16};
  double init_gain = 1.0;
  double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate > 0) || !(lr_decay > 0) || batch_size < 1 || epochs < 1)
      throw std::invalid_argument("TrainConfig: invalid optimizer settings");
    if (!(validation_fraction > 0 && validation_fraction < 1))
      throw std::invalid_argument("TrainConfig: validation_fraction must be in (0,1)");
  }
};

struct EpochLog {
  int epoch;
  double train_mse;
  double val_mse;
  double lr;
};

struct TrainResult {
  IncidenceModel model;
  std::vector<EpochLog> log;
};

namespace detail {

// Mini-batch Adam on the mean squared error of f against the rate targets.
// Single logical thread with fixed accumulation order, so training is
// bit-reproducible for a given (dataset, config, seed).
class Trainer {
 public:
  Trainer(IncidenceModel model, const Dataset& data, const TrainConfig& cfg)
      : model_(std::move(model)), data_(data), cfg_(cfg) {
    cfg_.validate();
    if (data_.empty()) throw std::invalid_argument("train: empty dataset");
    const Mlp& net = model_.net;
    const int depth = net.n_layers();
    gw_.resize(depth);
    gb_.resize(depth);
    mw_.resize(depth);
    vw_.resize(depth);
    mb_.resize(depth);
    vb_.resize(depth);
    for (int l = 0; l < depth; ++l) {
      gw_[l].assign(net.weights[l].size(), 0.0);
      gb_[l].assign(net.biases[l].size(), 0.0);
      mw_[l].assign(net.weights[l].size(), 0.0);
      vw_[l].assign(net.weights[l].size(), 0.0);
      mb_[l].assign(net.biases[l].size(), 0.0);
      vb_[l].assign(net.biases[l].size(), 0.0);
    }
    acts_.resize(depth + 1);
    deltas_.resize(depth + 1);
  }

  TrainResult run() {
    Rng rng = make_rng(cfg_.seed);
    std::vector<std::int64_t> order(data_.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);

    const std::int64_t n_total = static_cast<std::int64_t>(order.size());
    std::int64_t n_val = static_cast<std::int64_t>(std::llround(cfg_.validation_fraction * n_total));
    n_val = std::clamp<std::int64_t>(n_val, n_total > 1 ? 1 : 0, n_total - 1);
    std::vector<std::int64_t> train_idx(order.begin(), order.end() - n_val);
    std::vector<std::int64_t> val_idx(order.end() - n_val, order.end());

    TrainResult result;
    for (int epoch = 0; epoch < cfg_.epochs; ++epoch) {
      const double lr = cfg_.learning_rate * std::pow(cfg_.lr_decay, epoch);
      std::shuffle(train_idx.begin(), train_idx.end(), rng);
      double train_sse = 0.0;
      for (std::size_t start = 0; start < train_idx.size(); start += cfg_.batch_size) {
        const std::size_t stop = std::min(train_idx.size(), start + cfg_.batch_size);
        train_sse += batch_step({train_idx.begin() + start, train_idx.begin() + stop}, lr);
      }
      const double train_mse = train_sse / static_cast<double>(train_idx.size());
      const double val_mse = evaluate(val_idx);
      if (!std::isfinite(train_mse) || !std::isfinite(val_mse))
        throw std::runtime_error("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 " (train=" + std::to_string(train_mse) +
                                 ", val=" + std::to_string(val_mse) + ")");
      result.log.push_back({epoch, train_mse, val_mse, lr});
    }
    result.model = std::move(model_);
    return result;
  }

  double evaluate(const std::vector<std::int64_t>& idx) {
    if (idx.empty()) return 0.0;
    double sse = 0.0;
    for (std::int64_t j : idx) {
      double x[5];
      const TrainingSample& sm = data_[j];
      model_.normalize(sm.s, sm.i, sm.n, sm.beta, sm.kappa, x);
      const double err = model_.net.forward(x) - sm.target;
      sse += err * err;
    }
    return sse / static_cast<double>(idx.size());
  }

 private:
  // One Adam step on a batch; returns the batch SSE.
  double batch_step(std::span<const std::int64_t> batch, double lr) {
    Mlp& net = model_.net;
    const int depth = net.n_layers();
    const int b_n = static_cast<int>(batch.size());
    for (int l = 0; l <= depth; ++l) {
      acts_[l].assign(static_cast<std::size_t>(b_n) * net.sizes[l], 0.0);
      deltas_[l].assign(static_cast<std::size_t>(b_n) * net.sizes[l], 0.0);
    }
    for (int r = 0; r < b_n; ++r) {
      const TrainingSample& sm = data_[batch[r]];
      model_.normalize(sm.s, sm.i, sm.n, sm.beta, sm.kappa, acts_[0].data() + static_cast<std::size_t>(r) * 5);
    }
    // Forward.
    for (int l = 0; l < depth; ++l) {
      const int n_in = net.sizes[l], n_out = net.sizes[l + 1];
      const bool hidden = l + 1 < depth;
      const double* w = net.weights[l].data();
      for (int r = 0; r < b_n; ++r) {
        const double* in = acts_[l].data() + static_cast<std::size_t>(r) * n_in;
        double* out = acts_[l + 1].data() + static_cast<std::size_t>(r) * n_out;
        for (int o = 0; o < n_out; ++o) {
          double acc = net.biases[l][o];
          const double* wr = w + static_cast<std::size_t>(o) * n_in;
          for (int c = 0; c < n_in; ++c) acc += wr[c] * in[c];
          out[o] = hidden && acc < 0.0 ? 0.0 : acc;
        }
      }
    }
    // Output error; loss = mean over batch of squared error.
    double sse = 0.0;
    for (int r = 0; r < b_n; ++r) {
      const double err = acts_[depth][r] - data_[batch[r]].target;
      sse += err * err;
      deltas_[depth][r] = 2.0 * err / b_n;
    }
    // Backward.
    for (int l = depth - 1; l >= 0; --l) {
      const int n_in = net.sizes[l], n_out = net.sizes[l + 1];
      std::fill(gw_[l].begin(), gw_[l].end(), 0.0);
      std::fill(gb_[l].begin(), gb_[l].end(), 0.0);
      const double* w = net.weights[l].data();
      for (int r = 0; r < b_n; ++r) {
        const double* in = acts_[l].data() + static_cast<std::size_t>(r) * n_in;
        const double* post = acts_[l + 1].data() + static_cast<std::size_t>(r) * n_out;
        double* dz = deltas_[l + 1].data() + static_cast<std::size_t>(r) * n_out;
        double* din = deltas_[l].data() + static_cast<std::size_t>(r) * n_in;
        for (int o = 0; o < n_out; ++o) {
          if (l + 1 < depth && post[o] <= 0.0) dz[o] = 0.0;
          const double d = dz[o];
          if (d == 0.0) continue;
          gb_[l][o] += d;
          double* gwr = gw_[l].data() + static_cast<std::size_t>(o) * n_in;
          const double* wr = w + static_cast<std::size_t>(o) * n_in;
          for (int c = 0; c < n_in; ++c) {
            gwr[c] += d * in[c];
            din[c] += d * wr[c];
          }
        }
      }
      adam_update(net.weights[l], gw_[l], mw_[l], vw_[l], lr);
      adam_update(net.biases[l], gb_[l], mb_[l], vb_[l], lr);
    }
    ++adam_t_;
    return sse;
  }

  void adam_update(std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                   std::vector<double>& v, double lr) {
    // adam_t_ is incremented after the whole step; correct with t+1 here.
    const double t = static_cast<double>(adam_t_ + 1);
    const double c1 = 1.0 - std::pow(cfg_.adam_beta1, t);
    const double c2 = 1.0 - std::pow(cfg_.adam_beta2, t);
    for (std::size_t j = 0; j < p.size(); ++j) {
      m[j] = cfg_.adam_beta1 * m[j] + (1.0 - cfg_.adam_beta1) * g[j];
      v[j] = cfg_.adam_beta2 * v[j] + (1.0 - cfg_.adam_beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p[j] -= lr * mhat / (std::sqrt(vhat) + cfg_.adam_eps);
    }
  }

  IncidenceModel model_;
  const Dataset& data_;
  TrainConfig cfg_;
  std::vector<std::vector<double>> acts_, deltas_, gw_, gb_, mw_, vw_, mb_, vb_;
  std::int64_t adam_t_ = 0;
};

inline void set_normalization_from(IncidenceModel& model, const Dataset& data) {
  double mean[5] = {0, 0, 0, 0, 0}, var[5] = {0, 0, 0, 0, 0};
  for (const auto& sm : data) {
    const double x[5] = {sm.s, sm.i, sm.n, sm.beta, sm.kappa};
    for (int j = 0; j < 5; ++j) mean[j] += x[j];
  }
  for (int j = 0; j < 5; ++j) mean[j] /= static_cast<double>(data.size());
  for (const auto& sm : data) {
    const double x[5] = {sm.s, sm.i, sm.n, sm.beta, sm.kappa};
    for (int j = 0; j < 5; ++j) var[j] += (x[j] - mean[j]) * (x[j] - mean[j]);
  }
  for (int j = 0; j < 5; ++j) {
    model.in_mean[j] = mean[j];
    const double sd = std::sqrt(var[j] / static_cast<double>(data.size()));
    model.in_std[j] = sd > 1e-12 ? sd : 1.0;
  }
}

}  // namespace detail

// Fresh training run: normalization statistics from the dataset, orthogonal
// initialization, Adam with an exponentially decaying learning rate.
inline TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  IncidenceModel model = IncidenceModel::make(cfg.hidden);
  detail::set_normalization_from(model, data);
  Rng rng = make_rng(derive_seed(cfg.seed, 0x1717));
  model.net.init_orthogonal(rng, cfg.init_gain);
  detail::Trainer trainer(std::move(model), data, cfg);
  return trainer.run();
}

// Continues training an existing model on a (typically larger) dataset. Weights
// and input normalization are kept; the optimizer state starts fresh.
inline TrainResult fine_tune(IncidenceModel model, const Dataset& data, const TrainConfig& cfg) {
  if (data.empty()) throw std::invalid_argument("fine_tune: empty dataset");
  detail::Trainer trainer(std::move(model), data, cfg);
  return trainer.run();
}

}  // namespace epi
