#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "epi/rng.hpp"

namespace epi {

// Fully connected network, rectifier hidden activations, linear scalar output.
// Weight matrices are row-major (out x in).
struct Mlp {
  std::vector<int> sizes;
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> biases;

  static Mlp make(std::vector<int> layer_sizes) {
    if (layer_sizes.size() < 2) throw std::invalid_argument("Mlp: need >= 2 layers");
    Mlp m;
    m.sizes = std::move(layer_sizes);
    m.weights.resize(m.n_layers());
    m.biases.resize(m.n_layers());
    for (int l = 0; l < m.n_layers(); ++l) {
      m.weights[l].assign(static_cast<std::size_t>(m.sizes[l + 1]) * m.sizes[l], 0.0);
      m.biases[l].assign(m.sizes[l + 1], 0.0);
    }
    return m;
  }

  int n_layers() const { return static_cast<int>(sizes.size()) - 1; }
  int max_width() const {
    int w = 0;
    for (int s : sizes) w = std::max(w, s);
    return w;
  }
  std::int64_t n_params() const {
    std::int64_t n = 0;
    for (int l = 0; l < n_layers(); ++l)
      n += static_cast<std::int64_t>(sizes[l + 1]) * sizes[l] + sizes[l + 1];
    return n;
  }

  // Orthogonal rows/columns (whichever fits), gain applied, zero biases.
  void init_orthogonal(Rng& rng, double gain = 1.0) {
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int l = 0; l < n_layers(); ++l) {
      const int rows = sizes[l + 1], cols = sizes[l];
      const int big = std::max(rows, cols), small = std::min(rows, cols);
      std::vector<double> a(static_cast<std::size_t>(big) * small);
      for (double& v : a) v = normal(rng);
      // Modified Gram-Schmidt on the columns of the (big x small) matrix.
      for (int j = 0; j < small; ++j) {
        for (int i = 0; i < j; ++i) {
          double dot = 0.0;
          for (int r = 0; r < big; ++r) dot += a[r * small + i] * a[r * small + j];
          for (int r = 0; r < big; ++r) a[r * small + j] -= dot * a[r * small + i];
        }
        double norm = 0.0;
        for (int r = 0; r < big; ++r) norm += a[r * small + j] * a[r * small + j];
        norm = std::sqrt(norm);
        if (norm < 1e-12) norm = 1.0;
        for (int r = 0; r < big; ++r) a[r * small + j] /= norm;
      }
      auto& w = weights[l];
      if (rows >= cols) {
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) w[static_cast<std::size_t>(r) * cols + c] = gain * a[static_cast<std::size_t>(r) * small + c];
      } else {
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) w[static_cast<std::size_t>(r) * cols + c] = gain * a[static_cast<std::size_t>(c) * small + r];
      }
      std::fill(biases[l].begin(), biases[l].end(), 0.0);
    }
  }

  // Scalar forward pass; x has sizes.front() entries.
  double forward(const double* x) const {
    thread_local std::vector<double> buf_a, buf_b;
    const int width = max_width();
    if (static_cast<int>(buf_a.size()) < width) {
      buf_a.resize(width);
      buf_b.resize(width);
    }
    const double* in = x;
    double* cur = buf_a.data();
    double* nxt = buf_b.data();
    for (int l = 0; l < n_layers(); ++l) {
      const int n_in = sizes[l], n_out = sizes[l + 1];
      const double* w = weights[l].data();
      const double* b = biases[l].data();
      const bool hidden = l + 1 < n_layers();
      for (int o = 0; o < n_out; ++o) {
        double acc = b[o];
        const double* wr = w + static_cast<std::size_t>(o) * n_in;
        for (int c = 0; c < n_in; ++c) acc += wr[c] * in[c];
        nxt[o] = hidden && acc < 0.0 ? 0.0 : acc;
      }
      in = nxt;
      std::swap(cur, nxt);
    }
    return in[0];
  }

  // Forward pass plus exact gradient of the scalar output with respect to the
  // inputs (reverse mode; rectifier subgradient 0 at the kink).
  double forward_grad_input(const double* x, double* gx) const {
    const int depth = n_layers();
    thread_local std::vector<std::vector<double>> acts;
    thread_local std::vector<double> g_a, g_b;
    if (static_cast<int>(acts.size()) < depth + 1) acts.resize(depth + 1);
    const int width = max_width();
    if (static_cast<int>(g_a.size()) < width) {
      g_a.resize(width);
      g_b.resize(width);
    }
    acts[0].assign(x, x + sizes[0]);
    for (int l = 0; l < depth; ++l) {
      const int n_in = sizes[l], n_out = sizes[l + 1];
      acts[l + 1].resize(n_out);
      const double* w = weights[l].data();
      const double* in = acts[l].data();
      const bool hidden = l + 1 < depth;
      for (int o = 0; o < n_out; ++o) {
        double acc = biases[l][o];
        const double* wr = w + static_cast<std::size_t>(o) * n_in;
        for (int c = 0; c < n_in; ++c) acc += wr[c] * in[c];
        acts[l + 1][o] = hidden && acc < 0.0 ? 0.0 : acc;
      }
    }
    const double out = acts[depth][0];
    double* g = g_a.data();
    double* gp = g_b.data();
    g[0] = 1.0;
    for (int l = depth - 1; l >= 0; --l) {
      const int n_in = sizes[l], n_out = sizes[l + 1];
      const double* w = weights[l].data();
      for (int c = 0; c < n_in; ++c) gp[c] = 0.0;
      for (int o = 0; o < n_out; ++o) {
        // Post-activation value 0 with a hidden layer means the unit was
        // clamped; its upstream gradient is dropped.
        const bool active = (l + 1 == depth) || acts[l + 1][o] > 0.0;
        if (!active || g[o] == 0.0) continue;
        const double go = g[o];
        const double* wr = w + static_cast<std::size_t>(o) * n_in;
        for (int c = 0; c < n_in; ++c) gp[c] += go * wr[c];
      }
      std::swap(g, gp);
    }
    for (int c = 0; c < sizes[0]; ++c) gx[c] = g[c];
    return out;
  }
};

}  // namespace epi
