#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "epi/mlp.hpp"

namespace epi {

struct IncidenceEval {
  double f = 0.0;       // transmission rate function value
  double F = 0.0;       // incidence f * S * I
  double dF_dS = 0.0;
  double dF_dI = 0.0;
  double dF_dbeta = 0.0;
  double dF_dkappa = 0.0;
};

// Learned transmission rate function f(S, I; n, beta, kappa) and the incidence
// F = f * S * I. The product form makes F vanish identically on the S = 0 and
// I = 0 axes, which keeps the reduced states in [0, 1].
struct IncidenceModel {
  Mlp net;
  std::array<double, 5> in_mean{0, 0, 0, 0, 0};
  std::array<double, 5> in_std{1, 1, 1, 1, 1};

  static IncidenceModel make(const std::vector<int>& hidden = {64, 128, 64, 16}) {
    IncidenceModel m;
    std::vector<int> sizes;
    sizes.push_back(5);
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(1);
    m.net = Mlp::make(sizes);
    return m;
  }

  void normalize(double s, double i, double n, double beta, double kappa, double* out) const {
    const double raw[5] = {s, i, n, beta, kappa};
    for (int j = 0; j < 5; ++j) out[j] = (raw[j] - in_mean[j]) / in_std[j];
  }

  double f_value(double s, double i, double n, double beta, double kappa) const {
    double x[5];
    normalize(s, i, n, beta, kappa, x);
    return net.forward(x);
  }

  double incidence(double s, double i, double n, double beta, double kappa) const {
    return f_value(s, i, n, beta, kappa) * s * i;
  }

  IncidenceEval incidence_full(double s, double i, double n, double beta, double kappa) const {
    double x[5], gx[5];
    normalize(s, i, n, beta, kappa, x);
    IncidenceEval e;
    e.f = net.forward_grad_input(x, gx);
    e.F = e.f * s * i;
    const double df_ds = gx[0] / in_std[0];
    const double df_di = gx[1] / in_std[1];
    e.dF_dS = df_ds * s * i + e.f * i;
    e.dF_dI = df_di * s * i + e.f * s;
    e.dF_dbeta = gx[3] / in_std[3] * s * i;
    e.dF_dkappa = gx[4] / in_std[4] * s * i;
    return e;
  }

  void save(const std::string& path) const;
  static IncidenceModel load(const std::string& path);
};

// Closure providers used by tests and classical baselines. They satisfy the
// same compile-time interface as IncidenceModel.
struct ZeroIncidence {
  double incidence(double, double, double, double, double) const { return 0.0; }
  IncidenceEval incidence_full(double, double, double, double, double) const { return {}; }
};

// F = c * S * I: the classical SIR closure with a fixed rate.
struct ConstantRateIncidence {
  double c = 0.3;
  double incidence(double s, double i, double, double, double) const { return c * s * i; }
  IncidenceEval incidence_full(double s, double i, double, double, double) const {
    IncidenceEval e;
    e.f = c;
    e.F = c * s * i;
    e.dF_dS = c * i;
    e.dF_dI = c * s;
    return e;
  }
};

// F = beta * S * I: classical SIR driven by the beta input.
struct BetaRateIncidence {
  double incidence(double s, double i, double, double beta, double) const { return beta * s * i; }
  IncidenceEval incidence_full(double s, double i, double, double beta, double) const {
    IncidenceEval e;
    e.f = beta;
    e.F = beta * s * i;
    e.dF_dS = beta * i;
    e.dF_dI = beta * s;
    e.dF_dbeta = s * i;
    return e;
  }
};

namespace detail {

inline std::string doubles_to_hex(const std::vector<double>& v) {
  static const char* digits = "0123456789abcdef";
  std::string out;
  out.reserve(v.size() * 16);
  for (double d : v) {
    std::uint64_t bits;
    std::memcpy(&bits, &d, 8);
    for (int shift = 60; shift >= 0; shift -= 4) out.push_back(digits[(bits >> shift) & 0xf]);
  }
  return out;
}

inline std::vector<double> hex_to_doubles(const std::string& hex) {
  if (hex.size() % 16 != 0) throw std::runtime_error("model file: bad weight blob length");
  std::vector<double> out(hex.size() / 16);
  for (std::size_t j = 0; j < out.size(); ++j) {
    std::uint64_t bits = 0;
    for (int c = 0; c < 16; ++c) {
      const char ch = hex[j * 16 + c];
      std::uint64_t nib;
      if (ch >= '0' && ch <= '9') nib = ch - '0';
      else if (ch >= 'a' && ch <= 'f') nib = ch - 'a' + 10;
      else throw std::runtime_error("model file: bad hex digit");
      bits = (bits << 4) | nib;
    }
    double d;
    std::memcpy(&d, &bits, 8);
    out[j] = d;
  }
  return out;
}

}  // namespace detail

inline void IncidenceModel::save(const std::string& path) const {
  nlohmann::ordered_json j;
  j["format"] = "epi-incidence-model";
  j["version"] = 1;
  j["layer_sizes"] = net.sizes;
  j["input_order"] = {"s", "i", "n", "beta", "kappa"};
  j["input_mean"] = in_mean;
  j["input_std"] = in_std;
  std::vector<double> flat;
  flat.reserve(net.n_params());
  for (int l = 0; l < net.n_layers(); ++l) {
    flat.insert(flat.end(), net.weights[l].begin(), net.weights[l].end());
    flat.insert(flat.end(), net.biases[l].begin(), net.biases[l].end());
  }
  j["weights_hex"] = detail::doubles_to_hex(flat);
  std::ofstream os(path);
  if (!os) throw std::runtime_error("model save: cannot open " + path);
  os << j.dump(1) << '\n';
}

inline IncidenceModel IncidenceModel::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("model load: cannot open " + path);
  nlohmann::json j;
  is >> j;
  if (j.value("format", "") != "epi-incidence-model")
    throw std::runtime_error("model load: unrecognized format");
  if (j.value("version", 0) != 1) throw std::runtime_error("model load: unsupported version");
  IncidenceModel m;
  m.net = Mlp::make(j.at("layer_sizes").get<std::vector<int>>());
  const auto mean = j.at("input_mean").get<std::vector<double>>();
  const auto stdv = j.at("input_std").get<std::vector<double>>();
  if (mean.size() != 5 || stdv.size() != 5) throw std::runtime_error("model load: bad stats");
  std::copy(mean.begin(), mean.end(), m.in_mean.begin());
  std::copy(stdv.begin(), stdv.end(), m.in_std.begin());
  std::vector<double> flat = detail::hex_to_doubles(j.at("weights_hex").get<std::string>());
  if (static_cast<std::int64_t>(flat.size()) != m.net.n_params())
    throw std::runtime_error("model load: weight count mismatch");
  std::size_t off = 0;
  for (int l = 0; l < m.net.n_layers(); ++l) {
    std::copy_n(flat.begin() + off, m.net.weights[l].size(), m.net.weights[l].begin());
    off += m.net.weights[l].size();
    std::copy_n(flat.begin() + off, m.net.biases[l].size(), m.net.biases[l].begin());
    off += m.net.biases[l].size();
  }
  return m;
}

}  // namespace epi
