#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "epi/incidence.hpp"

namespace epi {

template <class P>
concept IncidenceProvider = requires(const P& p, double x) {
  { p.incidence(x, x, x, x, x) } -> std::convertible_to<double>;
  { p.incidence_full(x, x, x, x, x) } -> std::convertible_to<IncidenceEval>;
};

struct RmState {
  double s = 0.0;
  double i = 0.0;
};

// Left-continuous piecewise-constant time function: values[0] before times[0],
// values[j+1] on [times[j], times[j+1]).
struct PiecewiseConstantFn {
  std::vector<double> times;
  std::vector<double> values;

  static PiecewiseConstantFn constant(double v) { return {{}, {v}}; }

  double at(double t) const {
    auto it = std::upper_bound(times.begin(), times.end(), t);
    return values[static_cast<std::size_t>(it - times.begin())];
  }
  void validate() const {
    if (values.size() != times.size() + 1)
      throw std::invalid_argument("PiecewiseConstantFn: values must have times.size()+1 entries");
    for (std::size_t j = 1; j < times.size(); ++j)
      if (!(times[j] > times[j - 1]))
        throw std::invalid_argument("PiecewiseConstantFn: times not increasing");
  }
};

struct RmTrajectory {
  double t0 = 0.0;
  double sample_dt = 2.0 / 7.0;
  std::vector<double> s, i;
  RmState final_state;
  double t_final = 0.0;

  int size() const { return static_cast<int>(s.size()); }
  double time(int m) const { return t0 + m * sample_dt; }
  double r(int m) const { return 1.0 - (s[m] + i[m]); }
};

struct RmRunConfig {
  double n = 1.0;
  double gamma = 1.0 / 6.0;
  double mu = 0.0;  // optional demographic birth/death rate
  PiecewiseConstantFn beta = PiecewiseConstantFn::constant(0.3);
  PiecewiseConstantFn kappa = PiecewiseConstantFn::constant(1.0);
  double t0 = 0.0;
  double t1 = 200.0;
  double dt_int = 0.05;
  double sample_dt = 2.0 / 7.0;
  RmState init{0.9995, 0.0005};

  void validate() const {
    if (!(dt_int > 0)) throw std::invalid_argument("RmRunConfig: dt_int must be > 0");
    if (!(t1 > t0)) throw std::invalid_argument("RmRunConfig: t1 must be > t0");
    if (!(sample_dt > 0)) throw std::invalid_argument("RmRunConfig: sample_dt must be > 0");
    beta.validate();
    kappa.validate();
  }
};

namespace detail {

template <IncidenceProvider P>
inline RmState rm_rhs(const P& model, const RmState& y, double n, double gamma, double mu,
                      double beta, double kappa) {
  const double F = model.incidence(y.s, y.i, n, beta, kappa);
  return {-F + mu * (1.0 - y.s), F - (gamma + mu) * y.i};
}

template <IncidenceProvider P>
inline RmState rk4_step(const P& model, const RmState& y, double h, double n, double gamma,
                        double mu, double beta, double kappa) {
  const RmState k1 = rm_rhs(model, y, n, gamma, mu, beta, kappa);
  const RmState y2{y.s + 0.5 * h * k1.s, y.i + 0.5 * h * k1.i};
  const RmState k2 = rm_rhs(model, y2, n, gamma, mu, beta, kappa);
  const RmState y3{y.s + 0.5 * h * k2.s, y.i + 0.5 * h * k2.i};
  const RmState k3 = rm_rhs(model, y3, n, gamma, mu, beta, kappa);
  const RmState y4{y.s + h * k3.s, y.i + h * k3.i};
  const RmState k4 = rm_rhs(model, y4, n, gamma, mu, beta, kappa);
  return {y.s + h / 6.0 * (k1.s + 2.0 * k2.s + 2.0 * k3.s + k4.s),
          y.i + h / 6.0 * (k1.i + 2.0 * k2.i + 2.0 * k3.i + k4.i)};
}

}  // namespace detail

// Classic fourth-order Runge-Kutta with fixed step dt_int. Steps never straddle
// a parameter switching time or an output grid point: the integration grid is
// refined so each segment is covered by equal steps of size <= dt_int.
template <IncidenceProvider P>
inline RmTrajectory integrate(const P& model, const RmRunConfig& cfg) {
  cfg.validate();
  RmTrajectory out;
  out.t0 = cfg.t0;
  out.sample_dt = cfg.sample_dt;

  const int grid_n = static_cast<int>(std::floor((cfg.t1 - cfg.t0) / cfg.sample_dt + 1e-9)) + 1;
  std::vector<double> breaks;
  for (int m = 0; m < grid_n; ++m) breaks.push_back(cfg.t0 + m * cfg.sample_dt);
  if (breaks.back() < cfg.t1 - 1e-12) breaks.push_back(cfg.t1);
  for (const auto& fn : {cfg.beta, cfg.kappa})
    for (double ts : fn.times)
      if (ts > cfg.t0 && ts < cfg.t1) breaks.push_back(ts);
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end(),
                           [](double a, double b) { return std::abs(a - b) < 1e-12; }),
               breaks.end());

  RmState y = cfg.init;
  int next_grid = 0;
  auto record_if_grid = [&](double t) {
    if (next_grid < grid_n && std::abs(t - (cfg.t0 + next_grid * cfg.sample_dt)) < 1e-9) {
      out.s.push_back(y.s);
      out.i.push_back(y.i);
      ++next_grid;
    }
  };
  record_if_grid(cfg.t0);
  for (std::size_t seg = 0; seg + 1 < breaks.size(); ++seg) {
    const double a = breaks[seg], b = breaks[seg + 1];
    const double beta = cfg.beta.at(a), kappa = cfg.kappa.at(a);
    const int n_sub = std::max<int>(1, static_cast<int>(std::ceil((b - a) / cfg.dt_int - 1e-12)));
    const double h = (b - a) / n_sub;
    for (int step = 0; step < n_sub; ++step)
      y = detail::rk4_step(model, y, h, cfg.n, cfg.gamma, cfg.mu, beta, kappa);
    if (!std::isfinite(y.s) || !std::isfinite(y.i))
      throw std::runtime_error("integrate: non-finite state at t=" + std::to_string(b) +
                               " (s=" + std::to_string(y.s) + ", i=" + std::to_string(y.i) + ")");
    record_if_grid(b);
  }
  out.final_state = y;
  out.t_final = breaks.back();
  return out;
}

// Threshold number at the disease-free equilibrium (S, I) = (1, 0).
template <IncidenceProvider P>
inline double r0(const P& model, double n, double beta, double kappa, double gamma) {
  return model.incidence_full(1.0, 0.0, n, beta, kappa).dF_dI / gamma;
}

// Demographic variant with birth/death rate mu; recovers r0 as mu -> 0.
template <IncidenceProvider P>
inline double r0_mu(const P& model, double n, double beta, double kappa, double gamma, double mu) {
  if (!(mu > 0)) throw std::invalid_argument("r0_mu: mu must be > 0");
  return model.incidence_full(1.0, 0.0, n, beta, kappa).dF_dI / (gamma + mu);
}

// Smallest grid value with r0 >= 1; the grid scan mirrors how the threshold
// surface is mapped (r0 of a learned network need not be monotone in beta).
template <IncidenceProvider P>
inline std::optional<double> critical_beta(const P& model, double n, double kappa, double gamma,
                                           std::span<const double> beta_grid) {
  for (double beta : beta_grid)
    if (r0(model, n, beta, kappa, gamma) >= 1.0) return beta;
  return std::nullopt;
}

// Epidemic size: R at the end of a long constant-parameter run.
template <IncidenceProvider P>
inline double r_infinity(const P& model, double n, double beta, double kappa, RmState init,
                         double gamma = 1.0 / 6.0, double horizon = 200.0, double dt_int = 0.05) {
  RmRunConfig cfg;
  cfg.n = n;
  cfg.gamma = gamma;
  cfg.beta = PiecewiseConstantFn::constant(beta);
  cfg.kappa = PiecewiseConstantFn::constant(kappa);
  cfg.t0 = 0.0;
  cfg.t1 = horizon;
  cfg.dt_int = dt_int;
  cfg.sample_dt = horizon;
  cfg.init = init;
  RmTrajectory traj = integrate(model, cfg);
  return 1.0 - (traj.final_state.s + traj.final_state.i);
}

}  // namespace epi
