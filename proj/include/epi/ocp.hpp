#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

#include "epi/control.hpp"
#include "epi/reduced_ode.hpp"

namespace epi {

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// All scalars of the regularized control problem. The control grid is the
// regular subdivision of [t_c, t_horizon] whose step is closest to dt.
struct OcpConfig {
  double t_c = 1.0;
  double t_horizon = 200.0;
  double dt = 2.0 / 7.0;
  double omega_beta = 0.2, omega_kappa = 0.2, omega_hosp = 0.6;
  double i_hosp = 0.025, i_max = 0.1;
  double epsilon = 1e-2;
  double delta = 1e-7;
  double eta = 1e-6;
  ControlBounds bounds;
  int n_g = 50;        // max gradient iterations
  double tau_g = 1e-3; // relative-decrease stopping tolerance
  double gamma = 1.0 / 6.0;
  double beta0 = 0.3, kappa0 = 1.0, n = 1.0;
  RmState state_c{0.9995, 0.0005};  // state handed over at t_c
  double dt_int = 0.05;
  // Line search: bracket [0, rho_max], doubled when the minimizer hits the
  // right edge.
  double rho_max_init = 1.0;
  double rho_max_cap = 64.0;
  double ls_tol = 1e-7;  // relative to the bracket width
  int ls_max_evals = 40;

  void validate() const {
    if (!(bounds.b_min > 0 && bounds.b_min <= 1.0 && bounds.k_max > 1.0))
      throw std::invalid_argument("OcpConfig: need 0 < b_min <= 1 < k_max");
    if (!(i_hosp > 0 && i_hosp < i_max && i_max <= 1.0))
      throw std::invalid_argument("OcpConfig: need 0 < i_hosp < i_max <= 1");
    if (!(t_c < t_horizon)) throw std::invalid_argument("OcpConfig: need t_c < t_horizon");
    if (!(omega_beta >= 0 && omega_kappa >= 0 && omega_hosp >= 0))
      throw std::invalid_argument("OcpConfig: weights must be >= 0");
    if (!(epsilon > 0 && eta > 0 && delta >= 0 && dt > 0 && dt_int > 0))
      throw std::invalid_argument("OcpConfig: invalid regularization/step settings");
  }
};

struct OcpGrid {
  double t_c = 0.0, dt = 0.0;
  int m_count = 0;

  static OcpGrid make(const OcpConfig& cfg) {
    OcpGrid g;
    g.t_c = cfg.t_c;
    const long steps = std::max<long>(1, std::lround((cfg.t_horizon - cfg.t_c) / cfg.dt));
    g.m_count = static_cast<int>(steps) + 1;
    g.dt = (cfg.t_horizon - cfg.t_c) / static_cast<double>(steps);
    return g;
  }
  double time(int m) const { return t_c + m * dt; }
  // Trapezoid quadrature weight of grid point m.
  double weight(int m) const { return (m == 0 || m == m_count - 1) ? 0.5 * dt : dt; }
};

inline ControlSchedule make_ocp_schedule(const OcpConfig& cfg, double b_val, double k_val) {
  const OcpGrid grid = OcpGrid::make(cfg);
  ControlSchedule s;
  s.times.resize(grid.m_count);
  for (int m = 0; m < grid.m_count; ++m) s.times[m] = grid.time(m);
  s.b.assign(grid.m_count, b_val);
  s.k.assign(grid.m_count, k_val);
  return s;
}

inline void project_schedule(ControlSchedule& s, const ControlBounds& bounds) {
  for (double& x : s.b) x = std::min(1.0, std::max(bounds.b_min, x));
  for (double& x : s.k) x = std::min(bounds.k_max, std::max(1.0, x));
}

namespace detail {

struct OcpForward {
  std::vector<double> s, i;          // states at the control grid points
  std::vector<double> sub_s, sub_i;  // states at every RK4 sub-step start
  int n_sub = 1;
  double h = 0.0;
};

// Integrate the controlled reduced model across the control grid, holding
// (b_m, k_m) on [t_m, t_{m+1}). Sub-steps are equal within each interval.
template <IncidenceProvider P>
inline OcpForward ocp_forward(const P& model, const OcpConfig& cfg, const ControlSchedule& sch,
                              bool store_substeps) {
  const OcpGrid grid = OcpGrid::make(cfg);
  if (sch.size() != grid.m_count)
    throw std::invalid_argument("ocp_forward: schedule does not match the control grid");
  OcpForward fwd;
  fwd.n_sub = std::max<int>(1, static_cast<int>(std::ceil(grid.dt / cfg.dt_int - 1e-12)));
  fwd.h = grid.dt / fwd.n_sub;
  fwd.s.resize(grid.m_count);
  fwd.i.resize(grid.m_count);
  if (store_substeps) {
    fwd.sub_s.resize(static_cast<std::size_t>(grid.m_count - 1) * fwd.n_sub);
    fwd.sub_i.resize(static_cast<std::size_t>(grid.m_count - 1) * fwd.n_sub);
  }
  RmState y = cfg.state_c;
  fwd.s[0] = y.s;
  fwd.i[0] = y.i;
  for (int m = 0; m + 1 < grid.m_count; ++m) {
    const double beta_eff = cfg.beta0 * sch.b[m] * coupling_v(sch.k[m]);
    const double kappa_eff = cfg.kappa0 * sch.k[m];
    for (int q = 0; q < fwd.n_sub; ++q) {
      if (store_substeps) {
        fwd.sub_s[static_cast<std::size_t>(m) * fwd.n_sub + q] = y.s;
        fwd.sub_i[static_cast<std::size_t>(m) * fwd.n_sub + q] = y.i;
      }
      y = rk4_step(model, y, fwd.h, cfg.n, cfg.gamma, 0.0, beta_eff, kappa_eff);
    }
    if (!std::isfinite(y.s) || !std::isfinite(y.i))
      throw std::runtime_error("ocp_forward: non-finite state at interval " + std::to_string(m));
    fwd.s[m + 1] = y.s;
    fwd.i[m + 1] = y.i;
  }
  return fwd;
}

}  // namespace detail

inline double smoothed_abs(double x, double eta) { return std::sqrt(eta + x * x); }
inline double smoothed_abs_deriv(double x, double eta) { return x / std::sqrt(eta + x * x); }

inline double smoothed_tv(std::span<const double> v, double eta) {
  double acc = 0.0;
  for (std::size_t m = 1; m < v.size(); ++m) acc += smoothed_abs(v[m] - v[m - 1], eta);
  return acc;
}

struct OcpCost {
  double j = 0.0;        // running cost (trapezoid on the control grid)
  double tv = 0.0;       // smoothed total variation of b plus k
  double j_delta = 0.0;  // j + delta * tv
};

namespace detail {

inline double running_cost_density(const OcpConfig& cfg, double b, double k, double i_val) {
  const double hosp = positive_part(i_val / cfg.i_hosp - 1.0);
  const double cap = positive_part(i_val / cfg.i_max - 1.0);
  return 0.5 * (cfg.omega_beta * (1.0 - b) * (1.0 - b) +
                cfg.omega_kappa * (k - 1.0) * (k - 1.0) + cfg.omega_hosp * hosp * hosp +
                cap * cap / cfg.epsilon);
}

// d(running cost density)/dI: the adjoint source.
inline double cost_source(const OcpConfig& cfg, double i_val) {
  return cfg.omega_hosp / cfg.i_hosp * positive_part(i_val / cfg.i_hosp - 1.0) +
         positive_part(i_val / cfg.i_max - 1.0) / (cfg.i_max * cfg.epsilon);
}

}  // namespace detail

template <IncidenceProvider P>
inline OcpCost ocp_cost(const P& model, const OcpConfig& cfg, const ControlSchedule& sch) {
  cfg.validate();
  const OcpGrid grid = OcpGrid::make(cfg);
  const detail::OcpForward fwd = detail::ocp_forward(model, cfg, sch, false);
  OcpCost out;
  for (int m = 0; m < grid.m_count; ++m)
    out.j += grid.weight(m) * detail::running_cost_density(cfg, sch.b[m], sch.k[m], fwd.i[m]);
  out.tv = smoothed_tv(sch.b, cfg.eta) + smoothed_tv(sch.k, cfg.eta);
  out.j_delta = out.j + cfg.delta * out.tv;
  return out;
}

// Adjoint state sampled at the control grid; terminal values are zero. The two
// (p, q) pairs solve the same backward system and coincide; both are reported
// to mirror the gradient formulas.
struct AdjointTrajectory {
  std::vector<double> p1, q1, p2, q2;
};

struct OcpGradient {
  std::vector<double> db, dk;  // pointwise gradient densities of J_delta

  double norm() const {
    double acc = 0.0;
    for (double x : db) acc += x * x;
    for (double x : dk) acc += x * x;
    return std::sqrt(acc);
  }
};

// Exact gradient of the discretized J_delta, assembled by reverse-mode
// differentiation of the forward RK4 sweep (the discrete adjoint). Reported
// per grid point in density form: dividing the partial derivative with respect
// to a control value by that point's quadrature weight makes the interior
// entries match the continuous-time formulas
//   d_b J = omega_beta (b-1) + (p,q) . (-beta0 v(k) dF/dbeta, beta0 v(k) dF/dbeta)
//   d_k J = omega_kappa (k-1) + (p,q) . -/+ (beta0 b v'(k) dF/dbeta + kappa0 dF/dkappa).
template <IncidenceProvider P>
inline OcpGradient ocp_gradient(const P& model, const OcpConfig& cfg, const ControlSchedule& sch,
                                AdjointTrajectory* adjoint_out = nullptr) {
  cfg.validate();
  const OcpGrid grid = OcpGrid::make(cfg);
  const int m_count = grid.m_count;
  const detail::OcpForward fwd = detail::ocp_forward(model, cfg, sch, true);

  OcpGradient grad;
  grad.db.assign(m_count, 0.0);
  grad.dk.assign(m_count, 0.0);
  AdjointTrajectory adj;
  adj.p1.assign(m_count, 0.0);
  adj.q1.assign(m_count, 0.0);

  double lam_s = 0.0, lam_i = 0.0;  // dJ/d(state at the current grid time)
  // Terminal condition: zero, recorded before the cost lump at T.
  adj.p1[m_count - 1] = 0.0;
  adj.q1[m_count - 1] = 0.0;
  lam_i += grid.weight(m_count - 1) * detail::cost_source(cfg, fwd.i[m_count - 1]);

  for (int m = m_count - 2; m >= 0; --m) {
    const double vk = coupling_v(sch.k[m]);
    const double beta_eff = cfg.beta0 * sch.b[m] * vk;
    const double kappa_eff = cfg.kappa0 * sch.k[m];
    double acc_beta_eff = 0.0, acc_kappa_eff = 0.0;
    const double h = fwd.h;
    for (int q = fwd.n_sub - 1; q >= 0; --q) {
      const std::size_t at = static_cast<std::size_t>(m) * fwd.n_sub + q;
      const RmState y{fwd.sub_s[at], fwd.sub_i[at]};
      // Recompute the RK4 stages of this step.
      IncidenceEval e1 = model.incidence_full(y.s, y.i, cfg.n, beta_eff, kappa_eff);
      const RmState k1{-e1.F, e1.F - cfg.gamma * y.i};
      const RmState y2{y.s + 0.5 * h * k1.s, y.i + 0.5 * h * k1.i};
      IncidenceEval e2 = model.incidence_full(y2.s, y2.i, cfg.n, beta_eff, kappa_eff);
      const RmState k2{-e2.F, e2.F - cfg.gamma * y2.i};
      const RmState y3{y.s + 0.5 * h * k2.s, y.i + 0.5 * h * k2.i};
      IncidenceEval e3 = model.incidence_full(y3.s, y3.i, cfg.n, beta_eff, kappa_eff);
      const RmState k3{-e3.F, e3.F - cfg.gamma * y3.i};
      const RmState y4{y.s + h * k3.s, y.i + h * k3.i};
      IncidenceEval e4 = model.incidence_full(y4.s, y4.i, cfg.n, beta_eff, kappa_eff);

      // Reverse sweep through the stages.
      auto pullback = [&](const IncidenceEval& e, double kb_s, double kb_i,
                          RmState& ybar) {
        const double diff = kb_i - kb_s;
        ybar.s = e.dF_dS * diff;
        ybar.i = e.dF_dI * diff - cfg.gamma * kb_i;
        acc_beta_eff += e.dF_dbeta * diff;
        acc_kappa_eff += e.dF_dkappa * diff;
      };
      RmState yb1, yb2, yb3, yb4;
      const double kb4_s = h / 6.0 * lam_s, kb4_i = h / 6.0 * lam_i;
      pullback(e4, kb4_s, kb4_i, yb4);
      const double kb3_s = h / 3.0 * lam_s + h * yb4.s, kb3_i = h / 3.0 * lam_i + h * yb4.i;
      pullback(e3, kb3_s, kb3_i, yb3);
      const double kb2_s = h / 3.0 * lam_s + 0.5 * h * yb3.s,
                   kb2_i = h / 3.0 * lam_i + 0.5 * h * yb3.i;
      pullback(e2, kb2_s, kb2_i, yb2);
      const double kb1_s = h / 6.0 * lam_s + 0.5 * h * yb2.s,
                   kb1_i = h / 6.0 * lam_i + 0.5 * h * yb2.i;
      pullback(e1, kb1_s, kb1_i, yb1);
      lam_s += yb1.s + yb2.s + yb3.s + yb4.s;
      lam_i += yb1.i + yb2.i + yb3.i + yb4.i;
    }
    adj.p1[m] = lam_s;
    adj.q1[m] = lam_i;
    lam_i += grid.weight(m) * detail::cost_source(cfg, fwd.i[m]);

    // Chain rule through beta_eff = beta0 b v(k), kappa_eff = kappa0 k.
    grad.db[m] = acc_beta_eff * cfg.beta0 * vk;
    grad.dk[m] =
        acc_beta_eff * cfg.beta0 * sch.b[m] * coupling_v_prime(sch.k[m]) + acc_kappa_eff * cfg.kappa0;
  }

  for (int m = 0; m < m_count; ++m) {
    const double w = grid.weight(m);
    double db = grad.db[m] / w + cfg.omega_beta * (sch.b[m] - 1.0);
    double dk = grad.dk[m] / w + cfg.omega_kappa * (sch.k[m] - 1.0);
    // Smoothed-TV contribution, in the same density normalization.
    double tv_b = 0.0, tv_k = 0.0;
    if (m > 0) {
      tv_b += smoothed_abs_deriv(sch.b[m] - sch.b[m - 1], cfg.eta);
      tv_k += smoothed_abs_deriv(sch.k[m] - sch.k[m - 1], cfg.eta);
    }
    if (m + 1 < m_count) {
      tv_b -= smoothed_abs_deriv(sch.b[m + 1] - sch.b[m], cfg.eta);
      tv_k -= smoothed_abs_deriv(sch.k[m + 1] - sch.k[m], cfg.eta);
    }
    grad.db[m] = db + cfg.delta * tv_b / w;
    grad.dk[m] = dk + cfg.delta * tv_k / w;
  }

  if (adjoint_out) {
    adj.p2 = adj.p1;
    adj.q2 = adj.q1;
    *adjoint_out = std::move(adj);
  }
  return grad;
}

struct GoldenResult {
  double x = 0.0;
  double fx = 0.0;
  int evals = 0;
};

// Golden-ratio interval reduction on [lo, hi]; returns the best evaluated
// point once the bracket width drops below tol or the evaluation cap is hit.
inline GoldenResult golden_section(const std::function<double(double)>& phi, double lo, double hi,
                                   double tol, int max_evals) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = phi(c), fd = phi(d);
  int evals = 2;
  GoldenResult best = fc <= fd ? GoldenResult{c, fc, evals} : GoldenResult{d, fd, evals};
  while (b - a > tol && evals < max_evals) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = phi(c);
      if (fc < best.fx) best = {c, fc, evals};
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = phi(d);
      if (fd < best.fx) best = {d, fd, evals};
    }
    ++evals;
  }
  best.evals = evals;
  return best;
}

struct OcpIterRecord {
  int iter;
  double j_delta;
  double rho;
};

struct OcpSolveResult {
  ControlSchedule schedule;
  std::vector<OcpIterRecord> log;  // entry 0 is the initial cost
  double j_initial = 0.0;
  double j_final = 0.0;
  int iterations = 0;
};

// Optimal-step projected gradient descent: golden-section search on
// rho -> J_delta[P(u - rho grad)], projection onto the box, then the gradient
// is refreshed and normalized. Stops at the iteration cap or when the cost
// decrease falls to tau_g * J_delta[u0]. The accepted step never increases the
// cost (rho = 0 is kept when the search fails to improve), so the cost
// sequence is non-increasing.
//
// Every search direction is normalized, including the first: near active
// threshold penalties the raw gradient norm reaches 1e4..1e5 and no step in
// the bracket is small enough, which kills warm-started solves on the spot.
template <IncidenceProvider P>
inline OcpSolveResult ocp_solve(const P& model, const OcpConfig& cfg,
                                const ControlSchedule* warm_start = nullptr) {
  cfg.validate();
  const OcpGrid grid = OcpGrid::make(cfg);
  ControlSchedule u = make_ocp_schedule(cfg, 1.0, 1.0);
  if (warm_start) {
    // Re-sample onto this grid (identity when grids already match).
    for (int m = 0; m < grid.m_count; ++m) {
      u.b[m] = warm_start->b_at(u.times[m]);
      u.k[m] = warm_start->k_at(u.times[m]);
    }
  }
  project_schedule(u, cfg.bounds);

  auto offset = [&](const ControlSchedule& base, const OcpGradient& dir, double rho) {
    ControlSchedule out = base;
    for (int m = 0; m < grid.m_count; ++m) {
      out.b[m] = base.b[m] - rho * dir.db[m];
      out.k[m] = base.k[m] - rho * dir.dk[m];
    }
    project_schedule(out, cfg.bounds);
    return out;
  };

  auto normalize = [&](OcpGradient& g) {
    const double norm = g.norm();
    if (norm > 0.0)
      for (int m = 0; m < grid.m_count; ++m) {
        g.db[m] /= norm;
        g.dk[m] /= norm;
      }
  };

  OcpSolveResult result;
  double j_new = ocp_cost(model, cfg, u).j_delta;
  const double j0 = j_new;
  double j_old = std::numeric_limits<double>::infinity();
  OcpGradient dir = ocp_gradient(model, cfg, u);
  normalize(dir);
  result.log.push_back({0, j_new, 0.0});

  double rho_max = cfg.rho_max_init;
  int p = 0;
  while (p < cfg.n_g && (j_old - j_new) > cfg.tau_g * j0) {
    auto phi = [&](double rho) { return ocp_cost(model, cfg, offset(u, dir, rho)).j_delta; };

    // Projection makes phi multimodal along the ray (far steps slam the
    // schedule against the box and can cost less than mid-range ones), so a
    // bare golden search may home in on the wrong valley. Bracket first: probe
    // geometrically shrinking steps until one improves, run the golden search
    // inside twice that radius, and keep the better of probe and search.
    double probe_rho = -1.0, probe_f = j_new;
    for (double rho = rho_max; rho > 1e-16 * rho_max; rho *= 0.5) {
      const double f = phi(rho);
      if (f < probe_f) {
        probe_rho = rho;
        probe_f = f;
        break;
      }
    }
    if (probe_rho < 0.0 && rho_max < cfg.rho_max_cap) {
      for (double rho = 2.0 * rho_max; rho <= cfg.rho_max_cap; rho *= 2.0) {
        const double f = phi(rho);
        if (f < probe_f) {
          probe_rho = rho;
          probe_f = f;
          rho_max = std::min(cfg.rho_max_cap, 2.0 * rho);
          break;
        }
      }
    }
    GoldenResult ls{0.0, j_new, 0};
    if (probe_rho > 0.0) {
      for (;;) {
        const double hi = std::min(rho_max, 2.0 * probe_rho);
        ls = golden_section(phi, 0.0, hi, cfg.ls_tol * hi, cfg.ls_max_evals);
        if (ls.fx > probe_f) ls = {probe_rho, probe_f, ls.evals};
        if (ls.x >= 0.99 * hi && hi >= rho_max && rho_max < cfg.rho_max_cap) {
          rho_max = std::min(cfg.rho_max_cap, 2.0 * rho_max);
          probe_rho = std::min(rho_max, 2.0 * probe_rho);
          probe_f = std::min(probe_f, ls.fx);
          continue;
        }
        break;
      }
    }
    double rho_star = ls.x, j_cand = ls.fx;
    if (!(j_cand < j_new)) {
      rho_star = 0.0;
      j_cand = j_new;
    }
    u = offset(u, dir, rho_star);
    if (!u.feasible(cfg.bounds)) throw std::logic_error("ocp_solve: infeasible iterate");
    j_old = j_new;
    j_new = j_cand;
    dir = ocp_gradient(model, cfg, u);
    normalize(dir);
    ++p;
    result.log.push_back({p, j_new, rho_star});
  }
  result.schedule = std::move(u);
  result.j_initial = j0;
  result.j_final = j_new;
  result.iterations = p;
  return result;
}

}  // namespace epi
