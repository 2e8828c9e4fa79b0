#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "epi/averaging.hpp"
#include "epi/dataset.hpp"
#include "epi/gillespie.hpp"
#include "epi/ocp.hpp"
#include "epi/train.hpp"
#include "epi/tree.hpp"

namespace epi {

struct StoppingCriteria {
  double tau_rl = 1e-3;    // c_p <= tau_rl * c_0
  double tau_l2 = 1.0;     // discrete L2 mismatch of (S, I)
  double tau_rinf = 1e-3;  // |R_inf gap|
  double tau_ip = 6.0;     // infection-peak delay, days
  int max_outer_iterations = 50;

  void validate() const {
    if (!(tau_rl > 0 && tau_l2 > 0 && tau_rinf > 0 && tau_ip > 0 && max_outer_iterations > 0))
      throw std::invalid_argument("StoppingCriteria: all tolerances must be positive");
  }
};

// Penalty-only cost of a sampled I curve on [t_c, t_horizon]: the hospital and
// capacity terms of the control cost, without the control-effort terms.
// Trapezoid quadrature over the grid points inside the window plus an
// interpolated node at t_c.
inline double penalty_cost(std::span<const double> i_vals, double t0, double dt,
                           const OcpConfig& cfg) {
  if (i_vals.size() < 2) throw std::invalid_argument("penalty_cost: need >= 2 samples");
  auto density = [&](double i_val) {
    const double hosp = positive_part(i_val / cfg.i_hosp - 1.0);
    const double cap = positive_part(i_val / cfg.i_max - 1.0);
    return cfg.omega_hosp * hosp * hosp + cap * cap / cfg.epsilon;
  };
  const int m_count = static_cast<int>(i_vals.size());
  std::vector<double> t_nodes, f_nodes;
  for (int m = 0; m < m_count; ++m) {
    const double t = t0 + m * dt;
    if (t > cfg.t_horizon + 1e-9) break;
    if (t < cfg.t_c - 1e-12) continue;
    t_nodes.push_back(t);
    f_nodes.push_back(density(i_vals[m]));
  }
  if (t_nodes.empty() || t_nodes.front() > cfg.t_c + 1e-12) {
    // Interpolate the value at t_c from the bracketing grid pair.
    const int hi = std::min<int>(m_count - 1, static_cast<int>(std::ceil((cfg.t_c - t0) / dt)));
    const int lo = std::max(0, hi - 1);
    const double t_lo = t0 + lo * dt;
    const double w = hi == lo ? 0.0 : (cfg.t_c - t_lo) / dt;
    const double i_c = (1.0 - w) * i_vals[lo] + w * i_vals[hi];
    t_nodes.insert(t_nodes.begin(), cfg.t_c);
    f_nodes.insert(f_nodes.begin(), density(i_c));
  }
  double acc = 0.0;
  for (std::size_t m = 1; m < t_nodes.size(); ++m)
    acc += 0.5 * (f_nodes[m] + f_nodes[m - 1]) * (t_nodes[m] - t_nodes[m - 1]);
  return acc;
}

// Grid time of the infection peak; ties break to the earliest time.
inline double peak_time(std::span<const double> i_vals, double t0, double dt) {
  std::size_t best = 0;
  for (std::size_t m = 1; m < i_vals.size(); ++m)
    if (i_vals[m] > i_vals[best]) best = m;
  return t0 + best * dt;
}

struct MpcMetrics {
  double c_p = 0.0, c_0 = 0.0, c_p_reduced = 0.0;
  double l2_mismatch = 0.0;
  double rinf_gap = 0.0;
  double peak_delay = 0.0;
  bool cost_ok = false, reduced_ok = false, l2_ok = false, rinf_ok = false, peak_ok = false;
  bool accepted = false;
};

// All five acceptance conditions; c_0 below 1e-12 (epidemic never took off)
// replaces the relative test by an absolute one.
inline MpcMetrics check_stopping(double c_p, double c_0, double c_p_reduced,
                                 const RmTrajectory& rm, const AveragedTrajectory& ibm,
                                 const StoppingCriteria& crit, const OcpConfig& cfg) {
  MpcMetrics m;
  m.c_p = c_p;
  m.c_0 = c_0;
  m.c_p_reduced = c_p_reduced;
  m.cost_ok = c_0 < 1e-12 ? c_p <= 1e-12 : c_p <= crit.tau_rl * c_0;
  m.reduced_ok = c_p <= c_p_reduced;

  if (rm.size() != ibm.size() || std::abs(rm.sample_dt - ibm.sample_dt) > 1e-12 ||
      std::abs(rm.t0) > 1e-12)
    throw std::invalid_argument("check_stopping: trajectories must share the grid");
  double sq = 0.0;
  for (int j = 0; j < rm.size(); ++j) {
    if (rm.time(j) < cfg.t_c - 1e-12) continue;
    const double ds = rm.s[j] - ibm.s[j];
    const double di = rm.i[j] - ibm.i[j];
    sq += rm.sample_dt * (ds * ds + di * di);
  }
  m.l2_mismatch = std::sqrt(sq);
  m.l2_ok = m.l2_mismatch <= crit.tau_l2;

  m.rinf_gap = std::abs(rm.r(rm.size() - 1) - ibm.r.back());
  m.rinf_ok = m.rinf_gap <= crit.tau_rinf;

  m.peak_delay = std::abs(peak_time(rm.i, rm.t0, rm.sample_dt) -
                          peak_time(ibm.i, 0.0, ibm.sample_dt));
  m.peak_ok = m.peak_delay <= crit.tau_ip;

  m.accepted = m.cost_ok && m.reduced_ok && m.l2_ok && m.rinf_ok && m.peak_ok;
  return m;
}

// Appends the local information of a controlled scenario to the dataset: one
// rate sample per grid pair of the averaged IBM trajectory, tagged with the
// effective parameters (beta0 b v(k), kappa0 k) in force on the interval.
inline std::int64_t reinforce(Dataset& data, const AveragedTrajectory& avg,
                              const ControlSchedule& schedule, double n, double beta0,
                              double kappa0, double guard = 1e-8) {
  const int m_count = avg.size();
  std::vector<double> beta_at(std::max(0, m_count - 1)), kappa_at(std::max(0, m_count - 1));
  for (int m = 0; m + 1 < m_count; ++m) {
    const double t = avg.time(m);
    if (t < schedule.t_start()) {
      beta_at[m] = beta0;
      kappa_at[m] = kappa0;
    } else {
      const double b = schedule.b_at(t), k = schedule.k_at(t);
      beta_at[m] = beta0 * b * coupling_v(k);
      kappa_at[m] = kappa0 * k;
    }
  }
  return append_rate_samples(data, avg.s, avg.i, avg.sample_dt, n, beta_at, kappa_at, guard);
}

struct MpcScenario {
  double n = 0.2, beta0 = 0.3, kappa0 = 0.8;
  double s0 = 0.9995, i0 = 0.0005;
  double alpha = 10.0;
  double gamma = 1.0 / 6.0;
  int n_max = 20000;
  EdgeRateConvention edge_rate = EdgeRateConvention::beta_over_alpha;

  int population() const { return static_cast<int>(std::lround(n * n_max)); }
};

struct MpcConfig {
  MpcScenario scenario;
  OcpConfig ocp;  // beta0/kappa0/n/gamma/state_c are filled from the scenario
  StoppingCriteria stop;
  TrainConfig train;          // initial training on D_0
  double d0_fraction = 0.075;  // seeded fraction of the base dataset
  int fine_tune_epochs = 5;
  int replicas = 50;
  double sample_dt = 2.0 / 7.0;
  int compress_max_pieces = 8;
  int threads = 0;
  // Precision schedule for the inner solver: looser early, tighter late. The
  // cap must leave room for full convergence; half-solved control problems
  // keep the loop oscillating between model refits.
  int ng_base = 20, ng_step = 20, ng_cap = 200;
  double taug_base = 1e-3, taug_floor = 1e-7;
  std::string artifact_dir;  // per-iteration artifacts when non-empty
  bool write_replicas = true;
};

struct MpcIterationRecord {
  int p = 0;
  MpcMetrics metrics;
  double j_delta_final = 0.0;
  int ocp_iterations = 0;
  std::int64_t dataset_size = 0;
};

struct MpcResult {
  bool accepted = false;
  int iterations = 0;
  ControlSchedule final_control;  // compressed (b_hat, k_hat)
  ControlSchedule final_dense;
  std::vector<MpcIterationRecord> history;
  double c_0 = 0.0;
  std::string failure_reason;  // non-empty when the iteration cap was hit
};

namespace detail {

inline PiecewiseConstantFn effective_fn(const ControlSchedule& sch, double base,
                                        bool is_beta, double beta0, double kappa0) {
  PiecewiseConstantFn fn;
  fn.values.push_back(base);
  double last = base;
  for (int m = 0; m < sch.size(); ++m) {
    const double v = is_beta ? beta0 * sch.b[m] * coupling_v(sch.k[m]) : kappa0 * sch.k[m];
    if (m == 0 || v != last) {
      fn.times.push_back(sch.times[m]);
      fn.values.push_back(v);
      last = v;
    }
  }
  return fn;
}

inline nlohmann::ordered_json metrics_json(const MpcMetrics& m) {
  nlohmann::ordered_json j;
  j["c_p"] = m.c_p;
  j["c_0"] = m.c_0;
  j["c_p_reduced"] = m.c_p_reduced;
  j["l2_mismatch"] = m.l2_mismatch;
  j["r_infinity_gap"] = m.rinf_gap;
  j["peak_delay_days"] = m.peak_delay;
  j["cost_ok"] = m.cost_ok;
  j["reduced_ok"] = m.reduced_ok;
  j["l2_ok"] = m.l2_ok;
  j["rinf_ok"] = m.rinf_ok;
  j["peak_ok"] = m.peak_ok;
  j["accepted"] = m.accepted;
  return j;
}

}  // namespace detail

// Reinforcement loop: train the reduced model, solve the control problem on
// it, compress the control, try it on the IBM, and either accept or fold the
// controlled trajectory back into the training set. The control problem is
// warm-started from the previous dense optimum and solved with increasing
// precision.
inline MpcResult run_mpc(const Dataset& base_dataset, const MpcConfig& config,
                         std::uint64_t master_seed, IncidenceModel* final_model = nullptr) {
  config.stop.validate();
  if (base_dataset.empty()) throw std::invalid_argument("run_mpc: empty base dataset");
  if (!(config.d0_fraction > 0 && config.d0_fraction <= 1))
    throw std::invalid_argument("run_mpc: d0_fraction must be in (0, 1]");

  const MpcScenario& sc = config.scenario;
  OcpConfig ocp = config.ocp;
  ocp.beta0 = sc.beta0;
  ocp.kappa0 = sc.kappa0;
  ocp.n = sc.n;
  ocp.gamma = sc.gamma;
  ocp.validate();

  namespace fs = std::filesystem;
  const bool artifacts = !config.artifact_dir.empty();
  if (artifacts) fs::create_directories(config.artifact_dir);

  // D_0: seeded random fraction of the shuffled base dataset.
  std::vector<std::int64_t> order(base_dataset.size());
  std::iota(order.begin(), order.end(), 0);
  {
    Rng rng = make_rng(derive_seed(master_seed, 101));
    std::shuffle(order.begin(), order.end(), rng);
  }
  const std::int64_t d0_size = std::max<std::int64_t>(
      1, static_cast<std::int64_t>(std::llround(config.d0_fraction * base_dataset.size())));
  Dataset data;
  data.reserve(d0_size);
  for (std::int64_t j = 0; j < d0_size; ++j) data.push_back(base_dataset[order[j]]);

  TrainConfig tc = config.train;
  tc.seed = derive_seed(master_seed, 102);
  IncidenceModel model = train(data, tc).model;

  DegreeParams dp;
  dp.alpha = sc.alpha;
  dp.kappa = sc.kappa0;
  dp.n_nodes = sc.population();
  IbmParams ip;
  ip.beta = sc.beta0;
  ip.gamma = sc.gamma;
  ip.alpha = sc.alpha;
  ip.i0_fraction = sc.i0;
  ip.horizon = ocp.t_horizon;
  ip.sample_dt = config.sample_dt;
  ip.edge_rate = sc.edge_rate;

  // c_0: control-free IBM baseline, computed once.
  MpcResult result;
  {
    TrajectoryBundle bundle;
    bundle.replicas = run_batch(dp, ip, nullptr, config.replicas,
                                derive_seed(master_seed, 103), config.threads);
    AveragedTrajectory avg0 = align_and_average(bundle);
    result.c_0 = penalty_cost(avg0.i, 0.0, config.sample_dt, ocp);
    if (artifacts) write_averaged_csv(config.artifact_dir + "/uncontrolled_avg.csv", avg0);
  }

  ControlSchedule warm = make_ocp_schedule(ocp, 1.0, 1.0);
  for (int p = 0; p < config.stop.max_outer_iterations; ++p) {
    OcpConfig ocp_p = ocp;
    ocp_p.n_g = std::min(config.ng_cap, config.ng_base + config.ng_step * p);
    ocp_p.tau_g = std::max(config.taug_floor, config.taug_base * std::pow(2.0, -p));

    // Hand-over state at t_c from the uncontrolled reduced model.
    RmRunConfig pre;
    pre.n = sc.n;
    pre.gamma = sc.gamma;
    pre.beta = PiecewiseConstantFn::constant(sc.beta0);
    pre.kappa = PiecewiseConstantFn::constant(sc.kappa0);
    pre.t0 = 0.0;
    pre.t1 = ocp.t_c;
    pre.dt_int = ocp.dt_int;
    pre.sample_dt = ocp.t_c;
    pre.init = {sc.s0, sc.i0};
    ocp_p.state_c = integrate(model, pre).final_state;

    OcpSolveResult sol = ocp_solve(model, ocp_p, &warm);
    warm = sol.schedule;
    ControlSchedule compressed = compress_control(sol.schedule, config.compress_max_pieces);

    TrajectoryBundle bundle;
    bundle.replicas = run_batch(dp, ip, &compressed, config.replicas,
                                derive_seed(master_seed, 2000 + p), config.threads);
    AveragedTrajectory avg = align_and_average(bundle);
    const double c_p = penalty_cost(avg.i, 0.0, config.sample_dt, ocp);

    RmRunConfig rmc;
    rmc.n = sc.n;
    rmc.gamma = sc.gamma;
    rmc.beta = detail::effective_fn(compressed, sc.beta0, true, sc.beta0, sc.kappa0);
    rmc.kappa = detail::effective_fn(compressed, sc.kappa0, false, sc.beta0, sc.kappa0);
    rmc.t0 = 0.0;
    rmc.t1 = ocp.t_horizon;
    rmc.dt_int = ocp.dt_int;
    rmc.sample_dt = config.sample_dt;
    rmc.init = {sc.s0, sc.i0};
    RmTrajectory rm = integrate(model, rmc);
    const double c_p_reduced = penalty_cost(rm.i, 0.0, config.sample_dt, ocp);

    MpcMetrics metrics = check_stopping(c_p, result.c_0, c_p_reduced, rm, avg, config.stop, ocp);

    MpcIterationRecord rec;
    rec.p = p;
    rec.metrics = metrics;
    rec.j_delta_final = sol.j_final;
    rec.ocp_iterations = sol.iterations;
    rec.dataset_size = static_cast<std::int64_t>(data.size());
    result.history.push_back(rec);

    if (artifacts) {
      const std::string dir = config.artifact_dir + "/iter_" + std::to_string(p);
      fs::create_directories(dir);
      model.save(dir + "/model.json");
      write_schedule_csv(dir + "/schedule_dense.csv", sol.schedule);
      write_schedule_csv(dir + "/schedule_compressed.csv", compressed);
      write_averaged_csv(dir + "/ibm_avg.csv", avg);
      if (config.write_replicas)
        for (std::size_t r = 0; r < bundle.replicas.size(); ++r)
          write_trajectory_csv(dir + "/replica_" + std::to_string(r) + ".csv",
                               bundle.replicas[r]);
      {
        CsvTable t;
        t.header = {"t", "S", "I", "R"};
        for (int j = 0; j < rm.size(); ++j)
          t.rows.push_back({rm.time(j), rm.s[j], rm.i[j], rm.r(j)});
        write_csv(dir + "/reduced_trajectory.csv", t);
      }
      nlohmann::ordered_json j = detail::metrics_json(metrics);
      j["ocp"] = {{"iterations", sol.iterations},
                  {"j_initial", sol.j_initial},
                  {"j_final", sol.j_final},
                  {"n_g", ocp_p.n_g},
                  {"tau_g", ocp_p.tau_g}};
      j["dataset_size"] = data.size();
      std::ofstream os(dir + "/metrics.json");
      os << j.dump(1) << '\n';
    }

    if (metrics.accepted) {
      result.accepted = true;
      result.iterations = p + 1;
      result.final_control = std::move(compressed);
      result.final_dense = sol.schedule;
      if (final_model) *final_model = std::move(model);
      return result;
    }

    reinforce(data, avg, compressed, sc.n, sc.beta0, sc.kappa0);
    TrainConfig ft = config.train;
    ft.epochs = config.fine_tune_epochs;
    ft.seed = derive_seed(master_seed, 3000 + p);
    model = fine_tune(std::move(model), data, ft).model;

    result.final_control = std::move(compressed);
    result.final_dense = std::move(sol.schedule);
  }
  result.accepted = false;
  result.iterations = config.stop.max_outer_iterations;
  result.failure_reason = "outer iteration cap reached without an acceptable control";
  if (final_model) *final_model = std::move(model);
  return result;
}

}  // namespace epi
