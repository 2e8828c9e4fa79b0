// Acceptance suite: one check per shipping criterion, each printing a single
// PASS/FAIL line. Heavy shared artifacts (the desk-scale dataset and model)
// are cached under --cache so later criteria reuse them; regeneration is fully
// seeded and produces identical files. Criterion 10 is a soft trend check and
// reports WARN instead of failing.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "epi/averaging.hpp"
#include "epi/config.hpp"
#include "epi/contact_graph.hpp"
#include "epi/dataset.hpp"
#include "epi/gillespie.hpp"
#include "epi/manifest.hpp"
#include "epi/mpc.hpp"
#include "epi/ocp.hpp"
#include "epi/reduced_ode.hpp"
#include "epi/train.hpp"
#include "epi/tree.hpp"

namespace fs = std::filesystem;
using namespace epi;
using Clock = std::chrono::steady_clock;

namespace {

struct Context {
  std::string cache_dir = "acceptance_cache";
  std::string cli_path;  // path to the command-line binary, for criterion 11
  int threads = 0;
};

constexpr std::uint64_t kDeskSeed = 20260809ull;

struct CheckResult {
  bool pass = true;
  bool soft = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Shared desk-scale artifacts.

DatasetConfig desk_dataset_config() {
  DatasetConfig dc;
  dc.n_configs = 140;
  dc.replicas_per_config = 50;
  dc.horizon = 150.0;
  return dc;
}

const Dataset& desk_dataset(const Context& ctx) {
  static Dataset data;
  if (!data.empty()) return data;
  const std::string path = ctx.cache_dir + "/desk_dataset.csv";
  if (fs::exists(path)) {
    data = read_dataset_csv(path);
    return data;
  }
  fs::create_directories(ctx.cache_dir);
  data = build_dataset(desk_dataset_config(), kDeskSeed, ctx.threads);
  write_dataset_csv(path, data);
  return data;
}

const IncidenceModel& desk_model(const Context& ctx) {
  static IncidenceModel model;
  static bool loaded = false;
  if (loaded) return model;
  const std::string path = ctx.cache_dir + "/desk_model.json";
  if (fs::exists(path)) {
    model = IncidenceModel::load(path);
    loaded = true;
    return model;
  }
  TrainConfig tc;
  tc.seed = derive_seed(kDeskSeed, 0xA11CE);
  model = train(desk_dataset(ctx), tc).model;
  model.save(path);
  loaded = true;
  return model;
}

// ---------------------------------------------------------------------------
// Criterion 1: adjoint gradient vs central finite differences.

template <class P>
double gradient_rel_l2_error(const P& model, const OcpConfig& cfg, const ControlSchedule& sch) {
  const OcpGrid grid = OcpGrid::make(cfg);
  const OcpGradient adj = ocp_gradient(model, cfg, sch);
  double num = 0.0, den = 0.0;
  const double h = 1e-6;
  for (int m = 0; m < grid.m_count; ++m) {
    for (int comp = 0; comp < 2; ++comp) {
      ControlSchedule hi = sch, lo = sch;
      (comp == 0 ? hi.b : hi.k)[m] += h;
      (comp == 0 ? lo.b : lo.k)[m] -= h;
      const double fd =
          (ocp_cost(model, cfg, hi).j_delta - ocp_cost(model, cfg, lo).j_delta) /
          (2.0 * h * grid.weight(m));
      const double got = (comp == 0 ? adj.db : adj.dk)[m];
      num += (got - fd) * (got - fd);
      den += fd * fd;
    }
  }
  return std::sqrt(num) / std::max(std::sqrt(den), 1e-300);
}

CheckResult criterion_gradient(const Context& ctx) {
  OcpConfig cfg;
  cfg.t_c = 1.0;
  cfg.t_horizon = 30.0;
  cfg.dt = 1.0;  // 30 grid points
  cfg.dt_int = 0.25;
  cfg.beta0 = 0.5;
  cfg.kappa0 = 1.0;
  cfg.n = 0.8;
  cfg.state_c = {0.9, 0.05};

  auto random_schedule = [&](std::uint64_t seed) {
    ControlSchedule s = make_ocp_schedule(cfg, 1.0, 1.0);
    Rng rng = make_rng(seed);
    std::uniform_real_distribution<double> ub(cfg.bounds.b_min + 0.05, 0.95);
    std::uniform_real_distribution<double> uk(1.05, cfg.bounds.k_max - 0.5);
    for (int m = 0; m < s.size(); ++m) {
      s.b[m] = ub(rng);
      s.k[m] = uk(rng);
    }
    return s;
  };

  const ZeroIncidence zero;
  const IncidenceModel& trained = desk_model(ctx);
  double worst = 0.0;
  for (std::uint64_t t = 0; t < 20; ++t) {
    const ControlSchedule sch = random_schedule(4000 + t);
    double err;
    if (t < 10) {
      OcpConfig hot = cfg;
      hot.state_c = {0.6, 0.2};  // decays through both thresholds
      err = gradient_rel_l2_error(zero, hot, sch);
    } else {
      err = gradient_rel_l2_error(trained, cfg, sch);
    }
    worst = std::max(worst, err);
  }
  CheckResult r;
  r.pass = worst < 1e-4;
  std::ostringstream os;
  os << "max rel l2 error " << worst << " over 20 schedules (tolerance 1e-4)";
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 2: RK4 order and conservation.

CheckResult criterion_rk4(const Context&) {
  ConstantRateIncidence closure{0.5};
  auto run = [&](double h) {
    RmRunConfig cfg;
    cfg.t1 = 30.0;
    cfg.dt_int = h;
    cfg.sample_dt = 30.0;
    cfg.init = {0.999, 1e-3};
    return integrate(closure, cfg).final_state.i;
  };
  const double ref = run(30.0 / 16384.0);
  const double e1 = std::abs(run(0.5) - ref);
  const double e2 = std::abs(run(0.25) - ref);
  const double order = std::log2(e1 / e2);

  RmRunConfig cfg;
  cfg.t1 = 200.0;
  cfg.sample_dt = 2.0 / 7.0;
  cfg.init = {0.999, 1e-3};
  const RmTrajectory traj = integrate(closure, cfg);
  double worst_sum = 0.0;
  for (int m = 0; m < traj.size(); ++m)
    worst_sum = std::max(worst_sum, std::abs(traj.s[m] + traj.i[m] + traj.r(m) - 1.0));

  CheckResult r;
  r.pass = order > 3.5 && order < 4.5 && worst_sum < 1e-9;
  std::ostringstream os;
  os << "measured order " << order << " (window [3.5, 4.5]); max |S+I+R-1| " << worst_sum;
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 3: classical final size.

CheckResult criterion_final_size(const Context&) {
  auto oracle = [](double beta, double gamma, double s0) {
    double r = 1.0;
    for (int it = 0; it < 10000; ++it) {
      const double next = 1.0 - s0 * std::exp(-(beta / gamma) * r);
      if (std::abs(next - r) < 1e-14) break;
      r = next;
    }
    return r;
  };
  struct Pair {
    double beta, gamma;
  };
  const Pair pairs[] = {{0.3, 1.0 / 6.0}, {0.5, 1.0 / 6.0}, {0.8, 1.0 / 6.0}, {0.25, 0.1},
                        {0.4, 0.2},       {0.6, 0.25},      {0.9, 0.3},       {0.45, 0.15},
                        {0.7, 1.0 / 6.0}, {1.2, 0.4}};
  double worst = 0.0;
  for (const auto& pr : pairs) {
    ConstantRateIncidence closure{pr.beta};
    const double i0 = 1e-3;
    const double want = oracle(pr.beta, pr.gamma, 1.0 - i0);
    const double got = r_infinity(closure, 1.0, pr.beta, 1.0, {1.0 - i0, i0}, pr.gamma, 400.0);
    worst = std::max(worst, std::abs(got - want));
  }
  CheckResult r;
  r.pass = worst < 1e-4;
  std::ostringstream os;
  os << "max |R_inf - fixed point| " << worst << " over 10 (beta, gamma) pairs (tolerance 1e-4)";
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 4: IBM statistical exactness.

struct TinyCtmc {
  const ContactGraph& g;
  double lambda, gamma;
  std::map<std::vector<int>, std::map<std::vector<int>, double>> memo;

  std::map<std::vector<int>, double> absorb(const std::vector<int>& state) {
    if (auto it = memo.find(state); it != memo.end()) return it->second;
    struct Move {
      std::vector<int> next;
      double rate;
    };
    std::vector<Move> moves;
    for (int j = 0; j < g.n_nodes; ++j) {
      if (state[j] == 1) {
        auto next = state;
        next[j] = 2;
        moves.push_back({next, gamma});
      } else if (state[j] == 0) {
        int d = 0;
        for (auto v : g.adjacency[j]) d += state[v] == 1;
        if (d > 0) {
          auto next = state;
          next[j] = 1;
          moves.push_back({next, lambda * d});
        }
      }
    }
    std::map<std::vector<int>, double> out;
    if (moves.empty()) {
      out[state] = 1.0;
    } else {
      double total = 0.0;
      for (const auto& m : moves) total += m.rate;
      for (const auto& m : moves)
        for (const auto& [fin, p] : absorb(m.next)) out[fin] += (m.rate / total) * p;
    }
    memo[state] = out;
    return out;
  }
};

CheckResult criterion_ibm_exactness(const Context&) {
  CheckResult r;
  std::ostringstream os;

  // Part A: 3-node path absorption law over 1e5 replicas.
  ContactGraph g;
  g.n_nodes = 3;
  g.adjacency = {{1}, {0, 2}, {1}};
  g.realized_degrees = {1, 2, 1};
  IbmParams p;
  p.beta = 2.0;
  p.alpha = 4.0;  // per-edge rate 0.5
  p.gamma = 1.0 / 3.0;
  p.i0_fraction = 0.2;
  p.horizon = 500.0;
  p.sample_dt = 500.0;

  TinyCtmc oracle{g, 0.5, 1.0 / 3.0};
  std::map<std::vector<int>, double> want;
  for (int start = 0; start < 3; ++start) {
    std::vector<int> s0(3, 0);
    s0[start] = 1;
    for (const auto& [fin, prob] : oracle.absorb(s0)) {
      int n_s = 0, n_r = 0;
      for (int x : fin) {
        n_s += x == 0;
        n_r += x == 2;
      }
      want[{n_s, n_r}] += prob / 3.0;
    }
  }
  const int reps = 100'000;
  std::map<std::vector<int>, int> counts;
  for (int rep = 0; rep < reps; ++rep) {
    const auto traj = gillespie_run(g, p, derive_seed(606u, rep));
    const int n_r = static_cast<int>(std::lround(traj.r.back() * 3));
    const int n_s = static_cast<int>(std::lround(traj.s.back() * 3));
    counts[{n_s, n_r}] += 1;
  }
  double worst_z = 0.0;
  for (const auto& [key, prob] : want) {
    const double got = static_cast<double>(counts[key]) / reps;
    const double se = std::sqrt(prob * (1.0 - prob) / reps);
    worst_z = std::max(worst_z, std::abs(got - prob) / se);
  }
  os << "path-graph max |z| " << worst_z << " across outcomes (limit 3);";

  // Part B: beta = 0 decay against I0 exp(-gamma t).
  IbmParams pd;
  pd.beta = 0.0;
  pd.gamma = 1.0 / 6.0;
  pd.i0_fraction = 0.1;
  pd.horizon = 24.0;
  pd.sample_dt = 1.0;
  const ContactGraph ge = build_graph(std::vector<int>(1000, 0), 0u);
  const int n_reps = 200;
  double worst_decay_z = 0.0;
  for (const int t : {6, 12, 24}) {
    double mean = 0.0, sq = 0.0;
    for (int rep = 0; rep < n_reps; ++rep) {
      const auto traj = gillespie_run(ge, pd, derive_seed(707u, rep));
      mean += traj.i[t];
      sq += traj.i[t] * traj.i[t];
    }
    mean /= n_reps;
    const double se = std::sqrt((sq / n_reps - mean * mean) / n_reps);
    const double want_i = 0.1 * std::exp(-t / 6.0);
    worst_decay_z = std::max(worst_decay_z, std::abs(mean - want_i) / se);
  }
  os << " pure-recovery max |z| " << worst_decay_z << " at t in {6,12,24} (limit 3)";
  r.pass = worst_z < 3.0 && worst_decay_z < 3.0;
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 5: degree-distribution moments.

CheckResult criterion_polya(const Context&) {
  struct Case {
    double alpha, kappa;
  };
  double worst_z = 0.0;
  for (const Case c : {Case{5.0, 0.5}, Case{5.0, 2.0}, Case{5.0, 1e6}}) {
    DegreeParams p{c.alpha, c.kappa, 1'000'000};
    const auto s = sample_degrees(p, 9090u);
    const double n = static_cast<double>(s.degrees.size());
    double mean = 0.0;
    for (int x : s.degrees) mean += x;
    mean /= n;
    double m2 = 0.0, m4 = 0.0;
    for (int x : s.degrees) {
      const double d = x - mean;
      m2 += d * d;
      m4 += d * d * d * d;
    }
    m2 /= n;
    m4 /= n;
    const double se_mean = std::sqrt(m2 / n);
    const double se_var = std::sqrt(std::max(0.0, m4 - m2 * m2) / n);
    const double want_var = c.alpha + c.alpha * c.alpha / c.kappa;
    worst_z = std::max(worst_z, std::abs(mean - c.alpha) / se_mean);
    worst_z = std::max(worst_z, std::abs(m2 - want_var) / se_var);
  }
  CheckResult r;
  r.pass = worst_z < 3.0;
  std::ostringstream os;
  os << "max |z| " << worst_z << " for mean/variance at (5, 0.5), (5, 2), (5, 1e6) (limit 3)";
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 6: averaging oracle.

CheckResult criterion_averaging(const Context&) {
  const int m_count = 120;
  const double dt = 0.25;
  std::vector<double> base(m_count);
  for (int j = 0; j < m_count; ++j)
    base[j] = 1e-4 + 0.3 / (1.0 + std::exp(-(j * dt - 12.0) / 2.0));
  std::vector<double> delayed(m_count);
  for (int j = 0; j < m_count; ++j) delayed[j] = base[std::max(0, j - 4)];

  auto to_traj = [&](const std::vector<double>& i_vals, double r_final) {
    EpidemicTrajectory t;
    t.sample_dt = dt;
    t.i = i_vals;
    t.s.resize(m_count);
    t.r.resize(m_count);
    for (int j = 0; j < m_count; ++j) {
      t.s[j] = 1.0 - t.i[j] - r_final * j / (m_count - 1);
      t.r[j] = 1.0 - (t.s[j] + t.i[j]);
    }
    return t;
  };

  TrajectoryBundle bundle;
  bundle.replicas.push_back(to_traj(base, 0.5));
  bundle.replicas.push_back(to_traj(delayed, 0.5));
  const AveragedTrajectory avg = align_and_average(bundle);
  double worst = 0.0;
  for (int m = 4; m < m_count - 4; ++m) worst = std::max(worst, std::abs(avg.i[m] - base[m - 2]));

  // Outlier construction {0.9, 0.85, 0.0}.
  TrajectoryBundle outliers;
  outliers.replicas.push_back(to_traj(std::vector<double>(10, 0.01), 0.9));
  outliers.replicas.push_back(to_traj(std::vector<double>(10, 0.01), 0.85));
  outliers.replicas.push_back(to_traj(std::vector<double>(10, 0.01), 0.0));
  const OutlierFilter f = filter_outliers(outliers);
  const bool filter_ok = f.retained == std::vector<int>{0, 1} && !f.degenerate;

  CheckResult r;
  r.pass = worst < 1e-12 && filter_ok;
  std::ostringstream os;
  os << "interior alignment error " << worst << " (tolerance 1e-12); extinct replica "
     << (filter_ok ? "removed" : "NOT removed");
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 7: reduced-model fidelity at desk scale.

CheckResult criterion_fidelity(const Context& ctx) {
  const IncidenceModel& model = desk_model(ctx);
  struct Case {
    double n, beta, kappa, i0;
    const char* tag;
  };
  // Held-out constant-parameter configurations spanning the sampling boxes,
  // including one low-kappa (super-spreader) and one low-n (small population).
  const Case cases[] = {
      {0.85, 0.45, 5.0, 5e-4, "baseline"},   {0.5, 0.8, 9.0, 5e-4, "high-beta"},
      {0.3, 0.6, 1.0, 5e-4, "intermediate"}, {0.8, 0.5, 0.25, 5e-4, "low-kappa"},
      {0.12, 0.7, 5.0, 8e-4, "low-n"},
  };
  CheckResult r;
  std::ostringstream os;
  for (std::size_t idx = 0; idx < std::size(cases); ++idx) {
    const Case& c = cases[idx];
    DegreeParams dp;
    dp.kappa = c.kappa;
    dp.n_nodes = static_cast<int>(std::lround(c.n * 20000));
    IbmParams ip;
    ip.beta = c.beta;
    ip.i0_fraction = c.i0;
    ip.horizon = 150.0;
    TrajectoryBundle bundle;
    bundle.replicas =
        run_batch(dp, ip, nullptr, 50, derive_seed(kDeskSeed, 0xF1D0, idx), ctx.threads);
    const AveragedTrajectory avg = align_and_average(bundle);

    RmRunConfig rc;
    rc.n = c.n;
    rc.beta = PiecewiseConstantFn::constant(c.beta);
    rc.kappa = PiecewiseConstantFn::constant(c.kappa);
    rc.t1 = 150.0;
    rc.init = {1.0 - c.i0, c.i0};
    const RmTrajectory rm = integrate(model, rc);

    const double peak_ibm = *std::max_element(avg.i.begin(), avg.i.end());
    const double peak_rm = *std::max_element(rm.i.begin(), rm.i.end());
    const double rel = std::abs(peak_rm - peak_ibm) / peak_ibm;
    const double delay =
        std::abs(peak_time(avg.i, 0.0, avg.sample_dt) - peak_time(rm.i, 0.0, rm.sample_dt));
    const bool ok = rel < 0.25 && delay <= 6.0;
    os << (idx ? "; " : "") << c.tag << ": peak err " << static_cast<int>(rel * 100 + 0.5)
       << "%, delay " << delay << " d" << (ok ? "" : " <-- FAIL");
    r.pass = r.pass && ok;
  }
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 8: standalone control run.

CheckResult criterion_standalone_ocp(const Context& ctx) {
  const IncidenceModel& model = desk_model(ctx);
  OcpConfig ocp;
  ocp.t_c = 1.0;
  ocp.t_horizon = 50.0;
  ocp.dt = 0.1;
  ocp.dt_int = 0.05;
  ocp.omega_beta = 0.2;
  ocp.omega_kappa = 0.2;
  ocp.omega_hosp = 0.6;
  ocp.i_hosp = 0.05;
  ocp.i_max = 0.10;
  ocp.beta0 = 0.8;
  ocp.kappa0 = 0.4;
  ocp.n = 0.6;
  ocp.n_g = 200;
  ocp.tau_g = 1e-7;

  RmRunConfig pre;
  pre.n = ocp.n;
  pre.beta = PiecewiseConstantFn::constant(ocp.beta0);
  pre.kappa = PiecewiseConstantFn::constant(ocp.kappa0);
  pre.t1 = ocp.t_c;
  pre.sample_dt = ocp.t_c;
  pre.init = {0.9995, 0.0005};
  ocp.state_c = integrate(model, pre).final_state;

  const OcpSolveResult sol = ocp_solve(model, ocp);
  bool monotone = true;
  for (std::size_t j = 1; j < sol.log.size(); ++j)
    monotone = monotone && sol.log[j].j_delta <= sol.log[j - 1].j_delta + 1e-15;

  auto time_above = [&](const ControlSchedule* sched) {
    RmRunConfig rc;
    rc.n = ocp.n;
    if (sched) {
      rc.beta = detail::effective_fn(*sched, ocp.beta0, true, ocp.beta0, ocp.kappa0);
      rc.kappa = detail::effective_fn(*sched, ocp.kappa0, false, ocp.beta0, ocp.kappa0);
    } else {
      rc.beta = PiecewiseConstantFn::constant(ocp.beta0);
      rc.kappa = PiecewiseConstantFn::constant(ocp.kappa0);
    }
    rc.t1 = ocp.t_horizon;
    rc.sample_dt = 0.1;
    rc.init = {0.9995, 0.0005};
    const RmTrajectory rm = integrate(model, rc);
    double days = 0.0;
    for (int m = 0; m < rm.size(); ++m)
      if (rm.i[m] > ocp.i_max) days += rm.sample_dt;
    return days;
  };
  const double above_controlled = time_above(&sol.schedule);
  const double above_free = time_above(nullptr);

  CheckResult r;
  const bool suppressed = above_controlled < 0.10 * above_free;
  r.pass = monotone && suppressed;
  std::ostringstream os;
  os << "cost sequence " << (monotone ? "non-increasing" : "INCREASED") << " over "
     << sol.iterations << " iterations; time above I_max " << above_controlled << " d vs "
     << above_free << " d uncontrolled";
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 9: end-to-end reinforcement loop at desk scale.

CheckResult criterion_mpc(const Context& ctx) {
  MpcConfig mc;
  mc.scenario.n = 0.2;
  mc.scenario.beta0 = 0.3;
  mc.scenario.kappa0 = 0.8;
  mc.ocp.dt_int = 2.0 / 7.0;  // one RK4 step per control interval
  mc.ocp.ls_tol = 1e-5;
  mc.threads = ctx.threads;
  mc.write_replicas = false;
  mc.artifact_dir = ctx.cache_dir + "/mpc_run";
  const MpcResult res = run_mpc(desk_dataset(ctx), mc, derive_seed(kDeskSeed, 0x4CCE77));

  double peak = 0.0;
  bool have_peak = false;
  if (res.accepted) {
    // Re-simulate the accepted policy to measure the controlled IBM peak.
    DegreeParams dp;
    dp.kappa = mc.scenario.kappa0;
    dp.n_nodes = mc.scenario.population();
    IbmParams ip;
    ip.beta = mc.scenario.beta0;
    ip.i0_fraction = mc.scenario.i0;
    ip.horizon = mc.ocp.t_horizon;
    TrajectoryBundle bundle;
    bundle.replicas = run_batch(dp, ip, &res.final_control, mc.replicas,
                                derive_seed(kDeskSeed, 0x4CCE77, 2000 + res.iterations - 1),
                                ctx.threads);
    const AveragedTrajectory avg = align_and_average(bundle);
    peak = *std::max_element(avg.i.begin(), avg.i.end());
    have_peak = true;
  }
  const MpcMetrics last = res.history.empty() ? MpcMetrics{} : res.history.back().metrics;

  CheckResult r;
  r.pass = res.accepted && last.cost_ok && last.reduced_ok && (!have_peak || peak < 0.1);
  std::ostringstream os;
  os << (res.accepted ? "accepted" : "NOT accepted") << " after " << res.iterations
     << " iterations; c_p " << last.c_p << " vs tau_rl*c_0 " << 1e-3 * last.c_0
     << ", c_p_reduced " << last.c_p_reduced;
  if (have_peak) os << "; controlled IBM peak " << peak << " (I_max 0.1)";
  if (!res.failure_reason.empty()) os << "; " << res.failure_reason;
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 10 (soft): threshold surface trend.

CheckResult criterion_threshold_surface(const Context& ctx) {
  const IncidenceModel& model = desk_model(ctx);
  // Scan beta over the sampled training box; outside it the learned surface is
  // extrapolation (the flat low-kappa region is unreliable by construction).
  std::vector<double> beta_grid(20);
  for (int j = 0; j < 20; ++j) beta_grid[j] = 0.075 + (0.9 - 0.075) * j / 19.0;
  CheckResult r;
  r.soft = true;
  std::ostringstream os;
  int total_violations = 0;
  bool ok = true;
  for (const double n : {0.2, 0.5, 0.9}) {
    std::vector<double> bc(20);
    for (int j = 0; j < 20; ++j) {
      const double kappa = 0.1 * std::pow(100.0, j / 19.0);
      const auto v = critical_beta(model, n, kappa, 1.0 / 6.0, beta_grid);
      bc[j] = v ? *v : std::numeric_limits<double>::infinity();
    }
    int violations = 0;
    for (int j = 1; j < 20; ++j)
      if (bc[j] < bc[j - 1] - 1e-12) ++violations;
    total_violations += violations;
    ok = ok && violations <= 2;
    os << "n=" << n << ": " << violations << " decreases; ";
  }
  os << "(soft limit 2 per slice)";

  // Companion spot check of the positivity hypothesis behind the threshold
  // number: F on random positive inputs should be non-negative up to training
  // noise.
  {
    Rng rng = make_rng(31337u);
    std::uniform_real_distribution<double> us(0.0, 1.0), ui(0.0, 1.0), un(0.1, 1.0),
        ub(0.075, 0.9), uk(0.1, 10.0);
    int negatives = 0;
    double worst = 0.0;
    for (int t = 0; t < 10'000; ++t) {
      double s = us(rng), i = ui(rng);
      if (s + i > 1.0) {
        s *= 0.5;
        i *= 0.5;
      }
      const double F = model.incidence(s, i, un(rng), ub(rng), uk(rng));
      if (F < 0.0) {
        ++negatives;
        worst = std::min(worst, F);
      }
    }
    ok = ok && negatives <= 10 && worst > -1e-3;
    os << "; incidence spot check: " << negatives << "/10000 negative (worst " << worst
       << ", noise floor 1e-3)";
  }
  r.pass = ok;
  r.detail = os.str();
  return r;
}

// ---------------------------------------------------------------------------
// Criterion 11: byte-identical reproduction of every CLI command.

CheckResult criterion_reproducibility(const Context& ctx) {
  CheckResult r;
  if (ctx.cli_path.empty()) {
    r.pass = false;
    r.detail = "cli binary path not provided (--cli)";
    return r;
  }
  const fs::path root = fs::path(ctx.cache_dir) / "repro";
  fs::remove_all(root);
  fs::create_directories(root);

  auto write_file = [&](const fs::path& p, const std::string& text) {
    std::ofstream os(p);
    os << text;
  };
  auto run_cli = [&](const std::string& args) {
    const std::string cmd = ctx.cli_path + " " + args + " > /dev/null 2>&1";
    return std::system(cmd.c_str()) == 0;
  };
  auto dir_hashes = [&](const fs::path& dir) {
    std::map<std::string, std::string> h;
    for (const auto& entry : fs::recursive_directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().filename() != "manifest.json")
        h[fs::relative(entry.path(), dir).string()] = sha256_file(entry.path().string());
    return h;
  };

  // Small configs: the check is about determinism, not scale.
  const std::string base_cfg = R"({
    "seed": 99,
    "scenario": {"n": 0.05, "beta0_per_day": 0.5, "kappa0": 1.0, "i0": 0.005, "s0": 0.995, "n_max": 10000},
    "ibm": {"replicas": 3, "horizon_days": 25.0, "sample_dt_days": 0.5},
    "dataset": {"n_configs": 2, "replicas_per_config": 3, "horizon_days": 20.0},
    "train": {"epochs": 2, "hidden_layers": [16, 16]},
    "ocp": {"t_horizon_days": 25.0, "dt_days": 1.0, "dt_int_days": 0.25, "n_g": 2},
    "mpc": {"max_outer_iterations": 1, "d0_fraction": 0.9, "fine_tune_epochs": 1},
    "validate": {"configs": [{"n": 0.05, "beta_per_day": 0.5, "kappa": 1.0, "i0": 0.005}], "horizon_days": 20.0},
    "quantities": {"n_values": [0.5], "kappa_points": 3, "beta_points": 10,
                   "rinf_n_values": [0.5], "rinf_beta_points": 2, "rinf_kappa_points": 2}
  })";
  write_file(root / "config.json", base_cfg);

  std::ostringstream os;
  bool all_ok = true;
  auto check_twice = [&](const std::string& name, const std::string& extra_json) {
    nlohmann::json j = nlohmann::json::parse(base_cfg);
    if (!extra_json.empty()) j.merge_patch(nlohmann::json::parse(extra_json));
    const fs::path cfg_path = root / (name + "_config.json");
    write_file(cfg_path, j.dump());
    const fs::path out_a = root / (name + "_a");
    const fs::path out_b = root / (name + "_b");
    bool ok = run_cli(name + " --config " + cfg_path.string() + " --out " + out_a.string());
    // Second run replays from the manifest of the first.
    ok = ok && run_cli(name + " --config " + (out_a / "manifest.json").string() + " --out " +
                       out_b.string());
    ok = ok && dir_hashes(out_a) == dir_hashes(out_b);
    all_ok = all_ok && ok;
    os << name << (ok ? " ok; " : " MISMATCH; ");
    return ok;
  };

  check_twice("simulate", "");
  check_twice("dataset", "");
  if (all_ok) {
    const std::string ds = (root / "dataset_a/dataset.csv").string();
    check_twice("train", R"({"io": {"dataset": ")" + ds + R"("}})");
  }
  if (all_ok) {
    const std::string model = (root / "train_a/model.json").string();
    const std::string ds = (root / "dataset_a/dataset.csv").string();
    const std::string io =
        R"({"io": {"model": ")" + model + R"(", "dataset": ")" + ds + R"("}})";
    check_twice("validate", io);
    check_twice("quantities", io);
    check_twice("control", io);
    check_twice("mpc", io);
    const std::string avg_in =
        R"({"io": {"inputs": [")" + (root / "simulate_a/replica_000.csv").string() + R"(", ")" +
        (root / "simulate_a/replica_001.csv").string() + R"("]}})";
    check_twice("average", avg_in);
    const std::string plot_in = R"({"plot": {"inputs": [")" +
                                (root / "simulate_a/replica_000.csv").string() +
                                R"("], "kind": "trajectory"}})";
    check_twice("plot", plot_in);
  }
  r.pass = all_ok;
  r.detail = os.str() + "(outputs hash-compared, manifests replayed)";
  return r;
}

// ---------------------------------------------------------------------------

struct Criterion {
  int id;
  const char* name;
  std::function<CheckResult(const Context&)> fn;
};

}  // namespace

int main(int argc, char** argv) {
  Context ctx;
  std::vector<int> selected;
  for (int a = 1; a < argc; ++a) {
    const std::string arg = argv[a];
    auto next = [&]() -> std::string { return a + 1 < argc ? argv[++a] : ""; };
    if (arg == "--cache")
      ctx.cache_dir = next();
    else if (arg == "--cli")
      ctx.cli_path = next();
    else if (arg == "--threads")
      ctx.threads = std::stoi(next());
    else if (arg == "--criterion")
      selected.push_back(std::stoi(next()));
    else {
      std::cerr << "unknown argument: " << arg << "\n";
      return 2;
    }
  }

  const Criterion criteria[] = {
      {0, "prepare desk-scale artifacts",
       [](const Context& c) {
         CheckResult r;
         const Dataset& d = desk_dataset(c);
         (void)desk_model(c);
         r.detail = "dataset " + std::to_string(d.size()) + " samples; model cached";
         return r;
       }},
      {1, "adjoint gradient vs finite differences", criterion_gradient},
      {2, "RK4 order and conservation", criterion_rk4},
      {3, "classical final-size oracle", criterion_final_size},
      {4, "IBM statistical exactness", criterion_ibm_exactness},
      {5, "degree-distribution moments", criterion_polya},
      {6, "onset-aligned averaging oracle", criterion_averaging},
      {7, "reduced-model fidelity at desk scale", criterion_fidelity},
      {8, "standalone control run", criterion_standalone_ocp},
      {9, "reinforcement loop end to end", criterion_mpc},
      {10, "threshold-surface trend (soft)", criterion_threshold_surface},
      {11, "byte-identical CLI reproduction", criterion_reproducibility},
  };

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end())
      continue;
    const auto t0 = Clock::now();
    CheckResult res;
    try {
      res = c.fn(ctx);
    } catch (const std::exception& err) {
      res.pass = false;
      res.detail = std::string("exception: ") + err.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    const char* verdict = res.pass ? "PASS" : (res.soft ? "WARN" : "FAIL");
    std::printf("[criterion %02d] %-42s %s (%.1fs) %s\n", c.id, c.name, verdict, secs,
                res.detail.c_str());
    std::fflush(stdout);
    if (!res.pass && !res.soft) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
