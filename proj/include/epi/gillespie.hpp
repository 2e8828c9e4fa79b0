#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "epi/contact_graph.hpp"
#include "epi/control.hpp"
#include "epi/parallel.hpp"
#include "epi/rng.hpp"
#include "epi/trajectory.hpp"

namespace epi {

// Which per-edge infection rate the clock construction uses. The node rate is
// lambda_edge * d_j with d_j the infected-neighbor count; beta_over_alpha
// (lambda_edge = beta/alpha = beta_ind) is the default, the alternative treats
// beta itself as the per-edge rate for sensitivity checks.
enum class EdgeRateConvention { beta_over_alpha, beta };

struct IbmParams {
  double beta = 0.3;          // mean transmission rate, per day
  double gamma = 1.0 / 6.0;   // recovery rate, per day
  double alpha = 10.0;        // mean contacts; converts beta to a per-edge rate
  double i0_fraction = 5e-4;  // initial infected proportion, in (0, 1)
  double horizon = 200.0;     // days
  double sample_dt = 2.0 / 7.0;
  EdgeRateConvention edge_rate = EdgeRateConvention::beta_over_alpha;
  bool audit = false;  // recount S-I edges after every event (test mode)

  void validate() const {
    if (!(beta >= 0.0)) throw std::invalid_argument("IbmParams: beta must be >= 0");
    if (!(gamma > 0.0)) throw std::invalid_argument("IbmParams: gamma must be > 0");
    if (!(alpha > 0.0)) throw std::invalid_argument("IbmParams: alpha must be > 0");
    if (!(i0_fraction > 0.0 && i0_fraction < 1.0))
      throw std::invalid_argument("IbmParams: i0_fraction must be in (0,1)");
    if (!(horizon > 0.0)) throw std::invalid_argument("IbmParams: horizon must be > 0");
    if (!(sample_dt > 0.0)) throw std::invalid_argument("IbmParams: sample_dt must be > 0");
  }

  double edge_rate_value(double beta_eff) const {
    return edge_rate == EdgeRateConvention::beta_over_alpha ? beta_eff / alpha : beta_eff;
  }
};

namespace detail {

// Fenwick tree over integer node weights; supports O(log N) add, prefix sum
// and weighted selection.
class Fenwick {
 public:
  explicit Fenwick(int n) : n_(n), tree_(static_cast<std::size_t>(n) + 1, 0) {}

  void add(int i, std::int64_t delta) {
    for (++i; i <= n_; i += i & -i) tree_[i] += delta;
  }
  std::int64_t total() const { return total_; }
  void add_tracked(int i, std::int64_t delta) {
    add(i, delta);
    total_ += delta;
  }
  // Smallest 0-based index i such that the prefix sum through i exceeds w.
  // Requires 0 <= w < total().
  int select(std::int64_t w) const {
    int pos = 0;
    int step = 1;
    while ((step << 1) <= n_) step <<= 1;
    for (; step > 0; step >>= 1) {
      const int next = pos + step;
      if (next <= n_ && tree_[next] <= w) {
        pos = next;
        w -= tree_[next];
      }
    }
    return pos;  // 0-based
  }
  void reset() {
    std::fill(tree_.begin(), tree_.end(), 0);
    total_ = 0;
  }

 private:
  int n_;
  std::vector<std::int64_t> tree_;
  std::int64_t total_ = 0;
};

enum : std::uint8_t { kSusceptible = 0, kInfected = 1, kRecovered = 2 };

class SirSim {
 public:
  SirSim(ContactGraph graph, const IbmParams& params, Rng& rng)
      : graph_(std::move(graph)), params_(params), rng_(rng), weights_(graph_.n_nodes) {
    const int n = graph_.n_nodes;
    const std::int64_t n0 = static_cast<std::int64_t>(std::ceil(params_.i0_fraction * n));
    if (n0 <= 0) throw std::invalid_argument("gillespie: initial infected count rounds to zero");
    n_s_ = n;
    status_.assign(n, kSusceptible);
    infected_pos_.assign(n, -1);
    std::vector<std::int32_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    for (std::int64_t j = 0; j < n0; ++j) {
      std::uniform_int_distribution<int> pick(static_cast<int>(j), n - 1);
      std::swap(idx[j], idx[pick(rng_)]);
    }
    for (std::int64_t j = 0; j < n0; ++j) set_infected_initial(idx[j]);
    rebuild_edge_structures();
  }

  // Simulate on [0, horizon] under the optional policy; pre-schedule dynamics
  // use (beta, kappa0) from params. Exact CTMC realization: the pending event
  // time is rescaled by the rate ratio at parameter switches, which is
  // distribution-preserving by memorylessness and leaves the stream untouched
  // when a switch does not change the rates.
  EpidemicTrajectory run(const ControlSchedule* schedule, const DegreeParams* degree_params,
                         double beta0, double kappa0) {
    const int n = graph_.n_nodes;
    const int grid_n =
        static_cast<int>(std::floor(params_.horizon / params_.sample_dt + 1e-9)) + 1;
    EpidemicTrajectory traj;
    traj.sample_dt = params_.sample_dt;
    traj.s.reserve(grid_n);
    traj.i.reserve(grid_n);
    traj.r.reserve(grid_n);
    traj.beta_eff.reserve(grid_n);
    traj.kappa_eff.reserve(grid_n);

    double beta_eff = beta0, kappa_eff = kappa0;
    double lambda = params_.edge_rate_value(beta_eff);

    // Switch times where the policy value actually changes (plus its start).
    std::vector<int> switch_idx;
    if (schedule) {
      schedule->validate();
      switch_idx.push_back(0);
      for (int m = 1; m < schedule->size(); ++m)
        if (schedule->b[m] != schedule->b[m - 1] || schedule->k[m] != schedule->k[m - 1])
          switch_idx.push_back(m);
    }
    std::size_t next_switch = 0;

    int next_grid = 0;
    auto record_until = [&](double t_limit) {
      while (next_grid < grid_n && next_grid * params_.sample_dt < t_limit) {
        traj.s.push_back(static_cast<double>(n_s_) / n);
        traj.i.push_back(static_cast<double>(n_i_) / n);
        traj.r.push_back(1.0 - (traj.s.back() + traj.i.back()));
        traj.beta_eff.push_back(beta_eff);
        traj.kappa_eff.push_back(kappa_eff);
        ++next_grid;
      }
    };
    auto record_rest = [&] { record_until(std::numeric_limits<double>::infinity()); };

    const double inf = std::numeric_limits<double>::infinity();
    std::exponential_distribution<double> exp1(1.0);
    double t = 0.0;
    double rate = total_rate(lambda);
    double t_event = rate > 0.0 ? t + exp1(rng_) / rate : inf;

    for (;;) {
      if (n_i_ == 0) break;  // absorbing: nothing can happen any more
      const double t_bound =
          next_switch < switch_idx.size()
              ? std::min(schedule->times[switch_idx[next_switch]], params_.horizon)
              : params_.horizon;
      if (t_event <= t_bound) {
        record_until(t_event);
        t = t_event;
        execute_event(lambda);
        rate = total_rate(lambda);
        t_event = rate > 0.0 ? t + exp1(rng_) / rate : inf;
      } else {
        record_until(t_bound);
        t = t_bound;
        if (next_switch >= switch_idx.size() || t >= params_.horizon) break;
        const int m = switch_idx[next_switch++];
        const double rate_old = rate;
        const double new_beta = beta0 * schedule->b[m] * coupling_v(schedule->k[m]);
        const double new_kappa = kappa0 * schedule->k[m];
        if (new_kappa != kappa_eff && degree_params) resample_graph(*degree_params, new_kappa);
        beta_eff = new_beta;
        kappa_eff = new_kappa;
        lambda = params_.edge_rate_value(beta_eff);
        rate = total_rate(lambda);
        if (rate != rate_old) {
          if (rate > 0.0)
            t_event = rate_old > 0.0 ? t + (t_event - t) * (rate_old / rate)
                                     : t + exp1(rng_) / rate;
          else
            t_event = inf;
        }
      }
    }
    record_rest();
    return traj;
  }

 private:
  double total_rate(double lambda) const {
    return params_.gamma * n_i_ + lambda * static_cast<double>(weights_.total());
  }

  void set_infected_initial(int node) {
    status_[node] = kInfected;
    infected_pos_[node] = static_cast<std::int32_t>(infected_.size());
    infected_.push_back(node);
    --n_s_;
    ++n_i_;
  }

  void rebuild_edge_structures() {
    const int n = graph_.n_nodes;
    inf_nbrs_.assign(n, 0);
    weights_.reset();
    for (int v : infected_)
      for (std::int32_t u : graph_.adjacency[v]) ++inf_nbrs_[u];
    for (int u = 0; u < n; ++u)
      if (status_[u] == kSusceptible && inf_nbrs_[u] > 0) weights_.add_tracked(u, inf_nbrs_[u]);
  }

  void execute_event(double lambda) {
    const double recovery_rate = params_.gamma * n_i_;
    const double rate = recovery_rate + lambda * static_cast<double>(weights_.total());
    const double u = uniform01(rng_) * rate;
    if (u < recovery_rate || weights_.total() == 0) {
      std::uniform_int_distribution<int> pick(0, static_cast<int>(infected_.size()) - 1);
      recover(infected_[pick(rng_)]);
    } else {
      std::uniform_int_distribution<std::int64_t> pick(0, weights_.total() - 1);
      infect(weights_.select(pick(rng_)));
    }
    if (params_.audit) audit_state();
  }

  void infect(int node) {
    // s -> i; requires an infected neighbor (guaranteed: selection weight > 0).
    status_[node] = kInfected;
    weights_.add_tracked(node, -inf_nbrs_[node]);
    infected_pos_[node] = static_cast<std::int32_t>(infected_.size());
    infected_.push_back(node);
    --n_s_;
    ++n_i_;
    for (std::int32_t u : graph_.adjacency[node]) {
      ++inf_nbrs_[u];
      if (status_[u] == kSusceptible) weights_.add_tracked(u, 1);
    }
  }

  void recover(int node) {
    status_[node] = kRecovered;
    const std::int32_t pos = infected_pos_[node];
    infected_[pos] = infected_.back();
    infected_pos_[infected_[pos]] = pos;
    infected_.pop_back();
    infected_pos_[node] = -1;
    --n_i_;
    ++n_r_;
    for (std::int32_t u : graph_.adjacency[node]) {
      --inf_nbrs_[u];
      if (status_[u] == kSusceptible) weights_.add_tracked(u, -1);
    }
  }

  // Fresh Molloy-Reed pairing at the new dispersion; every node keeps its
  // epidemic state.
  void resample_graph(const DegreeParams& dp, double new_kappa) {
    DegreeParams p = dp;
    p.kappa = new_kappa;
    p.n_nodes = graph_.n_nodes;
    DegreeSample ds = sample_degrees(p, rng_);
    graph_ = build_graph(ds.degrees, rng_);
    rebuild_edge_structures();
  }

  void audit_state() const {
    if (n_s_ + n_i_ + n_r_ != graph_.n_nodes)
      throw std::logic_error("gillespie audit: count conservation violated");
    std::int64_t si = 0;
    for (int u = 0; u < graph_.n_nodes; ++u) {
      if (status_[u] != kSusceptible) continue;
      for (std::int32_t v : graph_.adjacency[u])
        if (status_[v] == kInfected) ++si;
    }
    if (si != weights_.total())
      throw std::logic_error("gillespie audit: S-I edge count mismatch");
  }

  ContactGraph graph_;
  IbmParams params_;
  Rng& rng_;
  Fenwick weights_;
  std::vector<std::uint8_t> status_;
  std::vector<std::int32_t> inf_nbrs_;
  std::vector<std::int32_t> infected_;
  std::vector<std::int32_t> infected_pos_;
  std::int64_t n_s_ = 0, n_i_ = 0, n_r_ = 0;
};

}  // namespace detail

// Single realization on a fixed graph with constant (beta, kappa) dynamics.
inline EpidemicTrajectory gillespie_run(const ContactGraph& graph, const IbmParams& params,
                                        std::uint64_t seed) {
  params.validate();
  if (graph.n_nodes == 0) throw std::invalid_argument("gillespie: empty graph");
  Rng rng = make_rng(seed);
  detail::SirSim sim{graph, params, rng};
  EpidemicTrajectory traj = sim.run(nullptr, nullptr, params.beta, 0.0);
  traj.seed = seed;
  return traj;
}

// Samples a fresh graph from degree_params, runs uncontrolled (beta, kappa0)
// dynamics before the schedule starts and the policy afterwards. At each
// switching time the effective rate becomes beta0 * b * v(k); if k changed the
// graph is re-sampled at dispersion kappa0 * k while states persist.
inline EpidemicTrajectory run_with_policy(const DegreeParams& degree_params,
                                          const IbmParams& params, const ControlSchedule* schedule,
                                          std::uint64_t seed) {
  params.validate();
  degree_params.validate();
  Rng rng = make_rng(seed);
  ContactGraph graph = sample_graph(degree_params, rng);
  detail::SirSim sim{std::move(graph), params, rng};
  EpidemicTrajectory traj = sim.run(schedule, &degree_params, params.beta, degree_params.kappa);
  traj.seed = seed;
  return traj;
}

inline EpidemicTrajectory run_with_policy(const DegreeParams& degree_params,
                                          const IbmParams& params, const ControlSchedule& schedule,
                                          std::uint64_t seed) {
  return run_with_policy(degree_params, params, &schedule, seed);
}

// Independent replicas; replica r uses the seed derived from (master_seed, r)
// and its own fresh graph. Results are stored by replica index, so the batch is
// deterministic regardless of thread scheduling.
inline std::vector<EpidemicTrajectory> run_batch(const DegreeParams& degree_params,
                                                 const IbmParams& params,
                                                 const ControlSchedule* schedule, int n_replicas,
                                                 std::uint64_t master_seed, int threads = 0) {
  if (n_replicas <= 0) throw std::invalid_argument("run_batch: n_replicas must be > 0");
  std::vector<EpidemicTrajectory> out(n_replicas);
  parallel_for(
      n_replicas,
      [&](std::int64_t r) {
        out[r] = run_with_policy(degree_params, params, schedule,
                                 derive_seed(master_seed, static_cast<std::uint64_t>(r)));
      },
      threads);
  return out;
}

}  // namespace epi
