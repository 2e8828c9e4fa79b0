#pragma once

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "epi/trajectory.hpp"

namespace epi {

struct TrajectoryBundle {
  std::vector<EpidemicTrajectory> replicas;

  void validate() const {
    if (replicas.empty()) throw std::invalid_argument("TrajectoryBundle: empty");
    const int m = replicas.front().size();
    const double dt = replicas.front().sample_dt;
    for (const auto& t : replicas)
      if (t.size() != m || t.sample_dt != dt)
        throw std::invalid_argument("TrajectoryBundle: replicas must share the grid");
  }
};

struct OutlierFilter {
  std::vector<int> retained;  // indices into the bundle
  bool degenerate = false;    // all replicas hit the threshold; kept anyway
  double r_max = 0.0;
};

// A replica is an outlier when its recovered growth R^M - R^0 ends up at or
// below 0.8 * R_max, with R_max the largest final R across the bundle. This
// removes immediate extinctions that would drag the pointwise mean down. If
// everything is filtered (all extinct), the full set is kept and flagged.
inline OutlierFilter filter_outliers(const TrajectoryBundle& bundle) {
  bundle.validate();
  OutlierFilter out;
  const int p_count = static_cast<int>(bundle.replicas.size());
  out.r_max = 0.0;
  for (const auto& t : bundle.replicas) out.r_max = std::max(out.r_max, t.r.back());
  for (int p = 0; p < p_count; ++p) {
    const auto& t = bundle.replicas[p];
    const double growth = t.r.back() - t.r.front();
    if (growth > 0.8 * out.r_max) out.retained.push_back(p);
  }
  if (out.retained.empty()) {
    out.degenerate = true;
    out.retained.resize(p_count);
    for (int p = 0; p < p_count; ++p) out.retained[p] = p;
  }
  return out;
}

// First grid time at which I strictly exceeds its initial value by more than
// the threshold; zero when that never happens.
inline double onset_time(const EpidemicTrajectory& traj, double threshold = 1e-3) {
  for (int m = 0; m < traj.size(); ++m)
    if (traj.i[m] - traj.i[0] > threshold) return m * traj.sample_dt;
  return 0.0;
}

struct AveragedTrajectory {
  double sample_dt = 0.0;
  std::vector<double> s, i, r;
  int retained_count = 0;
  double mean_onset = 0.0;
  std::vector<int> shifts;  // d_p per retained replica
  bool degenerate = false;

  int size() const { return static_cast<int>(s.size()); }
  double time(int m) const { return m * sample_dt; }
};

namespace detail {

// Shift by d grid steps with constant extension; d > 0 pulls the tail left,
// d < 0 pushes the head right.
inline std::vector<double> shift_series(const std::vector<double>& x, int d) {
  const int m_count = static_cast<int>(x.size());
  std::vector<double> out(m_count);
  for (int m = 0; m < m_count; ++m) {
    const int src = m + d;
    out[m] = x[std::clamp(src, 0, m_count - 1)];
  }
  return out;
}

}  // namespace detail

// Appendix-style averaging: drop extinct outliers, estimate each retained
// replica's onset time, translate by d_p = floor((tau_p - tau_bar)/dt) steps
// and average pointwise. tau_bar is taken over retained replicas only.
inline AveragedTrajectory align_and_average(const TrajectoryBundle& bundle,
                                            double onset_threshold = 1e-3) {
  OutlierFilter filter = filter_outliers(bundle);
  const double dt = bundle.replicas.front().sample_dt;
  const int m_count = bundle.replicas.front().size();
  const int p_count = static_cast<int>(filter.retained.size());

  double tau_bar = 0.0;
  std::vector<double> tau(p_count);
  for (int j = 0; j < p_count; ++j) {
    tau[j] = onset_time(bundle.replicas[filter.retained[j]], onset_threshold);
    tau_bar += tau[j];
  }
  tau_bar /= p_count;

  AveragedTrajectory avg;
  avg.sample_dt = dt;
  avg.retained_count = p_count;
  avg.mean_onset = tau_bar;
  avg.degenerate = filter.degenerate;
  avg.shifts.resize(p_count);
  avg.s.assign(m_count, 0.0);
  avg.i.assign(m_count, 0.0);
  for (int j = 0; j < p_count; ++j) {
    const int d = static_cast<int>(std::floor((tau[j] - tau_bar) / dt));
    avg.shifts[j] = d;
    const auto& rep = bundle.replicas[filter.retained[j]];
    const std::vector<double> s_sh = detail::shift_series(rep.s, d);
    const std::vector<double> i_sh = detail::shift_series(rep.i, d);
    for (int m = 0; m < m_count; ++m) {
      avg.s[m] += s_sh[m];
      avg.i[m] += i_sh[m];
    }
  }
  avg.r.resize(m_count);
  for (int m = 0; m < m_count; ++m) {
    avg.s[m] /= p_count;
    avg.i[m] /= p_count;
    avg.r[m] = 1.0 - (avg.s[m] + avg.i[m]);
  }
  return avg;
}

inline void write_averaged_csv(const std::string& path, const AveragedTrajectory& avg) {
  CsvTable t;
  t.header = {"t", "S", "I", "R"};
  for (int m = 0; m < avg.size(); ++m)
    t.rows.push_back({avg.time(m), avg.s[m], avg.i[m], avg.r[m]});
  write_csv(path, t);
}

}  // namespace epi
