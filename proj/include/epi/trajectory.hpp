#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "epi/csv.hpp"

namespace epi {

// (S, I, R) proportions sampled on the uniform grid t_m = m * sample_dt.
// r is stored as 1 - (s + i), so s + i + r == 1 holds exactly in floating
// point at every grid point. beta_eff/kappa_eff record the parameters in
// force on the interval [t_m, t_{m+1}).
struct EpidemicTrajectory {
  double sample_dt = 2.0 / 7.0;
  std::vector<double> s, i, r;
  std::vector<double> beta_eff, kappa_eff;
  std::uint64_t seed = 0;

  int size() const { return static_cast<int>(s.size()); }
  double time(int m) const { return m * sample_dt; }
  double horizon() const { return (size() - 1) * sample_dt; }
};

inline void write_trajectory_csv(const std::string& path, const EpidemicTrajectory& traj) {
  CsvTable t;
  t.header = {"t", "S", "I", "R"};
  for (int m = 0; m < traj.size(); ++m)
    t.rows.push_back({traj.time(m), traj.s[m], traj.i[m], traj.r[m]});
  write_csv(path, t);
}

inline EpidemicTrajectory read_trajectory_csv(const std::string& path) {
  CsvTable t = read_csv_file(path);
  if (t.rows.size() < 2) throw std::runtime_error("trajectory csv: need >= 2 rows");
  EpidemicTrajectory traj;
  traj.s = t.col("S");
  traj.i = t.col("I");
  traj.r = t.col("R");
  auto times = t.col("t");
  traj.sample_dt = times[1] - times[0];
  return traj;
}

}  // namespace epi
