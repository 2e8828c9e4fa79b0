#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "epi/csv.hpp"

namespace epi {

// Coupling of the dispersion control onto the transmission rate: acting on
// super-spreaders (raising kappa) also damps transmission for everyone, so the
// effective rate is beta0 * b * v(k).
inline double coupling_v(double k) {
  if (!(k >= 1.0)) throw std::domain_error("coupling_v: k must be >= 1");
  return 1.0 / (1.0 + std::log10(k));
}

inline double coupling_v_prime(double k) {
  if (!(k >= 1.0)) throw std::domain_error("coupling_v_prime: k must be >= 1");
  const double ln10 = std::log(10.0);
  const double d = 1.0 + std::log10(k);
  return -1.0 / (k * ln10 * d * d);
}

struct ControlBounds {
  double b_min = 0.1;
  double k_max = 10.0;
};

// Piecewise-constant relative policy on [t_start, t_end]: value m applies on
// [times[m], times[m+1]); the last value holds up to t_end. Before times.front()
// the policy is the uncontrolled (1, 1).
struct ControlSchedule {
  std::vector<double> times;
  std::vector<double> b;
  std::vector<double> k;

  int size() const { return static_cast<int>(times.size()); }
  double t_start() const { return times.front(); }
  double t_end() const { return times.back(); }

  static ControlSchedule constant(double t_c, double t_end, int n_points, double b_val,
                                  double k_val) {
    if (n_points < 2) throw std::invalid_argument("ControlSchedule: need >= 2 points");
    ControlSchedule s;
    s.times.resize(n_points);
    const double dt = (t_end - t_c) / (n_points - 1);
    for (int m = 0; m < n_points; ++m) s.times[m] = t_c + m * dt;
    s.b.assign(n_points, b_val);
    s.k.assign(n_points, k_val);
    return s;
  }

  int index_at(double t) const {
    // Largest m with times[m] <= t; -1 before the schedule starts.
    auto it = std::upper_bound(times.begin(), times.end(), t);
    return static_cast<int>(it - times.begin()) - 1;
  }
  double b_at(double t) const {
    int m = index_at(t);
    return m < 0 ? 1.0 : b[m];
  }
  double k_at(double t) const {
    int m = index_at(t);
    return m < 0 ? 1.0 : k[m];
  }

  bool feasible(const ControlBounds& bounds) const {
    for (double x : b)
      if (!(x >= bounds.b_min && x <= 1.0)) return false;
    for (double x : k)
      if (!(x >= 1.0 && x <= bounds.k_max)) return false;
    return true;
  }

  int distinct_values_b() const { return static_cast<int>(std::set<double>(b.begin(), b.end()).size()); }
  int distinct_values_k() const { return static_cast<int>(std::set<double>(k.begin(), k.end()).size()); }

  void validate() const {
    if (times.size() < 2 || times.size() != b.size() || times.size() != k.size())
      throw std::invalid_argument("ControlSchedule: inconsistent sizes");
    for (std::size_t m = 1; m < times.size(); ++m)
      if (!(times[m] > times[m - 1])) throw std::invalid_argument("ControlSchedule: times not increasing");
  }
};

inline void write_schedule_csv(const std::string& path, const ControlSchedule& s) {
  CsvTable t;
  t.header = {"t", "b", "k"};
  for (int m = 0; m < s.size(); ++m) t.rows.push_back({s.times[m], s.b[m], s.k[m]});
  write_csv(path, t);
}

inline ControlSchedule read_schedule_csv(const std::string& path) {
  CsvTable t = read_csv_file(path);
  ControlSchedule s;
  s.times = t.col("t");
  s.b = t.col("b");
  s.k = t.col("k");
  s.validate();
  return s;
}

}  // namespace epi
