#pragma once

#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "epi/dataset.hpp"
#include "epi/mpc.hpp"
#include "epi/ocp.hpp"
#include "epi/train.hpp"

namespace epi {

// One validation config for comparing the reduced model against the IBM.
struct ValidationCase {
  double n = 0.5, beta = 0.4, kappa = 2.0, i0 = 5e-4;
};

struct QuantitiesConfig {
  std::vector<double> n_values = {0.2, 0.5, 0.9};
  double kappa_lo = 0.1, kappa_hi = 10.0;
  int kappa_points = 20;
  double beta_lo = 0.075, beta_hi = 0.9;
  int beta_points = 200;
  std::vector<double> rinf_n_values = {0.1, 0.2, 0.8};
  int rinf_beta_points = 30;
  int rinf_kappa_points = 50;
};

struct PlotConfig {
  std::vector<std::string> inputs;  // CSV paths
  std::string kind = "trajectory";  // trajectory | schedule | iterations
  std::string title = "";
};

// The full resolved configuration of a CLI run. Defaults follow the reference
// parameter set; a config file overrides individual keys.
struct ToolConfig {
  std::uint64_t seed = 1;
  int threads = 0;

  MpcScenario scenario;
  double ibm_horizon = 200.0;
  double sample_dt = 2.0 / 7.0;
  int replicas = 50;

  DatasetConfig dataset;
  TrainConfig train;
  OcpConfig ocp;
  StoppingCriteria stop;
  double d0_fraction = 0.075;
  int fine_tune_epochs = 5;
  bool mpc_write_replicas = true;

  std::vector<ValidationCase> validation_cases;
  double validation_horizon = 150.0;
  QuantitiesConfig quantities;
  PlotConfig plot;

  std::string model_path, dataset_path;
  std::vector<std::string> input_paths;

  MpcConfig mpc_config(const std::string& artifact_dir) const {
    MpcConfig m;
    m.scenario = scenario;
    m.ocp = ocp;
    m.stop = stop;
    m.train = train;
    m.d0_fraction = d0_fraction;
    m.fine_tune_epochs = fine_tune_epochs;
    m.replicas = replicas;
    m.sample_dt = sample_dt;
    m.threads = threads;
    m.artifact_dir = artifact_dir;
    m.write_replicas = mpc_write_replicas;
    return m;
  }
};

namespace detail {

class ConfigErrors {
 public:
  void require(bool ok, const std::string& key, const std::string& bound) {
    if (!ok) lines_.push_back("config error: " + key + " violates " + bound);
  }
  void raise_if_any() const {
    if (lines_.empty()) return;
    std::string all;
    for (const auto& l : lines_) all += l + "\n";
    throw std::invalid_argument(all);
  }

 private:
  std::vector<std::string> lines_;
};

template <class T>
void get_to_if(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

inline void parse_edge_rate(const nlohmann::json& j, const char* key, EdgeRateConvention& out) {
  if (!j.contains(key)) return;
  const std::string v = j.at(key).get<std::string>();
  if (v == "beta_over_alpha")
    out = EdgeRateConvention::beta_over_alpha;
  else if (v == "beta")
    out = EdgeRateConvention::beta;
  else
    throw std::invalid_argument("config error: " + std::string(key) +
                                " must be beta_over_alpha or beta");
}

}  // namespace detail

// Validates every bound and reports all violations at once, each with the
// permitted range.
inline void validate_config(const ToolConfig& c) {
  detail::ConfigErrors e;
  e.require(c.scenario.n > 0 && c.scenario.n <= 1.0, "scenario.n", "(0, 1]");
  e.require(c.scenario.beta0 > 0, "scenario.beta0_per_day", "(0, inf)");
  e.require(c.scenario.kappa0 > 0, "scenario.kappa0", "(0, inf)");
  e.require(c.scenario.alpha > 0, "scenario.alpha_contacts", "(0, inf)");
  e.require(c.scenario.gamma > 0, "scenario.gamma_per_day", "(0, inf)");
  e.require(c.scenario.i0 > 0 && c.scenario.i0 < 1, "scenario.i0", "(0, 1)");
  e.require(std::abs(c.scenario.s0 + c.scenario.i0 - 1.0) < 1e-9, "scenario.s0",
            "s0 + i0 = 1");
  e.require(c.scenario.n_max >= 1, "scenario.n_max", "[1, inf)");
  e.require(c.sample_dt > 0, "ibm.sample_dt_days", "(0, inf)");
  e.require(c.ibm_horizon > 0, "ibm.horizon_days", "(0, inf)");
  e.require(c.replicas >= 1, "ibm.replicas", "[1, inf)");

  const DatasetRanges& r = c.dataset.ranges;
  e.require(r.n_lo > 0 && r.n_hi <= 1 && r.n_lo <= r.n_hi, "dataset.n_range", "(0, 1]");
  e.require(r.beta_lo > 0 && r.beta_lo <= r.beta_hi, "dataset.beta_range_per_day", "(0, inf)");
  e.require(r.kappa_lo > 0 && r.kappa_lo <= r.kappa_hi, "dataset.kappa_range", "(0, inf)");
  e.require(r.i0_lo > 0 && r.i0_lo <= r.i0_hi && r.i0_hi < 1, "dataset.i0_range", "(0, 1)");
  e.require(c.dataset.n_configs >= 1, "dataset.n_configs", "[1, inf)");
  e.require(c.dataset.replicas_per_config >= 1, "dataset.replicas_per_config", "[1, inf)");

  e.require(c.train.learning_rate > 0, "train.learning_rate", "(0, inf)");
  e.require(c.train.lr_decay > 0 && c.train.lr_decay <= 1, "train.lr_decay_per_epoch", "(0, 1]");
  e.require(c.train.batch_size >= 1, "train.batch_size", "[1, inf)");
  e.require(c.train.epochs >= 1, "train.epochs", "[1, inf)");
  e.require(c.train.validation_fraction > 0 && c.train.validation_fraction < 1,
            "train.validation_fraction", "(0, 1)");

  e.require(c.ocp.bounds.b_min > 0 && c.ocp.bounds.b_min <= 1, "ocp.b_min", "(0, 1]");
  e.require(c.ocp.bounds.k_max > 1, "ocp.k_max", "(1, inf)");
  e.require(c.ocp.i_hosp > 0 && c.ocp.i_hosp < c.ocp.i_max && c.ocp.i_max <= 1,
            "ocp.i_hosp/i_max", "0 < i_hosp < i_max <= 1");
  e.require(c.ocp.t_c < c.ocp.t_horizon, "ocp.t_c_days", "t_c < t_horizon");
  e.require(c.ocp.omega_beta >= 0 && c.ocp.omega_kappa >= 0 && c.ocp.omega_hosp >= 0,
            "ocp.omega_*", "[0, inf)");
  e.require(c.ocp.epsilon > 0, "ocp.epsilon", "(0, inf)");
  e.require(c.ocp.delta >= 0, "ocp.delta", "[0, inf)");
  e.require(c.ocp.eta > 0, "ocp.eta", "(0, inf)");
  e.require(c.ocp.dt > 0, "ocp.dt_days", "(0, inf)");
  e.require(c.ocp.dt_int > 0, "ocp.dt_int_days", "(0, inf)");
  e.require(c.ocp.n_g >= 1, "ocp.n_g", "[1, inf)");
  e.require(c.ocp.tau_g > 0, "ocp.tau_g", "(0, inf)");

  e.require(c.stop.tau_rl > 0, "mpc.tau_rl", "(0, inf)");
  e.require(c.stop.tau_l2 > 0, "mpc.tau_l2", "(0, inf)");
  e.require(c.stop.tau_rinf > 0, "mpc.tau_r_infinity", "(0, inf)");
  e.require(c.stop.tau_ip > 0, "mpc.tau_ip_days", "(0, inf)");
  e.require(c.stop.max_outer_iterations >= 1, "mpc.max_outer_iterations", "[1, inf)");
  e.require(c.d0_fraction > 0 && c.d0_fraction <= 1, "mpc.d0_fraction", "(0, 1]");
  e.require(c.fine_tune_epochs >= 1, "mpc.fine_tune_epochs", "[1, inf)");

  for (const auto& v : c.validation_cases) {
    e.require(v.n > 0 && v.n <= 1, "validate.configs[].n", "(0, 1]");
    e.require(v.beta > 0, "validate.configs[].beta_per_day", "(0, inf)");
    e.require(v.kappa > 0, "validate.configs[].kappa", "(0, inf)");
    e.require(v.i0 > 0 && v.i0 < 1, "validate.configs[].i0", "(0, 1)");
  }
  e.raise_if_any();
}

inline ToolConfig parse_config(const nlohmann::json& j) {
  ToolConfig c;
  detail::get_to_if(j, "seed", c.seed);
  detail::get_to_if(j, "threads", c.threads);
  if (j.contains("scenario")) {
    const auto& s = j.at("scenario");
    detail::get_to_if(s, "n", c.scenario.n);
    detail::get_to_if(s, "beta0_per_day", c.scenario.beta0);
    detail::get_to_if(s, "kappa0", c.scenario.kappa0);
    detail::get_to_if(s, "alpha_contacts", c.scenario.alpha);
    detail::get_to_if(s, "gamma_per_day", c.scenario.gamma);
    detail::get_to_if(s, "s0", c.scenario.s0);
    detail::get_to_if(s, "i0", c.scenario.i0);
    detail::get_to_if(s, "n_max", c.scenario.n_max);
    detail::parse_edge_rate(s, "edge_rate_convention", c.scenario.edge_rate);
  }
  if (j.contains("ibm")) {
    const auto& s = j.at("ibm");
    detail::get_to_if(s, "sample_dt_days", c.sample_dt);
    detail::get_to_if(s, "horizon_days", c.ibm_horizon);
    detail::get_to_if(s, "replicas", c.replicas);
  }
  if (j.contains("dataset")) {
    const auto& s = j.at("dataset");
    detail::get_to_if(s, "n_configs", c.dataset.n_configs);
    detail::get_to_if(s, "replicas_per_config", c.dataset.replicas_per_config);
    detail::get_to_if(s, "horizon_days", c.dataset.horizon);
    detail::get_to_if(s, "si_guard", c.dataset.si_guard);
    auto range = [&](const char* key, double& lo, double& hi) {
      if (s.contains(key)) {
        const auto arr = s.at(key).get<std::vector<double>>();
        if (arr.size() != 2) throw std::invalid_argument(std::string("config error: ") + key +
                                                         " must be [lo, hi]");
        lo = arr[0];
        hi = arr[1];
      }
    };
    range("n_range", c.dataset.ranges.n_lo, c.dataset.ranges.n_hi);
    range("beta_range_per_day", c.dataset.ranges.beta_lo, c.dataset.ranges.beta_hi);
    range("kappa_range", c.dataset.ranges.kappa_lo, c.dataset.ranges.kappa_hi);
    range("i0_range", c.dataset.ranges.i0_lo, c.dataset.ranges.i0_hi);
  }
  if (j.contains("train")) {
    const auto& s = j.at("train");
    detail::get_to_if(s, "learning_rate", c.train.learning_rate);
    detail::get_to_if(s, "lr_decay_per_epoch", c.train.lr_decay);
    detail::get_to_if(s, "batch_size", c.train.batch_size);
    detail::get_to_if(s, "epochs", c.train.epochs);
    detail::get_to_if(s, "validation_fraction", c.train.validation_fraction);
    detail::get_to_if(s, "hidden_layers", c.train.hidden);
    detail::get_to_if(s, "init_gain", c.train.init_gain);
  }
  if (j.contains("ocp")) {
    const auto& s = j.at("ocp");
    detail::get_to_if(s, "t_c_days", c.ocp.t_c);
    detail::get_to_if(s, "t_horizon_days", c.ocp.t_horizon);
    detail::get_to_if(s, "dt_days", c.ocp.dt);
    detail::get_to_if(s, "omega_beta", c.ocp.omega_beta);
    detail::get_to_if(s, "omega_kappa", c.ocp.omega_kappa);
    detail::get_to_if(s, "omega_hosp", c.ocp.omega_hosp);
    detail::get_to_if(s, "i_hosp", c.ocp.i_hosp);
    detail::get_to_if(s, "i_max", c.ocp.i_max);
    detail::get_to_if(s, "epsilon", c.ocp.epsilon);
    detail::get_to_if(s, "delta", c.ocp.delta);
    detail::get_to_if(s, "eta", c.ocp.eta);
    detail::get_to_if(s, "b_min", c.ocp.bounds.b_min);
    detail::get_to_if(s, "k_max", c.ocp.bounds.k_max);
    detail::get_to_if(s, "n_g", c.ocp.n_g);
    detail::get_to_if(s, "tau_g", c.ocp.tau_g);
    detail::get_to_if(s, "dt_int_days", c.ocp.dt_int);
  }
  if (j.contains("mpc")) {
    const auto& s = j.at("mpc");
    detail::get_to_if(s, "d0_fraction", c.d0_fraction);
    detail::get_to_if(s, "fine_tune_epochs", c.fine_tune_epochs);
    detail::get_to_if(s, "max_outer_iterations", c.stop.max_outer_iterations);
    detail::get_to_if(s, "tau_rl", c.stop.tau_rl);
    detail::get_to_if(s, "tau_l2", c.stop.tau_l2);
    detail::get_to_if(s, "tau_r_infinity", c.stop.tau_rinf);
    detail::get_to_if(s, "tau_ip_days", c.stop.tau_ip);
    detail::get_to_if(s, "write_replicas", c.mpc_write_replicas);
  }
  if (j.contains("validate")) {
    const auto& s = j.at("validate");
    detail::get_to_if(s, "horizon_days", c.validation_horizon);
    if (s.contains("configs")) {
      for (const auto& vj : s.at("configs")) {
        ValidationCase v;
        detail::get_to_if(vj, "n", v.n);
        detail::get_to_if(vj, "beta_per_day", v.beta);
        detail::get_to_if(vj, "kappa", v.kappa);
        detail::get_to_if(vj, "i0", v.i0);
        c.validation_cases.push_back(v);
      }
    }
  }
  if (j.contains("quantities")) {
    const auto& s = j.at("quantities");
    detail::get_to_if(s, "n_values", c.quantities.n_values);
    detail::get_to_if(s, "kappa_lo", c.quantities.kappa_lo);
    detail::get_to_if(s, "kappa_hi", c.quantities.kappa_hi);
    detail::get_to_if(s, "kappa_points", c.quantities.kappa_points);
    detail::get_to_if(s, "beta_lo", c.quantities.beta_lo);
    detail::get_to_if(s, "beta_hi", c.quantities.beta_hi);
    detail::get_to_if(s, "beta_points", c.quantities.beta_points);
    detail::get_to_if(s, "rinf_n_values", c.quantities.rinf_n_values);
    detail::get_to_if(s, "rinf_beta_points", c.quantities.rinf_beta_points);
    detail::get_to_if(s, "rinf_kappa_points", c.quantities.rinf_kappa_points);
  }
  if (j.contains("plot")) {
    const auto& s = j.at("plot");
    detail::get_to_if(s, "inputs", c.plot.inputs);
    detail::get_to_if(s, "kind", c.plot.kind);
    detail::get_to_if(s, "title", c.plot.title);
  }
  if (j.contains("io")) {
    const auto& s = j.at("io");
    detail::get_to_if(s, "model", c.model_path);
    detail::get_to_if(s, "dataset", c.dataset_path);
    detail::get_to_if(s, "inputs", c.input_paths);
  }
  validate_config(c);
  return c;
}

// The fully resolved configuration as written into manifests; parsing this
// back yields the identical ToolConfig, which is what makes replay exact.
inline nlohmann::ordered_json config_to_json(const ToolConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["scenario"] = {
      {"n", c.scenario.n},
      {"beta0_per_day", c.scenario.beta0},
      {"kappa0", c.scenario.kappa0},
      {"alpha_contacts", c.scenario.alpha},
      {"gamma_per_day", c.scenario.gamma},
      {"s0", c.scenario.s0},
      {"i0", c.scenario.i0},
      {"n_max", c.scenario.n_max},
      {"edge_rate_convention",
       c.scenario.edge_rate == EdgeRateConvention::beta_over_alpha ? "beta_over_alpha" : "beta"}};
  j["ibm"] = {{"sample_dt_days", c.sample_dt},
              {"horizon_days", c.ibm_horizon},
              {"replicas", c.replicas}};
  j["dataset"] = {{"n_configs", c.dataset.n_configs},
                  {"replicas_per_config", c.dataset.replicas_per_config},
                  {"horizon_days", c.dataset.horizon},
                  {"si_guard", c.dataset.si_guard},
                  {"n_range", {c.dataset.ranges.n_lo, c.dataset.ranges.n_hi}},
                  {"beta_range_per_day", {c.dataset.ranges.beta_lo, c.dataset.ranges.beta_hi}},
                  {"kappa_range", {c.dataset.ranges.kappa_lo, c.dataset.ranges.kappa_hi}},
                  {"i0_range", {c.dataset.ranges.i0_lo, c.dataset.ranges.i0_hi}}};
  j["train"] = {{"learning_rate", c.train.learning_rate},
                {"lr_decay_per_epoch", c.train.lr_decay},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"validation_fraction", c.train.validation_fraction},
                {"hidden_layers", c.train.hidden},
                {"init_gain", c.train.init_gain}};
  j["ocp"] = {{"t_c_days", c.ocp.t_c},       {"t_horizon_days", c.ocp.t_horizon},
              {"dt_days", c.ocp.dt},         {"omega_beta", c.ocp.omega_beta},
              {"omega_kappa", c.ocp.omega_kappa}, {"omega_hosp", c.ocp.omega_hosp},
              {"i_hosp", c.ocp.i_hosp},      {"i_max", c.ocp.i_max},
              {"epsilon", c.ocp.epsilon},    {"delta", c.ocp.delta},
              {"eta", c.ocp.eta},            {"b_min", c.ocp.bounds.b_min},
              {"k_max", c.ocp.bounds.k_max}, {"n_g", c.ocp.n_g},
              {"tau_g", c.ocp.tau_g},        {"dt_int_days", c.ocp.dt_int}};
  j["mpc"] = {{"d0_fraction", c.d0_fraction},
              {"fine_tune_epochs", c.fine_tune_epochs},
              {"max_outer_iterations", c.stop.max_outer_iterations},
              {"tau_rl", c.stop.tau_rl},
              {"tau_l2", c.stop.tau_l2},
              {"tau_r_infinity", c.stop.tau_rinf},
              {"tau_ip_days", c.stop.tau_ip},
              {"write_replicas", c.mpc_write_replicas}};
  nlohmann::ordered_json cases = nlohmann::ordered_json::array();
  for (const auto& v : c.validation_cases)
    cases.push_back(
        {{"n", v.n}, {"beta_per_day", v.beta}, {"kappa", v.kappa}, {"i0", v.i0}});
  j["validate"] = {{"horizon_days", c.validation_horizon}, {"configs", cases}};
  j["quantities"] = {{"n_values", c.quantities.n_values},
                     {"kappa_lo", c.quantities.kappa_lo},
                     {"kappa_hi", c.quantities.kappa_hi},
                     {"kappa_points", c.quantities.kappa_points},
                     {"beta_lo", c.quantities.beta_lo},
                     {"beta_hi", c.quantities.beta_hi},
                     {"beta_points", c.quantities.beta_points},
                     {"rinf_n_values", c.quantities.rinf_n_values},
                     {"rinf_beta_points", c.quantities.rinf_beta_points},
                     {"rinf_kappa_points", c.quantities.rinf_kappa_points}};
  j["plot"] = {{"inputs", c.plot.inputs}, {"kind", c.plot.kind}, {"title", c.plot.title}};
  j["io"] = {{"model", c.model_path}, {"dataset", c.dataset_path}, {"inputs", c.input_paths}};
  return j;
}

// Accepts either a config document or a manifest (replay): manifests embed the
// resolved config and the seed of the recorded run.
inline ToolConfig load_config_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("config: cannot open " + path);
  nlohmann::json j;
  is >> j;
  if (j.contains("manifest_version")) {
    ToolConfig c = parse_config(j.at("config"));
    c.seed = j.at("seed").get<std::uint64_t>();
    return c;
  }
  return parse_config(j);
}

}  // namespace epi
