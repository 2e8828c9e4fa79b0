// Command-line surface of the epidemic toolkit: simulation, averaging,
// dataset generation, training, validation, epidemiological quantities,
// optimal control, the reinforcement loop, and plotting. Every command reads
// one config file, writes its artifacts plus a manifest into --out, and is
// bit-reproducible from that manifest.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "epi/averaging.hpp"
#include "epi/config.hpp"
#include "epi/contact_graph.hpp"
#include "epi/csv.hpp"
#include "epi/dataset.hpp"
#include "epi/gillespie.hpp"
#include "epi/manifest.hpp"
#include "epi/mpc.hpp"
#include "epi/ocp.hpp"
#include "epi/reduced_ode.hpp"
#include "epi/svg.hpp"
#include "epi/train.hpp"
#include "epi/tree.hpp"

namespace fs = std::filesystem;
using namespace epi;

namespace {

struct CommandArgs {
  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed_override = 0;
  bool has_seed_override = false;
  int threads_override = 0;
  bool has_threads_override = false;
};

void add_common(CLI::App* cmd, CommandArgs& args) {
  cmd->add_option("--config", args.config_path, "Config or manifest JSON file")->required();
  cmd->add_option("--out", args.out_dir, "Output directory");
  cmd->add_option("--seed", args.seed_override, "Master seed override")
      ->each([&](const std::string&) { args.has_seed_override = true; });
  cmd->add_option("--threads", args.threads_override, "Worker thread cap")
      ->each([&](const std::string&) { args.has_threads_override = true; });
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t tt = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&tt, &tm_utc);
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// Loads the config, applies CLI overrides, prepares the output directory and
// manifest, runs the body, then seals the manifest.
int run_command(const std::string& name, const CommandArgs& args,
                const std::function<void(const ToolConfig&, RunManifest&)>& body) {
  try {
    ToolConfig cfg = load_config_file(args.config_path);
    if (args.has_seed_override) cfg.seed = args.seed_override;
    if (args.has_threads_override) cfg.threads = args.threads_override;
    fs::create_directories(args.out_dir);
    RunManifest manifest;
    manifest.command = name;
    manifest.seed = cfg.seed;
    manifest.config = config_to_json(cfg);
    manifest.created_utc = utc_now();
    body(cfg, manifest);
    manifest.write(args.out_dir + "/manifest.json");
    return 0;
  } catch (const std::exception& err) {
    nlohmann::ordered_json j;
    j["error"] = err.what();
    j["command"] = name;
    std::cerr << j.dump() << '\n';
    return 1;
  }
}

IbmParams ibm_params_of(const ToolConfig& cfg) {
  IbmParams p;
  p.beta = cfg.scenario.beta0;
  p.gamma = cfg.scenario.gamma;
  p.alpha = cfg.scenario.alpha;
  p.i0_fraction = cfg.scenario.i0;
  p.horizon = cfg.ibm_horizon;
  p.sample_dt = cfg.sample_dt;
  p.edge_rate = cfg.scenario.edge_rate;
  return p;
}

DegreeParams degree_params_of(const ToolConfig& cfg) {
  DegreeParams d;
  d.alpha = cfg.scenario.alpha;
  d.kappa = cfg.scenario.kappa0;
  d.n_nodes = cfg.scenario.population();
  return d;
}

OcpConfig scenario_ocp(const ToolConfig& cfg) {
  OcpConfig o = cfg.ocp;
  o.beta0 = cfg.scenario.beta0;
  o.kappa0 = cfg.scenario.kappa0;
  o.n = cfg.scenario.n;
  o.gamma = cfg.scenario.gamma;
  return o;
}

void cmd_simulate(const CommandArgs& args, const ToolConfig& cfg, RunManifest& manifest) {
  std::optional<ControlSchedule> schedule;
  if (!cfg.input_paths.empty()) {
    schedule = read_schedule_csv(cfg.input_paths[0]);
    manifest.add_input(cfg.input_paths[0]);
  }
  const auto batch = run_batch(degree_params_of(cfg), ibm_params_of(cfg),
                               schedule ? &*schedule : nullptr, cfg.replicas, cfg.seed,
                               cfg.threads);
  for (std::size_t r = 0; r < batch.size(); ++r) {
    char name[48];
    std::snprintf(name, sizeof(name), "replica_%03zu.csv", r);
    const std::string path = args.out_dir + "/" + name;
    write_trajectory_csv(path, batch[r]);
    manifest.add_output(path);
  }
}

void cmd_average(const CommandArgs& args, const ToolConfig& cfg, RunManifest& manifest) {
  if (cfg.input_paths.empty())
    throw std::invalid_argument("average: io.inputs must list trajectory CSV files");
  TrajectoryBundle bundle;
  for (const auto& path : cfg.input_paths) {
    bundle.replicas.push_back(read_trajectory_csv(path));
    manifest.add_input(path);
  }
  const AveragedTrajectory avg = align_and_average(bundle);
  const std::string path = args.out_dir + "/averaged.csv";
  write_averaged_csv(path, avg);
  manifest.add_output(path);
  nlohmann::ordered_json notes;
  notes["retained_count"] = avg.retained_count;
  notes["mean_onset_days"] = avg.mean_onset;
  notes["shifts"] = avg.shifts;
  notes["degenerate"] = avg.degenerate;
  manifest.config["annotations"] = notes;
}

void cmd_dataset(const CommandArgs& args, const ToolConfig& cfg, RunManifest& manifest) {
  DatasetConfig dc = cfg.dataset;
  dc.alpha = cfg.scenario.alpha;
  dc.gamma = cfg.scenario.gamma;
  dc.n_max = cfg.scenario.n_max;
  dc.sample_dt = cfg.sample_dt;
  dc.edge_rate = cfg.scenario.edge_rate;
  DatasetBuildStats stats;
  const Dataset data = build_dataset(dc, cfg.seed, cfg.threads, &stats);
  const std::string path = args.out_dir + "/dataset.csv";
  write_dataset_csv(path, data);
  manifest.add_output(path);
  nlohmann::ordered_json notes;
  notes["configs_total"] = stats.configs_total;
  notes["configs_empty"] = stats.configs_empty;
  notes["configs_degenerate"] = stats.configs_degenerate;
  notes["samples"] = stats.samples;
  manifest.config["annotations"] = notes;
}

void cmd_train(const CommandArgs& args, const ToolConfig& cfg, RunManifest& manifest) {
  if (cfg.dataset_path.empty())
    throw std::invalid_argument("train: io.dataset must point at a dataset CSV");
  manifest.add_input(cfg.dataset_path);
  const Dataset data = read_dataset_csv(cfg.dataset_path);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;
  const TrainResult result = train(data, tc);
  const std::string model_path = args.out_dir + "/model.json";
  result.model.save(model_path);
  manifest.add_output(model_path);
  CsvTable log;
  log.header = {"epoch", "train_mse", "val_mse", "lr"};
  for (const auto& e : result.log)
    log.rows.push_back({static_cast<double>(e.epoch), e.train_mse, e.val_mse, e.lr});
  const std::string log_path = args.out_dir + "/loss_log.csv";
  write_csv(log_path, log);
  manifest.add_output(log_path);
}

void cmd_validate(const CommandArgs& args, const ToolConfig& cfg, RunManifest& manifest) {
  if (cfg.model_path.empty())
    throw std::invalid_argument("validate: io.model must point at a model file");
  manifest.add_input(cfg.model_path);
  const IncidenceModel model = IncidenceModel::load(cfg.model_path);
  if (cfg.validation_cases.empty())
    throw std::invalid_argument("validate: validate.configs is empty");

  nlohmann::ordered_json all = nlohmann::ordered_json::array();
  for (std::size_t idx = 0; idx < cfg.validation_cases.size(); ++idx) {
    const ValidationCase& vc = cfg.validation_cases[idx];
    DegreeParams dp;
    dp.alpha = cfg.scenario.alpha;
    dp.kappa = vc.kappa;
    dp.n_nodes = static_cast<int>(std::lround(vc.n * cfg.scenario.n_max));
    IbmParams ip = ibm_params_of(cfg);
    ip.beta = vc.beta;
    ip.i0_fraction = vc.i0;
    ip.horizon = cfg.validation_horizon;
    TrajectoryBundle bundle;
    bundle.replicas =
        run_batch(dp, ip, nullptr, cfg.replicas, derive_seed(cfg.seed, idx), cfg.threads);
    const AveragedTrajectory avg = align_and_average(bundle);

    RmRunConfig rc;
    rc.n = vc.n;
    rc.gamma = cfg.scenario.gamma;
    rc.beta = PiecewiseConstantFn::constant(vc.beta);
    rc.kappa = PiecewiseConstantFn::constant(vc.kappa);
    rc.t0 = 0.0;
    rc.t1 = cfg.validation_horizon;
    rc.dt_int = cfg.ocp.dt_int;
    rc.sample_dt = cfg.sample_dt;
    rc.init = {1.0 - vc.i0, vc.i0};
    const RmTrajectory rm = integrate(model, rc);

    CsvTable t;
    t.header = {"t", "S_ibm", "I_ibm", "S_rm", "I_rm"};
    const int m_count = std::min(avg.size(), rm.size());
    for (int m = 0; m < m_count; ++m)
      t.rows.push_back({avg.time(m), avg.s[m], avg.i[m], rm.s[m], rm.i[m]});
    char name[48];
    std::snprintf(name, sizeof(name), "compare_%02zu.csv", idx);
    const std::string path = args.out_dir + "/" + name;
    write_csv(path, t);
    manifest.add_output(path);

    const double peak_ibm = *std::max_element(avg.i.begin(), avg.i.end());
    const double peak_rm = *std::max_element(rm.i.begin(), rm.i.end());
    nlohmann::ordered_json j;
    j["case"] = {{"n", vc.n}, {"beta_per_day", vc.beta}, {"kappa", vc.kappa}, {"i0", vc.i0}};
    j["peak_ibm"] = peak_ibm;
    j["peak_rm"] = peak_rm;
    j["peak_rel_error"] = peak_ibm > 0 ? std::abs(peak_rm - peak_ibm) / peak_ibm : 0.0;
    j["peak_time_ibm_days"] = peak_time(avg.i, 0.0, avg.sample_dt);
    j["peak_time_rm_days"] = peak_time(rm.i, 0.0, rm.sample_dt);
    j["peak_delay_days"] =
        std::abs(peak_time(avg.i, 0.0, avg.sample_dt) - peak_time(rm.i, 0.0, rm.sample_dt));
    j["retained_replicas"] = avg.retained_count;
    all.push_back(j);
  }
  const std::string metrics_path = args.out_dir + "/validation_metrics.json";
  std::ofstream os(metrics_path);
  os << all.dump(1) << '\n';
  os.close();
  manifest.add_output(metrics_path);
}

void cmd_quantities(const CommandArgs& args, const ToolConfig& cfg, RunManifest& manifest) {
  if (cfg.model_path.empty())
    throw std::invalid_argument("quantities: io.model must point at a model file");
  manifest.add_input(cfg.model_path);
  const IncidenceModel model = IncidenceModel::load(cfg.model_path);
  const QuantitiesConfig& q = cfg.quantities;
  const double gamma = cfg.scenario.gamma;

  std::vector<double> beta_grid(q.beta_points);
  for (int j = 0; j < q.beta_points; ++j)
    beta_grid[j] = q.beta_lo + (q.beta_hi - q.beta_lo) * j / (q.beta_points - 1);
  std::vector<double> kappa_grid(q.kappa_points);
  for (int j = 0; j < q.kappa_points; ++j)
    kappa_grid[j] = q.kappa_lo * std::pow(q.kappa_hi / q.kappa_lo,
                                          static_cast<double>(j) / (q.kappa_points - 1));

  CsvTable bc;
  bc.header = {"n", "kappa", "beta_c", "beta_c_over_gamma"};
  for (double n : q.n_values)
    for (double kappa : kappa_grid) {
      const auto critical = critical_beta(model, n, kappa, gamma, beta_grid);
      const double v = critical ? *critical : std::numeric_limits<double>::quiet_NaN();
      bc.rows.push_back({n, kappa, v, v / gamma});
    }
  const std::string bc_path = args.out_dir + "/beta_c_surface.csv";
  write_csv(bc_path, bc);
  manifest.add_output(bc_path);

  CsvTable ri;
  ri.header = {"n", "beta", "kappa", "r_infinity"};
  for (double n : q.rinf_n_values) {
    for (int a = 0; a < q.rinf_beta_points; ++a) {
      const double beta = 0.075 + (0.9 - 0.075) * a / std::max(1, q.rinf_beta_points - 1);
      for (int b = 0; b < q.rinf_kappa_points; ++b) {
        const double kappa = q.kappa_lo * std::pow(q.kappa_hi / q.kappa_lo,
                                                   static_cast<double>(b) /
                                                       std::max(1, q.rinf_kappa_points - 1));
        const double ri_v = r_infinity(model, n, beta, kappa,
                                       {1.0 - cfg.scenario.i0, cfg.scenario.i0}, gamma, 200.0,
                                       cfg.ocp.dt_int);
        ri.rows.push_back({n, beta, kappa, ri_v});
      }
    }
  }
  const std::string ri_path = args.out_dir + "/r_infinity_map.csv";
  write_csv(ri_path, ri);
  manifest.add_output(ri_path);
}

void cmd_control(const CommandArgs& args, const ToolConfig& cfg, RunManifest& manifest) {
  if (cfg.model_path.empty())
    throw std::invalid_argument("control: io.model must point at a model file");
  manifest.add_input(cfg.model_path);
  const IncidenceModel model = IncidenceModel::load(cfg.model_path);
  OcpConfig ocp = scenario_ocp(cfg);

  RmRunConfig pre;
  pre.n = cfg.scenario.n;
  pre.gamma = cfg.scenario.gamma;
  pre.beta = PiecewiseConstantFn::constant(cfg.scenario.beta0);
  pre.kappa = PiecewiseConstantFn::constant(cfg.scenario.kappa0);
  pre.t0 = 0.0;
  pre.t1 = ocp.t_c;
  pre.dt_int = ocp.dt_int;
  pre.sample_dt = ocp.t_c;
  pre.init = {cfg.scenario.s0, cfg.scenario.i0};
  ocp.state_c = integrate(model, pre).final_state;

  const OcpSolveResult sol = ocp_solve(model, ocp);
  const ControlSchedule compressed = compress_control(sol.schedule);

  const std::string dense_path = args.out_dir + "/schedule_dense.csv";
  write_schedule_csv(dense_path, sol.schedule);
  manifest.add_output(dense_path);
  const std::string comp_path = args.out_dir + "/schedule_compressed.csv";
  write_schedule_csv(comp_path, compressed);
  manifest.add_output(comp_path);

  CsvTable iters;
  iters.header = {"iter", "J_delta", "rho"};
  for (const auto& rec : sol.log)
    iters.rows.push_back({static_cast<double>(rec.iter), rec.j_delta, rec.rho});
  const std::string iter_path = args.out_dir + "/iterations.csv";
  write_csv(iter_path, iters);
  manifest.add_output(iter_path);

  // Controlled and uncontrolled reduced trajectories over the full horizon.
  auto run_rm = [&](const ControlSchedule* sched) {
    RmRunConfig rc;
    rc.n = cfg.scenario.n;
    rc.gamma = cfg.scenario.gamma;
    if (sched) {
      rc.beta = detail::effective_fn(*sched, cfg.scenario.beta0, true, cfg.scenario.beta0,
                                     cfg.scenario.kappa0);
      rc.kappa = detail::effective_fn(*sched, cfg.scenario.kappa0, false, cfg.scenario.beta0,
                                      cfg.scenario.kappa0);
    } else {
      rc.beta = PiecewiseConstantFn::constant(cfg.scenario.beta0);
      rc.kappa = PiecewiseConstantFn::constant(cfg.scenario.kappa0);
    }
    rc.t0 = 0.0;
    rc.t1 = ocp.t_horizon;
    rc.dt_int = ocp.dt_int;
    rc.sample_dt = cfg.sample_dt;
    rc.init = {cfg.scenario.s0, cfg.scenario.i0};
    return integrate(model, rc);
  };
  for (const auto& [name, sched] :
       {std::pair<const char*, const ControlSchedule*>{"rm_controlled.csv", &sol.schedule},
        std::pair<const char*, const ControlSchedule*>{"rm_uncontrolled.csv", nullptr}}) {
    const RmTrajectory rm = run_rm(sched);
    CsvTable t;
    t.header = {"t", "S", "I", "R"};
    for (int m = 0; m < rm.size(); ++m)
      t.rows.push_back({rm.time(m), rm.s[m], rm.i[m], rm.r(m)});
    const std::string path = args.out_dir + "/" + name;
    write_csv(path, t);
    manifest.add_output(path);
  }
}

void cmd_mpc(const CommandArgs& args, const ToolConfig& cfg, RunManifest& manifest) {
  if (cfg.dataset_path.empty())
    throw std::invalid_argument("mpc: io.dataset must point at the base dataset CSV");
  manifest.add_input(cfg.dataset_path);
  const Dataset base = read_dataset_csv(cfg.dataset_path);
  MpcConfig mc = cfg.mpc_config(args.out_dir + "/iterations");
  IncidenceModel final_model = IncidenceModel::make(cfg.train.hidden);
  const MpcResult result = run_mpc(base, mc, cfg.seed, &final_model);

  const std::string comp_path = args.out_dir + "/final_control.csv";
  write_schedule_csv(comp_path, result.final_control);
  manifest.add_output(comp_path);
  const std::string dense_path = args.out_dir + "/final_dense.csv";
  write_schedule_csv(dense_path, result.final_dense);
  manifest.add_output(dense_path);
  const std::string model_path = args.out_dir + "/final_model.json";
  final_model.save(model_path);
  manifest.add_output(model_path);

  nlohmann::ordered_json j;
  j["accepted"] = result.accepted;
  j["iterations"] = result.iterations;
  j["c_0"] = result.c_0;
  if (!result.failure_reason.empty()) j["failure_reason"] = result.failure_reason;
  nlohmann::ordered_json hist = nlohmann::ordered_json::array();
  for (const auto& rec : result.history) {
    nlohmann::ordered_json h = detail::metrics_json(rec.metrics);
    h["p"] = rec.p;
    h["j_delta_final"] = rec.j_delta_final;
    h["ocp_iterations"] = rec.ocp_iterations;
    h["dataset_size"] = rec.dataset_size;
    hist.push_back(h);
  }
  j["history"] = hist;
  const std::string result_path = args.out_dir + "/mpc_result.json";
  std::ofstream os(result_path);
  os << j.dump(1) << '\n';
  os.close();
  manifest.add_output(result_path);

  // Per-iteration artifacts are hashed as outputs too.
  std::vector<std::string> artifact_files;
  for (const auto& entry : fs::recursive_directory_iterator(args.out_dir + "/iterations"))
    if (entry.is_regular_file()) artifact_files.push_back(entry.path().string());
  std::sort(artifact_files.begin(), artifact_files.end());
  for (const auto& path : artifact_files) manifest.add_output(path);
}

void cmd_plot(const CommandArgs& args, const ToolConfig& cfg, RunManifest& manifest) {
  if (cfg.plot.inputs.empty()) throw std::invalid_argument("plot: plot.inputs is empty");
  std::vector<PlotSeries> series;
  for (const auto& path : cfg.plot.inputs) {
    manifest.add_input(path);
    const CsvTable t = read_csv_file(path);
    const std::string tag =
        cfg.plot.inputs.size() > 1 ? " (" + fs::path(path).stem().string() + ")" : "";
    if (cfg.plot.kind == "trajectory") {
      const auto tv = t.col("t");
      for (const char* col : {"S", "I", "R"})
        series.push_back({col + tag, tv, t.col(col), false, false});
    } else if (cfg.plot.kind == "schedule") {
      const auto tv = t.col("t");
      series.push_back({"b" + tag, tv, t.col("b"), true, false});
      series.push_back({"k" + tag, tv, t.col("k"), true, true});
    } else if (cfg.plot.kind == "iterations") {
      series.push_back({"J_delta" + tag, t.col("iter"), t.col("J_delta"), false, false});
    } else {
      throw std::invalid_argument("plot: unknown kind '" + cfg.plot.kind + "'");
    }
  }
  const bool dual = cfg.plot.kind == "schedule";
  const std::string svg =
      emit_plot(series, cfg.plot.title.empty() ? cfg.plot.kind : cfg.plot.title, "t (days)",
                dual ? "b" : (cfg.plot.kind == "iterations" ? "J_delta" : "proportion"),
                dual ? "k" : "");
  const std::string path = args.out_dir + "/plot.svg";
  std::ofstream os(path);
  if (!os) throw std::runtime_error("plot: cannot open " + path);
  os << svg;
  os.close();
  manifest.add_output(path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic SIR epidemics on contact graphs: reduced models and optimal control"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    void (*fn)(const CommandArgs&, const ToolConfig&, RunManifest&);
  };
  const Sub subs[] = {
      {"simulate", "Run IBM replicas (optionally under a policy)", cmd_simulate},
      {"average", "Onset-aligned averaging of trajectory CSVs", cmd_average},
      {"dataset", "Generate the rate-sample training dataset", cmd_dataset},
      {"train", "Train the incidence model on a dataset", cmd_train},
      {"validate", "Compare the reduced model against IBM averages", cmd_validate},
      {"quantities", "Critical-rate surface and epidemic-size map", cmd_quantities},
      {"control", "Solve the regularized control problem on the reduced model", cmd_control},
      {"mpc", "Model-predictive reinforcement loop", cmd_mpc},
      {"plot", "Render trajectory/schedule/iteration CSVs as SVG", cmd_plot},
  };

  std::vector<std::unique_ptr<CommandArgs>> arg_blocks;
  for (const Sub& sub : subs) {
    auto* cmd = app.add_subcommand(sub.name, sub.help);
    arg_blocks.push_back(std::make_unique<CommandArgs>());
    CommandArgs* args = arg_blocks.back().get();
    add_common(cmd, *args);
    auto fn = sub.fn;
    const std::string name = sub.name;
    cmd->callback([args, fn, name] {
      const int rc = run_command(
          name, *args, [&](const ToolConfig& cfg, RunManifest& m) { fn(*args, cfg, m); });
      if (rc != 0) std::exit(rc);
    });
  }
  CLI11_PARSE(app, argc, argv);
  return 0;
}
