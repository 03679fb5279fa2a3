// Command-line driver: scenario simulation, parameter sweeps, dataset replay,
// and the covariance-boundedness graph check.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "coloc/graph.hpp"
#include "coloc/sim.hpp"
#include "coloc/utias.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using namespace coloc;

namespace {

constexpr const char* kToolVersion = "0.1.0";

std::vector<AlgorithmId> parse_algorithms(const std::vector<std::string>& names) {
  if (names.empty()) {
    return {AlgorithmId::gs_ci, AlgorithmId::ls_cen, AlgorithmId::ls_ci, AlgorithmId::ls_sci,
            AlgorithmId::ls_bda};
  }
  std::vector<AlgorithmId> algs;
  for (const std::string& n : names) algs.push_back(algorithm_from_name(n));
  return algs;
}

std::pair<double, double> parse_window(const std::string& spec) {
  auto colon = spec.find(':');
  if (colon == std::string::npos) throw ConfigError("window must be 't0:t1'");
  const double a = std::stod(spec.substr(0, colon));
  const double b = std::stod(spec.substr(colon + 1));
  if (b <= a) throw ConfigError("window end must exceed start");
  return {a, b};
}

std::string hex64(std::uint64_t v) {
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double stddev_of(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write '" + path.string() + "'");
  out << content;
}

json ci_policy_json(const CiPolicy& ci) {
  json j;
  j["kind"] = ci.kind == CiPolicy::Kind::fixed_self ? "fixed_self" : "equal";
  j["self_weight"] = ci.self_weight;
  return j;
}

int cmd_simulate(const std::string& config_path, const std::vector<std::string>& alg_names,
                 const std::string& out_dir, std::optional<std::uint64_t> seed_override) {
  ScenarioConfig cfg = load_scenario(config_path);
  if (seed_override) cfg.seed = *seed_override;
  const std::vector<AlgorithmId> algs = parse_algorithms(alg_names);

  const ExperimentResult result = run_experiment(cfg, algs);
  const double density_label = cfg.comm_density.value_or(-1.0);
  const std::string csv = metrics_csv_string(result, cfg, cfg.failure_rho, density_label);

  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "metrics.csv", csv);

  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["config_digest"] = hex64(scenario_digest(config_path));
  manifest["seed"] = cfg.seed;
  manifest["steps"] = cfg.steps;
  manifest["dt"] = cfg.dt;
  manifest["failure_rho"] = cfg.failure_rho;
  manifest["ci_weights"] = ci_policy_json(cfg.ci);
  manifest["rmse_formula"] = cfg.rmse_conventional ? "conventional" : "verbatim";
  manifest["truth_digest"] = hex64(result.truth_digest);
  manifest["outputs"] = {{"metrics.csv", hex64(fnv1a(csv))}};
  json alg_list = json::array();
  for (AlgorithmId a : algs) alg_list.push_back(algorithm_name(a));
  manifest["algorithms"] = alg_list;
  write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

  for (const MetricSeries& s : result.series) {
    std::cout << algorithm_name(s.algorithm) << ": time-averaged rmse " << mean_of(s.rmse)
              << ", final rmte " << s.rmte.back() << "\n";
  }
  return 0;
}

struct SweepCell {
  double value = 0.0;
  int graph = 0;
  std::vector<MetricSeries> series;
};

int cmd_sweep(const std::string& config_path, const std::string& param,
              const std::vector<double>& values, int graphs,
              const std::vector<std::string>& alg_names, const std::string& out_dir, int jobs,
              bool per_step) {
  if (values.empty()) throw ConfigError("sweep needs at least one value");
  if (param != "rho" && param != "density") throw ConfigError("param must be rho or density");
  const ScenarioConfig base = load_scenario(config_path);
  const std::vector<AlgorithmId> algs = parse_algorithms(alg_names);

  std::vector<SweepCell> cells;
  for (double v : values) {
    for (int g = 0; g < graphs; ++g) cells.push_back({v, g, {}});
  }

  std::mutex next_mutex;
  size_t next_cell = 0;
  auto worker = [&]() {
    for (;;) {
      size_t mine;
      {
        std::lock_guard<std::mutex> lock(next_mutex);
        if (next_cell >= cells.size()) return;
        mine = next_cell++;
      }
      SweepCell& cell = cells[mine];
      ScenarioConfig cfg = base;
      cfg.seed = base.seed + static_cast<std::uint64_t>(cell.graph);
      double rho = cfg.failure_rho;
      if (param == "rho") {
        rho = cell.value;
        cfg.failure_rho = cell.value;
      } else {
        cfg.comm_density = cell.value;
      }
      const Rollout rollout = generate_rollout(cfg);
      cell.series = run_on_rollout(rollout, algs, rho).series;
    }
  };
  std::vector<std::thread> pool;
  const int n_workers = std::max(1, jobs);
  for (int w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (std::thread& th : pool) th.join();

  // Aggregate per (value, algorithm) over graphs: time-averaged and final-step
  // metrics, mean +- sample std.
  std::string agg =
      "param,value,algorithm,rmse_timeavg_mean,rmse_timeavg_std,rmse_final_mean,"
      "rmse_final_std,rmte_final_mean,rmte_final_std,graphs\n";
  char buf[360];
  for (double v : values) {
    for (size_t a = 0; a < algs.size(); ++a) {
      std::vector<double> timeavg, fin, rmte_fin;
      for (const SweepCell& cell : cells) {
        if (cell.value != v) continue;
        const MetricSeries& s = cell.series[a];
        timeavg.push_back(mean_of(s.rmse));
        fin.push_back(s.rmse.back());
        rmte_fin.push_back(s.rmte.back());
      }
      std::snprintf(buf, sizeof(buf), "%s,%.9g,%s,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d\n",
                    param.c_str(), v, algorithm_name(algs[a]), mean_of(timeavg),
                    stddev_of(timeavg), mean_of(fin), stddev_of(fin), mean_of(rmte_fin),
                    stddev_of(rmte_fin), graphs);
      agg += buf;
    }
  }

  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "sweep.csv", agg);
  if (per_step) {
    std::string steps_csv = "t,algorithm,rmse,rmte,rho,density,seed\n";
    for (const SweepCell& cell : cells) {
      ScenarioConfig cfg = base;
      cfg.seed = base.seed + static_cast<std::uint64_t>(cell.graph);
      const double rho = param == "rho" ? cell.value : base.failure_rho;
      const double dens = param == "density" ? cell.value : base.comm_density.value_or(-1.0);
      ExperimentResult partial;
      partial.series = cell.series;
      const std::string chunk = metrics_csv_string(partial, cfg, rho, dens);
      steps_csv += chunk.substr(chunk.find('\n') + 1);  // drop repeated header
    }
    write_file(fs::path(out_dir) / "steps.csv", steps_csv);
  }

  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["config_digest"] = hex64(scenario_digest(config_path));
  manifest["param"] = param;
  manifest["values"] = values;
  manifest["graphs"] = graphs;
  manifest["ci_weights"] = ci_policy_json(base.ci);
  manifest["outputs"] = {{"sweep.csv", hex64(fnv1a(agg))}};
  write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

  std::cout << agg;
  return 0;
}

int cmd_replay(const std::string& dataset_dir, int subdataset, const std::string& window,
               const std::string& blackout, double rho, double dt,
               const std::vector<std::string>& alg_names, const std::string& out_dir,
               std::uint64_t seed) {
  std::string dir = dataset_dir;
  if (subdataset > 0) {
    dir += "/MRCLAM_Dataset" + std::to_string(subdataset);
  }
  const DatasetBundle bundle = load_bundle(dir);

  auto [t0, t1] = parse_window(window.empty() ? "0:500" : window);
  ScenarioConfig base;
  base.seed = seed;
  base.noise.q_w = Eigen::Vector2d(4e-4, 1e-3).asDiagonal();
  base.noise.r_bearing_range = Eigen::Vector2d(4e-4, 1e-3).asDiagonal();
  base.noise.r_landmark = base.noise.r_relative = Eigen::Vector2d(1e-3, 1e-3).asDiagonal();
  base.noise.sigma_theta_sq = 1e-3;
  double max_v = 0.0;
  for (const auto& per_robot : bundle.odometry) {
    for (const OdometryRecord& r : per_robot) max_v = std::max(max_v, std::abs(r.v));
  }
  base.noise.sigma_u_sq = max_v * max_v;  // replay policy: max squared commanded speed
  base.noise.u_max = max_v;
  base.init_pos_sigma = 0.05;
  base.init_theta_sigma = 0.02;

  ResampleStats stats;
  Rollout rollout = make_replay_rollout(bundle, base, t0, t1, dt, &stats);
  if (!blackout.empty()) {
    auto [b0, b1] = parse_window(blackout);
    // Blackout times arrive on the dataset clock; the rollout runs on a
    // window-relative clock.
    rollout.cfg.comm_blackouts.emplace_back(b0 - t0, b1 - t0);
    validate_config(rollout.cfg);
  }

  const std::vector<AlgorithmId> algs = parse_algorithms(alg_names);
  const ExperimentResult result = run_on_rollout(rollout, algs, rho);

  auto in_blackout = [&](double t) {
    for (const auto& [a, b] : rollout.cfg.comm_blackouts) {
      if (t >= a && t < b) return true;
    }
    return false;
  };

  std::string csv = "t,algorithm,rmse,rmte,rho,density,seed,in_blackout\n";
  char buf[240];
  for (const MetricSeries& s : result.series) {
    for (size_t t = 0; t < s.rmse.size(); ++t) {
      const double tick_time = (static_cast<double>(t) + 1.0) * rollout.cfg.dt;
      std::snprintf(buf, sizeof(buf), "%.9g,%s,%.9g,%.9g,%.9g,-1,%llu,%d\n", tick_time,
                    algorithm_name(s.algorithm), s.rmse[t], s.rmte[t], rho,
                    static_cast<unsigned long long>(rollout.cfg.seed),
                    in_blackout(tick_time) ? 1 : 0);
      csv += buf;
    }
  }

  std::string summary = "algorithm,rmse_timeavg,rmse_blackout_timeavg,rmte_final\n";
  for (const MetricSeries& s : result.series) {
    std::vector<double> inside;
    for (size_t t = 0; t < s.rmse.size(); ++t) {
      if (in_blackout((static_cast<double>(t) + 1.0) * rollout.cfg.dt)) {
        inside.push_back(s.rmse[t]);
      }
    }
    std::snprintf(buf, sizeof(buf), "%s,%.9g,%.9g,%.9g\n", algorithm_name(s.algorithm),
                  mean_of(s.rmse), inside.empty() ? -1.0 : mean_of(inside), s.rmte.back());
    summary += buf;
  }

  fs::create_directories(out_dir);
  write_file(fs::path(out_dir) / "replay.csv", csv);
  write_file(fs::path(out_dir) / "summary.csv", summary);

  json manifest;
  manifest["tool_version"] = kToolVersion;
  manifest["dataset"] = dir;
  manifest["window"] = {t0, t1};
  manifest["dt"] = dt;
  manifest["rho"] = rho;
  manifest["seed"] = seed;
  manifest["kept_measurements"] = stats.kept_measurements;
  manifest["dropped_outliers"] = stats.dropped_outliers;
  manifest["dropped_outside_window"] = stats.dropped_outside_window;
  manifest["outputs"] = {{"replay.csv", hex64(fnv1a(csv))},
                         {"summary.csv", hex64(fnv1a(summary))}};
  write_file(fs::path(out_dir) / "manifest.json", manifest.dump(2) + "\n");

  std::cout << summary;
  return 0;
}

int cmd_check_bounded(const std::string& obs_path, const std::string& comm_path, int robot,
                      int n_robots) {
  std::ifstream obs_in(obs_path);
  if (!obs_in) throw MissingFile("cannot open '" + obs_path + "'");
  TopologyGraph obs = parse_edge_list(obs_in);
  std::ifstream comm_in(comm_path);
  if (!comm_in) throw MissingFile("cannot open '" + comm_path + "'");
  TopologyGraph comm = parse_edge_list(comm_in);

  if (n_robots > 0) {
    for (int i = 0; i < n_robots; ++i) {
      obs.add_node(EntityId::robot(i));
      comm.add_node(EntityId::robot(i));
    }
  }
  for (EntityId node : obs.nodes()) comm.add_node(node);
  for (EntityId node : comm.nodes()) obs.add_node(node);

  const BoundednessResult result = boundedness_predicate(obs, comm, robot - 1);
  std::cout << "robot: " << robot << "\n";
  std::cout << "bounded: " << (result.bounded ? "true" : "false") << "\n";
  std::cout << "merged_observation_graph:\n";
  for (const auto& [from, to] : result.merged.edges()) {
    std::cout << "  " << entity_token(from) << " " << entity_token(to) << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multirobot cooperative localization toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir = "out";
  std::vector<std::string> alg_names;
  std::optional<std::uint64_t> seed_override;

  auto* sim = app.add_subcommand("simulate", "Run one scenario and emit metric CSV");
  sim->add_option("--config", config_path, "Scenario YAML file")->required();
  sim->add_option("--algorithms", alg_names, "Algorithms (default: all five)");
  sim->add_option("--out", out_dir, "Output directory");
  sim->add_option("--seed", seed_override, "Override the scenario seed");

  std::string param = "rho";
  std::vector<double> values;
  int graphs = 1, jobs = 1;
  bool per_step = false;
  auto* sweep = app.add_subcommand("sweep", "Sweep rho or comm-graph density");
  sweep->add_option("--config", config_path, "Scenario YAML file")->required();
  sweep->add_option("--param", param, "rho or density")->required();
  sweep->add_option("--values", values, "Sweep values")->required()->delimiter(',');
  sweep->add_option("--graphs", graphs, "Graphs/seeds per value");
  sweep->add_option("--jobs", jobs, "Worker threads");
  sweep->add_option("--algorithms", alg_names, "Algorithms (default: all five)");
  sweep->add_option("--out", out_dir, "Output directory");
  sweep->add_flag("--per-step", per_step, "Also write per-step rows");

  std::string dataset_dir, window = "0:500", blackout;
  int subdataset = 0;
  double rho = 0.0, replay_dt = 0.02;
  std::uint64_t replay_seed = 0;
  auto* replay = app.add_subcommand("replay", "Replay a UTIAS-format dataset");
  replay->add_option("--dataset", dataset_dir, "Dataset directory")->required();
  replay->add_option("--subdataset", subdataset, "Sub-dataset number (MRCLAM_DatasetN)");
  replay->add_option("--window", window, "Window t0:t1 in seconds from dataset start");
  replay->add_option("--blackout", blackout, "Blocked-communication window t0:t1");
  replay->add_option("--rho", rho, "Per-link failure probability");
  replay->add_option("--dt", replay_dt, "Replay tick in seconds");
  replay->add_option("--algorithms", alg_names, "Algorithms (default: all five)");
  replay->add_option("--out", out_dir, "Output directory");
  replay->add_option("--seed", replay_seed, "Failure/initialization seed");

  std::string obs_path, comm_path;
  int robot = 1, n_robots = 0;
  auto* check = app.add_subcommand("check-bounded", "Covariance-boundedness graph criterion");
  check->add_option("--obs", obs_path, "Observation edge-list file")->required();
  check->add_option("--comm", comm_path, "Communication edge-list file")->required();
  check->add_option("--robot", robot, "Robot id (1-based)")->required();
  check->add_option("--robots", n_robots, "Declare robot count (covers isolated robots)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (sim->parsed()) return cmd_simulate(config_path, alg_names, out_dir, seed_override);
    if (sweep->parsed()) {
      return cmd_sweep(config_path, param, values, graphs, alg_names, out_dir, jobs, per_step);
    }
    if (replay->parsed()) {
      return cmd_replay(dataset_dir, subdataset, window, blackout, rho, replay_dt, alg_names,
                        out_dir, replay_seed);
    }
    if (check->parsed()) {
      if (robot < 1) throw ConfigError("robot ids are 1-based");
      return cmd_check_bounded(obs_path, comm_path, robot, n_robots);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const MissingFile& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const MalformedLine& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const UnknownNode& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const IndexOutOfRange& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
