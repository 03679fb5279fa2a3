#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "coloc/sim.hpp"

using namespace coloc;
using Eigen::Matrix2d;
using Eigen::Vector2d;

namespace {

ScenarioConfig tiny_config() {
  ScenarioConfig cfg;
  cfg.n_robots = 3;
  cfg.steps = 20;
  cfg.dt = 0.5;
  cfg.seed = 5;
  cfg.noise.q_w = Eigen::Vector2d(1e-4, 1e-6).asDiagonal();
  cfg.noise.sigma_u_sq = uniform_second_moment(cfg.v_lo, cfg.v_hi);
  cfg.noise.u_max = 0.09;
  cfg.noise.sigma_theta_sq = 1e-4;
  cfg.noise.r_relative = cfg.noise.r_landmark = 1e-3 * Matrix2d::Identity();
  cfg.obs_graph = TopologyGraph(3, 1);
  cfg.obs_graph.add_edge(EntityId::robot(0), EntityId::landmark(0));
  cfg.obs_graph.add_edge(EntityId::robot(1), EntityId::robot(0));
  cfg.obs_graph.add_edge(EntityId::robot(2), EntityId::robot(1));
  cfg.comm_graph = TopologyGraph(3, 0);
  cfg.comm_graph.add_edge(EntityId::robot(0), EntityId::robot(1));
  cfg.comm_graph.add_edge(EntityId::robot(1), EntityId::robot(2));
  return cfg;
}

}  // namespace

TEST_CASE("config validation") {
  ScenarioConfig cfg = tiny_config();
  cfg.failure_rho = 1.5;
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  cfg = tiny_config();
  cfg.comm_blackouts = {{100.0, 90.0}};
  CHECK_THROWS_AS(validate_config(cfg), ConfigError);
  cfg = tiny_config();
  cfg.comm_blackouts = {{5.0, 8.0}};
  CHECK_NOTHROW(validate_config(cfg));
}

TEST_CASE("random graph generation densities") {
  std::mt19937_64 rng(1);
  const TopologyGraph none = generate_random_graph(5, 0.0, rng);
  CHECK(none.edges().empty());
  CHECK(none.nodes().size() == 5);

  const TopologyGraph full = generate_random_graph(5, 1.0, rng);
  CHECK(full.edges().size() == 20);

  // Binomial statistics at density 0.5: mean edge count over many draws must
  // fall inside a 3-sigma band of n(n-1)/2 * ... = 10.
  int total = 0;
  const int draws = 10000;
  for (int k = 0; k < draws; ++k) {
    total += static_cast<int>(generate_random_graph(5, 0.5, rng).edges().size());
  }
  const double mean = static_cast<double>(total) / draws;
  const double sigma = std::sqrt(20.0 * 0.25 / draws);
  CHECK(std::abs(mean - 10.0) <= 3.0 * sigma);
}

TEST_CASE("rollout determinism and stream isolation") {
  const ScenarioConfig cfg = tiny_config();
  const Rollout a = generate_rollout(cfg);
  const Rollout b = generate_rollout(cfg);
  CHECK(a.truth_digest == b.truth_digest);
  CHECK(a.ticks.size() == b.ticks.size());
  CHECK(a.ticks.back().truth[0].position == b.ticks.back().truth[0].position);

  // Changing the failure probability leaves the truth stream untouched.
  ScenarioConfig c = cfg;
  c.failure_rho = 0.7;
  CHECK(generate_rollout(c).truth_digest == a.truth_digest);

  ScenarioConfig d = cfg;
  d.seed = 6;
  CHECK(generate_rollout(d).truth_digest != a.truth_digest);
}

TEST_CASE("static world with zero noise produces exact measurements") {
  ScenarioConfig cfg = tiny_config();
  cfg.v_lo = cfg.v_hi = 0.0;
  cfg.noise.q_w.setZero();
  cfg.noise.r_relative.setZero();
  cfg.noise.r_landmark.setZero();
  const Rollout rollout = generate_rollout(cfg);
  for (const WorldTick& tick : rollout.ticks) {
    for (int i = 0; i < 3; ++i) {
      CHECK((tick.truth[static_cast<size_t>(i)].position -
             rollout.initial_truth[static_cast<size_t>(i)].position)
                .norm() == doctest::Approx(0.0));
    }
    // One measurement per observation edge.
    size_t count = 0;
    for (const ObservationBatch& b : tick.batches) count += b.measurements.size();
    CHECK(count == rollout.cfg.obs_graph.edges().size());
    const Measurement& m = tick.batches[1].measurements.front();
    const Vector2d expect = predict_relative(tick.truth[1].theta, tick.truth[1].position,
                                             tick.truth[0].position);
    CHECK((m.value - expect).norm() <= 1e-12);
  }
}

TEST_CASE("deliver_messages honors rho, blackouts and the graph") {
  ScenarioConfig cfg = tiny_config();
  cfg.comm_blackouts = {{4.9, 6.0}};
  const Rollout rollout = generate_rollout(cfg);

  const LinkSet all = deliver_messages(rollout, 0, 0.0);
  CHECK(all.size() == 2);  // exactly the comm graph edges
  CHECK(all.count({0, 1}) == 1);
  CHECK(all.count({1, 2}) == 1);
  CHECK(deliver_messages(rollout, 0, 1.0).empty());

  // Tick times are (t+1) dt = 0.5, 1.0, ...; the window [4.9, 6.0) covers
  // ticks at 5.0 and 5.5.
  CHECK(deliver_messages(rollout, 9, 0.0).empty());
  CHECK(deliver_messages(rollout, 10, 0.0).empty());
  CHECK(!deliver_messages(rollout, 11, 0.0).empty());

  // Bernoulli rate over many ticks.
  ScenarioConfig big = tiny_config();
  big.steps = 10000;
  const Rollout long_run = generate_rollout(big);
  int delivered = 0;
  for (int t = 0; t < big.steps; ++t) {
    delivered += static_cast<int>(deliver_messages(long_run, t, 0.9).count({0, 1}));
  }
  const double rate = delivered / 10000.0;
  CHECK(std::abs(rate - 0.1) <= 3.0 * std::sqrt(0.1 * 0.9 / 10000.0));
}

TEST_CASE("metric formulas") {
  // Verbatim formula: sqrt(mean of norms), N=1 with error norm 4 -> 2.
  std::vector<Vector2d> est{Vector2d(4.0, 0.0)};
  std::vector<Vector2d> truth{Vector2d(0.0, 0.0)};
  CHECK(compute_rmse(est, truth, false) == doctest::Approx(2.0));
  CHECK(compute_rmse(est, truth, true) == doctest::Approx(4.0));

  std::vector<Eigen::Matrix2d> covs(4, Eigen::Matrix2d::Identity());
  CHECK(compute_rmte(covs) == doctest::Approx(std::sqrt(2.0)));

  std::vector<Vector2d> short_truth;
  CHECK_THROWS_AS(compute_rmse(est, short_truth, false), LengthMismatch);
}

TEST_CASE("experiments are deterministic and paired") {
  const ScenarioConfig cfg = tiny_config();
  const std::vector<AlgorithmId> algs{AlgorithmId::gs_ci, AlgorithmId::ls_cen,
                                      AlgorithmId::ls_ci, AlgorithmId::ls_sci,
                                      AlgorithmId::ls_bda};
  const ExperimentResult r1 = run_experiment(cfg, algs);
  const ExperimentResult r2 = run_experiment(cfg, algs);
  const std::string csv1 = metrics_csv_string(r1, cfg, cfg.failure_rho, -1.0);
  const std::string csv2 = metrics_csv_string(r2, cfg, cfg.failure_rho, -1.0);
  CHECK(csv1 == csv2);
  CHECK(fnv1a(csv1) == fnv1a(csv2));
  CHECK(r1.truth_digest == r2.truth_digest);
  for (const MetricSeries& s : r1.series) {
    CHECK(s.rmse.size() == static_cast<size_t>(cfg.steps));
    for (double v : s.rmse) CHECK(v >= 0.0);
    for (double v : s.rmte) CHECK(v >= 0.0);
  }
}

TEST_CASE("boundedness probe: dominance and growth shapes") {
  // Two robots, only robot 0 sees the landmark, no communication: robot 0's
  // covariance still grows through robot 1's unobserved block.
  ScenarioConfig cfg;
  cfg.n_robots = 2;
  cfg.steps = 400;
  cfg.dt = 1.0;
  cfg.seed = 3;
  cfg.noise.q_w = Eigen::Vector2d(1e-4, 0.0).asDiagonal();
  cfg.noise.sigma_u_sq = uniform_second_moment(cfg.v_lo, cfg.v_hi);
  cfg.noise.u_max = 0.09;
  cfg.noise.sigma_theta_sq = 1e-4;
  cfg.noise.r_relative = cfg.noise.r_landmark = 1e-3 * Matrix2d::Identity();
  cfg.obs_graph = TopologyGraph(2, 1);
  cfg.obs_graph.add_edge(EntityId::robot(0), EntityId::landmark(0));
  cfg.comm_graph = TopologyGraph(2, 0);
  cfg.p_max = 20.0;

  const BoundednessProbe probe = run_boundedness_probe(cfg, 0, 10);
  CHECK(probe.min_dominance_eig >= -1e-9);
  // Unanchored block: linear growth makes the late trace near-double the
  // halfway trace.
  const double mid = probe.phi_trace[199];
  const double end = probe.phi_trace[399];
  CHECK(end / mid > 1.5);

  // Adding the observation of robot 1 anchors everything: the trace settles.
  ScenarioConfig anchored = cfg;
  anchored.obs_graph.add_edge(EntityId::robot(0), EntityId::robot(1));
  const BoundednessProbe probe2 = run_boundedness_probe(anchored, 0, 10);
  CHECK(probe2.min_dominance_eig >= -1e-9);
  CHECK(probe2.phi_trace[399] < probe.phi_trace[399]);
  CHECK(probe2.phi_trace[399] / probe2.phi_trace[199] < 1.2);
}

TEST_CASE("scenario files load and digest independent of key order") {
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "coloc_sim_test";
  fs::create_directories(dir);
  const fs::path a = dir / "a.yaml";
  const fs::path b = dir / "b.yaml";
  {
    std::ofstream out(a);
    out << "n_robots: 3\nsteps: 12\ndt: 0.5\nseed: 9\nmode: analysis\n";
    out << "landmarks: {L: [0.0, 0.0]}\n";
    out << "obs_graph: {edges: [\"1 L\", \"2 1\", \"3 2\"]}\n";
    out << "comm_graph: {edges: [\"1 2\"]}\n";
    out << "noise: {q_w: [1.0e-4, 1.0e-6], sigma_u_sq: 0.0027, u_max: 0.09,"
           " sigma_theta_sq: 1.0e-4, r_relative: [1.0e-3, 1.0e-3],"
           " r_landmark: [1.0e-3, 1.0e-3]}\n";
    out << "ci_weights: {kind: fixed_self, self_weight: 0.5}\n";
    out << "failure_rho: 0.25\n";
  }
  {
    std::ofstream out(b);
    out << "seed: 9\nsteps: 12\n";
    out << "comm_graph: {edges: [\"1 2\"]}\n";
    out << "obs_graph: {edges: [\"1 L\", \"2 1\", \"3 2\"]}\n";
    out << "landmarks: {L: [0.0, 0.0]}\n";
    out << "noise: {sigma_u_sq: 0.0027, q_w: [1.0e-4, 1.0e-6], u_max: 0.09,"
           " sigma_theta_sq: 1.0e-4, r_landmark: [1.0e-3, 1.0e-3],"
           " r_relative: [1.0e-3, 1.0e-3]}\n";
    out << "ci_weights: {self_weight: 0.5, kind: fixed_self}\n";
    out << "failure_rho: 0.25\nmode: analysis\ndt: 0.5\nn_robots: 3\n";
  }

  const ScenarioConfig cfg = load_scenario(a.string());
  CHECK(cfg.n_robots == 3);
  CHECK(cfg.steps == 12);
  CHECK(cfg.failure_rho == doctest::Approx(0.25));
  CHECK(cfg.obs_graph.has_edge(EntityId::robot(0), EntityId::landmark(0)));
  CHECK(cfg.comm_graph.has_edge(EntityId::robot(0), EntityId::robot(1)));
  CHECK(cfg.noise.sigma_u_sq == doctest::Approx(0.0027));

  CHECK(scenario_digest(a.string()) == scenario_digest(b.string()));
  CHECK_THROWS_AS(load_scenario((dir / "missing.yaml").string()), MissingFile);

  fs::remove_all(dir);
}
