#ifndef COLOC_SIM_HPP
#define COLOC_SIM_HPP

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coloc/baselines.hpp"
#include "coloc/graph.hpp"
#include "coloc/gsci.hpp"
#include "coloc/models.hpp"

namespace coloc {

// Independently seeded generators, one per concern, so changing e.g. the
// failure probability never perturbs the truth trajectory.
struct RngStreams {
  std::mt19937_64 truth;
  std::mt19937_64 measurement;
  std::mt19937_64 graph;
  std::mt19937_64 failure;
  std::mt19937_64 init;
};

RngStreams make_streams(std::uint64_t seed);

enum class ScenarioMode { analysis, full };

struct CiPolicy {
  enum class Kind { fixed_self, equal };
  Kind kind = Kind::fixed_self;
  double self_weight = 0.5;  // messages share the remainder equally
};

struct ScenarioConfig {
  int n_robots = 5;
  ScenarioMode mode = ScenarioMode::analysis;
  MeasurementKind meas_kind = MeasurementKind::relative_xy;
  std::map<int, Eigen::Vector2d> landmarks = {{0, Eigen::Vector2d::Zero()}};
  TopologyGraph obs_graph;
  TopologyGraph comm_graph;
  std::optional<double> obs_density;   // generate obs_graph at this density
  std::optional<double> comm_density;  // generate comm_graph at this density
  NoiseConfig noise;
  CiPolicy ci;
  double dt = 1.0;
  int steps = 1000;
  std::uint64_t seed = 0;
  double v_lo = -0.09;
  double v_hi = 0.09;
  double omega_max = 0.0;
  double failure_rho = 0.0;
  std::vector<std::pair<double, double>> comm_blackouts;  // seconds, [start, end)
  double init_pos_radius = 5.0;
  double init_pos_sigma = 0.1;
  double init_theta_sigma = 0.01;
  double p_max = 50.0;
  bool rmse_conventional = false;
};

void validate_config(const ScenarioConfig& cfg);

// Second moment of a uniform[lo, hi] input; the value sigma_u_sq must cover.
double uniform_second_moment(double lo, double hi);

// Directed Erdos-Renyi graph over robot nodes: every ordered pair present
// independently with the given probability.
TopologyGraph generate_random_graph(int n_nodes, double density, std::mt19937_64& rng);

// Observation variant: robot->robot and robot->landmark pairs only.
TopologyGraph generate_observation_graph(int n_robots, const std::vector<int>& landmark_ids,
                                         double density, std::mt19937_64& rng);

// One tick of the synthesized world. Truth is the state after the tick's
// motion; batches hold the measurements taken from it. link_u carries one
// uniform draw per ordered robot pair so one rollout serves every failure
// probability.
struct WorldTick {
  std::vector<RobotPose> truth;
  std::vector<OdometryInput> inputs;
  std::vector<double> theta_est;
  std::vector<ObservationBatch> batches;
  std::vector<double> link_u;
};

struct Rollout {
  ScenarioConfig cfg;  // graphs materialized
  std::vector<RobotPose> initial_truth;
  std::vector<RobotPose> initial_estimate;  // shared across algorithms
  std::vector<WorldTick> ticks;
  std::uint64_t truth_digest = 0;
};

Rollout generate_rollout(const ScenarioConfig& cfg);

int link_index(int from, int to, int n_robots);

// Links delivered at tick t for failure probability rho: empty inside a
// blackout, otherwise each comm-graph edge survives iff its uniform draw is
// below 1 - rho.
LinkSet deliver_messages(const Rollout& rollout, int t, double rho);

// Harness-facing wrapper: one per algorithm, stepped in lockstep over a
// rollout.
class TeamEstimator {
 public:
  virtual ~TeamEstimator() = default;
  virtual void step(const WorldTick& tick, const LinkSet& links) = 0;
  virtual Eigen::Vector2d own_position(int robot) const = 0;
  virtual Eigen::Matrix2d own_position_cov(int robot) const = 0;
};

std::unique_ptr<TeamEstimator> make_estimator(AlgorithmId id, const Rollout& rollout);

double compute_rmse(const std::vector<Eigen::Vector2d>& estimates,
                    const std::vector<Eigen::Vector2d>& truth, bool conventional = false);
double compute_rmte(const std::vector<Eigen::Matrix2d>& covariances);

struct MetricSeries {
  AlgorithmId algorithm;
  std::vector<double> rmse;
  std::vector<double> rmte;
};

struct ExperimentResult {
  std::vector<MetricSeries> series;
  std::uint64_t truth_digest = 0;
};

ExperimentResult run_experiment(const ScenarioConfig& cfg, const std::vector<AlgorithmId>& algs);
// Same rollout, possibly overriding the failure probability (paired sweeps).
ExperimentResult run_on_rollout(const Rollout& rollout, const std::vector<AlgorithmId>& algs,
                                double rho);

// CSV schema: t,algorithm,rmse,rmte,rho,density,seed (LF endings, '.' decimal).
void write_metrics_csv(std::ostream& out, const ExperimentResult& result,
                       const ScenarioConfig& cfg, double rho, double density_label);
std::string metrics_csv_string(const ExperimentResult& result, const ScenarioConfig& cfg,
                               double rho, double density_label);

std::uint64_t fnv1a(const void* data, size_t size);
std::uint64_t fnv1a(const std::string& bytes);

// Analysis-mode run of the CI filter with the covariance upper bound tracked
// in lockstep for one robot of interest.
struct BoundednessProbe {
  std::vector<double> phi_trace;  // trace of the robot's full covariance, per tick
  std::vector<double> psi_trace;
  double min_dominance_eig = 0.0;  // min over ticks of min-eig(Psi - Phi)
};

BoundednessProbe run_boundedness_probe(const ScenarioConfig& cfg, int robot,
                                       int dominance_stride = 1);

// Scenario file loading (YAML, keys mirroring ScenarioConfig).
ScenarioConfig load_scenario(const std::string& path);
// Order-independent digest of a scenario document.
std::uint64_t scenario_digest(const std::string& path);

}  // namespace coloc

#endif
