#include "coloc/sim.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

namespace coloc {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::Matrix2d chol2(const Eigen::Matrix2d& m) {
  Eigen::LLT<Eigen::Matrix2d> llt(symmetrize(m) + 1e-300 * Eigen::Matrix2d::Identity());
  if (llt.info() != Eigen::Success) {
    // PSD but rank-deficient: fall back to the eigen square root.
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(symmetrize(m));
    return es.eigenvectors() * es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal();
  }
  return llt.matrixL();
}

}  // namespace

RngStreams make_streams(std::uint64_t seed) {
  RngStreams s;
  s.truth.seed(splitmix64(seed ^ 0x74727574ULL));
  s.measurement.seed(splitmix64(seed ^ 0x6d656173ULL));
  s.graph.seed(splitmix64(seed ^ 0x67726170ULL));
  s.failure.seed(splitmix64(seed ^ 0x6661696cULL));
  s.init.seed(splitmix64(seed ^ 0x696e6974ULL));
  return s;
}

void validate_config(const ScenarioConfig& cfg) {
  if (cfg.n_robots < 1) throw ConfigError("n_robots must be >= 1");
  if (cfg.dt <= 0.0) throw ConfigError("dt must be positive");
  if (cfg.steps < 1) throw ConfigError("steps must be >= 1");
  if (cfg.failure_rho < 0.0 || cfg.failure_rho > 1.0) {
    throw ConfigError("failure_rho must lie in [0, 1]");
  }
  if (cfg.v_lo > cfg.v_hi) throw ConfigError("velocity range is inverted");
  const double horizon = cfg.steps * cfg.dt;
  for (const auto& [a, b] : cfg.comm_blackouts) {
    if (a < 0.0 || b <= a || a >= horizon) {
      throw ConfigError("blackout window outside run horizon");
    }
  }
  if (cfg.ci.self_weight <= 0.0 || cfg.ci.self_weight >= 1.0) {
    if (!(cfg.ci.kind == CiPolicy::Kind::equal)) {
      throw ConfigError("self CI weight must lie in (0, 1)");
    }
  }
}

double uniform_second_moment(double lo, double hi) {
  if (hi == lo) return lo * lo;
  return (hi * hi * hi - lo * lo * lo) / (3.0 * (hi - lo));
}

TopologyGraph generate_random_graph(int n_nodes, double density, std::mt19937_64& rng) {
  if (density < 0.0 || density > 1.0) throw ConfigError("density must lie in [0, 1]");
  TopologyGraph g(n_nodes, 0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n_nodes; ++i) {
    for (int j = 0; j < n_nodes; ++j) {
      if (i == j) continue;
      if (u(rng) < density) g.add_edge(EntityId::robot(i), EntityId::robot(j));
    }
  }
  return g;
}

TopologyGraph generate_observation_graph(int n_robots, const std::vector<int>& landmark_ids,
                                         double density, std::mt19937_64& rng) {
  if (density < 0.0 || density > 1.0) throw ConfigError("density must lie in [0, 1]");
  TopologyGraph g(n_robots, 0);
  for (int id : landmark_ids) g.add_node(EntityId::landmark(id));
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int i = 0; i < n_robots; ++i) {
    for (int j = 0; j < n_robots; ++j) {
      if (i == j) continue;
      if (u(rng) < density) g.add_edge(EntityId::robot(i), EntityId::robot(j));
    }
    for (int id : landmark_ids) {
      if (u(rng) < density) g.add_edge(EntityId::robot(i), EntityId::landmark(id));
    }
  }
  return g;
}

int link_index(int from, int to, int n_robots) {
  if (from == to || from < 0 || to < 0 || from >= n_robots || to >= n_robots) {
    throw IndexOutOfRange("link endpoints");
  }
  return from * (n_robots - 1) + (to > from ? to - 1 : to);
}

namespace {

void append_double(std::string& buf, double v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof(v));
}

}  // namespace

Rollout generate_rollout(const ScenarioConfig& cfg_in) {
  ScenarioConfig cfg = cfg_in;
  RngStreams streams = make_streams(cfg.seed);

  std::vector<int> landmark_ids;
  for (const auto& [id, pos] : cfg.landmarks) landmark_ids.push_back(id);

  if (cfg.obs_density) {
    cfg.obs_graph = generate_observation_graph(cfg.n_robots, landmark_ids, *cfg.obs_density,
                                               streams.graph);
  }
  if (cfg.comm_density) {
    cfg.comm_graph = generate_random_graph(cfg.n_robots, *cfg.comm_density, streams.graph);
  }
  for (int i = 0; i < cfg.n_robots; ++i) cfg.comm_graph.add_node(EntityId::robot(i));
  validate_config(cfg);

  Rollout rollout;
  rollout.cfg = cfg;

  const int n = cfg.n_robots;
  rollout.initial_truth.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    const double ang = 2.0 * M_PI * i / n;
    RobotPose p;
    p.position = cfg.init_pos_radius * Eigen::Vector2d(std::cos(ang), std::sin(ang));
    p.theta = wrap_angle(ang);
    rollout.initial_truth[static_cast<size_t>(i)] = p;
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  rollout.initial_estimate = rollout.initial_truth;
  for (RobotPose& p : rollout.initial_estimate) {
    p.theta = wrap_angle(p.theta + cfg.init_theta_sigma * gauss(streams.init));
    p.position.x() += cfg.init_pos_sigma * gauss(streams.init);
    p.position.y() += cfg.init_pos_sigma * gauss(streams.init);
  }

  const Eigen::Matrix2d w_chol = chol2(cfg.noise.q_w);
  const Eigen::Matrix2d r_rel_chol = chol2(cfg.noise.r_relative);
  const Eigen::Matrix2d r_lm_chol = chol2(cfg.noise.r_landmark);
  const Eigen::Matrix2d r_br_chol = chol2(cfg.noise.r_bearing_range);
  const double sigma_theta = std::sqrt(cfg.noise.sigma_theta_sq);

  std::uniform_real_distribution<double> u_v(cfg.v_lo, cfg.v_hi);
  std::uniform_real_distribution<double> u_w(-cfg.omega_max, cfg.omega_max);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  std::string truth_bytes;
  std::vector<RobotPose> prev = rollout.initial_truth;
  rollout.ticks.resize(static_cast<size_t>(cfg.steps));
  for (int t = 0; t < cfg.steps; ++t) {
    WorldTick& tick = rollout.ticks[static_cast<size_t>(t)];
    tick.truth.resize(static_cast<size_t>(n));
    tick.inputs.resize(static_cast<size_t>(n));
    tick.theta_est.resize(static_cast<size_t>(n));
    tick.batches.resize(static_cast<size_t>(n));

    for (int i = 0; i < n; ++i) {
      OdometryInput in;
      in.v = u_v(streams.truth);
      in.omega = cfg.omega_max > 0.0 ? u_w(streams.truth) : 0.0;
      in.dt = cfg.dt;
      const Eigen::Vector2d w = w_chol * Eigen::Vector2d(gauss(streams.truth), gauss(streams.truth));
      tick.inputs[static_cast<size_t>(i)] = in;
      tick.truth[static_cast<size_t>(i)] =
          unicycle_propagate(prev[static_cast<size_t>(i)], in, w);
      append_double(truth_bytes, tick.truth[static_cast<size_t>(i)].theta);
      append_double(truth_bytes, tick.truth[static_cast<size_t>(i)].position.x());
      append_double(truth_bytes, tick.truth[static_cast<size_t>(i)].position.y());
    }
    prev = tick.truth;

    for (int i = 0; i < n; ++i) {
      tick.theta_est[static_cast<size_t>(i)] =
          wrap_angle(tick.truth[static_cast<size_t>(i)].theta + sigma_theta * gauss(streams.measurement));
      tick.batches[static_cast<size_t>(i)].observer = i;
      tick.batches[static_cast<size_t>(i)].time = (t + 1) * cfg.dt;
    }

    for (const auto& [from, to] : cfg.obs_graph.edges()) {
      if (!from.is_robot()) continue;
      const int i = from.index;
      const RobotPose& obs = tick.truth[static_cast<size_t>(i)];
      Eigen::Vector2d target_pos;
      if (to.is_robot()) {
        target_pos = tick.truth[static_cast<size_t>(to.index)].position;
      } else {
        target_pos = cfg.landmarks.at(to.index);
      }
      const Eigen::Vector2d normals(gauss(streams.measurement), gauss(streams.measurement));
      Measurement m;
      if (cfg.meas_kind == MeasurementKind::relative_xy) {
        const Eigen::Matrix2d& chol = to.is_robot() ? r_rel_chol : r_lm_chol;
        m = relative_observation(obs, target_pos, chol * normals);
        m.noise_cov = to.is_robot() ? cfg.noise.r_relative : cfg.noise.r_landmark;
      } else {
        m = bearing_range_observation(obs, target_pos, r_br_chol * normals);
        m.noise_cov = cfg.noise.r_bearing_range;
      }
      m.observer = i;
      m.target = to;
      m.time = (t + 1) * cfg.dt;
      tick.batches[static_cast<size_t>(i)].measurements.push_back(m);
    }

    tick.link_u.resize(static_cast<size_t>(n * (n - 1)));
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        tick.link_u[static_cast<size_t>(link_index(a, b, n))] = u01(streams.failure);
      }
    }
  }
  rollout.truth_digest = fnv1a(truth_bytes);
  return rollout;
}

LinkSet deliver_messages(const Rollout& rollout, int t, double rho) {
  const ScenarioConfig& cfg = rollout.cfg;
  const double time = (t + 1) * cfg.dt;
  for (const auto& [a, b] : cfg.comm_blackouts) {
    if (time >= a && time < b) return {};
  }
  LinkSet links;
  const WorldTick& tick = rollout.ticks[static_cast<size_t>(t)];
  for (const auto& [from, to] : cfg.comm_graph.edges()) {
    if (!from.is_robot() || !to.is_robot()) continue;
    const double u = tick.link_u[static_cast<size_t>(link_index(from.index, to.index, cfg.n_robots))];
    if (u < 1.0 - rho) links.insert({from.index, to.index});
  }
  return links;
}

namespace {

CIWeights comm_weights(const CiPolicy& policy, int n_msgs) {
  if (n_msgs == 0) return CIWeights({1.0});
  if (policy.kind == CiPolicy::Kind::equal) return CIWeights::equal(n_msgs + 1);
  std::vector<double> w(static_cast<size_t>(n_msgs), (1.0 - policy.self_weight) / n_msgs);
  w.push_back(policy.self_weight);
  return CIWeights(std::move(w));
}

class GsCiFullEstimator : public TeamEstimator {
 public:
  explicit GsCiFullEstimator(const Rollout& rollout) : cfg_(rollout.cfg) {
    const int n = cfg_.n_robots;
    GsCiConfig fcfg;
    fcfg.noise = cfg_.noise;
    fcfg.qu_policy =
        cfg_.mode == ScenarioMode::analysis ? QuPolicy::analysis_bound : QuPolicy::sigma_u_only;
    std::vector<Eigen::Vector2d> positions;
    for (const RobotPose& p : rollout.initial_estimate) positions.push_back(p.position);
    for (int i = 0; i < n; ++i) {
      Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(2 * n + 1, 2 * n + 1);
      cov(theta_index(i), theta_index(i)) = cfg_.init_theta_sigma * cfg_.init_theta_sigma;
      for (int j = 0; j < n; ++j) {
        cov.block<2, 2>(position_index(i, j), position_index(i, j)) =
            cfg_.init_pos_sigma * cfg_.init_pos_sigma * Eigen::Matrix2d::Identity();
      }
      filters_.emplace_back(
          make_global_state(i, n, rollout.initial_estimate[static_cast<size_t>(i)], positions, cov),
          fcfg);
    }
  }

  void step(const WorldTick& tick, const LinkSet& links) override {
    const int n = cfg_.n_robots;
    for (int i = 0; i < n; ++i) {
      filters_[static_cast<size_t>(i)].propagate(tick.inputs[static_cast<size_t>(i)]);
      filters_[static_cast<size_t>(i)].observe(tick.batches[static_cast<size_t>(i)],
                                               cfg_.landmarks);
    }
    std::vector<GlobalState> snapshot;
    snapshot.reserve(static_cast<size_t>(n));
    for (const auto& f : filters_) snapshot.push_back(f.state());
    for (int i = 0; i < n; ++i) {
      std::vector<CommMessage> msgs;
      for (const auto& [from, to] : links) {
        if (to != i) continue;
        CommMessage msg;
        msg.sender = from;
        msg.mean = snapshot[static_cast<size_t>(from)].mean;
        msg.covariance = snapshot[static_cast<size_t>(from)].covariance;
        msg.time = tick.batches.empty() ? 0.0 : tick.batches.front().time;
        msgs.push_back(std::move(msg));
      }
      filters_[static_cast<size_t>(i)].communicate(
          msgs, comm_weights(cfg_.ci, static_cast<int>(msgs.size())));
    }
  }

  Eigen::Vector2d own_position(int robot) const override {
    return position_of(filters_[static_cast<size_t>(robot)].state(), robot).first;
  }
  Eigen::Matrix2d own_position_cov(int robot) const override {
    return position_of(filters_[static_cast<size_t>(robot)].state(), robot).second;
  }

 private:
  ScenarioConfig cfg_;
  std::vector<GsCiFilter> filters_;
};

class GsCiAnalysisEstimator : public TeamEstimator {
 public:
  explicit GsCiAnalysisEstimator(const Rollout& rollout) : cfg_(rollout.cfg) {
    const int n = cfg_.n_robots;
    for (int i = 0; i < n; ++i) {
      AnalysisState s;
      s.robot_id = i;
      s.mean = Eigen::VectorXd::Zero(2 * n);
      for (int j = 0; j < n; ++j) {
        s.mean.segment<2>(2 * j) = rollout.initial_estimate[static_cast<size_t>(j)].position;
      }
      s.covariance = cfg_.init_pos_sigma * cfg_.init_pos_sigma *
                     Eigen::MatrixXd::Identity(2 * n, 2 * n);
      states_.push_back(std::move(s));
    }
  }

  void step(const WorldTick& tick, const LinkSet& links) override {
    const int n = cfg_.n_robots;
    for (int i = 0; i < n; ++i) {
      const size_t si = static_cast<size_t>(i);
      states_[si] = analysis_propagate(states_[si], tick.inputs[si].v, tick.theta_est[si],
                                       cfg_.dt, cfg_.noise);
      states_[si] = analysis_observe(states_[si], tick.batches[si], cfg_.landmarks,
                                     tick.theta_est[si], cfg_.noise);
    }
    const std::vector<AnalysisState> snapshot = states_;
    for (int i = 0; i < n; ++i) {
      std::vector<AnalysisState> msgs;
      for (const auto& [from, to] : links) {
        if (to == i) msgs.push_back(snapshot[static_cast<size_t>(from)]);
      }
      states_[static_cast<size_t>(i)] = analysis_communicate(
          states_[static_cast<size_t>(i)], msgs,
          comm_weights(cfg_.ci, static_cast<int>(msgs.size())));
    }
  }

  Eigen::Vector2d own_position(int robot) const override {
    return states_[static_cast<size_t>(robot)].mean.segment<2>(2 * robot);
  }
  Eigen::Matrix2d own_position_cov(int robot) const override {
    return states_[static_cast<size_t>(robot)].covariance.block<2, 2>(2 * robot, 2 * robot);
  }

  const AnalysisState& state(int robot) const { return states_[static_cast<size_t>(robot)]; }

 private:
  ScenarioConfig cfg_;
  std::vector<AnalysisState> states_;
};

class BaselineEstimator : public TeamEstimator {
 public:
  BaselineEstimator(AlgorithmId id, const Rollout& rollout) : cfg_(rollout.cfg) {
    std::vector<PoseEstimate> init;
    for (const RobotPose& p : rollout.initial_estimate) {
      PoseEstimate e;
      e.mean << p.theta, p.position.x(), p.position.y();
      e.cov = Eigen::Vector3d(cfg_.init_theta_sigma * cfg_.init_theta_sigma,
                              cfg_.init_pos_sigma * cfg_.init_pos_sigma,
                              cfg_.init_pos_sigma * cfg_.init_pos_sigma)
                  .asDiagonal();
      init.push_back(e);
    }
    switch (id) {
      case AlgorithmId::ls_cen: team_ = std::make_unique<LsCenTeam>(init, cfg_.noise); break;
      case AlgorithmId::ls_ci: team_ = std::make_unique<LsCiTeam>(init, cfg_.noise); break;
      case AlgorithmId::ls_sci: team_ = std::make_unique<LsSciTeam>(init, cfg_.noise); break;
      case AlgorithmId::ls_bda: team_ = std::make_unique<LsBdaTeam>(init, cfg_.noise); break;
      case AlgorithmId::gs_ci: throw ConfigError("gs-ci is not a baseline");
    }
  }

  void step(const WorldTick& tick, const LinkSet& links) override {
    team_->propagate(tick.inputs);
    team_->observe(tick.batches, cfg_.landmarks, links);
  }

  Eigen::Vector2d own_position(int robot) const override {
    return team_->robot(robot).position();
  }
  Eigen::Matrix2d own_position_cov(int robot) const override {
    return team_->robot(robot).position_cov();
  }

 private:
  ScenarioConfig cfg_;
  std::unique_ptr<BaselineTeam> team_;
};

}  // namespace

std::unique_ptr<TeamEstimator> make_estimator(AlgorithmId id, const Rollout& rollout) {
  if (id == AlgorithmId::gs_ci) {
    if (rollout.cfg.mode == ScenarioMode::analysis) {
      return std::make_unique<GsCiAnalysisEstimator>(rollout);
    }
    return std::make_unique<GsCiFullEstimator>(rollout);
  }
  return std::make_unique<BaselineEstimator>(id, rollout);
}

double compute_rmse(const std::vector<Eigen::Vector2d>& estimates,
                    const std::vector<Eigen::Vector2d>& truth, bool conventional) {
  if (estimates.size() != truth.size() || estimates.empty()) throw LengthMismatch();
  double acc = 0.0;
  for (size_t i = 0; i < estimates.size(); ++i) {
    const double e = (estimates[i] - truth[i]).norm();
    acc += conventional ? e * e : e;
  }
  return std::sqrt(acc / static_cast<double>(estimates.size()));
}

double compute_rmte(const std::vector<Eigen::Matrix2d>& covariances) {
  if (covariances.empty()) throw LengthMismatch();
  double acc = 0.0;
  for (const Eigen::Matrix2d& c : covariances) acc += c.trace();
  return std::sqrt(acc / static_cast<double>(covariances.size()));
}

ExperimentResult run_on_rollout(const Rollout& rollout, const std::vector<AlgorithmId>& algs,
                                double rho) {
  const int n = rollout.cfg.n_robots;
  ExperimentResult result;
  result.truth_digest = rollout.truth_digest;
  std::vector<std::unique_ptr<TeamEstimator>> estimators;
  for (AlgorithmId id : algs) {
    estimators.push_back(make_estimator(id, rollout));
    result.series.push_back({id, {}, {}});
  }
  for (int t = 0; t < rollout.cfg.steps; ++t) {
    const WorldTick& tick = rollout.ticks[static_cast<size_t>(t)];
    const LinkSet links = deliver_messages(rollout, t, rho);
    std::vector<Eigen::Vector2d> truth;
    truth.reserve(static_cast<size_t>(n));
    for (const RobotPose& p : tick.truth) truth.push_back(p.position);
    for (size_t a = 0; a < estimators.size(); ++a) {
      estimators[a]->step(tick, links);
      std::vector<Eigen::Vector2d> est;
      std::vector<Eigen::Matrix2d> covs;
      for (int i = 0; i < n; ++i) {
        est.push_back(estimators[a]->own_position(i));
        covs.push_back(estimators[a]->own_position_cov(i));
      }
      result.series[a].rmse.push_back(
          compute_rmse(est, truth, rollout.cfg.rmse_conventional));
      result.series[a].rmte.push_back(compute_rmte(covs));
    }
  }
  return result;
}

ExperimentResult run_experiment(const ScenarioConfig& cfg, const std::vector<AlgorithmId>& algs) {
  const Rollout rollout = generate_rollout(cfg);
  return run_on_rollout(rollout, algs, cfg.failure_rho);
}

std::uint64_t fnv1a(const void* data, size_t size) {
  const unsigned char* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t fnv1a(const std::string& bytes) { return fnv1a(bytes.data(), bytes.size()); }

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string metrics_csv_string(const ExperimentResult& result, const ScenarioConfig& cfg,
                               double rho, double density_label) {
  std::string out = "t,algorithm,rmse,rmte,rho,density,seed\n";
  for (const MetricSeries& s : result.series) {
    for (size_t t = 0; t < s.rmse.size(); ++t) {
      out += format_double((static_cast<double>(t) + 1.0) * cfg.dt);
      out += ',';
      out += algorithm_name(s.algorithm);
      out += ',';
      out += format_double(s.rmse[t]);
      out += ',';
      out += format_double(s.rmte[t]);
      out += ',';
      out += format_double(rho);
      out += ',';
      out += format_double(density_label);
      out += ',';
      out += std::to_string(cfg.seed);
      out += '\n';
    }
  }
  return out;
}

void write_metrics_csv(std::ostream& out, const ExperimentResult& result,
                       const ScenarioConfig& cfg, double rho, double density_label) {
  out << metrics_csv_string(result, cfg, rho, density_label);
}

BoundednessProbe run_boundedness_probe(const ScenarioConfig& cfg_in, int robot,
                                       int dominance_stride) {
  ScenarioConfig cfg = cfg_in;
  cfg.mode = ScenarioMode::analysis;
  const Rollout rollout = generate_rollout(cfg);
  const ScenarioConfig& rc = rollout.cfg;
  const int n = rc.n_robots;
  if (robot < 0 || robot >= n) throw IndexOutOfRange("robot id");

  GsCiAnalysisEstimator estimator(rollout);

  // Static per-robot stacked observation structure and noise bound.
  std::vector<Eigen::MatrixXd> h_checks(static_cast<size_t>(n));
  std::vector<Eigen::MatrixXd> r_checks(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    std::vector<EntityId> targets;
    double alpha = 0.0;
    for (const auto& [from, to] : rc.obs_graph.edges()) {
      if (!from.is_robot() || from.index != i) continue;
      targets.push_back(to);
      const Eigen::Matrix2d r_block = rc.meas_kind == MeasurementKind::bearing_range
                                          ? rc.noise.r_bearing_range
                                          : (to.is_robot() ? rc.noise.r_relative
                                                           : rc.noise.r_landmark);
      alpha = std::max(alpha, r_check_alpha(rc.noise.sigma_theta_sq, rc.p_max, r_block));
    }
    if (!targets.empty()) {
      h_checks[static_cast<size_t>(i)] = stacked_h_check(n, i, targets);
      r_checks[static_cast<size_t>(i)] =
          alpha * Eigen::MatrixXd::Identity(2 * static_cast<int>(targets.size()),
                                            2 * static_cast<int>(targets.size()));
      if (!verify_r_check(alpha, rc.noise.sigma_theta_sq, rc.p_max,
                          rc.meas_kind == MeasurementKind::bearing_range
                              ? rc.noise.r_bearing_range
                              : rc.noise.r_relative,
                          16)) {
        throw ConfigError("r_check bound failed numeric verification");
      }
    }
  }

  std::vector<UpperBoundState> psis;
  for (int i = 0; i < n; ++i) {
    psis.push_back(make_upper_bound(
        n,
        rc.init_pos_sigma * rc.init_pos_sigma * Eigen::MatrixXd::Identity(2 * n, 2 * n),
        rc.dt, rc.noise.sigma_u_sq, rc.noise.u_max, rc.noise.sigma_theta_sq));
  }

  BoundednessProbe probe;
  probe.min_dominance_eig = std::numeric_limits<double>::infinity();
  for (int t = 0; t < rc.steps; ++t) {
    const WorldTick& tick = rollout.ticks[static_cast<size_t>(t)];
    const LinkSet links = deliver_messages(rollout, t, rc.failure_rho);
    estimator.step(tick, links);

    for (int i = 0; i < n; ++i) {
      psis[static_cast<size_t>(i)] = psi_propagate(psis[static_cast<size_t>(i)]);
      if (h_checks[static_cast<size_t>(i)].size() > 0) {
        psis[static_cast<size_t>(i)] = psi_observe(psis[static_cast<size_t>(i)],
                                                   h_checks[static_cast<size_t>(i)],
                                                   r_checks[static_cast<size_t>(i)]);
      }
    }
    const std::vector<UpperBoundState> snapshot = psis;
    for (int i = 0; i < n; ++i) {
      std::vector<UpperBoundState> group;
      for (const auto& [from, to] : links) {
        if (to == i) group.push_back(snapshot[static_cast<size_t>(from)]);
      }
      if (group.empty()) continue;
      group.push_back(snapshot[static_cast<size_t>(i)]);
      psis[static_cast<size_t>(i)] = psi_communicate(
          group, comm_weights(rc.ci, static_cast<int>(group.size()) - 1));
    }

    const Eigen::MatrixXd& phi = estimator.state(robot).covariance;
    const Eigen::MatrixXd& psi = psis[static_cast<size_t>(robot)].psi;
    probe.phi_trace.push_back(phi.trace());
    probe.psi_trace.push_back(psi.trace());
    if (t % dominance_stride == 0 || t == rc.steps - 1) {
      probe.min_dominance_eig =
          std::min(probe.min_dominance_eig, min_eigenvalue(psi - phi));
    }
  }
  return probe;
}

// ---------------------------------------------------------------------------
// Scenario files

namespace {

Eigen::Matrix2d parse_matrix2(const YAML::Node& node, const std::string& key) {
  if (!node.IsSequence()) throw ConfigError("matrix key '" + key + "' must be a sequence");
  Eigen::Matrix2d m = Eigen::Matrix2d::Zero();
  if (node.size() == 2 && node[0].IsSequence()) {
    for (int r = 0; r < 2; ++r) {
      if (node[static_cast<size_t>(r)].size() != 2) {
        throw ConfigError("matrix key '" + key + "' must be 2x2");
      }
      for (int c = 0; c < 2; ++c) {
        m(r, c) = node[static_cast<size_t>(r)][static_cast<size_t>(c)].as<double>();
      }
    }
    return symmetrize(m);
  }
  if (node.size() == 2) {
    m(0, 0) = node[0].as<double>();
    m(1, 1) = node[1].as<double>();
    return m;
  }
  throw ConfigError("matrix key '" + key + "' must be a diagonal pair or 2x2 rows");
}

TopologyGraph parse_graph_node(const YAML::Node& node, int n_robots,
                               const std::vector<int>& landmark_ids,
                               std::optional<double>& density_out) {
  TopologyGraph g(n_robots, 0);
  if (!node) return g;
  if (node["density"]) {
    density_out = node["density"].as<double>();
    return g;
  }
  if (node["edges"]) {
    for (const auto& e : node["edges"]) {
      std::istringstream ss(e.as<std::string>());
      std::string a, b;
      if (!(ss >> a >> b)) throw ConfigError("graph edge needs two tokens");
      g.add_edge(parse_entity_token(a), parse_entity_token(b));
    }
  }
  for (int id : landmark_ids) g.add_node(EntityId::landmark(id));
  return g;
}

void canonical_yaml(const YAML::Node& node, std::string& out) {
  switch (node.Type()) {
    case YAML::NodeType::Map: {
      std::vector<std::string> keys;
      for (const auto& kv : node) keys.push_back(kv.first.as<std::string>());
      std::sort(keys.begin(), keys.end());
      out += '{';
      for (const std::string& k : keys) {
        out += k;
        out += ':';
        canonical_yaml(node[k], out);
        out += ';';
      }
      out += '}';
      break;
    }
    case YAML::NodeType::Sequence:
      out += '[';
      for (const auto& item : node) {
        canonical_yaml(item, out);
        out += ',';
      }
      out += ']';
      break;
    case YAML::NodeType::Scalar:
      out += node.Scalar();
      break;
    default:
      out += '~';
      break;
  }
}

}  // namespace

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open scenario file '" + path + "'");
  YAML::Node doc;
  try {
    doc = YAML::Load(in);
  } catch (const YAML::Exception& e) {
    throw ConfigError("YAML parse error in '" + path + "': " + e.what());
  }

  ScenarioConfig cfg;
  if (doc["n_robots"]) cfg.n_robots = doc["n_robots"].as<int>();
  if (doc["mode"]) {
    const std::string m = doc["mode"].as<std::string>();
    if (m == "analysis") cfg.mode = ScenarioMode::analysis;
    else if (m == "full") cfg.mode = ScenarioMode::full;
    else throw ConfigError("mode must be 'analysis' or 'full'");
  }
  if (doc["measurement"]) {
    const std::string m = doc["measurement"].as<std::string>();
    if (m == "relative_xy") cfg.meas_kind = MeasurementKind::relative_xy;
    else if (m == "bearing_range") cfg.meas_kind = MeasurementKind::bearing_range;
    else throw ConfigError("measurement must be 'relative_xy' or 'bearing_range'");
  }
  if (doc["landmarks"]) {
    cfg.landmarks.clear();
    for (const auto& kv : doc["landmarks"]) {
      const EntityId id = parse_entity_token(kv.first.as<std::string>());
      if (!id.is_landmark()) throw ConfigError("landmark keys must be L tokens");
      if (kv.second.size() != 2) throw ConfigError("landmark position must be [x, y]");
      cfg.landmarks[id.index] =
          Eigen::Vector2d(kv.second[0].as<double>(), kv.second[1].as<double>());
    }
  }
  std::vector<int> landmark_ids;
  for (const auto& [id, pos] : cfg.landmarks) landmark_ids.push_back(id);
  cfg.obs_graph = parse_graph_node(doc["obs_graph"], cfg.n_robots, landmark_ids, cfg.obs_density);
  cfg.comm_graph =
      parse_graph_node(doc["comm_graph"], cfg.n_robots, landmark_ids, cfg.comm_density);

  if (doc["noise"]) {
    const YAML::Node n = doc["noise"];
    if (n["q_w"]) cfg.noise.q_w = parse_matrix2(n["q_w"], "q_w");
    if (n["sigma_u_sq"]) cfg.noise.sigma_u_sq = n["sigma_u_sq"].as<double>();
    if (n["u_max"]) cfg.noise.u_max = n["u_max"].as<double>();
    if (n["sigma_theta_sq"]) cfg.noise.sigma_theta_sq = n["sigma_theta_sq"].as<double>();
    if (n["r_landmark"]) cfg.noise.r_landmark = parse_matrix2(n["r_landmark"], "r_landmark");
    if (n["r_relative"]) cfg.noise.r_relative = parse_matrix2(n["r_relative"], "r_relative");
    if (n["r_bearing_range"]) {
      cfg.noise.r_bearing_range = parse_matrix2(n["r_bearing_range"], "r_bearing_range");
    }
  }
  if (doc["ci_weights"]) {
    const YAML::Node c = doc["ci_weights"];
    if (c["kind"]) {
      const std::string k = c["kind"].as<std::string>();
      if (k == "fixed_self") cfg.ci.kind = CiPolicy::Kind::fixed_self;
      else if (k == "equal") cfg.ci.kind = CiPolicy::Kind::equal;
      else throw ConfigError("ci_weights.kind must be 'fixed_self' or 'equal'");
    }
    if (c["self_weight"]) cfg.ci.self_weight = c["self_weight"].as<double>();
  }
  if (doc["dt"]) cfg.dt = doc["dt"].as<double>();
  if (doc["steps"]) cfg.steps = doc["steps"].as<int>();
  if (doc["seed"]) cfg.seed = doc["seed"].as<std::uint64_t>();
  if (doc["velocity_range"]) {
    cfg.v_lo = doc["velocity_range"][0].as<double>();
    cfg.v_hi = doc["velocity_range"][1].as<double>();
  }
  if (doc["omega_max"]) cfg.omega_max = doc["omega_max"].as<double>();
  if (doc["failure_rho"]) cfg.failure_rho = doc["failure_rho"].as<double>();
  if (doc["comm_blackouts"]) {
    for (const auto& w : doc["comm_blackouts"]) {
      if (w.size() != 2) throw ConfigError("blackout window must be [start, end)");
      cfg.comm_blackouts.emplace_back(w[0].as<double>(), w[1].as<double>());
    }
  }
  if (doc["init_pos_radius"]) cfg.init_pos_radius = doc["init_pos_radius"].as<double>();
  if (doc["init_pos_sigma"]) cfg.init_pos_sigma = doc["init_pos_sigma"].as<double>();
  if (doc["init_theta_sigma"]) cfg.init_theta_sigma = doc["init_theta_sigma"].as<double>();
  if (doc["p_max"]) cfg.p_max = doc["p_max"].as<double>();
  if (doc["rmse_conventional"]) cfg.rmse_conventional = doc["rmse_conventional"].as<bool>();

  validate_config(cfg);
  return cfg;
}

std::uint64_t scenario_digest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open scenario file '" + path + "'");
  YAML::Node doc;
  try {
    doc = YAML::Load(in);
  } catch (const YAML::Exception& e) {
    throw ConfigError("YAML parse error in '" + path + "': " + e.what());
  }
  std::string canonical;
  canonical_yaml(doc, canonical);
  return fnv1a(canonical);
}

}  // namespace coloc
