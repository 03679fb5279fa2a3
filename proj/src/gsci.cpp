#include "coloc/gsci.hpp"

#include <cmath>

namespace coloc {

int theta_index(int robot_id) { return 2 * robot_id; }

int position_index(int robot_id, int j) {
  if (j < robot_id) return 2 * j;
  return 2 * j + 1;
}

GlobalState make_global_state(int robot_id, int n_robots, const RobotPose& own,
                              const std::vector<Eigen::Vector2d>& positions,
                              const Eigen::MatrixXd& covariance) {
  if (static_cast<int>(positions.size()) != n_robots) {
    throw DimensionMismatch("one position per robot required");
  }
  const int dim = 2 * n_robots + 1;
  if (covariance.rows() != dim || covariance.cols() != dim) {
    throw DimensionMismatch("global covariance must be (2N+1) square");
  }
  GlobalState s;
  s.robot_id = robot_id;
  s.mean = Eigen::VectorXd::Zero(dim);
  s.mean(theta_index(robot_id)) = own.theta;
  for (int j = 0; j < n_robots; ++j) {
    s.mean.segment<2>(position_index(robot_id, j)) =
        (j == robot_id) ? own.position : positions[static_cast<size_t>(j)];
  }
  s.covariance = symmetrize(covariance);
  return s;
}

RobotPose own_pose(const GlobalState& state) {
  RobotPose pose;
  pose.theta = state.mean(theta_index(state.robot_id));
  pose.position = state.mean.segment<2>(position_index(state.robot_id, state.robot_id));
  return pose;
}

std::pair<Eigen::Vector2d, Eigen::Matrix2d> position_of(const GlobalState& state, int j) {
  if (j < 0 || j >= state.n_robots()) throw IndexOutOfRange("robot id");
  const int idx = position_index(state.robot_id, j);
  return {state.mean.segment<2>(idx), state.covariance.block<2, 2>(idx, idx)};
}

GaussianEstimate strip_orientation(const CommMessage& msg) {
  const int dim = static_cast<int>(msg.mean.size());
  const int n = (dim - 1) / 2;
  if (dim != 2 * n + 1) throw DimensionMismatch("message dimension is not 2N+1");
  const int cut = theta_index(msg.sender);

  Eigen::VectorXd mean(2 * n);
  Eigen::MatrixXd cov(2 * n, 2 * n);
  int r = 0;
  for (int i = 0; i < dim; ++i) {
    if (i == cut) continue;
    mean(r) = msg.mean(i);
    int c = 0;
    for (int k = 0; k < dim; ++k) {
      if (k == cut) continue;
      cov(r, c) = msg.covariance(i, k);
      ++c;
    }
    ++r;
  }
  return GaussianEstimate::moment(std::move(mean), std::move(cov));
}

GaussianEstimate inject_dummy_orientation(const GaussianEstimate& est, int receiver) {
  const int dim2n = static_cast<int>(est.dim());
  const int n = dim2n / 2;
  if (dim2n != 2 * n) throw DimensionMismatch("position estimate dimension is not 2N");
  auto info2n = try_spd_inverse(est.covariance());
  if (!info2n) throw SingularCovariance("stripped message covariance is singular");
  const Eigen::VectorXd info_mean2n = *info2n * est.mean();

  const int cut = theta_index(receiver);
  const int dim = 2 * n + 1;
  Eigen::VectorXd info_mean = Eigen::VectorXd::Zero(dim);
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
  int r = 0;
  for (int i = 0; i < dim; ++i) {
    if (i == cut) continue;
    info_mean(i) = info_mean2n(r);
    int c = 0;
    for (int k = 0; k < dim; ++k) {
      if (k == cut) continue;
      info(i, k) = (*info2n)(r, c);
      ++c;
    }
    ++r;
  }
  return GaussianEstimate::information(std::move(info_mean), std::move(info));
}

namespace {

// Per-other-robot position covariance growth for one step.
double qu_scale(const GsCiConfig& cfg, double dt) {
  const NoiseConfig& n = cfg.noise;
  if (cfg.qu_policy == QuPolicy::analysis_bound) {
    return dt * dt * std::max(n.sigma_u_sq, n.u_max * n.u_max * n.sigma_theta_sq);
  }
  return dt * dt * n.sigma_u_sq;
}

}  // namespace

GlobalState time_propagate(const GlobalState& state, const OdometryInput& own_input,
                           const GsCiConfig& cfg) {
  if (own_input.dt <= 0.0) throw ConfigError("odometry dt must be positive");
  const int n = state.n_robots();
  const int dim = 2 * n + 1;
  const int ti = theta_index(state.robot_id);
  const int pi = position_index(state.robot_id, state.robot_id);
  const double theta = state.mean(ti);
  const double dt = own_input.dt;

  GlobalState next = state;
  next.mean(ti) = wrap_angle(theta + own_input.omega * dt);
  next.mean.segment<2>(pi) +=
      own_input.v * dt * Eigen::Vector2d(std::cos(theta), std::sin(theta));

  // Own-block Jacobians in (theta, x, y) order; all other blocks propagate
  // with identity.
  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(dim, dim);
  f(pi, ti) = -own_input.v * dt * std::sin(theta);
  f(pi + 1, ti) = own_input.v * dt * std::cos(theta);

  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::Matrix<double, 3, 2> g;
  g << 0.0, dt,
       dt * std::cos(theta), 0.0,
       dt * std::sin(theta), 0.0;
  Eigen::Matrix3d own_q = g * cfg.noise.q_w * g.transpose();
  q(ti, ti) = own_q(0, 0);
  q.block<2, 1>(pi, ti) = own_q.block<2, 1>(1, 0);
  q.block<1, 2>(ti, pi) = own_q.block<1, 2>(0, 1);
  q.block<2, 2>(pi, pi) = own_q.block<2, 2>(1, 1);

  const double qu = qu_scale(cfg, dt);
  for (int j = 0; j < n; ++j) {
    if (j == state.robot_id) continue;
    const int idx = position_index(state.robot_id, j);
    q.block<2, 2>(idx, idx) = qu * Eigen::Matrix2d::Identity();
  }

  next.covariance = clamp_psd(f * state.covariance * f.transpose() + q);
  return next;
}

namespace {

struct StackedObservation {
  Eigen::MatrixXd h;          // 2m x dim
  Eigen::VectorXd innovation; // 2m
  Eigen::MatrixXd r;          // 2m x 2m
};

StackedObservation stack_batch(const GlobalState& state, const ObservationBatch& batch,
                               const std::map<int, Eigen::Vector2d>& landmarks) {
  const int n = state.n_robots();
  const int dim = 2 * n + 1;
  const int m = static_cast<int>(batch.measurements.size());
  const int ti = theta_index(state.robot_id);
  const int pi = position_index(state.robot_id, state.robot_id);
  const double theta = state.mean(ti);
  const Eigen::Vector2d own_pos = state.mean.segment<2>(pi);

  StackedObservation so;
  so.h = Eigen::MatrixXd::Zero(2 * m, dim);
  so.innovation = Eigen::VectorXd::Zero(2 * m);
  so.r = batch.noise_matrix();

  for (int k = 0; k < m; ++k) {
    const Measurement& meas = batch.measurements[static_cast<size_t>(k)];
    Eigen::Vector2d target_pos;
    int target_col = -1;
    if (meas.target.is_robot()) {
      if (meas.target.index < 0 || meas.target.index >= n || meas.target.index == state.robot_id) {
        throw UnknownTarget("relative target robot id " + std::to_string(meas.target.index));
      }
      target_col = position_index(state.robot_id, meas.target.index);
      target_pos = state.mean.segment<2>(target_col);
    } else {
      auto it = landmarks.find(meas.target.index);
      if (it == landmarks.end()) {
        throw UnknownTarget("landmark id " + std::to_string(meas.target.index));
      }
      target_pos = it->second;
    }

    if (meas.kind == MeasurementKind::relative_xy) {
      const RelObsJacobian jac = relative_obs_jacobian(theta, own_pos, target_pos);
      so.h.block<2, 1>(2 * k, ti) = jac.d_theta;
      so.h.block<2, 2>(2 * k, pi) = jac.d_obs_pos;
      if (target_col >= 0) so.h.block<2, 2>(2 * k, target_col) = jac.d_target_pos;
      so.innovation.segment<2>(2 * k) =
          meas.value - predict_relative(theta, own_pos, target_pos);
    } else {
      const BearingRangeJacobian jac = bearing_range_jacobian(own_pos, target_pos);
      so.h.block<2, 1>(2 * k, ti) = jac.d_theta;
      so.h.block<2, 2>(2 * k, pi) = jac.d_obs_pos;
      if (target_col >= 0) so.h.block<2, 2>(2 * k, target_col) = jac.d_target_pos;
      const Eigen::Vector2d pred = predict_bearing_range(theta, own_pos, target_pos);
      so.innovation(2 * k) = wrap_angle(meas.value(0) - pred(0));
      so.innovation(2 * k + 1) = meas.value(1) - pred(1);
    }
  }
  return so;
}

}  // namespace

GlobalState observation_update(const GlobalState& state, const ObservationBatch& batch,
                               const std::map<int, Eigen::Vector2d>& landmarks) {
  if (batch.measurements.empty()) return state;
  if (batch.observer != state.robot_id) {
    throw UnknownTarget("batch observer does not match filter robot");
  }
  const StackedObservation so = stack_batch(state, batch, landmarks);

  Eigen::MatrixXd s = so.h * state.covariance * so.h.transpose() + so.r;
  auto s_inv = try_spd_inverse(s);
  if (!s_inv) throw SingularInnovation();
  const Eigen::MatrixXd gain = state.covariance * so.h.transpose() * *s_inv;

  GlobalState next = state;
  next.mean += gain * so.innovation;
  next.mean(theta_index(state.robot_id)) = wrap_angle(next.mean(theta_index(state.robot_id)));

  auto prior_info = try_spd_inverse(state.covariance);
  if (!prior_info) throw SingularCovariance("prior covariance singular in observation update");
  auto r_inv = try_spd_inverse(so.r);
  if (!r_inv) throw SingularInnovation("observation noise matrix singular");
  Eigen::MatrixXd info = *prior_info + so.h.transpose() * *r_inv * so.h;
  auto cov = try_spd_inverse(info);
  if (!cov) throw SingularCovariance("posterior information singular");
  next.covariance = clamp_psd(*cov);
  return next;
}

GlobalState communication_update(const GlobalState& state, const std::vector<CommMessage>& msgs,
                                 const CIWeights& w) {
  if (w.size() != static_cast<int>(msgs.size()) + 1) throw WeightMismatch();
  const double self_weight = w[w.size() - 1];
  if (self_weight <= 0.0) throw ZeroSelfWeight();
  const int dim = static_cast<int>(state.mean.size());

  auto own_info = try_spd_inverse(state.covariance);
  if (!own_info) throw SingularCovariance("own covariance singular in communication update");

  Eigen::MatrixXd info = self_weight * *own_info;
  Eigen::VectorXd info_mean = self_weight * (*own_info * state.mean);
  for (size_t k = 0; k < msgs.size(); ++k) {
    if (msgs[k].mean.size() != dim) throw DimensionMismatch("message dimension disagrees");
    const GaussianEstimate stripped = strip_orientation(msgs[k]);
    const GaussianEstimate contrib = inject_dummy_orientation(stripped, state.robot_id);
    info += w[static_cast<int>(k)] * contrib.info_matrix();
    info_mean += w[static_cast<int>(k)] * contrib.info_mean();
  }

  auto cov = try_spd_inverse(info);
  if (!cov) throw DegenerateFusion("fused communication information singular");
  GlobalState next = state;
  next.covariance = clamp_psd(*cov);
  next.mean = *cov * info_mean;
  next.mean(theta_index(state.robot_id)) = wrap_angle(next.mean(theta_index(state.robot_id)));
  return next;
}

AnalysisState analysis_propagate(const AnalysisState& state, double own_speed, double theta_est,
                                 double dt, const NoiseConfig& noise) {
  const int n = static_cast<int>(state.mean.size()) / 2;
  AnalysisState next = state;
  next.mean.segment<2>(2 * state.robot_id) +=
      own_speed * dt * Eigen::Vector2d(std::cos(theta_est), std::sin(theta_est));

  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(2 * n, 2 * n);
  const double qu = dt * dt * std::max(noise.sigma_u_sq,
                                       noise.u_max * noise.u_max * noise.sigma_theta_sq);
  for (int j = 0; j < n; ++j) {
    if (j == state.robot_id) {
      Eigen::Matrix2d own;
      own << noise.q_w(0, 0), 0.0, 0.0, own_speed * own_speed * noise.sigma_theta_sq;
      const Eigen::Matrix2d c = rotation(theta_est);
      q.block<2, 2>(2 * j, 2 * j) = dt * dt * c * own * c.transpose();
    } else {
      q.block<2, 2>(2 * j, 2 * j) = qu * Eigen::Matrix2d::Identity();
    }
  }
  next.covariance = clamp_psd(state.covariance + q);
  return next;
}

AnalysisState analysis_observe(const AnalysisState& state, const ObservationBatch& batch,
                               const std::map<int, Eigen::Vector2d>& landmarks, double theta_est,
                               const NoiseConfig& noise) {
  if (batch.measurements.empty()) return state;
  const int n = static_cast<int>(state.mean.size()) / 2;
  const int m = static_cast<int>(batch.measurements.size());
  const Eigen::Vector2d own_pos = state.mean.segment<2>(2 * state.robot_id);
  const Eigen::Matrix2d ct = rotation(theta_est).transpose();

  Eigen::MatrixXd h_check = Eigen::MatrixXd::Zero(2 * m, 2 * n);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * m, 2 * n);
  Eigen::VectorXd innovation(2 * m);
  Eigen::MatrixXd r_eff = batch.noise_matrix();

  for (int k = 0; k < m; ++k) {
    Measurement meas = batch.measurements[static_cast<size_t>(k)];
    if (meas.kind == MeasurementKind::bearing_range) {
      meas = bearing_range_to_relative(meas);
      r_eff.block<2, 2>(2 * k, 2 * k) = meas.noise_cov;
    }
    Eigen::Vector2d target_pos;
    h_check.block<2, 2>(2 * k, 2 * state.robot_id) = -Eigen::Matrix2d::Identity();
    if (meas.target.is_robot()) {
      if (meas.target.index < 0 || meas.target.index >= n) throw UnknownTarget();
      h_check.block<2, 2>(2 * k, 2 * meas.target.index) = Eigen::Matrix2d::Identity();
      target_pos = state.mean.segment<2>(2 * meas.target.index);
    } else {
      auto it = landmarks.find(meas.target.index);
      if (it == landmarks.end()) throw UnknownTarget();
      target_pos = it->second;
    }
    h.middleRows<2>(2 * k) = ct * h_check.middleRows<2>(2 * k);
    innovation.segment<2>(2 * k) = meas.value - ct * (target_pos - own_pos);
    // Orientation-estimate error contribution to the innovation covariance.
    const Eigen::Vector2d u = ct * skew_j() * (target_pos - own_pos);
    r_eff.block<2, 2>(2 * k, 2 * k) += noise.sigma_theta_sq * u * u.transpose();
  }

  Eigen::MatrixXd s = h * state.covariance * h.transpose() + r_eff;
  auto s_inv = try_spd_inverse(s);
  if (!s_inv) throw SingularInnovation();
  const Eigen::MatrixXd gain = state.covariance * h.transpose() * *s_inv;

  AnalysisState next = state;
  next.mean += gain * innovation;

  auto prior_info = try_spd_inverse(state.covariance);
  if (!prior_info) throw SingularCovariance();
  auto r_inv = try_spd_inverse(r_eff);
  if (!r_inv) throw SingularInnovation();
  auto cov = try_spd_inverse(*prior_info + h.transpose() * *r_inv * h);
  if (!cov) throw SingularCovariance();
  next.covariance = clamp_psd(*cov);
  return next;
}

AnalysisState analysis_communicate(const AnalysisState& state,
                                   const std::vector<AnalysisState>& msgs, const CIWeights& w) {
  if (w.size() != static_cast<int>(msgs.size()) + 1) throw WeightMismatch();
  if (w[w.size() - 1] <= 0.0) throw ZeroSelfWeight();

  std::vector<GaussianEstimate> infos;
  infos.reserve(msgs.size() + 1);
  for (const AnalysisState& m : msgs) {
    infos.push_back(to_information(GaussianEstimate::moment(m.mean, m.covariance)));
  }
  infos.push_back(to_information(GaussianEstimate::moment(state.mean, state.covariance)));

  const GaussianEstimate fused = from_information(ci_fuse(infos, w));
  AnalysisState next = state;
  next.mean = fused.mean();
  next.covariance = clamp_psd(fused.covariance());
  return next;
}

}  // namespace coloc
