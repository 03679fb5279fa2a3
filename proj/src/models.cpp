#include "coloc/models.hpp"

#include <cmath>

namespace coloc {

double wrap_angle(double theta) {
  double a = std::fmod(theta + M_PI, 2.0 * M_PI);
  if (a <= 0.0) a += 2.0 * M_PI;
  return a - M_PI;
}

Eigen::Matrix2d rotation(double theta) {
  Eigen::Matrix2d c;
  c << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return c;
}

Eigen::MatrixXd ObservationBatch::noise_matrix() const {
  const int m = static_cast<int>(measurements.size());
  if (joint_noise) {
    if (joint_noise->rows() != 2 * m || joint_noise->cols() != 2 * m) {
      throw DimensionMismatch("joint noise matrix does not match batch size");
    }
    return *joint_noise;
  }
  Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2 * m, 2 * m);
  for (int k = 0; k < m; ++k) {
    r.block<2, 2>(2 * k, 2 * k) = measurements[static_cast<size_t>(k)].noise_cov;
  }
  return r;
}

RobotPose unicycle_propagate(const RobotPose& pose, const OdometryInput& u,
                             const Eigen::Vector2d& noise) {
  if (u.dt <= 0.0) throw ConfigError("odometry dt must be positive");
  RobotPose next;
  const double v = u.v + noise(0);
  next.position = pose.position + v * u.dt * Eigen::Vector2d(std::cos(pose.theta), std::sin(pose.theta));
  next.theta = wrap_angle(pose.theta + (u.omega + noise(1)) * u.dt);
  return next;
}

Measurement relative_observation(const RobotPose& observer, const Eigen::Vector2d& target_position,
                                 const Eigen::Vector2d& noise) {
  Measurement m;
  m.kind = MeasurementKind::relative_xy;
  m.value = rotation(observer.theta).transpose() * (target_position - observer.position) + noise;
  return m;
}

Measurement bearing_range_observation(const RobotPose& observer,
                                      const Eigen::Vector2d& target_position,
                                      const Eigen::Vector2d& noise) {
  const Eigen::Vector2d d = target_position - observer.position;
  if (d.norm() < 1e-9) throw CoincidentPoints();
  Measurement m;
  m.kind = MeasurementKind::bearing_range;
  m.value(0) = wrap_angle(wrap_angle(std::atan2(d.y(), d.x()) - observer.theta) + noise(0));
  m.value(1) = std::max(0.0, d.norm() + noise(1));
  return m;
}

Eigen::Matrix2d bearing_range_conversion_jacobian(double phi, double r) {
  Eigen::Matrix2d j;
  j << -r * std::sin(phi), std::cos(phi), r * std::cos(phi), std::sin(phi);
  return j;
}

Measurement bearing_range_to_relative(const Measurement& m) {
  if (m.kind != MeasurementKind::bearing_range) {
    throw ConfigError("bearing_range_to_relative requires a bearing_range measurement");
  }
  const double phi = m.value(0);
  const double r = m.value(1);
  Measurement out = m;
  out.kind = MeasurementKind::relative_xy;
  out.value = r * Eigen::Vector2d(std::cos(phi), std::sin(phi));
  const Eigen::Matrix2d j = bearing_range_conversion_jacobian(phi, r);
  Eigen::Matrix2d cov = symmetrize(j * m.noise_cov * j.transpose());
  if (min_eigenvalue(cov) < 1e-9) {
    cov += 1e-9 * Eigen::Matrix2d::Identity();
  }
  out.noise_cov = cov;
  return out;
}

RelObsJacobian relative_obs_jacobian(double theta, const Eigen::Vector2d& obs_pos,
                                     const Eigen::Vector2d& target_pos) {
  const Eigen::Matrix2d ct = rotation(theta).transpose();
  RelObsJacobian jac;
  jac.d_theta = ct * skew_j() * (target_pos - obs_pos);
  jac.d_obs_pos = -ct;
  jac.d_target_pos = ct;
  return jac;
}

BearingRangeJacobian bearing_range_jacobian(const Eigen::Vector2d& obs_pos,
                                            const Eigen::Vector2d& target_pos) {
  const Eigen::Vector2d d = target_pos - obs_pos;
  const double q = d.squaredNorm();
  if (q < 1e-18) throw CoincidentPoints();
  const double r = std::sqrt(q);
  BearingRangeJacobian jac;
  jac.d_theta = Eigen::Vector2d(-1.0, 0.0);
  Eigen::RowVector2d dphi_dtarget(-d.y() / q, d.x() / q);
  Eigen::RowVector2d dr_dtarget(d.x() / r, d.y() / r);
  jac.d_target_pos.row(0) = dphi_dtarget;
  jac.d_target_pos.row(1) = dr_dtarget;
  jac.d_obs_pos = -jac.d_target_pos;
  return jac;
}

Eigen::Vector2d predict_relative(double theta, const Eigen::Vector2d& obs_pos,
                                 const Eigen::Vector2d& target_pos) {
  return rotation(theta).transpose() * (target_pos - obs_pos);
}

Eigen::Vector2d predict_bearing_range(double theta, const Eigen::Vector2d& obs_pos,
                                      const Eigen::Vector2d& target_pos) {
  const Eigen::Vector2d d = target_pos - obs_pos;
  if (d.norm() < 1e-9) throw CoincidentPoints();
  return {wrap_angle(std::atan2(d.y(), d.x()) - theta), d.norm()};
}

}  // namespace coloc
