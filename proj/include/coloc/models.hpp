#ifndef COLOC_MODELS_HPP
#define COLOC_MODELS_HPP

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "coloc/common.hpp"

namespace coloc {

// Wraps an angle to (-pi, pi].
double wrap_angle(double theta);

// Planar rotation matrix C(theta).
Eigen::Matrix2d rotation(double theta);

// d C^T(theta) / d theta = C^T(theta) * J with this J.
inline Eigen::Matrix2d skew_j() {
  Eigen::Matrix2d j;
  j << 0.0, 1.0, -1.0, 0.0;
  return j;
}

struct RobotPose {
  double theta = 0.0;          // rad, wrapped to (-pi, pi]
  Eigen::Vector2d position = Eigen::Vector2d::Zero();  // m
};

struct OdometryInput {
  double v = 0.0;      // m/s forward speed
  double omega = 0.0;  // rad/s angular rate
  double dt = 0.0;     // s, > 0
};

struct NoiseConfig {
  Eigen::Matrix2d q_w = Eigen::Matrix2d::Zero();  // own (v, omega) input noise covariance
  double sigma_u_sq = 0.0;                        // variance of unknown others' inputs, (m/s)^2
  double u_max = 0.0;                             // m/s
  double sigma_theta_sq = 0.0;                    // rad^2, orientation-variance upper bound
  Eigen::Matrix2d r_landmark = Eigen::Matrix2d::Identity() * 1e-4;
  Eigen::Matrix2d r_relative = Eigen::Matrix2d::Identity() * 1e-4;
  Eigen::Matrix2d r_bearing_range = Eigen::Matrix2d::Identity() * 1e-4;
};

enum class MeasurementKind { relative_xy, bearing_range };

struct Measurement {
  int observer = 0;
  EntityId target;
  MeasurementKind kind = MeasurementKind::relative_xy;
  Eigen::Vector2d value = Eigen::Vector2d::Zero();   // (x, y) m or (bearing rad, range m)
  Eigen::Matrix2d noise_cov = Eigen::Matrix2d::Zero();
  double time = 0.0;
};

// Measurements taken by one robot at one time instant. Joint noise defaults to
// block-diagonal over the per-measurement covariances.
struct ObservationBatch {
  int observer = 0;
  double time = 0.0;
  std::vector<Measurement> measurements;
  std::optional<Eigen::MatrixXd> joint_noise;

  Eigen::MatrixXd noise_matrix() const;
};

RobotPose unicycle_propagate(const RobotPose& pose, const OdometryInput& u,
                             const Eigen::Vector2d& noise);

Measurement relative_observation(const RobotPose& observer, const Eigen::Vector2d& target_position,
                                 const Eigen::Vector2d& noise);

Measurement bearing_range_observation(const RobotPose& observer,
                                      const Eigen::Vector2d& target_position,
                                      const Eigen::Vector2d& noise);

// Converts a bearing-and-range measurement to relative-xy form, mapping the
// noise covariance through the conversion's linearization. Degenerate results
// (zero range) get a 1e-9*I floor so downstream inversions stay well posed.
Measurement bearing_range_to_relative(const Measurement& m);

// Linearization of the bearing/range -> relative-xy conversion at (phi, r),
// columns ordered (bearing, range).
Eigen::Matrix2d bearing_range_conversion_jacobian(double phi, double r);

// Jacobian blocks of h = C^T(theta) (p_target - p_obs).
struct RelObsJacobian {
  Eigen::Vector2d d_theta;
  Eigen::Matrix2d d_obs_pos;
  Eigen::Matrix2d d_target_pos;
};
RelObsJacobian relative_obs_jacobian(double theta, const Eigen::Vector2d& obs_pos,
                                     const Eigen::Vector2d& target_pos);

// Jacobian blocks of h = (wrap(atan2(dy,dx) - theta), |dp|).
struct BearingRangeJacobian {
  Eigen::Vector2d d_theta;  // (-1, 0)
  Eigen::Matrix2d d_obs_pos;
  Eigen::Matrix2d d_target_pos;
};
BearingRangeJacobian bearing_range_jacobian(const Eigen::Vector2d& obs_pos,
                                            const Eigen::Vector2d& target_pos);

Eigen::Vector2d predict_relative(double theta, const Eigen::Vector2d& obs_pos,
                                 const Eigen::Vector2d& target_pos);
Eigen::Vector2d predict_bearing_range(double theta, const Eigen::Vector2d& obs_pos,
                                      const Eigen::Vector2d& target_pos);

}  // namespace coloc

#endif
