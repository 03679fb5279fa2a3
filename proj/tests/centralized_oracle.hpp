// Reference implementation for the distributed-equals-centralized checks: a
// joint EKF over all robot poses, written independently of the library's
// filter code (own Jacobians, own update form). Test-only.
#ifndef COLOC_TESTS_CENTRALIZED_ORACLE_HPP
#define COLOC_TESTS_CENTRALIZED_ORACLE_HPP

#include <Eigen/Dense>

#include "coloc/sim.hpp"

namespace coloc_tests {

class CentralizedOracle {
 public:
  CentralizedOracle(const coloc::Rollout& rollout, bool drop_relative)
      : cfg_(rollout.cfg), drop_relative_(drop_relative) {
    const int n = cfg_.n_robots;
    x_ = Eigen::VectorXd::Zero(3 * n);
    p_ = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int i = 0; i < n; ++i) {
      const coloc::RobotPose& e = rollout.initial_estimate[static_cast<size_t>(i)];
      x_(3 * i) = e.theta;
      x_.segment<2>(3 * i + 1) = e.position;
      p_(3 * i, 3 * i) = cfg_.init_theta_sigma * cfg_.init_theta_sigma;
      p_.block<2, 2>(3 * i + 1, 3 * i + 1) =
          cfg_.init_pos_sigma * cfg_.init_pos_sigma * Eigen::Matrix2d::Identity();
    }
  }

  void step(const coloc::WorldTick& tick) {
    const int n = cfg_.n_robots;
    Eigen::MatrixXd f = Eigen::MatrixXd::Identity(3 * n, 3 * n);
    Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3 * n, 3 * n);
    for (int i = 0; i < n; ++i) {
      const coloc::OdometryInput& u = tick.inputs[static_cast<size_t>(i)];
      const double th = x_(3 * i);
      f(3 * i + 1, 3 * i) = -u.v * u.dt * std::sin(th);
      f(3 * i + 2, 3 * i) = u.v * u.dt * std::cos(th);
      Eigen::Matrix<double, 3, 2> g;
      g << 0.0, u.dt, u.dt * std::cos(th), 0.0, u.dt * std::sin(th), 0.0;
      q.block<3, 3>(3 * i, 3 * i) = g * cfg_.noise.q_w * g.transpose();
      x_(3 * i + 1) += u.v * u.dt * std::cos(th);
      x_(3 * i + 2) += u.v * u.dt * std::sin(th);
      x_(3 * i) = coloc::wrap_angle(th + u.omega * u.dt);
    }
    p_ = f * p_ * f.transpose() + q;
    p_ = 0.5 * (p_ + p_.transpose()).eval();

    for (const coloc::ObservationBatch& batch : tick.batches) {
      std::vector<const coloc::Measurement*> kept;
      for (const coloc::Measurement& m : batch.measurements) {
        if (m.target.is_landmark() || !drop_relative_) kept.push_back(&m);
      }
      if (kept.empty()) continue;
      const int o = batch.observer;
      const int rows = 2 * static_cast<int>(kept.size());
      Eigen::MatrixXd h = Eigen::MatrixXd::Zero(rows, 3 * n);
      Eigen::VectorXd nu(rows);
      Eigen::MatrixXd r = Eigen::MatrixXd::Zero(rows, rows);
      for (size_t k = 0; k < kept.size(); ++k) {
        const coloc::Measurement& m = *kept[k];
        const double th = x_(3 * o);
        const Eigen::Vector2d po = x_.segment<2>(3 * o + 1);
        Eigen::Vector2d pt;
        if (m.target.is_robot()) {
          pt = x_.segment<2>(3 * m.target.index + 1);
        } else {
          pt = cfg_.landmarks.at(m.target.index);
        }
        // h(s) = C(th)^T (pt - po); d/dth C(th)^T = C(th)^T J.
        const Eigen::Matrix2d ct = coloc::rotation(th).transpose();
        Eigen::Matrix2d j;
        j << 0.0, 1.0, -1.0, 0.0;
        h.block<2, 1>(2 * static_cast<int>(k), 3 * o) = ct * j * (pt - po);
        h.block<2, 2>(2 * static_cast<int>(k), 3 * o + 1) = -ct;
        if (m.target.is_robot()) {
          h.block<2, 2>(2 * static_cast<int>(k), 3 * m.target.index + 1) = ct;
        }
        nu.segment<2>(2 * static_cast<int>(k)) = m.value - ct * (pt - po);
        r.block<2, 2>(2 * static_cast<int>(k), 2 * static_cast<int>(k)) = m.noise_cov;
      }
      const Eigen::MatrixXd s = h * p_ * h.transpose() + r;
      const Eigen::MatrixXd gain = p_ * h.transpose() * s.inverse();
      x_ += gain * nu;
      for (int i = 0; i < n; ++i) x_(3 * i) = coloc::wrap_angle(x_(3 * i));
      const Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(3 * n, 3 * n) - gain * h;
      p_ = ikh * p_ * ikh.transpose() + gain * r * gain.transpose();
      p_ = 0.5 * (p_ + p_.transpose()).eval();
    }
  }

  const Eigen::VectorXd& mean() const { return x_; }
  const Eigen::MatrixXd& cov() const { return p_; }

 private:
  coloc::ScenarioConfig cfg_;
  bool drop_relative_;
  Eigen::VectorXd x_;
  Eigen::MatrixXd p_;
};

}  // namespace coloc_tests

#endif
