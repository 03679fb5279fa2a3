#include "coloc/baselines.hpp"

#include <cmath>
#include <functional>
#include <limits>

namespace coloc {

const char* algorithm_name(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::gs_ci: return "gs-ci";
    case AlgorithmId::ls_cen: return "ls-cen";
    case AlgorithmId::ls_ci: return "ls-ci";
    case AlgorithmId::ls_sci: return "ls-sci";
    case AlgorithmId::ls_bda: return "ls-bda";
  }
  return "?";
}

AlgorithmId algorithm_from_name(const std::string& name) {
  if (name == "gs-ci") return AlgorithmId::gs_ci;
  if (name == "ls-cen") return AlgorithmId::ls_cen;
  if (name == "ls-ci") return AlgorithmId::ls_ci;
  if (name == "ls-sci") return AlgorithmId::ls_sci;
  if (name == "ls-bda") return AlgorithmId::ls_bda;
  throw ConfigError("unknown algorithm '" + name + "'");
}

CommRequirement comm_requirement(AlgorithmId id) {
  switch (id) {
    case AlgorithmId::ls_cen: return {id, LinksNeeded::all_to_all};
    case AlgorithmId::ls_bda: return {id, LinksNeeded::bidirectional_pair};
    case AlgorithmId::ls_ci:
    case AlgorithmId::ls_sci: return {id, LinksNeeded::unidirectional};
    case AlgorithmId::gs_ci: return {id, LinksNeeded::none};
  }
  return {id, LinksNeeded::none};
}

int comm_cost(AlgorithmId id, CommEvent event, int n_robots) {
  if (event == CommEvent::broadcast) return n_robots - 1;
  switch (id) {
    case AlgorithmId::ls_cen: return n_robots - 1;
    case AlgorithmId::ls_bda: return 2;
    case AlgorithmId::ls_ci:
    case AlgorithmId::ls_sci: return 1;
    case AlgorithmId::gs_ci: return 0;
  }
  return 0;
}

namespace {

// Own-pose propagation Jacobians in (theta, x, y) order.
Eigen::Matrix3d pose_f(double theta, double v, double dt) {
  Eigen::Matrix3d f = Eigen::Matrix3d::Identity();
  f(1, 0) = -v * dt * std::sin(theta);
  f(2, 0) = v * dt * std::cos(theta);
  return f;
}

Eigen::Matrix<double, 3, 2> pose_g(double theta, double dt) {
  Eigen::Matrix<double, 3, 2> g;
  g << 0.0, dt,
       dt * std::cos(theta), 0.0,
       dt * std::sin(theta), 0.0;
  return g;
}

Eigen::Vector3d pose_step(const Eigen::Vector3d& q, const OdometryInput& u) {
  Eigen::Vector3d next = q;
  next(1) += u.v * u.dt * std::cos(q(0));
  next(2) += u.v * u.dt * std::sin(q(0));
  next(0) = wrap_angle(q(0) + u.omega * u.dt);
  return next;
}

// Measurement rows over (theta_obs, p_obs [, p_target]); innovation wraps the
// bearing component.
struct PoseRows {
  Eigen::Matrix<double, 2, 3> d_obs;     // wrt (theta, x, y) of observer
  Eigen::Matrix2d d_target;              // wrt target position (robot targets)
  Eigen::Vector2d innovation;
};

PoseRows measurement_rows(const Measurement& meas, const Eigen::Vector3d& obs_q,
                          const Eigen::Vector2d& target_pos) {
  PoseRows rows;
  const Eigen::Vector2d obs_pos = obs_q.tail<2>();
  if (meas.kind == MeasurementKind::relative_xy) {
    const RelObsJacobian jac = relative_obs_jacobian(obs_q(0), obs_pos, target_pos);
    rows.d_obs.col(0) = jac.d_theta;
    rows.d_obs.rightCols<2>() = jac.d_obs_pos;
    rows.d_target = jac.d_target_pos;
    rows.innovation = meas.value - predict_relative(obs_q(0), obs_pos, target_pos);
  } else {
    const BearingRangeJacobian jac = bearing_range_jacobian(obs_pos, target_pos);
    rows.d_obs.col(0) = jac.d_theta;
    rows.d_obs.rightCols<2>() = jac.d_obs_pos;
    rows.d_target = jac.d_target_pos;
    const Eigen::Vector2d pred = predict_bearing_range(obs_q(0), obs_pos, target_pos);
    rows.innovation(0) = wrap_angle(meas.value(0) - pred(0));
    rows.innovation(1) = meas.value(1) - pred(1);
  }
  return rows;
}

Eigen::Vector2d landmark_position(const std::map<int, Eigen::Vector2d>& landmarks, int id) {
  auto it = landmarks.find(id);
  if (it == landmarks.end()) throw UnknownTarget("landmark id " + std::to_string(id));
  return it->second;
}

bool observer_can_broadcast(const LinkSet& links, int observer, int n) {
  for (int k = 0; k < n; ++k) {
    if (k == observer) continue;
    if (links.count({observer, k}) == 0) return false;
  }
  return true;
}

double golden_min_scalar(const std::function<double(double)>& f, double lo, double hi) {
  constexpr double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 60; ++it) {
    if (f1 < f2) {
      b = x2; x2 = x1; f2 = f1;
      x1 = b - phi * (b - a);
      f1 = f(x1);
    } else {
      a = x1; x1 = x2; f1 = f2;
      x2 = a + phi * (b - a);
      f2 = f(x2);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace

// ---------------------------------------------------------------------------
// LS-Cen

LsCenTeam::LsCenTeam(const std::vector<PoseEstimate>& init, NoiseConfig noise)
    : n_(static_cast<int>(init.size())), noise_(std::move(noise)) {
  mean_ = Eigen::VectorXd::Zero(3 * n_);
  cov_ = Eigen::MatrixXd::Zero(3 * n_, 3 * n_);
  for (int i = 0; i < n_; ++i) {
    mean_.segment<3>(3 * i) = init[static_cast<size_t>(i)].mean;
    cov_.block<3, 3>(3 * i, 3 * i) = init[static_cast<size_t>(i)].cov;
  }
}

void LsCenTeam::propagate(const std::vector<OdometryInput>& inputs) {
  if (static_cast<int>(inputs.size()) != n_) throw DimensionMismatch("one input per robot");
  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(3 * n_, 3 * n_);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(3 * n_, 3 * n_);
  for (int i = 0; i < n_; ++i) {
    const OdometryInput& u = inputs[static_cast<size_t>(i)];
    const double theta = mean_(3 * i);
    f.block<3, 3>(3 * i, 3 * i) = pose_f(theta, u.v, u.dt);
    const auto g = pose_g(theta, u.dt);
    q.block<3, 3>(3 * i, 3 * i) = g * noise_.q_w * g.transpose();
    mean_.segment<3>(3 * i) = pose_step(mean_.segment<3>(3 * i), u);
  }
  cov_ = clamp_psd(f * cov_ * f.transpose() + q);
}

void LsCenTeam::observe(const std::vector<ObservationBatch>& batches,
                        const std::map<int, Eigen::Vector2d>& landmarks, const LinkSet& links) {
  for (const ObservationBatch& batch : batches) {
    if (batch.measurements.empty()) continue;
    const int o = batch.observer;
    const bool relative_ok = observer_can_broadcast(links, o, n_);

    std::vector<const Measurement*> kept;
    for (const Measurement& m : batch.measurements) {
      if (m.target.is_landmark() || relative_ok) kept.push_back(&m);
    }
    if (kept.empty()) continue;

    const int m = static_cast<int>(kept.size());
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(2 * m, 3 * n_);
    Eigen::VectorXd nu(2 * m);
    Eigen::MatrixXd r = Eigen::MatrixXd::Zero(2 * m, 2 * m);
    for (int k = 0; k < m; ++k) {
      const Measurement& meas = *kept[static_cast<size_t>(k)];
      Eigen::Vector2d target_pos;
      int target_col = -1;
      if (meas.target.is_robot()) {
        target_col = 3 * meas.target.index + 1;
        target_pos = mean_.segment<2>(target_col);
      } else {
        target_pos = landmark_position(landmarks, meas.target.index);
      }
      const PoseRows rows = measurement_rows(meas, mean_.segment<3>(3 * o), target_pos);
      h.block<2, 3>(2 * k, 3 * o) = rows.d_obs;
      if (target_col >= 0) h.block<2, 2>(2 * k, target_col) = rows.d_target;
      nu.segment<2>(2 * k) = rows.innovation;
      r.block<2, 2>(2 * k, 2 * k) = meas.noise_cov;
    }

    Eigen::MatrixXd s = h * cov_ * h.transpose() + r;
    auto s_inv = try_spd_inverse(s);
    if (!s_inv) throw SingularInnovation();
    const Eigen::MatrixXd gain = cov_ * h.transpose() * *s_inv;
    mean_ += gain * nu;
    for (int i = 0; i < n_; ++i) mean_(3 * i) = wrap_angle(mean_(3 * i));
    const Eigen::MatrixXd ikh =
        Eigen::MatrixXd::Identity(3 * n_, 3 * n_) - gain * h;
    cov_ = clamp_psd(ikh * cov_ * ikh.transpose() + gain * r * gain.transpose());
  }
}

PoseEstimate LsCenTeam::robot(int i) const {
  if (i < 0 || i >= n_) throw IndexOutOfRange("robot id");
  PoseEstimate e;
  e.mean = mean_.segment<3>(3 * i);
  e.cov = cov_.block<3, 3>(3 * i, 3 * i);
  return e;
}

// ---------------------------------------------------------------------------
// LS-CI

LsCiTeam::LsCiTeam(const std::vector<PoseEstimate>& init, NoiseConfig noise)
    : noise_(std::move(noise)), est_(init) {}

void LsCiTeam::propagate(const std::vector<OdometryInput>& inputs) {
  if (inputs.size() != est_.size()) throw DimensionMismatch("one input per robot");
  for (size_t i = 0; i < est_.size(); ++i) {
    const OdometryInput& u = inputs[i];
    PoseEstimate& e = est_[i];
    const Eigen::Matrix3d f = pose_f(e.mean(0), u.v, u.dt);
    const auto g = pose_g(e.mean(0), u.dt);
    e.mean = pose_step(e.mean, u);
    e.cov = clamp_psd(f * e.cov * f.transpose() + g * noise_.q_w * g.transpose());
  }
}

namespace {

// Plain EKF update of a single pose estimate with one measurement of a known
// landmark.
void pose_landmark_update(PoseEstimate& e, const Measurement& meas,
                          const Eigen::Vector2d& landmark_pos) {
  const PoseRows rows = measurement_rows(meas, e.mean, landmark_pos);
  const Eigen::Matrix2d s = rows.d_obs * e.cov * rows.d_obs.transpose() + meas.noise_cov;
  auto s_inv = try_spd_inverse(s);
  if (!s_inv) throw SingularInnovation();
  const Eigen::Matrix<double, 3, 2> gain = e.cov * rows.d_obs.transpose() * *s_inv;
  e.mean += gain * rows.innovation;
  e.mean(0) = wrap_angle(e.mean(0));
  const Eigen::Matrix3d ikh = Eigen::Matrix3d::Identity() - gain * rows.d_obs;
  e.cov = clamp_psd(ikh * e.cov * ikh.transpose() +
                    gain * meas.noise_cov * gain.transpose());
}

// Pseudo-measurement of the observer's position composed from the observed
// robot's estimate and a relative measurement: z = p_target - C(theta) o.
struct PseudoPosition {
  Eigen::Vector2d z;
  Eigen::Matrix2d cov;  // target position cov + rotated measurement noise + own-theta term
};

PseudoPosition compose_pseudo(const Measurement& rel_xy, const Eigen::Vector3d& own_mean,
                              double own_theta_var, const Eigen::Vector2d& target_pos_mean,
                              const Eigen::Matrix2d& target_pos_cov) {
  const Eigen::Matrix2d c = rotation(own_mean(0));
  PseudoPosition p;
  p.z = target_pos_mean - c * rel_xy.value;
  const Eigen::Vector2d u = c * skew_j().transpose() * rel_xy.value;
  p.cov = target_pos_cov + c * rel_xy.noise_cov * c.transpose() +
          own_theta_var * u * u.transpose();
  return p;
}

}  // namespace

void LsCiTeam::observe(const std::vector<ObservationBatch>& batches,
                       const std::map<int, Eigen::Vector2d>& landmarks, const LinkSet& links) {
  // Messages carry the senders' estimates as of the start of the phase.
  const std::vector<PoseEstimate> snapshot = est_;
  for (const ObservationBatch& batch : batches) {
    const int o = batch.observer;
    PoseEstimate& e = est_[static_cast<size_t>(o)];
    for (const Measurement& meas : batch.measurements) {
      if (meas.target.is_landmark()) {
        pose_landmark_update(e, meas, landmark_position(landmarks, meas.target.index));
        continue;
      }
      const int j = meas.target.index;
      if (links.count({j, o}) == 0) continue;  // target's estimate never arrived

      const Measurement rel = meas.kind == MeasurementKind::bearing_range
                                  ? bearing_range_to_relative(meas)
                                  : meas;
      const PoseEstimate& target = snapshot[static_cast<size_t>(j)];
      const PseudoPosition pseudo =
          compose_pseudo(rel, e.mean, e.cov(0, 0), target.position(), target.position_cov());

      // CI fusion of the own pose with the position-only pseudo estimate,
      // whose information matrix has a zero orientation row.
      auto rz_inv = try_spd_inverse(pseudo.cov);
      if (!rz_inv) throw SingularInnovation();
      Eigen::Matrix3d pseudo_info = Eigen::Matrix3d::Zero();
      pseudo_info.bottomRightCorner<2, 2>() = *rz_inv;
      Eigen::Vector3d pseudo_info_mean = Eigen::Vector3d::Zero();
      pseudo_info_mean.tail<2>() = *rz_inv * pseudo.z;

      const GaussianEstimate own_info =
          to_information(GaussianEstimate::moment(e.mean, e.cov));
      const GaussianEstimate pseudo_est =
          GaussianEstimate::information(pseudo_info_mean, pseudo_info);
      const CIWeights w =
          select_ci_weights({own_info, pseudo_est}, WeightStrategy::min_trace);
      const GaussianEstimate fused = from_information(ci_fuse({own_info, pseudo_est}, w));
      e.mean = fused.mean();
      e.mean(0) = wrap_angle(e.mean(0));
      e.cov = clamp_psd(fused.covariance());
    }
  }
}

PoseEstimate LsCiTeam::robot(int i) const { return est_.at(static_cast<size_t>(i)); }

// ---------------------------------------------------------------------------
// LS-SCI

LsSciTeam::LsSciTeam(const std::vector<PoseEstimate>& init, NoiseConfig noise)
    : noise_(std::move(noise)) {
  for (const PoseEstimate& e : init) {
    mean_.push_back(e.mean);
    indep_.push_back(e.cov);
    dep_.push_back(Eigen::Matrix3d::Zero());
  }
}

void LsSciTeam::propagate(const std::vector<OdometryInput>& inputs) {
  if (inputs.size() != mean_.size()) throw DimensionMismatch("one input per robot");
  for (size_t i = 0; i < mean_.size(); ++i) {
    const OdometryInput& u = inputs[i];
    const Eigen::Matrix3d f = pose_f(mean_[i](0), u.v, u.dt);
    const auto g = pose_g(mean_[i](0), u.dt);
    mean_[i] = pose_step(mean_[i], u);
    indep_[i] = clamp_psd(f * indep_[i] * f.transpose() + g * noise_.q_w * g.transpose());
    dep_[i] = clamp_psd(f * dep_[i] * f.transpose());
  }
}

void LsSciTeam::observe(const std::vector<ObservationBatch>& batches,
                        const std::map<int, Eigen::Vector2d>& landmarks, const LinkSet& links) {
  const auto snapshot_mean = mean_;
  const auto snapshot_indep = indep_;
  const auto snapshot_dep = dep_;

  for (const ObservationBatch& batch : batches) {
    const int o = batch.observer;
    const size_t oi = static_cast<size_t>(o);
    for (const Measurement& meas : batch.measurements) {
      if (meas.target.is_landmark()) {
        // Independent measurement: Kalman update with the total covariance,
        // Joseph on both parts, fresh noise lands in the independent part.
        const Eigen::Vector2d lm = landmark_position(landmarks, meas.target.index);
        const PoseRows rows = measurement_rows(meas, mean_[oi], lm);
        const Eigen::Matrix3d total = indep_[oi] + dep_[oi];
        const Eigen::Matrix2d s =
            rows.d_obs * total * rows.d_obs.transpose() + meas.noise_cov;
        auto s_inv = try_spd_inverse(s);
        if (!s_inv) throw SingularInnovation();
        const Eigen::Matrix<double, 3, 2> gain = total * rows.d_obs.transpose() * *s_inv;
        mean_[oi] += gain * rows.innovation;
        mean_[oi](0) = wrap_angle(mean_[oi](0));
        const Eigen::Matrix3d ikh = Eigen::Matrix3d::Identity() - gain * rows.d_obs;
        indep_[oi] = clamp_psd(ikh * indep_[oi] * ikh.transpose() +
                               gain * meas.noise_cov * gain.transpose());
        dep_[oi] = clamp_psd(ikh * dep_[oi] * ikh.transpose());
        continue;
      }

      const int j = meas.target.index;
      if (links.count({j, o}) == 0) continue;
      const Measurement rel = meas.kind == MeasurementKind::bearing_range
                                  ? bearing_range_to_relative(meas)
                                  : meas;
      const Eigen::Matrix2d c = rotation(mean_[oi](0));
      const size_t ji = static_cast<size_t>(j);
      const Eigen::Vector2d z =
          snapshot_mean[ji].tail<2>() - c * rel.value;
      const Eigen::Vector2d u = c * skew_j().transpose() * rel.value;
      const double own_theta_var = (indep_[oi] + dep_[oi])(0, 0);
      const Eigen::Matrix2d z_indep = snapshot_indep[ji].bottomRightCorner<2, 2>() +
                                      c * rel.noise_cov * c.transpose() +
                                      own_theta_var * u * u.transpose();
      const Eigen::Matrix2d z_dep = snapshot_dep[ji].bottomRightCorner<2, 2>();

      Eigen::Matrix<double, 2, 3> h = Eigen::Matrix<double, 2, 3>::Zero();
      h.rightCols<2>() = Eigen::Matrix2d::Identity();

      // Split-CI measurement update: inflate the dependent parts by the
      // convex weight, run the Kalman step, recover the posterior split.
      auto apply = [&](double omega, Eigen::Vector3d& mean_out, Eigen::Matrix3d& indep_out,
                       Eigen::Matrix3d& dep_out) -> double {
        const Eigen::Matrix3d p1 = dep_[oi] / omega + indep_[oi];
        const Eigen::Matrix2d rz = z_dep / (1.0 - omega) + z_indep;
        const Eigen::Matrix2d s = h * p1 * h.transpose() + rz;
        auto s_inv = try_spd_inverse(s);
        if (!s_inv) return std::numeric_limits<double>::infinity();
        const Eigen::Matrix<double, 3, 2> gain = p1 * h.transpose() * *s_inv;
        const Eigen::Matrix3d ikh = Eigen::Matrix3d::Identity() - gain * h;
        const Eigen::Matrix3d total = ikh * p1;
        mean_out = mean_[oi] + gain * (z - h * mean_[oi]);
        mean_out(0) = wrap_angle(mean_out(0));
        indep_out = ikh * indep_[oi] * ikh.transpose() + gain * z_indep * gain.transpose();
        dep_out = symmetrize(total) - symmetrize(indep_out);
        return total.trace();
      };

      Eigen::Vector3d best_mean;
      Eigen::Matrix3d best_indep, best_dep;
      const double omega = golden_min_scalar(
          [&](double w) {
            Eigen::Vector3d m;
            Eigen::Matrix3d pi, pd;
            return apply(w, m, pi, pd);
          },
          1e-6, 1.0 - 1e-6);
      if (!std::isfinite(apply(omega, best_mean, best_indep, best_dep))) continue;
      mean_[oi] = best_mean;
      indep_[oi] = clamp_psd(best_indep, 1e-6);
      dep_[oi] = clamp_psd(best_dep, 1e-6);
    }
  }
}

PoseEstimate LsSciTeam::robot(int i) const {
  PoseEstimate e;
  e.mean = mean_.at(static_cast<size_t>(i));
  e.cov = indep_.at(static_cast<size_t>(i)) + dep_.at(static_cast<size_t>(i));
  return e;
}

// ---------------------------------------------------------------------------
// LS-BDA

LsBdaTeam::LsBdaTeam(const std::vector<PoseEstimate>& init, NoiseConfig noise)
    : noise_(std::move(noise)), est_(init) {
  factor_.assign(est_.size(), std::vector<Eigen::Matrix3d>(
                                  est_.size(), Eigen::Matrix3d::Zero()));
}

void LsBdaTeam::propagate(const std::vector<OdometryInput>& inputs) {
  if (inputs.size() != est_.size()) throw DimensionMismatch("one input per robot");
  for (size_t i = 0; i < est_.size(); ++i) {
    const OdometryInput& u = inputs[i];
    PoseEstimate& e = est_[i];
    const Eigen::Matrix3d f = pose_f(e.mean(0), u.v, u.dt);
    const auto g = pose_g(e.mean(0), u.dt);
    e.mean = pose_step(e.mean, u);
    e.cov = clamp_psd(f * e.cov * f.transpose() + g * noise_.q_w * g.transpose());
    for (size_t j = 0; j < est_.size(); ++j) {
      if (j != i) factor_[i][j] = f * factor_[i][j];
    }
  }
}

void LsBdaTeam::observe(const std::vector<ObservationBatch>& batches,
                        const std::map<int, Eigen::Vector2d>& landmarks, const LinkSet& links) {
  for (const ObservationBatch& batch : batches) {
    const int o = batch.observer;
    const size_t oi = static_cast<size_t>(o);
    for (const Measurement& meas : batch.measurements) {
      if (meas.target.is_landmark()) {
        PoseEstimate& e = est_[oi];
        const Eigen::Vector2d lm = landmark_position(landmarks, meas.target.index);
        const PoseRows rows = measurement_rows(meas, e.mean, lm);
        const Eigen::Matrix2d s =
            rows.d_obs * e.cov * rows.d_obs.transpose() + meas.noise_cov;
        auto s_inv = try_spd_inverse(s);
        if (!s_inv) throw SingularInnovation();
        const Eigen::Matrix<double, 3, 2> gain = e.cov * rows.d_obs.transpose() * *s_inv;
        e.mean += gain * rows.innovation;
        e.mean(0) = wrap_angle(e.mean(0));
        const Eigen::Matrix3d ikh = Eigen::Matrix3d::Identity() - gain * rows.d_obs;
        e.cov = clamp_psd(ikh * e.cov * ikh.transpose() +
                          gain * meas.noise_cov * gain.transpose());
        for (size_t k = 0; k < est_.size(); ++k) {
          if (k != oi) factor_[oi][k] = ikh * factor_[oi][k];
        }
        continue;
      }

      const int j = meas.target.index;
      const size_t ji = static_cast<size_t>(j);
      if (links.count({o, j}) == 0 || links.count({j, o}) == 0) continue;

      // Exact joint update over the pair, factored cross-covariance.
      Eigen::Matrix<double, 6, 6> joint = Eigen::Matrix<double, 6, 6>::Zero();
      joint.topLeftCorner<3, 3>() = est_[oi].cov;
      joint.bottomRightCorner<3, 3>() = est_[ji].cov;
      joint.topRightCorner<3, 3>() = factor_[oi][ji] * factor_[ji][oi].transpose();
      joint.bottomLeftCorner<3, 3>() = joint.topRightCorner<3, 3>().transpose();

      const PoseRows rows = measurement_rows(meas, est_[oi].mean, est_[ji].mean.tail<2>());
      Eigen::Matrix<double, 2, 6> h = Eigen::Matrix<double, 2, 6>::Zero();
      h.leftCols<3>() = rows.d_obs;
      h.block<2, 2>(0, 4) = rows.d_target;

      const Eigen::Matrix2d s = h * joint * h.transpose() + meas.noise_cov;
      auto s_inv = try_spd_inverse(s);
      if (!s_inv) continue;  // approximation made the pair innovation degenerate
      const Eigen::Matrix<double, 6, 2> gain = joint * h.transpose() * *s_inv;
      const Eigen::Matrix<double, 6, 1> delta = gain * rows.innovation;
      const Eigen::Matrix<double, 6, 6> ikh =
          Eigen::Matrix<double, 6, 6>::Identity() - gain * h;
      const Eigen::Matrix<double, 6, 6> joint_post =
          ikh * joint * ikh.transpose() + gain * meas.noise_cov * gain.transpose();

      est_[oi].mean += delta.head<3>();
      est_[ji].mean += delta.tail<3>();
      est_[oi].mean(0) = wrap_angle(est_[oi].mean(0));
      est_[ji].mean(0) = wrap_angle(est_[ji].mean(0));
      est_[oi].cov = clamp_psd(joint_post.topLeftCorner<3, 3>(), 1e-6);
      est_[ji].cov = clamp_psd(joint_post.bottomRightCorner<3, 3>(), 1e-6);

      // Pair correlation becomes exact again; third-party factors see only
      // each robot's local part of the update.
      factor_[oi][ji] = joint_post.topRightCorner<3, 3>();
      factor_[ji][oi] = Eigen::Matrix3d::Identity();
      for (size_t k = 0; k < est_.size(); ++k) {
        if (k == oi || k == ji) continue;
        factor_[oi][k] = ikh.topLeftCorner<3, 3>() * factor_[oi][k];
        factor_[ji][k] = ikh.bottomRightCorner<3, 3>() * factor_[ji][k];
      }
    }
  }
}

PoseEstimate LsBdaTeam::robot(int i) const { return est_.at(static_cast<size_t>(i)); }

}  // namespace coloc
