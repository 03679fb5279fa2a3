#ifndef COLOC_GSCI_HPP
#define COLOC_GSCI_HPP

#include <map>
#include <vector>

#include <Eigen/Dense>

#include "coloc/gaussian.hpp"
#include "coloc/models.hpp"

namespace coloc {

// Per-other-robot motion-noise policy. The analysis bound covers both the
// unknown input and the orientation-estimate error; the replay policy uses
// only the commanded-speed variance.
enum class QuPolicy { analysis_bound, sigma_u_only };

// Robot i's estimate of the whole team: positions of every robot plus its own
// orientation, ordered [p_0 .. (theta_i, p_i) .. p_{N-1}], dimension 2N+1.
struct GlobalState {
  int robot_id = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;

  int n_robots() const { return static_cast<int>((mean.size() - 1) / 2); }
};

// Index of theta_i inside robot i's state vector.
int theta_index(int robot_id);
// Start index of robot j's position block inside robot i's state vector.
int position_index(int robot_id, int j);

GlobalState make_global_state(int robot_id, int n_robots, const RobotPose& own,
                              const std::vector<Eigen::Vector2d>& positions,
                              const Eigen::MatrixXd& covariance);

struct CommMessage {
  int sender = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
  double time = 0.0;
};

// Removes the sender's orientation entry: row/column deletion at the sender's
// theta index. Result is the common 2N position estimate in moment form.
GaussianEstimate strip_orientation(const CommMessage& msg);

// Re-expresses a 2N position estimate in the receiver's 2N+1 layout by
// inserting a zero information row/column at the receiver's theta index
// (infinite variance: the message carries nothing about theta_i).
GaussianEstimate inject_dummy_orientation(const GaussianEstimate& est, int receiver);

struct GsCiConfig {
  NoiseConfig noise;
  QuPolicy qu_policy = QuPolicy::analysis_bound;
};

GlobalState time_propagate(const GlobalState& state, const OdometryInput& own_input,
                           const GsCiConfig& cfg);

GlobalState observation_update(const GlobalState& state, const ObservationBatch& batch,
                               const std::map<int, Eigen::Vector2d>& landmarks);

// Weight layout: one entry per message followed by the self weight (last).
GlobalState communication_update(const GlobalState& state, const std::vector<CommMessage>& msgs,
                                 const CIWeights& w);

RobotPose own_pose(const GlobalState& state);
std::pair<Eigen::Vector2d, Eigen::Matrix2d> position_of(const GlobalState& state, int j);

// Thin stateful wrapper used by the simulation harness.
class GsCiFilter {
 public:
  GsCiFilter(GlobalState init, GsCiConfig cfg) : state_(std::move(init)), cfg_(std::move(cfg)) {}

  const GlobalState& state() const { return state_; }
  void propagate(const OdometryInput& own) { state_ = time_propagate(state_, own, cfg_); }
  void observe(const ObservationBatch& batch, const std::map<int, Eigen::Vector2d>& landmarks) {
    state_ = observation_update(state_, batch, landmarks);
  }
  void communicate(const std::vector<CommMessage>& msgs, const CIWeights& w) {
    state_ = communication_update(state_, msgs, w);
  }

 private:
  GlobalState state_;
  GsCiConfig cfg_;
};

// Position-only variant for the stationary-configuration analysis: every
// robot estimates the same 2N stacked position state; orientation estimates
// arrive externally with variance bounded by sigma_theta_sq. Communication
// degenerates to plain CI.
struct AnalysisState {
  int robot_id = 0;
  Eigen::VectorXd mean;        // 2N
  Eigen::MatrixXd covariance;  // 2N x 2N
};

AnalysisState analysis_propagate(const AnalysisState& state, double own_speed, double theta_est,
                                 double dt, const NoiseConfig& noise);

AnalysisState analysis_observe(const AnalysisState& state, const ObservationBatch& batch,
                               const std::map<int, Eigen::Vector2d>& landmarks, double theta_est,
                               const NoiseConfig& noise);

AnalysisState analysis_communicate(const AnalysisState& state,
                                   const std::vector<AnalysisState>& msgs, const CIWeights& w);

}  // namespace coloc

#endif
