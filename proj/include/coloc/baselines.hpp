#ifndef COLOC_BASELINES_HPP
#define COLOC_BASELINES_HPP

#include <map>
#include <set>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "coloc/gaussian.hpp"
#include "coloc/models.hpp"

namespace coloc {

enum class AlgorithmId { gs_ci, ls_cen, ls_ci, ls_sci, ls_bda };

const char* algorithm_name(AlgorithmId id);
AlgorithmId algorithm_from_name(const std::string& name);

enum class LinksNeeded { all_to_all, bidirectional_pair, unidirectional, none };

struct CommRequirement {
  AlgorithmId algorithm;
  LinksNeeded links_needed;
};

CommRequirement comm_requirement(AlgorithmId id);

enum class CommEvent { relative_observation, broadcast };

// Point-to-point messages one event consumes.
int comm_cost(AlgorithmId id, CommEvent event, int n_robots);

// Directed links delivered in the current tick, (sender, receiver).
using LinkSet = std::set<std::pair<int, int>>;

// Own pose estimate in (theta, x, y) order.
struct PoseEstimate {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();

  Eigen::Vector2d position() const { return mean.tail<2>(); }
  Eigen::Matrix2d position_cov() const { return cov.bottomRightCorner<2, 2>(); }
};

// Four local-state baselines behind one team-level interface. Each tracks the
// robots' own poses; the harness drives one tick as propagate -> observe.
// Relative-observation updates are gated on the delivered links according to
// each algorithm's communication requirement; landmark updates never need
// communication.
class BaselineTeam {
 public:
  virtual ~BaselineTeam() = default;
  virtual void propagate(const std::vector<OdometryInput>& inputs) = 0;
  virtual void observe(const std::vector<ObservationBatch>& batches,
                       const std::map<int, Eigen::Vector2d>& landmarks,
                       const LinkSet& links) = 0;
  virtual PoseEstimate robot(int i) const = 0;
  virtual int size() const = 0;
};

// Synchronized replicas of the joint EKF over all robot poses; a relative
// observation is applied only when the observer holds a delivered link to
// every other robot, otherwise the whole team skips it.
class LsCenTeam : public BaselineTeam {
 public:
  LsCenTeam(const std::vector<PoseEstimate>& init, NoiseConfig noise);
  void propagate(const std::vector<OdometryInput>& inputs) override;
  void observe(const std::vector<ObservationBatch>& batches,
               const std::map<int, Eigen::Vector2d>& landmarks, const LinkSet& links) override;
  PoseEstimate robot(int i) const override;
  int size() const override { return n_; }

  const Eigen::VectorXd& joint_mean() const { return mean_; }
  const Eigen::MatrixXd& joint_cov() const { return cov_; }

 private:
  int n_;
  NoiseConfig noise_;
  Eigen::VectorXd mean_;  // 3N, blocks (theta, x, y)
  Eigen::MatrixXd cov_;
};

// Each robot keeps only its own pose; a relative observation composes the
// observed robot's communicated estimate with the measurement into a pseudo
// estimate of the observer's position, fused by covariance intersection.
class LsCiTeam : public BaselineTeam {
 public:
  LsCiTeam(const std::vector<PoseEstimate>& init, NoiseConfig noise);
  void propagate(const std::vector<OdometryInput>& inputs) override;
  void observe(const std::vector<ObservationBatch>& batches,
               const std::map<int, Eigen::Vector2d>& landmarks, const LinkSet& links) override;
  PoseEstimate robot(int i) const override;
  int size() const override { return static_cast<int>(est_.size()); }

 private:
  NoiseConfig noise_;
  std::vector<PoseEstimate> est_;
};

// Split covariance intersection: each covariance is kept as an independent
// part plus a dependent part. The split starts fully independent; the
// dependent part accumulates only through fusion events.
class LsSciTeam : public BaselineTeam {
 public:
  LsSciTeam(const std::vector<PoseEstimate>& init, NoiseConfig noise);
  void propagate(const std::vector<OdometryInput>& inputs) override;
  void observe(const std::vector<ObservationBatch>& batches,
               const std::map<int, Eigen::Vector2d>& landmarks, const LinkSet& links) override;
  PoseEstimate robot(int i) const override;
  int size() const override { return static_cast<int>(mean_.size()); }

  Eigen::Matrix3d dependent_cov(int i) const { return dep_[static_cast<size_t>(i)]; }

 private:
  NoiseConfig noise_;
  std::vector<Eigen::Vector3d> mean_;
  std::vector<Eigen::Matrix3d> indep_;
  std::vector<Eigen::Matrix3d> dep_;
};

// Block-diagonal approximation: own pose estimates plus factored
// cross-correlations. A relative observation runs an exact joint update over
// the observer/observed pair (bidirectional exchange) and approximates the
// effect on correlations with third parties.
class LsBdaTeam : public BaselineTeam {
 public:
  LsBdaTeam(const std::vector<PoseEstimate>& init, NoiseConfig noise);
  void propagate(const std::vector<OdometryInput>& inputs) override;
  void observe(const std::vector<ObservationBatch>& batches,
               const std::map<int, Eigen::Vector2d>& landmarks, const LinkSet& links) override;
  PoseEstimate robot(int i) const override;
  int size() const override { return static_cast<int>(est_.size()); }

 private:
  NoiseConfig noise_;
  std::vector<PoseEstimate> est_;
  // factor_[i][j] * factor_[j][i]^T approximates the (i, j) cross-covariance.
  std::vector<std::vector<Eigen::Matrix3d>> factor_;
};

}  // namespace coloc

#endif
