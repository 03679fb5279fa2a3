#ifndef COLOC_GAUSSIAN_HPP
#define COLOC_GAUSSIAN_HPP

#include <vector>

#include <Eigen/Dense>

#include "coloc/common.hpp"

namespace coloc {

enum class Form { moment, information };

// Gaussian estimate in either moment form (mean, covariance) or information
// form (information mean = Sigma^-1 mu, information matrix = Sigma^-1).
// Information form admits zero rows/columns, which encode components with
// infinite variance; moment form refuses them.
class GaussianEstimate {
 public:
  GaussianEstimate() = default;

  static GaussianEstimate moment(Eigen::VectorXd mean, Eigen::MatrixXd covariance);
  static GaussianEstimate information(Eigen::VectorXd info_mean, Eigen::MatrixXd info_matrix);

  Form form() const { return form_; }
  Eigen::Index dim() const { return vec_.size(); }

  const Eigen::VectorXd& mean() const;
  const Eigen::MatrixXd& covariance() const;
  const Eigen::VectorXd& info_mean() const;
  const Eigen::MatrixXd& info_matrix() const;

 private:
  GaussianEstimate(Eigen::VectorXd v, Eigen::MatrixXd m, Form f);

  Eigen::VectorXd vec_;
  Eigen::MatrixXd mat_;
  Form form_ = Form::moment;
};

// Convex CI coefficients: nonnegative, summing to one.
class CIWeights {
 public:
  explicit CIWeights(std::vector<double> weights);
  static CIWeights equal(int n);

  const std::vector<double>& values() const { return weights_; }
  double operator[](int i) const { return weights_[static_cast<size_t>(i)]; }
  int size() const { return static_cast<int>(weights_.size()); }

 private:
  std::vector<double> weights_;
};

enum class WeightStrategy { equal, min_trace };

GaussianEstimate to_information(const GaussianEstimate& est, double eig_floor = kEigFloor);
GaussianEstimate from_information(const GaussianEstimate& est, double eig_floor = kEigFloor);

// Covariance intersection: convex combination of information means and
// information matrices. Inputs must be in information form.
GaussianEstimate ci_fuse(const std::vector<GaussianEstimate>& estimates, const CIWeights& w);

// Weight selection. The fused-trace objective is evaluated in moment form;
// min_trace uses a deterministic grid plus golden-section refinement for two
// estimates and pairwise coordinate descent (capped at 100 sweeps) otherwise.
CIWeights select_ci_weights(const std::vector<GaussianEstimate>& estimates,
                            WeightStrategy strategy);

// Trace of the moment-form covariance of ci_fuse(estimates, w); +inf when the
// fused information matrix is singular.
double fused_trace(const std::vector<GaussianEstimate>& estimates, const CIWeights& w);

// candidate is consistent of reference when means agree within mean_tol and
// the candidate covariance dominates in the PSD order.
bool is_consistent_of(const GaussianEstimate& candidate, const GaussianEstimate& reference,
                      double mean_tol);

}  // namespace coloc

#endif
