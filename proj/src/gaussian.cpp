#include "coloc/gaussian.hpp"

#include <cmath>
#include <functional>
#include <limits>
#include <numeric>

namespace coloc {

namespace {

void require_square(const Eigen::VectorXd& v, const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols() || m.rows() != v.size()) {
    throw DimensionMismatch("estimate matrix/vector dimensions disagree");
  }
}

}  // namespace

std::optional<Eigen::MatrixXd> try_spd_inverse(const Eigen::MatrixXd& m, double eig_floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(m));
  if (es.info() != Eigen::Success || es.eigenvalues().minCoeff() < eig_floor) {
    return std::nullopt;
  }
  Eigen::VectorXd inv = es.eigenvalues().cwiseInverse();
  return symmetrize(es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose());
}

Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& sym, double tolerance) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrize(sym));
  double lo = es.eigenvalues().minCoeff();
  if (lo < -tolerance) {
    throw NumericalError("matrix eigenvalue " + std::to_string(lo) + " below PSD tolerance");
  }
  if (lo >= 0.0) {
    return symmetrize(sym);
  }
  Eigen::VectorXd fixed = es.eigenvalues().cwiseMax(0.0);
  return symmetrize(es.eigenvectors() * fixed.asDiagonal() * es.eigenvectors().transpose());
}

GaussianEstimate::GaussianEstimate(Eigen::VectorXd v, Eigen::MatrixXd m, Form f)
    : vec_(std::move(v)), mat_(std::move(m)), form_(f) {}

GaussianEstimate GaussianEstimate::moment(Eigen::VectorXd mean, Eigen::MatrixXd covariance) {
  require_square(mean, covariance);
  return GaussianEstimate(std::move(mean), symmetrize(covariance), Form::moment);
}

GaussianEstimate GaussianEstimate::information(Eigen::VectorXd info_mean,
                                               Eigen::MatrixXd info_matrix) {
  require_square(info_mean, info_matrix);
  return GaussianEstimate(std::move(info_mean), symmetrize(info_matrix), Form::information);
}

const Eigen::VectorXd& GaussianEstimate::mean() const {
  if (form_ != Form::moment) throw Error("mean() requires moment form");
  return vec_;
}

const Eigen::MatrixXd& GaussianEstimate::covariance() const {
  if (form_ != Form::moment) throw Error("covariance() requires moment form");
  return mat_;
}

const Eigen::VectorXd& GaussianEstimate::info_mean() const {
  if (form_ != Form::information) throw Error("info_mean() requires information form");
  return vec_;
}

const Eigen::MatrixXd& GaussianEstimate::info_matrix() const {
  if (form_ != Form::information) throw Error("info_matrix() requires information form");
  return mat_;
}

CIWeights::CIWeights(std::vector<double> weights) : weights_(std::move(weights)) {
  if (weights_.empty()) throw std::invalid_argument("empty CI weight vector");
  double sum = 0.0;
  for (double w : weights_) {
    if (w < 0.0) throw std::invalid_argument("negative CI weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-12) {
    throw std::invalid_argument("CI weights must sum to one");
  }
}

CIWeights CIWeights::equal(int n) {
  std::vector<double> w(static_cast<size_t>(n), 1.0 / n);
  // Exact unit sum regardless of rounding in 1/n.
  w.back() = 1.0 - std::accumulate(w.begin(), w.end() - 1, 0.0);
  return CIWeights(std::move(w));
}

GaussianEstimate to_information(const GaussianEstimate& est, double eig_floor) {
  auto inv = try_spd_inverse(est.covariance(), eig_floor);
  if (!inv) throw SingularCovariance();
  return GaussianEstimate::information(*inv * est.mean(), *inv);
}

GaussianEstimate from_information(const GaussianEstimate& est, double eig_floor) {
  auto cov = try_spd_inverse(est.info_matrix(), eig_floor);
  if (!cov) throw SingularInformation();
  return GaussianEstimate::moment(*cov * est.info_mean(), *cov);
}

GaussianEstimate ci_fuse(const std::vector<GaussianEstimate>& estimates, const CIWeights& w) {
  if (estimates.empty()) throw DimensionMismatch("ci_fuse with no estimates");
  if (w.size() != static_cast<int>(estimates.size())) {
    throw WeightMismatch();
  }
  const Eigen::Index dim = estimates.front().dim();
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
  Eigen::VectorXd info_mean = Eigen::VectorXd::Zero(dim);
  for (size_t i = 0; i < estimates.size(); ++i) {
    const auto& est = estimates[i];
    if (est.dim() != dim) throw DimensionMismatch("ci_fuse estimate dimensions disagree");
    info += w[static_cast<int>(i)] * est.info_matrix();
    info_mean += w[static_cast<int>(i)] * est.info_mean();
  }
  if (min_eigenvalue(info) < kEigFloor) {
    throw DegenerateFusion();
  }
  return GaussianEstimate::information(std::move(info_mean), std::move(info));
}

double fused_trace(const std::vector<GaussianEstimate>& estimates, const CIWeights& w) {
  const Eigen::Index dim = estimates.front().dim();
  Eigen::MatrixXd info = Eigen::MatrixXd::Zero(dim, dim);
  for (size_t i = 0; i < estimates.size(); ++i) {
    info += w[static_cast<int>(i)] * estimates[i].info_matrix();
  }
  auto cov = try_spd_inverse(info);
  if (!cov) return std::numeric_limits<double>::infinity();
  return cov->trace();
}

namespace {

// Trace of the fused covariance for two estimates as a function of the first
// weight.
double pair_trace(const std::vector<GaussianEstimate>& ests, double c) {
  return fused_trace(ests, CIWeights({c, 1.0 - c}));
}

// Golden-section minimization on [lo, hi]; deterministic fixed iteration count.
double golden_min(const std::function<double(double)>& f, double lo, double hi) {
  constexpr double phi = 0.6180339887498949;
  double a = lo, b = hi;
  double x1 = b - phi * (b - a);
  double x2 = a + phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  for (int it = 0; it < 80; ++it) {
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

CIWeights min_trace_pair(const std::vector<GaussianEstimate>& ests) {
  // Coarse grid picks the basin, golden section refines inside it.
  const int grid = 100;
  double best_c = 0.5, best_f = std::numeric_limits<double>::infinity();
  double worst_f = -std::numeric_limits<double>::infinity();
  for (int k = 0; k <= grid; ++k) {
    double c = static_cast<double>(k) / grid;
    double f = pair_trace(ests, c);
    if (f < best_f) { best_f = f; best_c = c; }
    if (std::isfinite(f) && f > worst_f) worst_f = f;
  }
  if (worst_f - best_f <= 1e-12 * (1.0 + std::abs(best_f))) {
    return CIWeights({0.5, 0.5});  // flat objective: symmetric tie-break
  }
  double lo = std::max(0.0, best_c - 1.0 / grid);
  double hi = std::min(1.0, best_c + 1.0 / grid);
  double c = golden_min([&](double x) { return pair_trace(ests, x); }, lo, hi);
  if (pair_trace(ests, best_c) < pair_trace(ests, c)) c = best_c;
  return CIWeights({c, 1.0 - c});
}

CIWeights min_trace_descent(const std::vector<GaussianEstimate>& ests) {
  const int n = static_cast<int>(ests.size());
  std::vector<double> w(static_cast<size_t>(n), 1.0 / n);
  // Pairwise transfers keep the iterate on the simplex without projection.
  for (int sweep = 0; sweep < 100; ++sweep) {
    double moved = 0.0;
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        double total = w[a] + w[b];
        if (total <= 0.0) continue;
        auto eval = [&](double t) {
          std::vector<double> cand = w;
          cand[a] = t * total;
          cand[b] = (1.0 - t) * total;
          double sum = std::accumulate(cand.begin(), cand.end(), 0.0);
          for (double& x : cand) x /= sum;
          return fused_trace(ests, CIWeights(cand));
        };
        double t = golden_min(eval, 0.0, 1.0);
        double before = w[a];
        if (eval(t) < eval(w[a] / total)) {
          w[a] = t * total;
          w[b] = total - w[a];
        }
        moved += std::abs(w[a] - before);
      }
    }
    if (moved < 1e-12) break;
  }
  double sum = std::accumulate(w.begin(), w.end(), 0.0);
  for (double& x : w) x /= sum;
  return CIWeights(std::move(w));
}

}  // namespace

CIWeights select_ci_weights(const std::vector<GaussianEstimate>& estimates,
                            WeightStrategy strategy) {
  if (estimates.empty()) throw DimensionMismatch("weight selection on empty estimate list");
  const int n = static_cast<int>(estimates.size());
  if (strategy == WeightStrategy::equal || n == 1) {
    return CIWeights::equal(n);
  }
  if (n == 2) return min_trace_pair(estimates);
  return min_trace_descent(estimates);
}

bool is_consistent_of(const GaussianEstimate& candidate, const GaussianEstimate& reference,
                      double mean_tol) {
  if (candidate.dim() != reference.dim()) throw DimensionMismatch();
  if ((candidate.mean() - reference.mean()).norm() > mean_tol) return false;
  return min_eigenvalue(candidate.covariance() - reference.covariance()) >= -kPsdTolerance;
}

}  // namespace coloc
