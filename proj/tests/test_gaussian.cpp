#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "coloc/gaussian.hpp"

using namespace coloc;
using Eigen::MatrixXd;
using Eigen::Vector2d;
using Eigen::VectorXd;

namespace {

VectorXd scalar_vec(double v) {
  VectorXd x(1);
  x << v;
  return x;
}

MatrixXd scalar_mat(double v) {
  MatrixXd m(1, 1);
  m << v;
  return m;
}

GaussianEstimate scalar_moment(double mean, double var) {
  return GaussianEstimate::moment(scalar_vec(mean), scalar_mat(var));
}

MatrixXd random_spd(int dim, std::mt19937_64& rng, double ridge = 0.5) {
  std::normal_distribution<double> g(0.0, 1.0);
  MatrixXd a(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) a(r, c) = g(rng);
  }
  return a * a.transpose() + ridge * MatrixXd::Identity(dim, dim);
}

}  // namespace

TEST_CASE("to_information identity and direct evaluation") {
  const GaussianEstimate id = to_information(scalar_moment(0.0, 1.0));
  CHECK(id.info_mean()(0) == doctest::Approx(0.0));
  CHECK(id.info_matrix()(0, 0) == doctest::Approx(1.0));

  // e = Sigma^-1 mu with mu=2, Sigma=4.
  const GaussianEstimate e = to_information(scalar_moment(2.0, 4.0));
  CHECK(e.info_mean()(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(e.info_matrix()(0, 0) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("to_information rejects a singular covariance") {
  MatrixXd sigma(2, 2);
  sigma << 1.0, 1.0, 1.0, 1.0;  // zero eigenvalue
  const GaussianEstimate est = GaussianEstimate::moment(VectorXd::Zero(2), sigma);
  CHECK_THROWS_AS(to_information(est), SingularCovariance);
}

TEST_CASE("from_information inverts to_information") {
  const GaussianEstimate back =
      from_information(GaussianEstimate::information(scalar_vec(0.5), scalar_mat(0.25)));
  CHECK(back.mean()(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(back.covariance()(0, 0) == doctest::Approx(4.0).epsilon(1e-12));

  const GaussianEstimate id =
      from_information(GaussianEstimate::information(scalar_vec(0.0), scalar_mat(1.0)));
  CHECK(id.mean()(0) == doctest::Approx(0.0));
  CHECK(id.covariance()(0, 0) == doctest::Approx(1.0));
}

TEST_CASE("from_information rejects a zero information row") {
  // The dummy-orientation pattern: one infinite-variance component.
  MatrixXd info = MatrixXd::Identity(3, 3);
  info(0, 0) = 0.0;
  CHECK_THROWS_AS(from_information(GaussianEstimate::information(VectorXd::Zero(3), info)),
                  SingularInformation);
}

TEST_CASE("round trip moment -> information -> moment at 1e-9 relative error") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    const int dim = 1 + trial % 6;
    const MatrixXd sigma = random_spd(dim, rng, 0.05);
    VectorXd mu(dim);
    for (int i = 0; i < dim; ++i) mu(i) = 10.0 * g(rng);
    const GaussianEstimate est = GaussianEstimate::moment(mu, sigma);
    const GaussianEstimate back = from_information(to_information(est));
    CHECK((back.mean() - mu).norm() <= 1e-9 * (1.0 + mu.norm()));
    CHECK((back.covariance() - sigma).norm() <= 1e-9 * sigma.norm());
  }
}

TEST_CASE("ci_fuse trivial cases") {
  const GaussianEstimate single = to_information(scalar_moment(3.0, 2.0));
  const GaussianEstimate fused1 = ci_fuse({single}, CIWeights({1.0}));
  CHECK(fused1.info_matrix()(0, 0) == doctest::Approx(0.5));
  CHECK(from_information(fused1).mean()(0) == doctest::Approx(3.0));

  // Equal inputs are a fixed point.
  const GaussianEstimate a = to_information(scalar_moment(1.0, 2.0));
  const GaussianEstimate fused2 = from_information(ci_fuse({a, a}, CIWeights({0.5, 0.5})));
  CHECK(fused2.mean()(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fused2.covariance()(0, 0) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("ci_fuse direct evaluation on two scalars") {
  // I' = 0.5*1 + 0.5*1 = 1, e' = 0.5*0 + 0.5*2 = 1 -> mu = 1, var = 1.
  const GaussianEstimate a = to_information(scalar_moment(0.0, 1.0));
  const GaussianEstimate b = to_information(scalar_moment(2.0, 1.0));
  const GaussianEstimate fused = from_information(ci_fuse({a, b}, CIWeights({0.5, 0.5})));
  CHECK(fused.mean()(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fused.covariance()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("ci_fuse error cases") {
  const GaussianEstimate a = to_information(scalar_moment(0.0, 1.0));
  const GaussianEstimate b = to_information(
      GaussianEstimate::moment(VectorXd::Zero(2), MatrixXd::Identity(2, 2)));
  CHECK_THROWS_AS(ci_fuse({a, b}, CIWeights({0.5, 0.5})), DimensionMismatch);

  const GaussianEstimate zero_info =
      GaussianEstimate::information(VectorXd::Zero(1), scalar_mat(0.0));
  CHECK_THROWS_AS(ci_fuse({zero_info, zero_info}, CIWeights({0.5, 0.5})), DegenerateFusion);
}

TEST_CASE("information-form linearity of ci_fuse") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    const MatrixXd sa = random_spd(3, rng);
    const MatrixXd sb = random_spd(3, rng);
    const GaussianEstimate a =
        to_information(GaussianEstimate::moment(VectorXd::Random(3), sa));
    const GaussianEstimate b =
        to_information(GaussianEstimate::moment(VectorXd::Random(3), sb));
    for (double c : {0.0, 0.2, 0.5, 0.9, 1.0}) {
      if (c == 0.0 || c == 1.0) continue;  // degenerate single-input edge handled above
      const GaussianEstimate fused = ci_fuse({a, b}, CIWeights({c, 1.0 - c}));
      const MatrixXd expect = c * a.info_matrix() + (1.0 - c) * b.info_matrix();
      CHECK((fused.info_matrix() - expect).cwiseAbs().maxCoeff() <= 1e-12);
    }
  }
}

TEST_CASE("select_ci_weights equal strategy") {
  std::vector<GaussianEstimate> ests(3, to_information(scalar_moment(0.0, 1.0)));
  const CIWeights w = select_ci_weights(ests, WeightStrategy::equal);
  for (int i = 0; i < 3; ++i) CHECK(w[i] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("select_ci_weights min_trace ties break to one half") {
  const GaussianEstimate a = to_information(scalar_moment(0.0, 2.0));
  const CIWeights w = select_ci_weights({a, a}, WeightStrategy::min_trace);
  CHECK(w[0] == doctest::Approx(0.5));
  CHECK(w[1] == doctest::Approx(0.5));
}

TEST_CASE("select_ci_weights min_trace matches a grid-search oracle") {
  // Oracle: exhaustive grid over c in [0,1], step 1e-4, minimizing the fused
  // variance.
  const GaussianEstimate a = to_information(scalar_moment(0.0, 1.0));
  const GaussianEstimate b = to_information(scalar_moment(0.0, 100.0));
  double best_c = 0.0, best_f = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= 10000; ++k) {
    const double c = k * 1e-4;
    const double info = c * 1.0 + (1.0 - c) * 0.01;
    const double f = 1.0 / info;
    if (f < best_f) {
      best_f = f;
      best_c = c;
    }
  }
  CHECK(best_c == doctest::Approx(1.0));  // oracle pushes all weight to the tight estimate

  const CIWeights w = select_ci_weights({a, b}, WeightStrategy::min_trace);
  CHECK(w[0] == doctest::Approx(1.0).epsilon(1e-3));
  CHECK(w[1] == doctest::Approx(0.0).scale(1.0).epsilon(1e-3));

  // Property: never worse than equal weights.
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 3;
    std::vector<GaussianEstimate> ests;
    for (int i = 0; i < n; ++i) {
      ests.push_back(
          to_information(GaussianEstimate::moment(VectorXd::Zero(3), random_spd(3, rng))));
    }
    const double t_min =
        fused_trace(ests, select_ci_weights(ests, WeightStrategy::min_trace));
    const double t_eq = fused_trace(ests, CIWeights::equal(n));
    CHECK(t_min <= t_eq + 1e-9);
  }
}

TEST_CASE("is_consistent_of definition cases") {
  const GaussianEstimate ref =
      GaussianEstimate::moment(VectorXd::Zero(3), MatrixXd::Identity(3, 3));
  CHECK(is_consistent_of(ref, ref, 1e-12));

  const GaussianEstimate bigger =
      GaussianEstimate::moment(VectorXd::Zero(3), 2.0 * MatrixXd::Identity(3, 3));
  CHECK(is_consistent_of(bigger, ref, 1e-12));

  const GaussianEstimate smaller =
      GaussianEstimate::moment(VectorXd::Zero(3), 0.9 * MatrixXd::Identity(3, 3));
  CHECK_FALSE(is_consistent_of(smaller, ref, 1e-12));

  const GaussianEstimate wrong_dim =
      GaussianEstimate::moment(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  CHECK_THROWS_AS(is_consistent_of(wrong_dim, ref, 1e-12), DimensionMismatch);
}

TEST_CASE("CI preserves consistency under correlation (Monte Carlo)") {
  // Two correlated estimates of the same state with exactly-reported
  // covariances; for every weight on the grid the fused covariance must
  // dominate the sample MSE matrix up to sampling error.
  std::mt19937_64 rng(99);
  std::normal_distribution<double> g(0.0, 1.0);
  const int dim = 2;
  const int trials = 4000;

  MatrixXd joint(2 * dim, 2 * dim);
  joint << 2.0, 0.3, 0.8, 0.1,
           0.3, 1.5, 0.2, 0.9,
           0.8, 0.2, 1.8, 0.4,
           0.1, 0.9, 0.4, 2.2;
  joint = (0.5 * (joint + joint.transpose())).eval();
  const Eigen::LLT<MatrixXd> llt(joint);
  REQUIRE(llt.info() == Eigen::Success);
  const MatrixXd sigma_a = joint.topLeftCorner(dim, dim);
  const MatrixXd sigma_b = joint.bottomRightCorner(dim, dim);

  for (double c : {0.0, 0.3, 0.5, 0.8, 1.0}) {
    std::vector<double> weights = {c, 1.0 - c};
    MatrixXd fused_cov;
    MatrixXd mse = MatrixXd::Zero(dim, dim);
    for (int t = 0; t < trials; ++t) {
      VectorXd n(2 * dim);
      for (int i = 0; i < 2 * dim; ++i) n(i) = g(rng);
      const VectorXd err = llt.matrixL() * n;
      const GaussianEstimate a =
          to_information(GaussianEstimate::moment(err.head(dim), sigma_a));
      const GaussianEstimate b =
          to_information(GaussianEstimate::moment(err.tail(dim), sigma_b));
      GaussianEstimate fused(GaussianEstimate::moment(VectorXd::Zero(dim), sigma_a));
      if (c == 0.0) {
        fused = GaussianEstimate::moment(err.tail(dim), sigma_b);
      } else if (c == 1.0) {
        fused = GaussianEstimate::moment(err.head(dim), sigma_a);
      } else {
        fused = from_information(ci_fuse({a, b}, CIWeights(weights)));
      }
      fused_cov = fused.covariance();
      mse += fused.mean() * fused.mean().transpose();
    }
    mse /= static_cast<double>(trials);
    const double band =
        fused_cov.eigenvalues().real().maxCoeff() * std::sqrt(2.0 * dim / double(trials));
    CHECK(min_eigenvalue(fused_cov - mse) >= -3.0 * band);
  }
}
