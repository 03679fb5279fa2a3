#ifndef COLOC_COMMON_HPP
#define COLOC_COMMON_HPP

#include <optional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace coloc {

// Absolute eigenvalue floor used by all singularity tests (meter/radian units).
inline constexpr double kEigFloor = 1e-12;

// Updates may leave eigenvalues this far below zero before clamping; anything
// worse is treated as a numerical fault.
inline constexpr double kPsdTolerance = 1e-9;

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SingularCovariance : Error {
  SingularCovariance(const std::string& m = "singular covariance") : Error(m) {}
};
struct SingularInformation : Error {
  SingularInformation(const std::string& m = "singular information matrix") : Error(m) {}
};
struct DimensionMismatch : Error {
  DimensionMismatch(const std::string& m = "dimension mismatch") : Error(m) {}
};
struct DegenerateFusion : Error {
  DegenerateFusion(const std::string& m = "fused information matrix is singular") : Error(m) {}
};
struct CoincidentPoints : Error {
  CoincidentPoints(const std::string& m = "observer and target coincide") : Error(m) {}
};
struct UnknownTarget : Error {
  UnknownTarget(const std::string& m = "unknown observation target") : Error(m) {}
};
struct SingularInnovation : Error {
  SingularInnovation(const std::string& m = "singular innovation covariance") : Error(m) {}
};
struct WeightMismatch : Error {
  WeightMismatch(const std::string& m = "weight count does not match estimate count") : Error(m) {}
};
struct ZeroSelfWeight : Error {
  ZeroSelfWeight(const std::string& m = "self CI weight must be positive") : Error(m) {}
};
struct UnknownNode : Error {
  UnknownNode(const std::string& m = "node not in graph") : Error(m) {}
};
struct IndexOutOfRange : Error {
  IndexOutOfRange(const std::string& m = "index out of range") : Error(m) {}
};
struct LengthMismatch : Error {
  LengthMismatch(const std::string& m = "series length mismatch") : Error(m) {}
};
struct MissingFile : Error {
  MissingFile(const std::string& m = "missing file") : Error(m) {}
};
struct MalformedLine : Error {
  MalformedLine(const std::string& m = "malformed line") : Error(m) {}
};
struct EmptyWindow : Error {
  EmptyWindow(const std::string& m = "resample window contains no data") : Error(m) {}
};
struct ConfigError : Error {
  ConfigError(const std::string& m = "invalid configuration") : Error(m) {}
};
struct NumericalError : Error {
  NumericalError(const std::string& m = "numerical fault") : Error(m) {}
};

// A node in an observation/communication graph: a robot or a landmark.
struct EntityId {
  enum class Kind { robot, landmark };
  Kind kind = Kind::robot;
  int index = 0;

  static EntityId robot(int i) { return {Kind::robot, i}; }
  static EntityId landmark(int i) { return {Kind::landmark, i}; }
  bool is_robot() const { return kind == Kind::robot; }
  bool is_landmark() const { return kind == Kind::landmark; }

  friend auto operator<=>(const EntityId&, const EntityId&) = default;
};

inline Eigen::MatrixXd symmetrize(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

inline double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

// Inverse through the symmetric eigendecomposition so near-singularity is
// detected against the absolute floor instead of producing garbage.
std::optional<Eigen::MatrixXd> try_spd_inverse(const Eigen::MatrixXd& m,
                                               double eig_floor = kEigFloor);

// Clamps small negative eigenvalues to zero; throws NumericalError if any
// eigenvalue lies below -tolerance.
Eigen::MatrixXd clamp_psd(const Eigen::MatrixXd& sym, double tolerance = kPsdTolerance);

}  // namespace coloc

#endif
