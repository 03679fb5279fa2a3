#ifndef COLOC_UTIAS_HPP
#define COLOC_UTIAS_HPP

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "coloc/sim.hpp"

namespace coloc {

// One sub-dataset of the UTIAS multi-robot localization collection:
// per-robot odometry/measurement/ground-truth tables plus landmark positions
// and the barcode-to-subject map.
struct OdometryRecord {
  double time = 0.0;   // s
  double v = 0.0;      // m/s
  double omega = 0.0;  // rad/s
};

struct MeasurementRecord {
  double time = 0.0;
  int barcode = 0;
  double range = 0.0;    // m
  double bearing = 0.0;  // rad
  int subject = -1;      // resolved via the barcode map
};

struct GroundTruthRecord {
  double time = 0.0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
};

struct DatasetBundle {
  int n_robots = 0;
  std::vector<std::vector<OdometryRecord>> odometry;
  std::vector<std::vector<MeasurementRecord>> measurements;
  std::vector<std::vector<GroundTruthRecord>> groundtruth;
  std::map<int, Eigen::Vector2d> landmarks;  // subject id -> position
  std::map<int, int> barcode_to_subject;
  int skipped_unknown_barcodes = 0;

  bool operator==(const DatasetBundle&) const;
};

// Reads RobotN_{Odometry,Measurement,Groundtruth}.dat, Landmark_Groundtruth.dat
// and Barcodes.dat from a directory. Records come back time-sorted with
// barcodes resolved; measurements with unresolvable barcodes are dropped and
// counted.
DatasetBundle load_bundle(const std::string& dir);

// Normalized CSV cache (schema documented in the README); parsing the cache
// reproduces the bundle exactly.
void write_csv_cache(std::ostream& out, const DatasetBundle& bundle);
DatasetBundle read_csv_cache(std::istream& in);

struct ResampleStats {
  int dropped_outliers = 0;
  int dropped_outside_window = 0;
  int kept_measurements = 0;
};

// Tick-aligned replay: odometry zero-order-held, measurements bucketed to the
// nearest tick (ties toward the earlier tick), ground truth interpolated with
// shortest-arc angles. t0/t1 are offsets from the dataset start. Measurements
// with range <= 0 or beyond the workspace diagonal are dropped and counted.
// The result drives the common estimator harness; bearing/range measurement
// noise comes from base.noise.r_bearing_range.
Rollout make_replay_rollout(const DatasetBundle& bundle, const ScenarioConfig& base, double t0,
                            double t1, double dt, ResampleStats* stats = nullptr);

// Writes a synthetic dataset in the native file format (used by tests and as
// a fixture generator): robots on smooth closed paths observing landmarks and
// one another with bearing/range sensors.
void write_synthetic_dataset(const std::string& dir, int n_robots, double duration_s,
                             double sample_dt, std::uint64_t seed);

}  // namespace coloc

#endif
