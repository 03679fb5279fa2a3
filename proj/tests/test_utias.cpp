#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "coloc/utias.hpp"

using namespace coloc;
namespace fs = std::filesystem;

namespace {

// Minimal hand-written sub-dataset: two robots, one landmark.
fs::path write_fixture() {
  const fs::path dir = fs::temp_directory_path() / "coloc_utias_fixture";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "Barcodes.dat")
      << "# Subject Barcode\n1 5\n2 14\n6 70\n";
  std::ofstream(dir / "Landmark_Groundtruth.dat")
      << "# Subject x y xstd ystd\n6 1.5 -0.5 0.001 0.001\n";
  std::ofstream(dir / "Robot1_Odometry.dat")
      << "# Time v w\n"
      << "1248272279.269 0.1 0.05\n"
      << "1248272279.369 0.12 0.00\n"
      << "1248272279.469 0.14 -0.05\n";
  std::ofstream(dir / "Robot1_Measurement.dat")
      << "# Time Subject range bearing\n"
      << "1248272279.300 70 1.2 0.30\n"
      << "1248272279.310 14 0.8 -0.20\n"
      << "1248272279.320 99 1.0 0.00\n"   // unknown barcode
      << "1248272279.430 70 -0.5 0.10\n"  // negative range outlier
      << "1248272279.450 70 1.1 0.25\n";
  std::ofstream(dir / "Robot1_Groundtruth.dat")
      << "# Time x y theta\n"
      << "1248272279.269 0.0 0.0 3.0\n"
      << "1248272279.469 0.2 0.0 -3.0\n";
  std::ofstream(dir / "Robot2_Odometry.dat")
      << "1248272279.269 0.0 0.0\n1248272279.469 0.0 0.0\n";
  std::ofstream(dir / "Robot2_Measurement.dat") << "# empty\n";
  std::ofstream(dir / "Robot2_Groundtruth.dat")
      << "1248272279.269 1.0 1.0 0.0\n1248272279.469 1.0 1.0 0.0\n";
  return dir;
}

}  // namespace

TEST_CASE("load_bundle parses, sorts and resolves the fixture") {
  const fs::path dir = write_fixture();
  const DatasetBundle bundle = load_bundle(dir.string());
  CHECK(bundle.n_robots == 2);

  // Field order of an odometry line: time, v, omega.
  REQUIRE(bundle.odometry[0].size() == 3);
  CHECK(bundle.odometry[0][0].time == doctest::Approx(1248272279.269));
  CHECK(bundle.odometry[0][0].v == doctest::Approx(0.1));
  CHECK(bundle.odometry[0][0].omega == doctest::Approx(0.05));

  // Unknown barcode 99 dropped and counted, known ones resolved.
  CHECK(bundle.skipped_unknown_barcodes == 1);
  REQUIRE(bundle.measurements[0].size() == 4);
  CHECK(bundle.measurements[0][0].subject == 6);   // landmark via barcode 70
  CHECK(bundle.measurements[0][1].subject == 2);   // robot via barcode 14
  CHECK(bundle.landmarks.at(6).x() == doctest::Approx(1.5));

  CHECK_THROWS_AS(load_bundle((dir / "nope").string()), MissingFile);
  fs::remove_all(dir);
}

TEST_CASE("malformed lines carry their location") {
  const fs::path dir = fs::temp_directory_path() / "coloc_utias_bad";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "Barcodes.dat") << "1 5\n";
  std::ofstream(dir / "Landmark_Groundtruth.dat") << "6 1.0 1.0\n";
  std::ofstream(dir / "Robot1_Odometry.dat") << "1.0 0.1 bogus\n";
  std::ofstream(dir / "Robot1_Measurement.dat") << "";
  std::ofstream(dir / "Robot1_Groundtruth.dat") << "1.0 0 0 0\n";
  try {
    load_bundle(dir.string());
    FAIL("expected MalformedLine");
  } catch (const MalformedLine& e) {
    CHECK(std::string(e.what()).find(":1") != std::string::npos);
  }
  fs::remove_all(dir);
}

TEST_CASE("csv cache round trips the bundle exactly") {
  const fs::path dir = write_fixture();
  const DatasetBundle bundle = load_bundle(dir.string());
  std::stringstream cache;
  write_csv_cache(cache, bundle);
  const DatasetBundle back = read_csv_cache(cache);
  CHECK(bundle == back);

  std::stringstream again;
  write_csv_cache(again, back);
  CHECK(cache.str() == again.str());
  fs::remove_all(dir);
}

TEST_CASE("replay resampling: hold, bucket, interpolate, drop") {
  const fs::path dir = write_fixture();
  const DatasetBundle bundle = load_bundle(dir.string());
  ScenarioConfig base;
  base.noise.r_bearing_range = Eigen::Vector2d(1e-4, 1e-4).asDiagonal();

  ResampleStats stats;
  const Rollout rollout = make_replay_rollout(bundle, base, 0.0, 0.2, 0.05, &stats);
  CHECK(rollout.cfg.steps == 4);
  CHECK(rollout.cfg.n_robots == 2);

  // Counting rule: kept = raw minus counted drops.
  int raw = 0;
  for (const auto& per_robot : bundle.measurements) raw += static_cast<int>(per_robot.size());
  CHECK(stats.kept_measurements ==
        raw - stats.dropped_outliers - stats.dropped_outside_window);
  CHECK(stats.dropped_outliers == 1);  // the negative range
  CHECK(stats.dropped_outside_window == 0);
  CHECK(stats.kept_measurements == 3);

  // Zero-order hold: the tick covering [0.1, 0.15) uses the 0.1 s record.
  CHECK(rollout.ticks[2].inputs[0].v == doctest::Approx(0.12));
  CHECK(rollout.ticks[0].inputs[0].v == doctest::Approx(0.1));

  // Two early measurements land in nearby buckets with wrapped bearings.
  int total = 0;
  for (const WorldTick& tick : rollout.ticks) {
    for (const ObservationBatch& b : tick.batches) {
      for (const Measurement& m : b.measurements) {
        ++total;
        CHECK(m.value(0) > -M_PI);
        CHECK(m.value(0) <= M_PI);
        CHECK(m.value(1) >= 0.0);
      }
    }
  }
  CHECK(total == stats.kept_measurements);

  // Ground-truth interpolation across the pi boundary takes the short arc:
  // theta(0.1 s) between 3.0 and -3.0 passes through +/- pi, never zero.
  const double theta_mid = rollout.ticks[1].truth[0].theta;
  CHECK(std::abs(theta_mid) > 3.0);

  CHECK_THROWS_AS(make_replay_rollout(bundle, base, 0.5, 0.4, 0.05, nullptr), EmptyWindow);
  fs::remove_all(dir);
}

TEST_CASE("synthetic dataset generator feeds the loader") {
  const fs::path dir = fs::temp_directory_path() / "coloc_utias_synth";
  fs::remove_all(dir);
  write_synthetic_dataset(dir.string(), 3, 30.0, 0.1, 42);
  const DatasetBundle bundle = load_bundle(dir.string());
  CHECK(bundle.n_robots == 3);
  CHECK(bundle.landmarks.size() == 8);
  CHECK(bundle.skipped_unknown_barcodes == 0);
  for (int i = 0; i < 3; ++i) {
    CHECK(bundle.odometry[static_cast<size_t>(i)].size() > 100);
    CHECK(!bundle.groundtruth[static_cast<size_t>(i)].empty());
  }

  ScenarioConfig base;
  base.noise.q_w = Eigen::Vector2d(1e-4, 1e-4).asDiagonal();
  base.noise.r_bearing_range = Eigen::Vector2d(1e-3, 1e-3).asDiagonal();
  base.noise.sigma_u_sq = 0.02;
  ResampleStats stats;
  const Rollout rollout = make_replay_rollout(bundle, base, 0.0, 20.0, 0.1, &stats);
  CHECK(rollout.cfg.steps == 200);
  CHECK(stats.kept_measurements > 0);
  fs::remove_all(dir);
}
