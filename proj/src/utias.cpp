#include "coloc/utias.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace coloc {

bool DatasetBundle::operator==(const DatasetBundle& o) const {
  auto odo_eq = [](const OdometryRecord& a, const OdometryRecord& b) {
    return a.time == b.time && a.v == b.v && a.omega == b.omega;
  };
  auto meas_eq = [](const MeasurementRecord& a, const MeasurementRecord& b) {
    return a.time == b.time && a.barcode == b.barcode && a.range == b.range &&
           a.bearing == b.bearing && a.subject == b.subject;
  };
  auto gt_eq = [](const GroundTruthRecord& a, const GroundTruthRecord& b) {
    return a.time == b.time && a.x == b.x && a.y == b.y && a.theta == b.theta;
  };
  if (n_robots != o.n_robots || skipped_unknown_barcodes != o.skipped_unknown_barcodes) {
    return false;
  }
  if (barcode_to_subject != o.barcode_to_subject) return false;
  if (landmarks.size() != o.landmarks.size()) return false;
  for (const auto& [id, pos] : landmarks) {
    auto it = o.landmarks.find(id);
    if (it == o.landmarks.end() || it->second != pos) return false;
  }
  for (int i = 0; i < n_robots; ++i) {
    const size_t si = static_cast<size_t>(i);
    if (!std::equal(odometry[si].begin(), odometry[si].end(), o.odometry[si].begin(),
                    o.odometry[si].end(), odo_eq)) return false;
    if (!std::equal(measurements[si].begin(), measurements[si].end(), o.measurements[si].begin(),
                    o.measurements[si].end(), meas_eq)) return false;
    if (!std::equal(groundtruth[si].begin(), groundtruth[si].end(), o.groundtruth[si].begin(),
                    o.groundtruth[si].end(), gt_eq)) return false;
  }
  return true;
}

namespace {

// Whitespace-delimited numeric table with '#' comment lines.
std::vector<std::vector<double>> parse_table(const std::string& path, size_t min_cols) {
  std::ifstream in(path);
  if (!in) throw MissingFile("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::vector<double> row;
    double v;
    while (ls >> v) row.push_back(v);
    if (row.empty()) {
      std::string leftover;
      std::istringstream check(line);
      if (check >> leftover) {
        throw MalformedLine(path + ":" + std::to_string(line_no) + ": non-numeric content");
      }
      continue;
    }
    if (!ls.eof()) {
      throw MalformedLine(path + ":" + std::to_string(line_no) + ": trailing garbage");
    }
    if (row.size() < min_cols) {
      throw MalformedLine(path + ":" + std::to_string(line_no) + ": expected at least " +
                          std::to_string(min_cols) + " fields");
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string robot_file(const std::string& dir, int robot_1based, const std::string& what) {
  return dir + "/Robot" + std::to_string(robot_1based) + "_" + what + ".dat";
}

void resolve_measurements(DatasetBundle& bundle) {
  bundle.skipped_unknown_barcodes = 0;
  for (auto& per_robot : bundle.measurements) {
    std::vector<MeasurementRecord> kept;
    kept.reserve(per_robot.size());
    for (MeasurementRecord rec : per_robot) {
      auto it = bundle.barcode_to_subject.find(rec.barcode);
      int subject = it == bundle.barcode_to_subject.end() ? -1 : it->second;
      const bool is_robot = subject >= 1 && subject <= bundle.n_robots;
      const bool is_landmark = bundle.landmarks.count(subject) > 0;
      if (!is_robot && !is_landmark) {
        ++bundle.skipped_unknown_barcodes;
        continue;
      }
      rec.subject = subject;
      kept.push_back(rec);
    }
    per_robot = std::move(kept);
  }
}

}  // namespace

DatasetBundle load_bundle(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw MissingFile("dataset directory '" + dir + "' not found");

  DatasetBundle bundle;
  for (const auto& row : parse_table(dir + "/Barcodes.dat", 2)) {
    bundle.barcode_to_subject[static_cast<int>(row[1])] = static_cast<int>(row[0]);
  }
  for (const auto& row : parse_table(dir + "/Landmark_Groundtruth.dat", 3)) {
    bundle.landmarks[static_cast<int>(row[0])] = Eigen::Vector2d(row[1], row[2]);
  }

  int n = 0;
  while (fs::exists(robot_file(dir, n + 1, "Odometry"))) ++n;
  if (n == 0) throw MissingFile("no Robot*_Odometry.dat files in '" + dir + "'");
  bundle.n_robots = n;
  bundle.odometry.resize(static_cast<size_t>(n));
  bundle.measurements.resize(static_cast<size_t>(n));
  bundle.groundtruth.resize(static_cast<size_t>(n));

  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    for (const auto& row : parse_table(robot_file(dir, i + 1, "Odometry"), 3)) {
      bundle.odometry[si].push_back({row[0], row[1], row[2]});
    }
    for (const auto& row : parse_table(robot_file(dir, i + 1, "Measurement"), 4)) {
      MeasurementRecord rec;
      rec.time = row[0];
      rec.barcode = static_cast<int>(row[1]);
      rec.range = row[2];
      rec.bearing = row[3];
      bundle.measurements[si].push_back(rec);
    }
    for (const auto& row : parse_table(robot_file(dir, i + 1, "Groundtruth"), 4)) {
      bundle.groundtruth[si].push_back({row[0], row[1], row[2], row[3]});
    }
    auto by_time = [](const auto& a, const auto& b) { return a.time < b.time; };
    std::stable_sort(bundle.odometry[si].begin(), bundle.odometry[si].end(), by_time);
    std::stable_sort(bundle.measurements[si].begin(), bundle.measurements[si].end(), by_time);
    std::stable_sort(bundle.groundtruth[si].begin(), bundle.groundtruth[si].end(), by_time);
  }
  resolve_measurements(bundle);
  return bundle;
}

namespace {

std::string num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_csv_cache(std::ostream& out, const DatasetBundle& bundle) {
  out << "kind,id,time,a,b,c\n";
  out << "meta,0,0," << bundle.skipped_unknown_barcodes << "," << bundle.n_robots << ",0\n";
  for (const auto& [barcode, subject] : bundle.barcode_to_subject) {
    out << "barcode," << subject << ",0," << barcode << ",0,0\n";
  }
  for (const auto& [subject, pos] : bundle.landmarks) {
    out << "landmark," << subject << ",0," << num(pos.x()) << "," << num(pos.y()) << ",0\n";
  }
  for (int i = 0; i < bundle.n_robots; ++i) {
    const size_t si = static_cast<size_t>(i);
    for (const auto& r : bundle.odometry[si]) {
      out << "odometry," << (i + 1) << "," << num(r.time) << "," << num(r.v) << ","
          << num(r.omega) << ",0\n";
    }
    for (const auto& r : bundle.measurements[si]) {
      out << "measurement," << (i + 1) << "," << num(r.time) << "," << r.barcode << ","
          << num(r.range) << "," << num(r.bearing) << "\n";
    }
    for (const auto& r : bundle.groundtruth[si]) {
      out << "groundtruth," << (i + 1) << "," << num(r.time) << "," << num(r.x) << ","
          << num(r.y) << "," << num(r.theta) << "\n";
    }
  }
}

DatasetBundle read_csv_cache(std::istream& in) {
  DatasetBundle bundle;
  std::string line;
  if (!std::getline(in, line) || line != "kind,id,time,a,b,c") {
    throw MalformedLine("missing cache header");
  }
  int line_no = 1;
  int meta_skipped = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    std::string tok;
    while (std::getline(ls, tok, ',')) f.push_back(tok);
    if (f.size() != 6) throw MalformedLine("cache line " + std::to_string(line_no));
    const std::string& kind = f[0];
    const int id = std::stoi(f[1]);
    const double time = std::stod(f[2]);
    if (kind == "meta") {
      meta_skipped = std::stoi(f[3]);
      const int n = std::stoi(f[4]);
      bundle.n_robots = n;
      bundle.odometry.resize(static_cast<size_t>(n));
      bundle.measurements.resize(static_cast<size_t>(n));
      bundle.groundtruth.resize(static_cast<size_t>(n));
    } else if (kind == "barcode") {
      bundle.barcode_to_subject[std::stoi(f[3])] = id;
    } else if (kind == "landmark") {
      bundle.landmarks[id] = Eigen::Vector2d(std::stod(f[3]), std::stod(f[4]));
    } else if (kind == "odometry") {
      bundle.odometry.at(static_cast<size_t>(id - 1))
          .push_back({time, std::stod(f[3]), std::stod(f[4])});
    } else if (kind == "measurement") {
      MeasurementRecord rec;
      rec.time = time;
      rec.barcode = std::stoi(f[3]);
      rec.range = std::stod(f[4]);
      rec.bearing = std::stod(f[5]);
      bundle.measurements.at(static_cast<size_t>(id - 1)).push_back(rec);
    } else if (kind == "groundtruth") {
      bundle.groundtruth.at(static_cast<size_t>(id - 1))
          .push_back({time, std::stod(f[3]), std::stod(f[4]), std::stod(f[5])});
    } else {
      throw MalformedLine("unknown cache row kind '" + kind + "'");
    }
  }
  resolve_measurements(bundle);
  bundle.skipped_unknown_barcodes = meta_skipped;
  return bundle;
}

namespace {

double dataset_start(const DatasetBundle& bundle) {
  double t = std::numeric_limits<double>::infinity();
  for (int i = 0; i < bundle.n_robots; ++i) {
    const size_t si = static_cast<size_t>(i);
    if (!bundle.odometry[si].empty()) t = std::min(t, bundle.odometry[si].front().time);
    if (!bundle.groundtruth[si].empty()) t = std::min(t, bundle.groundtruth[si].front().time);
    if (!bundle.measurements[si].empty()) t = std::min(t, bundle.measurements[si].front().time);
  }
  if (!std::isfinite(t)) throw EmptyWindow("dataset contains no records");
  return t;
}

RobotPose interpolate_truth(const std::vector<GroundTruthRecord>& gt, double t) {
  if (gt.empty()) throw EmptyWindow("robot has no ground truth");
  RobotPose pose;
  if (t <= gt.front().time) {
    pose.theta = gt.front().theta;
    pose.position = {gt.front().x, gt.front().y};
    return pose;
  }
  if (t >= gt.back().time) {
    pose.theta = gt.back().theta;
    pose.position = {gt.back().x, gt.back().y};
    return pose;
  }
  auto it = std::lower_bound(gt.begin(), gt.end(), t, [](const GroundTruthRecord& r, double v) {
    return r.time < v;
  });
  const GroundTruthRecord& b = *it;
  const GroundTruthRecord& a = *(it - 1);
  const double f = (t - a.time) / (b.time - a.time);
  pose.position = Eigen::Vector2d(a.x + f * (b.x - a.x), a.y + f * (b.y - a.y));
  pose.theta = wrap_angle(a.theta + f * wrap_angle(b.theta - a.theta));
  return pose;
}

double workspace_diagonal(const DatasetBundle& bundle) {
  bool any = false;
  Eigen::Vector2d lo = Eigen::Vector2d::Zero(), hi = Eigen::Vector2d::Zero();
  auto extend = [&](const Eigen::Vector2d& p) {
    if (!any) {
      lo = hi = p;
      any = true;
    } else {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
  };
  for (const auto& [id, pos] : bundle.landmarks) extend(pos);
  for (const auto& per_robot : bundle.groundtruth) {
    for (const GroundTruthRecord& r : per_robot) extend(Eigen::Vector2d(r.x, r.y));
  }
  if (!any) return std::numeric_limits<double>::infinity();
  return (hi - lo).norm();
}

}  // namespace

Rollout make_replay_rollout(const DatasetBundle& bundle, const ScenarioConfig& base, double t0,
                            double t1, double dt, ResampleStats* stats) {
  if (dt <= 0.0) throw ConfigError("replay dt must be positive");
  if (t0 >= t1) throw EmptyWindow("replay window is empty");
  const double start = dataset_start(bundle) + t0;
  const int ticks = static_cast<int>(std::floor((t1 - t0) / dt + 1e-9));
  if (ticks < 1) throw EmptyWindow("replay window shorter than one tick");
  const int n = bundle.n_robots;

  ScenarioConfig cfg = base;
  cfg.n_robots = n;
  cfg.mode = ScenarioMode::full;
  cfg.meas_kind = MeasurementKind::bearing_range;
  cfg.dt = dt;
  cfg.steps = ticks;
  cfg.obs_density.reset();
  cfg.comm_density.reset();
  cfg.landmarks.clear();
  for (const auto& [id, pos] : bundle.landmarks) cfg.landmarks[id] = pos;
  cfg.obs_graph = TopologyGraph(n, 0);
  cfg.comm_graph = TopologyGraph(n, 0);
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      if (a != b) cfg.comm_graph.add_edge(EntityId::robot(a), EntityId::robot(b));
    }
  }
  validate_config(cfg);

  RngStreams streams = make_streams(cfg.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  Rollout rollout;
  rollout.cfg = cfg;
  rollout.initial_truth.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    rollout.initial_truth[static_cast<size_t>(i)] =
        interpolate_truth(bundle.groundtruth[static_cast<size_t>(i)], start);
  }
  rollout.initial_estimate = rollout.initial_truth;
  for (RobotPose& p : rollout.initial_estimate) {
    p.theta = wrap_angle(p.theta + cfg.init_theta_sigma * gauss(streams.init));
    p.position.x() += cfg.init_pos_sigma * gauss(streams.init);
    p.position.y() += cfg.init_pos_sigma * gauss(streams.init);
  }

  const double max_range = workspace_diagonal(bundle);
  ResampleStats local_stats;
  std::string truth_bytes;
  rollout.ticks.resize(static_cast<size_t>(ticks));

  std::vector<size_t> odo_cursor(static_cast<size_t>(n), 0);
  for (int t = 0; t < ticks; ++t) {
    WorldTick& tick = rollout.ticks[static_cast<size_t>(t)];
    const double tick_time = start + (t + 1) * dt;
    const double tick_start = start + t * dt;
    tick.truth.resize(static_cast<size_t>(n));
    tick.inputs.resize(static_cast<size_t>(n));
    tick.theta_est.resize(static_cast<size_t>(n));
    tick.batches.resize(static_cast<size_t>(n));
    for (int i = 0; i < n; ++i) {
      const size_t si = static_cast<size_t>(i);
      tick.truth[si] = interpolate_truth(bundle.groundtruth[si], tick_time);
      tick.theta_est[si] = tick.truth[si].theta;
      // Zero-order hold: latest odometry at or before the tick start.
      const auto& odo = bundle.odometry[si];
      while (odo_cursor[si] + 1 < odo.size() && odo[odo_cursor[si] + 1].time <= tick_start) {
        ++odo_cursor[si];
      }
      OdometryInput input;
      input.dt = dt;
      if (!odo.empty() && odo[odo_cursor[si]].time <= tick_start) {
        input.v = odo[odo_cursor[si]].v;
        input.omega = odo[odo_cursor[si]].omega;
      }
      tick.inputs[si] = input;
      tick.batches[si].observer = i;
      tick.batches[si].time = tick_time;

      truth_bytes.append(reinterpret_cast<const char*>(&tick.truth[si].theta), sizeof(double));
      truth_bytes.append(reinterpret_cast<const char*>(&tick.truth[si].position.x()),
                         sizeof(double));
      truth_bytes.append(reinterpret_cast<const char*>(&tick.truth[si].position.y()),
                         sizeof(double));
    }
    tick.link_u.resize(static_cast<size_t>(n * (n - 1)));
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a == b) continue;
        tick.link_u[static_cast<size_t>(link_index(a, b, n))] = u01(streams.failure);
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    const size_t si = static_cast<size_t>(i);
    for (const MeasurementRecord& rec : bundle.measurements[si]) {
      const double x = (rec.time - start) / dt - 1.0;  // fractional tick index
      const int k = static_cast<int>(std::ceil(x - 0.5));  // ties toward earlier tick
      if (k < 0 || k >= ticks) {
        ++local_stats.dropped_outside_window;
        continue;
      }
      if (rec.range <= 0.0 || rec.range > max_range) {
        ++local_stats.dropped_outliers;
        continue;
      }
      const bool is_robot_target = rec.subject >= 1 && rec.subject <= n;
      if (is_robot_target && rec.subject - 1 == i) {
        ++local_stats.dropped_outliers;  // reflection of own barcode
        continue;
      }
      Measurement m;
      m.observer = i;
      m.target = is_robot_target ? EntityId::robot(rec.subject - 1)
                                 : EntityId::landmark(rec.subject);
      m.kind = MeasurementKind::bearing_range;
      m.value = Eigen::Vector2d(wrap_angle(rec.bearing), rec.range);
      m.noise_cov = cfg.noise.r_bearing_range;
      m.time = rec.time;
      rollout.ticks[static_cast<size_t>(k)].batches[si].measurements.push_back(m);
      ++local_stats.kept_measurements;
    }
  }

  rollout.truth_digest = fnv1a(truth_bytes);
  if (stats) *stats = local_stats;
  return rollout;
}

void write_synthetic_dataset(const std::string& dir, int n_robots, double duration_s,
                             double sample_dt, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  std::mt19937_64 rng(seed ^ 0x5d5347ULL);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  // Landmarks on a loose grid around the arena, robot barcodes distinct.
  const std::vector<int> robot_barcodes = {5, 14, 41, 32, 23, 61, 54};
  std::vector<Eigen::Vector2d> landmarks;
  const int n_landmarks = 8;
  for (int k = 0; k < n_landmarks; ++k) {
    const double ang = 2.0 * M_PI * k / n_landmarks;
    landmarks.push_back(3.5 * Eigen::Vector2d(std::cos(ang), std::sin(ang)));
  }

  {
    std::ofstream out(dir + "/Barcodes.dat");
    out << "# Subject Barcode\n";
    for (int i = 0; i < n_robots; ++i) {
      out << (i + 1) << " " << robot_barcodes.at(static_cast<size_t>(i)) << "\n";
    }
    for (int k = 0; k < n_landmarks; ++k) {
      out << (6 + k) << " " << (70 + k) << "\n";
    }
  }
  {
    std::ofstream out(dir + "/Landmark_Groundtruth.dat");
    out << "# Subject x y xstd ystd\n";
    char buf[160];
    for (int k = 0; k < n_landmarks; ++k) {
      std::snprintf(buf, sizeof(buf), "%d %.6f %.6f 0.001 0.001\n", 6 + k,
                    landmarks[static_cast<size_t>(k)].x(), landmarks[static_cast<size_t>(k)].y());
      out << buf;
    }
  }

  const double epoch = 1248272000.0;  // resembles the native unix-stamped clocks
  const int steps = static_cast<int>(duration_s / sample_dt);
  std::vector<RobotPose> truth(static_cast<size_t>(n_robots));
  std::vector<double> phase(static_cast<size_t>(n_robots));
  for (int i = 0; i < n_robots; ++i) {
    const double ang = 2.0 * M_PI * i / n_robots;
    truth[static_cast<size_t>(i)].position = 2.0 * Eigen::Vector2d(std::cos(ang), std::sin(ang));
    truth[static_cast<size_t>(i)].theta = wrap_angle(ang + M_PI / 2.0);
    phase[static_cast<size_t>(i)] = ang;
  }

  std::vector<std::ofstream> odo, meas, gt;
  for (int i = 0; i < n_robots; ++i) {
    odo.emplace_back(robot_file(dir, i + 1, "Odometry"));
    meas.emplace_back(robot_file(dir, i + 1, "Measurement"));
    gt.emplace_back(robot_file(dir, i + 1, "Groundtruth"));
    odo.back() << "# Time v omega\n";
    meas.back() << "# Time Barcode range bearing\n";
    gt.back() << "# Time x y orientation\n";
  }

  char buf[200];
  for (int t = 0; t <= steps; ++t) {
    const double time = epoch + t * sample_dt;
    for (int i = 0; i < n_robots; ++i) {
      const size_t si = static_cast<size_t>(i);
      const double v_cmd = 0.08 + 0.04 * std::sin(2.0 * M_PI * t * sample_dt / 70.0 + phase[si]);
      const double w_cmd = 0.12 * std::sin(2.0 * M_PI * t * sample_dt / 45.0 + 2.0 * phase[si]);

      std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f\n", time, v_cmd + 0.004 * gauss(rng),
                    w_cmd + 0.004 * gauss(rng));
      odo[si] << buf;
      std::snprintf(buf, sizeof(buf), "%.6f %.6f %.6f %.6f\n", time, truth[si].position.x(),
                    truth[si].position.y(), truth[si].theta);
      gt[si] << buf;

      // Bearing/range sightings of whatever falls inside the sensor cone.
      auto try_observe = [&](const Eigen::Vector2d& target, int barcode) {
        const Eigen::Vector2d d = target - truth[si].position;
        if (d.norm() < 0.05 || d.norm() > 5.0) return;
        const double bearing = wrap_angle(std::atan2(d.y(), d.x()) - truth[si].theta);
        if (std::abs(bearing) > 1.2) return;
        if (u01(rng) > 0.25) return;
        std::snprintf(buf, sizeof(buf), "%.6f %d %.6f %.6f\n", time, barcode,
                      d.norm() + 0.02 * gauss(rng), wrap_angle(bearing + 0.01 * gauss(rng)));
        meas[si] << buf;
      };
      for (int j = 0; j < n_robots; ++j) {
        if (j != i) {
          try_observe(truth[static_cast<size_t>(j)].position,
                      robot_barcodes.at(static_cast<size_t>(j)));
        }
      }
      for (int k = 0; k < n_landmarks; ++k) {
        try_observe(landmarks[static_cast<size_t>(k)], 70 + k);
      }

      OdometryInput input{v_cmd, w_cmd, sample_dt};
      truth[si] = unicycle_propagate(truth[si], input,
                                     Eigen::Vector2d(0.004 * gauss(rng), 0.004 * gauss(rng)));
    }
  }
}

}  // namespace coloc
