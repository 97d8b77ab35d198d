#pragma once

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "deskew/core.hpp"
#include "deskew/errors.hpp"
#include "deskew/sweep_deskew.hpp"
#include "deskew/synthetic.hpp"

namespace deskew {

// ---------------------------------------------------------------------------
// Number formatting. 17 significant digits round-trip every finite double
// exactly, which the determinism and round-trip guarantees depend on.

inline std::string fmt_g17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_double(std::string_view field, const std::string& file, std::size_t record) {
  double out = 0.0;
  const char* begin = field.data();
  const char* end = begin + field.size();
  auto [ptr, ec] = std::from_chars(begin, end, out);
  if (ec != std::errc() || ptr != end) {
    throw FormatError(file + ": record " + std::to_string(record) + ": bad number '" +
                      std::string(field) + "'");
  }
  return out;
}

namespace io_detail {

inline std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  return out;
}

inline std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  return in;
}

inline void expect_header(std::ifstream& in, const std::string& file,
                          const std::string& expected) {
  std::string line;
  if (!std::getline(in, line) || std::string(trim(line)) != expected) {
    throw FormatError(file + ": record 1: expected header '" + expected + "'");
  }
}

}  // namespace io_detail

// ---------------------------------------------------------------------------
// CSV formats. All values SI units, 17 significant digits.

inline void write_imu_csv(const std::filesystem::path& path,
                          std::span<const ImuSample> samples) {
  auto out = io_detail::open_out(path);
  out << "t,wx,wy,wz,ax,ay,az\n";
  for (const ImuSample& s : samples) {
    out << fmt_g17(s.t) << ',' << fmt_g17(s.omega_b.x()) << ',' << fmt_g17(s.omega_b.y()) << ','
        << fmt_g17(s.omega_b.z()) << ',' << fmt_g17(s.a_b.x()) << ',' << fmt_g17(s.a_b.y()) << ','
        << fmt_g17(s.a_b.z()) << '\n';
  }
}

inline std::vector<ImuSample> read_imu_csv(const std::filesystem::path& path) {
  auto in = io_detail::open_in(path);
  const std::string file = path.filename().string();
  io_detail::expect_header(in, file, "t,wx,wy,wz,ax,ay,az");
  std::vector<ImuSample> samples;
  std::string line;
  std::size_t record = 1;
  while (std::getline(in, line)) {
    ++record;
    const auto view = io_detail::trim(line);
    if (view.empty()) continue;
    const auto fields = io_detail::split(view, ',');
    if (fields.size() != 7) {
      throw FormatError(file + ": record " + std::to_string(record) + ": expected 7 fields, got " +
                        std::to_string(fields.size()));
    }
    ImuSample s;
    s.t = parse_double(fields[0], file, record);
    for (int i = 0; i < 3; ++i) s.omega_b[i] = parse_double(fields[1 + i], file, record);
    for (int i = 0; i < 3; ++i) s.a_b[i] = parse_double(fields[4 + i], file, record);
    samples.push_back(s);
  }
  return samples;
}

inline void write_sweep_csv(const std::filesystem::path& path, const Sweep& sweep) {
  auto out = io_detail::open_out(path);
  out << "t,x,y,z\n";
  for (const StampedPoint& p : sweep.points) {
    out << fmt_g17(p.t) << ',' << fmt_g17(p.P.x()) << ',' << fmt_g17(p.P.y()) << ','
        << fmt_g17(p.P.z()) << '\n';
  }
}

/// Deskewed and truth scans reuse the sweep schema; each row keeps the
/// original scan time so rows correspond across files by index.
inline void write_points_csv(const std::filesystem::path& path, const Sweep& times_from,
                             const DeskewedSweep& scan) {
  if (times_from.points.size() != scan.points.size()) {
    throw CardinalityMismatch("points file needs matching time source");
  }
  auto out = io_detail::open_out(path);
  out << "t,x,y,z\n";
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const Vec3& p = scan.points[i];
    out << fmt_g17(times_from.points[i].t) << ',' << fmt_g17(p.x()) << ',' << fmt_g17(p.y()) << ','
        << fmt_g17(p.z()) << '\n';
  }
}

inline Sweep read_sweep_csv(const std::filesystem::path& path, int index) {
  auto in = io_detail::open_in(path);
  const std::string file = path.filename().string();
  io_detail::expect_header(in, file, "t,x,y,z");
  Sweep sweep;
  sweep.index = index;
  std::string line;
  std::size_t record = 1;
  while (std::getline(in, line)) {
    ++record;
    const auto view = io_detail::trim(line);
    if (view.empty()) continue;
    const auto fields = io_detail::split(view, ',');
    if (fields.size() != 4) {
      throw FormatError(file + ": record " + std::to_string(record) + ": expected 4 fields, got " +
                        std::to_string(fields.size()));
    }
    StampedPoint p;
    p.t = parse_double(fields[0], file, record);
    for (int i = 0; i < 3; ++i) p.P[i] = parse_double(fields[1 + i], file, record);
    sweep.points.push_back(p);
  }
  return sweep;
}

inline void write_anchors_csv(const std::filesystem::path& path,
                              std::span<const SweepAnchor> anchors) {
  auto out = io_detail::open_out(path);
  out << "sweep,t,vx,vy,vz,r11,r12,r13,r21,r22,r23,r31,r32,r33\n";
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    const SweepAnchor& a = anchors[i];
    out << i << ',' << fmt_g17(a.t);
    for (int k = 0; k < 3; ++k) out << ',' << fmt_g17(a.state.V_b[k]);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ',' << fmt_g17(a.state.R_bw(r, c));
    }
    out << '\n';
  }
}

inline std::vector<SweepAnchor> read_anchors_csv(const std::filesystem::path& path) {
  auto in = io_detail::open_in(path);
  const std::string file = path.filename().string();
  io_detail::expect_header(in, file, "sweep,t,vx,vy,vz,r11,r12,r13,r21,r22,r23,r31,r32,r33");
  std::vector<SweepAnchor> anchors;
  std::string line;
  std::size_t record = 1;
  while (std::getline(in, line)) {
    ++record;
    const auto view = io_detail::trim(line);
    if (view.empty()) continue;
    const auto fields = io_detail::split(view, ',');
    if (fields.size() != 14) {
      throw FormatError(file + ": record " + std::to_string(record) +
                        ": expected 14 fields, got " + std::to_string(fields.size()));
    }
    SweepAnchor a;
    a.t = parse_double(fields[1], file, record);
    for (int k = 0; k < 3; ++k) a.state.V_b[k] = parse_double(fields[2 + k], file, record);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        a.state.R_bw(r, c) = parse_double(fields[5 + 3 * r + c], file, record);
      }
    }
    anchors.push_back(a);
  }
  return anchors;
}

inline void write_poses_csv(const std::filesystem::path& path,
                            std::span<const PoseSample> poses) {
  auto out = io_detail::open_out(path);
  out << "t,px,py,pz,r11,r12,r13,r21,r22,r23,r31,r32,r33\n";
  for (const PoseSample& s : poses) {
    out << fmt_g17(s.t);
    for (int k = 0; k < 3; ++k) out << ',' << fmt_g17(s.p[k]);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) out << ',' << fmt_g17(s.R_wb(r, c));
    }
    out << '\n';
  }
}

inline std::vector<PoseSample> read_poses_csv(const std::filesystem::path& path) {
  auto in = io_detail::open_in(path);
  const std::string file = path.filename().string();
  io_detail::expect_header(in, file, "t,px,py,pz,r11,r12,r13,r21,r22,r23,r31,r32,r33");
  std::vector<PoseSample> poses;
  std::string line;
  std::size_t record = 1;
  while (std::getline(in, line)) {
    ++record;
    const auto view = io_detail::trim(line);
    if (view.empty()) continue;
    const auto fields = io_detail::split(view, ',');
    if (fields.size() != 13) {
      throw FormatError(file + ": record " + std::to_string(record) +
                        ": expected 13 fields, got " + std::to_string(fields.size()));
    }
    PoseSample s;
    s.t = parse_double(fields[0], file, record);
    for (int k = 0; k < 3; ++k) s.p[k] = parse_double(fields[1 + k], file, record);
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) {
        s.R_wb(r, c) = parse_double(fields[4 + 3 * r + c], file, record);
      }
    }
    poses.push_back(s);
  }
  return poses;
}

// ---------------------------------------------------------------------------
// Content hashing for manifests (FNV-1a 64).

inline std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string file_hash_hex(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot hash missing file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  const std::string bytes = ss.str();
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx",
                static_cast<unsigned long long>(fnv1a64(bytes)));
  return buf;
}

// ---------------------------------------------------------------------------
// Run configuration: strict `key = value` text, no silent defaults. Every key
// the run needs must be present; unknown or duplicate keys are errors with
// file:line positions.

struct RunConfig {
  double gravity = kStandardGravity;
  double imu_rate = 400.0;
  double duration = 1.0;
  double sweep_duration = 0.2;
  int n_sweeps = 1;
  int rays = 1000;
  TrajectorySpec trajectory;
  SyncPolicy sync_policy = SyncPolicy::last_point();
  DeskewMode deskew_mode = DeskewMode::Snap;
  ImuMode imu_mode = ImuMode::Smooth;
  ImuBias bias;
  double gyro_noise_std = 0.0;
  double accel_noise_std = 0.0;
  double range_noise_std = 0.0;
  double env_room_size = 10.0;
  std::uint64_t seed = 0;
  int compare_runs = 20;
  std::string out_dir = "out";
};

namespace io_detail {

struct ConfigMap {
  std::string path;
  std::map<std::string, std::pair<std::string, std::size_t>> entries;  // key -> (value, line)

  const std::pair<std::string, std::size_t>& at(const std::string& key) const {
    auto it = entries.find(key);
    if (it == entries.end()) {
      throw ConfigError(path + ": missing required key '" + key + "'");
    }
    return it->second;
  }

  std::string str(const std::string& key) const { return at(key).first; }

  double number(const std::string& key) const {
    const auto& [value, line] = at(key);
    try {
      return parse_double(value, path, line);
    } catch (const FormatError&) {
      throw ConfigError(path + ":" + std::to_string(line) + ": key '" + key +
                        "' needs a number, got '" + value + "'");
    }
  }

  std::uint64_t unsigned_int(const std::string& key) const {
    const auto& [value, line] = at(key);
    std::uint64_t out = 0;
    auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
    if (ec != std::errc() || ptr != value.data() + value.size()) {
      throw ConfigError(path + ":" + std::to_string(line) + ": key '" + key +
                        "' needs a non-negative integer, got '" + value + "'");
    }
    return out;
  }

  Vec3 vec3(const std::string& key) const {
    const auto& [value, line] = at(key);
    const auto fields = split(value, ',');
    if (fields.size() != 3) {
      throw ConfigError(path + ":" + std::to_string(line) + ": key '" + key +
                        "' needs three comma-separated numbers");
    }
    Vec3 v;
    for (int i = 0; i < 3; ++i) {
      try {
        v[i] = parse_double(trim(fields[static_cast<std::size_t>(i)]), path, line);
      } catch (const FormatError&) {
        throw ConfigError(path + ":" + std::to_string(line) + ": key '" + key +
                          "' has a bad number '" + std::string(fields[static_cast<std::size_t>(i)]) + "'");
      }
    }
    return v;
  }

  void require_positive(const std::string& key, double v) const {
    if (!(v > 0.0)) {
      throw ConfigError(path + ":" + std::to_string(at(key).second) + ": key '" + key +
                        "' must be positive");
    }
  }
};

inline ConfigMap load_config_map(const std::filesystem::path& path) {
  ConfigMap map;
  map.path = path.string();
  auto in = open_in(path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view = line;
    const std::size_t hash = view.find('#');
    if (hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    const std::size_t eq = view.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError(map.path + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key(trim(view.substr(0, eq)));
    const std::string value(trim(view.substr(eq + 1)));
    if (key.empty()) {
      throw ConfigError(map.path + ":" + std::to_string(lineno) + ": empty key");
    }
    if (!map.entries.emplace(key, std::make_pair(value, lineno)).second) {
      throw ConfigError(map.path + ":" + std::to_string(lineno) + ": duplicate key '" + key +
                        "'");
    }
  }
  return map;
}

}  // namespace io_detail

inline RunConfig parse_run_config(const std::filesystem::path& path) {
  using io_detail::ConfigMap;
  const ConfigMap map = io_detail::load_config_map(path);
  std::set<std::string> known = {
      "format_version", "gravity",        "imu_rate",      "duration",
      "sweep_duration", "n_sweeps",       "rays",          "trajectory.kind",
      "sync_policy",    "deskew_mode",    "imu_mode",      "bias.gyro",
      "bias.accel",     "noise.gyro_std", "noise.accel_std", "noise.range_std",
      "env.room_size",  "seed",           "compare.runs",  "out_dir"};

  RunConfig cfg;
  if (map.str("format_version") != "1") {
    throw ConfigError(map.path + ":" + std::to_string(map.at("format_version").second) +
                      ": unsupported format_version '" + map.str("format_version") + "'");
  }
  cfg.gravity = map.number("gravity");
  cfg.imu_rate = map.number("imu_rate");
  cfg.duration = map.number("duration");
  cfg.sweep_duration = map.number("sweep_duration");
  cfg.n_sweeps = static_cast<int>(map.number("n_sweeps"));
  cfg.rays = static_cast<int>(map.number("rays"));
  map.require_positive("gravity", cfg.gravity);
  map.require_positive("imu_rate", cfg.imu_rate);
  map.require_positive("duration", cfg.duration);
  map.require_positive("sweep_duration", cfg.sweep_duration);
  map.require_positive("n_sweeps", cfg.n_sweeps);
  map.require_positive("rays", cfg.rays);

  const std::string kind = map.str("trajectory.kind");
  cfg.trajectory.duration = cfg.duration;
  cfg.trajectory.seed = map.unsigned_int("seed");
  if (kind == "stationary") {
    cfg.trajectory.kind = TrajectorySpec::Kind::Stationary;
  } else if (kind == "constant_velocity") {
    known.insert("trajectory.velocity");
    cfg.trajectory.kind = TrajectorySpec::Kind::ConstantVelocity;
    cfg.trajectory.velocity = map.vec3("trajectory.velocity");
  } else if (kind == "straight_then_turn") {
    known.insert({"trajectory.speed"});
    known.insert({"trajectory.turn_rate"});
    known.insert({"trajectory.switch_time"});
    cfg.trajectory.kind = TrajectorySpec::Kind::StraightThenTurn;
    cfg.trajectory.speed = map.number("trajectory.speed");
    cfg.trajectory.turn_rate = map.number("trajectory.turn_rate");
    cfg.trajectory.switch_time = map.number("trajectory.switch_time");
  } else if (kind == "figure_eight") {
    known.insert({"trajectory.amplitude"});
    known.insert({"trajectory.period"});
    cfg.trajectory.kind = TrajectorySpec::Kind::FigureEight;
    cfg.trajectory.amplitude = map.number("trajectory.amplitude");
    cfg.trajectory.period = map.number("trajectory.period");
    map.require_positive("trajectory.period", cfg.trajectory.period);
  } else {
    throw ConfigError(map.path + ":" + std::to_string(map.at("trajectory.kind").second) +
                      ": unknown trajectory.kind '" + kind + "'");
  }

  const std::string sync = map.str("sync_policy");
  if (sync == "first") {
    cfg.sync_policy = SyncPolicy::first_point();
  } else if (sync == "last") {
    cfg.sync_policy = SyncPolicy::last_point();
  } else if (sync.rfind("index:", 0) == 0) {
    std::uint64_t idx = 0;
    const std::string num = sync.substr(6);
    auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), idx);
    if (ec != std::errc() || ptr != num.data() + num.size()) {
      throw ConfigError(map.path + ":" + std::to_string(map.at("sync_policy").second) +
                        ": bad sync index '" + num + "'");
    }
    cfg.sync_policy = SyncPolicy::at_index(idx);
  } else {
    throw ConfigError(map.path + ":" + std::to_string(map.at("sync_policy").second) +
                      ": sync_policy must be first|last|index:<k>");
  }

  const std::string mode = map.str("deskew_mode");
  if (mode == "snap") {
    cfg.deskew_mode = DeskewMode::Snap;
  } else if (mode == "fractional") {
    cfg.deskew_mode = DeskewMode::Fractional;
  } else {
    throw ConfigError(map.path + ":" + std::to_string(map.at("deskew_mode").second) +
                      ": deskew_mode must be snap|fractional");
  }

  const std::string imu_mode = map.str("imu_mode");
  if (imu_mode == "smooth") {
    cfg.imu_mode = ImuMode::Smooth;
  } else if (imu_mode == "piecewise_constant") {
    cfg.imu_mode = ImuMode::PiecewiseConstant;
  } else {
    throw ConfigError(map.path + ":" + std::to_string(map.at("imu_mode").second) +
                      ": imu_mode must be smooth|piecewise_constant");
  }

  cfg.bias.b_omega = map.vec3("bias.gyro");
  cfg.bias.b_a = map.vec3("bias.accel");
  cfg.gyro_noise_std = map.number("noise.gyro_std");
  cfg.accel_noise_std = map.number("noise.accel_std");
  cfg.range_noise_std = map.number("noise.range_std");
  cfg.env_room_size = map.number("env.room_size");
  map.require_positive("env.room_size", cfg.env_room_size);
  cfg.seed = map.unsigned_int("seed");
  cfg.compare_runs = static_cast<int>(map.number("compare.runs"));
  map.require_positive("compare.runs", cfg.compare_runs);
  cfg.out_dir = map.str("out_dir");

  if (static_cast<double>(cfg.n_sweeps) * cfg.sweep_duration > cfg.duration + 1e-12) {
    throw ConfigError(map.path + ": n_sweeps * sweep_duration exceeds the trajectory duration");
  }

  for (const auto& [key, value] : map.entries) {
    if (!known.contains(key)) {
      throw ConfigError(map.path + ":" + std::to_string(value.second) + ": unknown key '" + key +
                        "'");
    }
  }
  return cfg;
}

inline BundleParams to_bundle_params(const RunConfig& cfg) {
  BundleParams p;
  p.trajectory = cfg.trajectory;
  p.imu_rate = cfg.imu_rate;
  p.gravity = cfg.gravity;
  p.bias = cfg.bias;
  p.gyro_noise_std = cfg.gyro_noise_std;
  p.accel_noise_std = cfg.accel_noise_std;
  p.range_noise_std = cfg.range_noise_std;
  p.env = EnvironmentModel::box_room(cfg.env_room_size);
  p.sweep_duration = cfg.sweep_duration;
  p.n_sweeps = cfg.n_sweeps;
  p.rays = cfg.rays;
  p.sync_policy = cfg.sync_policy;
  p.imu_mode = cfg.imu_mode;
  p.seed = cfg.seed;
  return p;
}

// ---------------------------------------------------------------------------
// Improvement percentage, the convention used for method comparisons:
// positive when the proposed method has the lower RMSE.

inline double improvement_percent(double rmse_baseline, double rmse_proposed) {
  return (rmse_baseline - rmse_proposed) / rmse_baseline * 100.0;
}

}  // namespace deskew
