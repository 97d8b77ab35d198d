#include <catch2/catch_amalgamated.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "deskew/io.hpp"

namespace fs = std::filesystem;

namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;  // stdout + stderr
};

RunResult run_cli(const std::string& args) {
  const fs::path dir = fs::path(DESKEW_TEST_TMPDIR);
  fs::create_directories(dir);
  const fs::path log = dir / "last_run.log";
  const std::string cmd =
      std::string(DESKEW_CLI_PATH) + " " + args + " > " + log.string() + " 2>&1";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  std::ifstream in(log);
  std::ostringstream ss;
  ss << in.rdbuf();
  r.output = ss.str();
  return r;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::path(DESKEW_TEST_TMPDIR) / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  out << text;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string config_text(const std::string& kind_block, int n_sweeps, const std::string& extras) {
  std::ostringstream cfg;
  cfg << "format_version = 1\n"
      << "gravity = 9.80665\n"
      << "imu_rate = 400\n"
      << "duration = " << (0.2 * n_sweeps + 0.1) << "\n"
      << "sweep_duration = 0.2\n"
      << "n_sweeps = " << n_sweeps << "\n"
      << "rays = 200\n"
      << kind_block << "sync_policy = last\n"
      << "deskew_mode = snap\n"
      << "imu_mode = smooth\n"
      << "bias.gyro = 0,0,0\n"
      << "bias.accel = 0,0,0\n"
      << "noise.gyro_std = 0\n"
      << "noise.accel_std = 0\n"
      << "noise.range_std = 0\n"
      << "env.room_size = 10\n"
      << "seed = 7\n"
      << "compare.runs = 2\n"
      << "out_dir = unused\n"
      << extras;
  return cfg.str();
}

const std::string kStationary = "trajectory.kind = stationary\n";
const std::string kConstVel =
    "trajectory.kind = constant_velocity\ntrajectory.velocity = 1.0,0.2,0\n";
const std::string kTurn =
    "trajectory.kind = straight_then_turn\ntrajectory.speed = 1.0\n"
    "trajectory.turn_rate = 1.5\ntrajectory.switch_time = 0.1\n";

}  // namespace

TEST_CASE("cli rejects malformed configs with line-precise messages") {
  const fs::path dir = fresh_dir("badcfg");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, config_text(kStationary, 1, "mystery = 1\n"));
  const RunResult r = run_cli("simulate --config " + cfg.string() + " --out " + dir.string());
  CHECK(r.exit_code == 2);
  CHECK(r.output.find("mystery") != std::string::npos);
  CHECK(r.output.find(":21") != std::string::npos);
}

TEST_CASE("cli simulate writes a stationary bundle whose sweeps equal their truth") {
  const fs::path dir = fresh_dir("stationary");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, config_text(kStationary, 2, ""));
  const RunResult r = run_cli("simulate --config " + cfg.string() + " --out " + dir.string());
  REQUIRE(r.exit_code == 0);
  CHECK(r.output.find("n_sweeps = 2") != std::string::npos);

  for (int m = 0; m < 2; ++m) {
    char sweep_name[32], truth_name[32];
    std::snprintf(sweep_name, sizeof(sweep_name), "sweep_%03d.csv", m);
    std::snprintf(truth_name, sizeof(truth_name), "truth_%03d.csv", m);
    const deskew::Sweep sweep = deskew::read_sweep_csv(dir / sweep_name, m);
    const deskew::Sweep truth = deskew::read_sweep_csv(dir / truth_name, m);
    REQUIRE(sweep.points.size() == truth.points.size());
    for (std::size_t i = 0; i < sweep.points.size(); ++i) {
      CHECK((sweep.points[i].P - truth.points[i].P).norm() < 1e-12);
    }
  }
}

TEST_CASE("cli simulate is seed-deterministic") {
  const fs::path dir_a = fresh_dir("det_a");
  const fs::path dir_b = fresh_dir("det_b");
  const fs::path cfg = dir_a / "run.cfg";
  write_file(cfg, config_text(kTurn, 1, ""));
  const RunResult a = run_cli("simulate --config " + cfg.string() + " --out " + dir_a.string());
  const RunResult b = run_cli("simulate --config " + cfg.string() + " --out " + dir_b.string());
  REQUIRE(a.exit_code == 0);
  REQUIRE(b.exit_code == 0);
  CHECK(a.output == b.output);
  CHECK(read_file(dir_a / "manifest.txt") == read_file(dir_b / "manifest.txt"));
  CHECK(read_file(dir_a / "imu.csv") == read_file(dir_b / "imu.csv"));
}

TEST_CASE("each sweep window holds rate x duration IMU samples") {
  const fs::path dir = fresh_dir("window");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, config_text(kTurn, 2, ""));
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + dir.string()).exit_code == 0);

  const auto imu = deskew::read_imu_csv(dir / "imu.csv");
  for (int m = 0; m < 2; ++m) {
    char name[32];
    std::snprintf(name, sizeof(name), "sweep_%03d.csv", m);
    const deskew::Sweep sweep = deskew::read_sweep_csv(dir / name, m);
    int inside = 0;
    for (const auto& s : imu) {
      if (s.t >= sweep.t_first() && s.t <= sweep.t_last()) ++inside;
    }
    CHECK(inside >= 79);
    CHECK(inside <= 81);
  }
}

TEST_CASE("cli deskew on stationary data returns the inputs") {
  const fs::path dir = fresh_dir("noop");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, config_text(kStationary, 1, ""));
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + dir.string()).exit_code == 0);
  REQUIRE(run_cli("deskew --config " + cfg.string() + " --out " + dir.string()).exit_code == 0);

  const deskew::Sweep in = deskew::read_sweep_csv(dir / "sweep_000.csv", 0);
  const deskew::Sweep out = deskew::read_sweep_csv(dir / "deskewed_proposed_000.csv", 0);
  REQUIRE(in.points.size() == out.points.size());
  for (std::size_t i = 0; i < in.points.size(); ++i) {
    CHECK((in.points[i].P - out.points[i].P).norm() < 1e-10);
  }

  const RunResult eval =
      run_cli("evaluate --config " + cfg.string() + " --out " + dir.string());
  CHECK(eval.exit_code == 0);
  REQUIRE(fs::exists(dir / "report_proposed.txt"));
  const std::string report = read_file(dir / "report_proposed.txt");
  CHECK(report.find("sweep.0.rmse = 0\n") != std::string::npos);

  const RunResult cmp = run_cli("compare --config " + cfg.string() + " --out " + dir.string());
  CHECK(cmp.exit_code == 0);
  CHECK(cmp.output.find("proposed rmse mean = 0\n") != std::string::npos);
  CHECK(cmp.output.find("baseline rmse mean = 0\n") != std::string::npos);
}

TEST_CASE("cli reports format violations with record numbers") {
  const fs::path dir = fresh_dir("badfile");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, config_text(kStationary, 1, ""));
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + dir.string()).exit_code == 0);
  std::string sweep = read_file(dir / "sweep_000.csv");
  sweep.insert(sweep.find('\n', sweep.find('\n') + 1) + 1, "0.1,broken\n");
  write_file(dir / "sweep_000.csv", sweep);

  const RunResult r = run_cli("deskew --config " + cfg.string() + " --out " + dir.string());
  CHECK(r.exit_code == 3);
  CHECK(r.output.find("record 3") != std::string::npos);
}

TEST_CASE("cli methods agree on constant-velocity data") {
  const fs::path dir = fresh_dir("linear");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, config_text(kConstVel, 1, ""));
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + dir.string()).exit_code == 0);
  REQUIRE(run_cli("deskew --config " + cfg.string() + " --out " + dir.string() +
                  " --method proposed")
              .exit_code == 0);
  REQUIRE(run_cli("deskew --config " + cfg.string() + " --out " + dir.string() +
                  " --method baseline")
              .exit_code == 0);

  const deskew::Sweep prop = deskew::read_sweep_csv(dir / "deskewed_proposed_000.csv", 0);
  const deskew::Sweep base = deskew::read_sweep_csv(dir / "deskewed_baseline_000.csv", 0);
  REQUIRE(prop.points.size() == base.points.size());
  for (std::size_t i = 0; i < prop.points.size(); ++i) {
    CHECK((prop.points[i].P - base.points[i].P).norm() < 1e-10);
  }
}

TEST_CASE("cli reports an IMU coverage gap with the sweep index") {
  const fs::path dir = fresh_dir("gap");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, config_text(kStationary, 2, ""));
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + dir.string()).exit_code == 0);

  // Drop the tail of the IMU stream so sweep 1 loses its coverage.
  const auto imu = deskew::read_imu_csv(dir / "imu.csv");
  std::vector<deskew::ImuSample> truncated(imu.begin(), imu.begin() + imu.size() / 2);
  deskew::write_imu_csv(dir / "imu.csv", truncated);

  const RunResult r = run_cli("deskew --config " + cfg.string() + " --out " + dir.string());
  CHECK(r.exit_code == 4);
  CHECK(r.output.find("sweep 1") != std::string::npos);
}

TEST_CASE("cli compare runs both methods and summarizes") {
  const fs::path dir = fresh_dir("compare");
  const fs::path cfg = dir / "run.cfg";
  write_file(cfg, config_text(kTurn, 1, ""));
  const RunResult r = run_cli("compare --config " + cfg.string() + " --out " + dir.string());
  REQUIRE(r.exit_code == 0);
  CHECK(fs::exists(dir / "compare_report.txt"));
  CHECK(fs::exists(dir / "compare_points.csv"));
  CHECK(r.output.find("improvement percent") != std::string::npos);
}

TEST_CASE("cli maps an unsupported IMU rate to the validation exit code") {
  const fs::path dir = fresh_dir("lowrate");
  const fs::path cfg = dir / "run.cfg";
  std::string text = config_text(kStationary, 1, "");
  const auto pos = text.find("imu_rate = 400");
  text.replace(pos, 14, "imu_rate = 50");
  write_file(cfg, text);
  const RunResult r = run_cli("simulate --config " + cfg.string() + " --out " + dir.string());
  CHECK(r.exit_code == 8);
  CHECK(r.output.find("100") != std::string::npos);
}

TEST_CASE("cli seed override feeds the pipeline") {
  const fs::path dir_a = fresh_dir("seed_a");
  const fs::path dir_b = fresh_dir("seed_b");
  const fs::path cfg = dir_a / "run.cfg";
  write_file(cfg, config_text(kTurn, 1, ""));
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + dir_a.string() +
                  " --seed 123")
              .exit_code == 0);
  REQUIRE(run_cli("simulate --config " + cfg.string() + " --out " + dir_b.string() +
                  " --seed 123")
              .exit_code == 0);
  CHECK(read_file(dir_a / "manifest.txt") == read_file(dir_b / "manifest.txt"));
}
