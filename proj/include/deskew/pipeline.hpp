#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "deskew/io.hpp"
#include "deskew/sweep_deskew.hpp"
#include "deskew/synthetic.hpp"

namespace deskew {

enum class Method { Proposed, Baseline };

inline std::string method_name(Method m) {
  return m == Method::Proposed ? "proposed" : "baseline";
}

namespace pipeline_detail {

inline std::string sweep_file(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "sweep_%03d.csv", index);
  return buf;
}

inline std::string truth_file(int index) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "truth_%03d.csv", index);
  return buf;
}

inline std::string deskewed_file(Method m, int index) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "deskewed_%s_%03d.csv", method_name(m).c_str(), index);
  return buf;
}

inline DeskewedSweep run_method(Method method, const Sweep& sweep,
                                std::span<const ImuSample> imu, const RunConfig& cfg,
                                const AnchorState& anchor) {
  if (method == Method::Proposed) {
    return deskew_sweep(sweep, imu, cfg.bias, anchor, cfg.sync_policy, cfg.gravity,
                        cfg.deskew_mode);
  }
  return deskew_linear_baseline(sweep, imu, cfg.bias, anchor, cfg.gravity, cfg.deskew_mode);
}

inline void append_metrics(std::ostream& out, const std::string& prefix, const Metrics& m) {
  out << prefix << ".rmse = " << fmt_g17(m.rmse) << '\n';
  out << prefix << ".mean = " << fmt_g17(m.mean_err) << '\n';
  out << prefix << ".max = " << fmt_g17(m.max_err) << '\n';
  const char axes[3] = {'x', 'y', 'z'};
  for (int a = 0; a < 3; ++a) {
    const AxisErrorStats& st = m.axis[static_cast<std::size_t>(a)];
    out << prefix << '.' << axes[a] << ".mean = " << fmt_g17(st.mean) << '\n';
    out << prefix << '.' << axes[a] << ".p50 = " << fmt_g17(st.p50) << '\n';
    out << prefix << '.' << axes[a] << ".p90 = " << fmt_g17(st.p90) << '\n';
    out << prefix << '.' << axes[a] << ".max = " << fmt_g17(st.max) << '\n';
  }
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

inline MeanStd mean_std(const std::vector<double>& values) {
  MeanStd out;
  if (values.empty()) return out;
  for (double v : values) out.mean += v;
  out.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - out.mean) * (v - out.mean);
  out.std = std::sqrt(var / static_cast<double>(values.size()));
  return out;
}

}  // namespace pipeline_detail

/// Writes the full ground-truth bundle under out_dir and returns the manifest
/// text (also written to manifest.txt).
inline std::string cmd_simulate(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const GroundTruthBundle bundle = generate_bundle(to_bundle_params(cfg));

  std::vector<std::string> files;
  write_imu_csv(out_dir / "imu.csv", bundle.imu);
  files.push_back("imu.csv");
  for (std::size_t m = 0; m < bundle.sweeps.size(); ++m) {
    const std::string sf = pipeline_detail::sweep_file(static_cast<int>(m));
    const std::string tf = pipeline_detail::truth_file(static_cast<int>(m));
    write_sweep_csv(out_dir / sf, bundle.sweeps[m]);
    write_points_csv(out_dir / tf, bundle.sweeps[m], bundle.truth_scans[m]);
    files.push_back(sf);
    files.push_back(tf);
  }
  write_anchors_csv(out_dir / "anchors.csv", bundle.anchors);
  files.push_back("anchors.csv");
  write_poses_csv(out_dir / "poses.csv", bundle.pose_log);
  files.push_back("poses.csv");

  std::ostringstream manifest;
  manifest << "# lidar-deskew manifest v1\n";
  manifest << "seed = " << cfg.seed << '\n';
  manifest << "n_sweeps = " << bundle.sweeps.size() << '\n';
  manifest << "imu_samples = " << bundle.imu.size() << '\n';
  for (const std::string& f : files) {
    manifest << "file = " << f << " fnv64=" << file_hash_hex(out_dir / f) << '\n';
  }
  const std::string text = manifest.str();
  auto out = io_detail::open_out(out_dir / "manifest.txt");
  out << text;
  return text;
}

/// De-skews every simulated sweep found in dir with the selected method and
/// writes deskewed_<method>_NNN.csv next to the inputs.
inline void cmd_deskew(const RunConfig& cfg, const std::filesystem::path& dir, Method method) {
  const std::vector<ImuSample> imu = read_imu_csv(dir / "imu.csv");
  const std::vector<SweepAnchor> anchors = read_anchors_csv(dir / "anchors.csv");
  if (anchors.size() != static_cast<std::size_t>(cfg.n_sweeps)) {
    throw FormatError("anchors.csv holds " + std::to_string(anchors.size()) +
                      " rows but the config names " + std::to_string(cfg.n_sweeps) + " sweeps");
  }
  for (int m = 0; m < cfg.n_sweeps; ++m) {
    const Sweep sweep = read_sweep_csv(dir / pipeline_detail::sweep_file(m), m);
    const DeskewedSweep corrected =
        pipeline_detail::run_method(method, sweep, imu, cfg, anchors[static_cast<std::size_t>(m)].state);
    write_points_csv(dir / pipeline_detail::deskewed_file(method, m), sweep, corrected);
  }
}

/// Evaluates deskewed_<method>_NNN.csv against truth_NNN.csv and writes
/// report_<method>.txt. Returns the per-sweep metrics.
inline std::vector<Metrics> cmd_evaluate(const RunConfig& cfg, const std::filesystem::path& dir,
                                         Method method) {
  std::vector<Metrics> per_sweep;
  for (int m = 0; m < cfg.n_sweeps; ++m) {
    const Sweep corrected = read_sweep_csv(dir / pipeline_detail::deskewed_file(method, m), m);
    const Sweep truth = read_sweep_csv(dir / pipeline_detail::truth_file(m), m);
    if (corrected.points.size() != truth.points.size()) {
      throw CardinalityMismatch("sweep " + std::to_string(m) + ": " +
                                std::to_string(corrected.points.size()) + " corrected vs " +
                                std::to_string(truth.points.size()) + " truth points");
    }
    std::vector<Vec3> a(corrected.points.size()), b(truth.points.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      a[i] = corrected.points[i].P;
      b[i] = truth.points[i].P;
    }
    per_sweep.push_back(evaluate(a, b));
  }

  std::vector<double> rmses;
  for (const Metrics& m : per_sweep) rmses.push_back(m.rmse);
  const pipeline_detail::MeanStd agg = pipeline_detail::mean_std(rmses);

  auto out = io_detail::open_out(dir / ("report_" + method_name(method) + ".txt"));
  out << "# lidar-deskew report v1\n";
  out << "method = " << method_name(method) << '\n';
  out << "sweeps = " << per_sweep.size() << '\n';
  for (std::size_t m = 0; m < per_sweep.size(); ++m) {
    pipeline_detail::append_metrics(out, "sweep." + std::to_string(m), per_sweep[m]);
  }
  out << "aggregate.rmse_mean = " << fmt_g17(agg.mean) << '\n';
  out << "aggregate.rmse_std = " << fmt_g17(agg.std) << '\n';
  return per_sweep;
}

struct CompareResult {
  std::vector<double> proposed_rmse;  // one mean-over-sweeps entry per run
  std::vector<double> baseline_rmse;
  double proposed_mean = 0.0;
  double proposed_std = 0.0;
  double baseline_mean = 0.0;
  double baseline_std = 0.0;
  double improvement = 0.0;
};

/// Runs simulate -> deskew (both methods) -> evaluate for compare.runs seeds
/// derived as seed + run index, writes compare_report.txt and the plot-ready
/// compare_points.csv (per-point error against signed time offset from the
/// sync instant), and returns the aggregates. Fully in-memory, byte-stable
/// output for a fixed master seed.
inline CompareResult cmd_compare(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);

  CompareResult result;
  auto points_csv = io_detail::open_out(out_dir / "compare_points.csv");
  points_csv << "run,sweep,point,dt_sync,err_proposed,err_baseline\n";

  BundleParams params = to_bundle_params(cfg);
  for (int run = 0; run < cfg.compare_runs; ++run) {
    params.seed = cfg.seed + static_cast<std::uint64_t>(run);
    params.trajectory.seed = params.seed;
    const GroundTruthBundle bundle = generate_bundle(params);

    std::vector<double> prop_rmse, base_rmse;
    for (std::size_t m = 0; m < bundle.sweeps.size(); ++m) {
      const Sweep& sweep = bundle.sweeps[m];
      const AnchorState& anchor = bundle.anchors[m].state;
      const DeskewedSweep prop =
          pipeline_detail::run_method(Method::Proposed, sweep, bundle.imu, cfg, anchor);
      const DeskewedSweep base =
          pipeline_detail::run_method(Method::Baseline, sweep, bundle.imu, cfg, anchor);
      const DeskewedSweep& truth = bundle.truth_scans[m];
      prop_rmse.push_back(evaluate(prop, truth).rmse);
      base_rmse.push_back(evaluate(base, truth).rmse);

      for (std::size_t l = 0; l < sweep.points.size(); ++l) {
        const double dt_sync = sweep.points[l].t - truth.sync_time;
        const double ep = (prop.points[l] - truth.points[l]).norm();
        const double eb = (base.points[l] - truth.points[l]).norm();
        points_csv << run << ',' << m << ',' << l << ',' << fmt_g17(dt_sync) << ','
                   << fmt_g17(ep) << ',' << fmt_g17(eb) << '\n';
      }
    }
    result.proposed_rmse.push_back(pipeline_detail::mean_std(prop_rmse).mean);
    result.baseline_rmse.push_back(pipeline_detail::mean_std(base_rmse).mean);
  }

  const pipeline_detail::MeanStd prop = pipeline_detail::mean_std(result.proposed_rmse);
  const pipeline_detail::MeanStd base = pipeline_detail::mean_std(result.baseline_rmse);
  result.proposed_mean = prop.mean;
  result.proposed_std = prop.std;
  result.baseline_mean = base.mean;
  result.baseline_std = base.std;
  result.improvement = improvement_percent(base.mean, prop.mean);

  auto report = io_detail::open_out(out_dir / "compare_report.txt");
  report << "# lidar-deskew compare v1\n";
  report << "runs = " << cfg.compare_runs << '\n';
  report << "seed = " << cfg.seed << '\n';
  for (int run = 0; run < cfg.compare_runs; ++run) {
    report << "run." << run
           << ".proposed.rmse = " << fmt_g17(result.proposed_rmse[static_cast<std::size_t>(run)])
           << '\n';
    report << "run." << run
           << ".baseline.rmse = " << fmt_g17(result.baseline_rmse[static_cast<std::size_t>(run)])
           << '\n';
  }
  report << "proposed.rmse_mean = " << fmt_g17(result.proposed_mean) << '\n';
  report << "proposed.rmse_std = " << fmt_g17(result.proposed_std) << '\n';
  report << "baseline.rmse_mean = " << fmt_g17(result.baseline_mean) << '\n';
  report << "baseline.rmse_std = " << fmt_g17(result.baseline_std) << '\n';
  report << "improvement_percent = " << fmt_g17(result.improvement) << '\n';
  return result;
}

}  // namespace deskew
