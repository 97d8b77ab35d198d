#include <CLI11.hpp>
#include <cstdint>
#include <iostream>
#include <string>

#include "deskew/pipeline.hpp"

namespace {

// Distinct exit codes per error class so scripts can branch on failures.
enum ExitCode : int {
  kOk = 0,
  kUnknown = 1,
  kConfig = 2,
  kFormat = 3,
  kCoverageGap = 4,
  kNonMonotone = 5,
  kCardinality = 6,
  kIo = 7,
  kValidation = 8,
};

struct Options {
  std::string config_path;
  std::string out_dir;  // empty: use the config's out_dir
  std::string method = "proposed";
  std::string mode;  // empty: use the config's deskew_mode
  std::uint64_t seed = 0;
  bool seed_set = false;
};

deskew::RunConfig load_config(const Options& opt) {
  deskew::RunConfig cfg = deskew::parse_run_config(opt.config_path);
  if (opt.seed_set) cfg.seed = opt.seed;
  if (!opt.mode.empty()) {
    cfg.deskew_mode = opt.mode == "fractional" ? deskew::DeskewMode::Fractional
                                               : deskew::DeskewMode::Snap;
  }
  if (!opt.out_dir.empty()) cfg.out_dir = opt.out_dir;
  return cfg;
}

deskew::Method parse_method(const std::string& name) {
  return name == "baseline" ? deskew::Method::Baseline : deskew::Method::Proposed;
}

void add_common(CLI::App* cmd, Options& opt, bool with_method) {
  cmd->add_option("--config", opt.config_path, "run configuration file")->required();
  cmd->add_option("--out", opt.out_dir, "working directory (overrides the config's out_dir)");
  cmd->add_option("--seed", opt.seed, "master seed override")
      ->each([&opt](const std::string&) { opt.seed_set = true; });
  cmd->add_option("--mode", opt.mode, "de-skew mode override")
      ->check(CLI::IsMember({"snap", "fractional"}));
  if (with_method) {
    cmd->add_option("--method", opt.method, "correction method")
        ->check(CLI::IsMember({"proposed", "baseline"}));
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Motion de-skewing of LiDAR sweeps from high-rate IMU data"};
  app.require_subcommand(1);

  Options opt;
  CLI::App* simulate = app.add_subcommand("simulate", "generate a synthetic ground-truth bundle");
  CLI::App* deskew_cmd = app.add_subcommand("deskew", "correct the simulated sweeps");
  CLI::App* evaluate = app.add_subcommand("evaluate", "score corrected sweeps against truth");
  CLI::App* compare =
      app.add_subcommand("compare", "run both methods over seeded repeats and aggregate");
  add_common(simulate, opt, false);
  add_common(deskew_cmd, opt, true);
  add_common(evaluate, opt, true);
  add_common(compare, opt, false);

  CLI11_PARSE(app, argc, argv);

  try {
    const deskew::RunConfig cfg = load_config(opt);
    const std::filesystem::path dir = cfg.out_dir;
    if (simulate->parsed()) {
      std::cout << deskew::cmd_simulate(cfg, dir);
    } else if (deskew_cmd->parsed()) {
      deskew::cmd_deskew(cfg, dir, parse_method(opt.method));
      std::cout << "deskewed " << cfg.n_sweeps << " sweep(s) with method " << opt.method << "\n";
    } else if (evaluate->parsed()) {
      const auto per_sweep = deskew::cmd_evaluate(cfg, dir, parse_method(opt.method));
      for (std::size_t m = 0; m < per_sweep.size(); ++m) {
        std::cout << "sweep " << m << " rmse = " << deskew::fmt_g17(per_sweep[m].rmse) << "\n";
      }
    } else if (compare->parsed()) {
      const deskew::CompareResult r = deskew::cmd_compare(cfg, dir);
      std::cout << "proposed rmse mean = " << deskew::fmt_g17(r.proposed_mean) << "\n"
                << "baseline rmse mean = " << deskew::fmt_g17(r.baseline_mean) << "\n"
                << "improvement percent = " << deskew::fmt_g17(r.improvement) << "\n";
    }
  } catch (const deskew::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kConfig;
  } catch (const deskew::FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kFormat;
  } catch (const deskew::ImuCoverageGap& e) {
    std::cerr << "coverage error: " << e.what() << "\n";
    return kCoverageGap;
  } catch (const deskew::NonMonotoneTimestamps& e) {
    std::cerr << "timestamp error: " << e.what() << "\n";
    return kNonMonotone;
  } catch (const deskew::CardinalityMismatch& e) {
    std::cerr << "cardinality error: " << e.what() << "\n";
    return kCardinality;
  } catch (const deskew::IoError& e) {
    std::cerr << "io error: " << e.what() << "\n";
    return kIo;
  } catch (const deskew::InvalidInterval& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const deskew::UnsupportedRate& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUnknown;
  }
  return kOk;
}
