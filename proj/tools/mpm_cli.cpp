#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "mpm/error.hpp"
#include "mpm/experiment.hpp"

namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  bool deterministic = false;
  std::string out;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON); desk defaults when omitted");
  cmd->add_option("--seed", c.seed, "MPM training seed, overrides the config");
  cmd->add_flag("--deterministic", c.deterministic, "single worker; identical outputs for identical inputs");
  cmd->add_option("--out", c.out, "output directory, overrides the config");
}

mpm::ExperimentConfig resolve(const Common& c) {
  mpm::ExperimentConfig cfg = c.config.empty() ? mpm::ExperimentConfig::desk() : mpm::load_experiment_config(c.config);
  if (c.seed) cfg.seed = *c.seed;
  if (c.deterministic) cfg.deterministic = true;
  if (!c.out.empty()) cfg.output_dir = c.out;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Masked prosody model pipeline"};
  app.require_subcommand(0, 1);
  bool print_config = false;
  app.add_flag("--print-config", print_config, "print the desk default config and exit");

  Common common;
  std::string strategy, report_path;

  auto* features = app.add_subcommand("features", "extract prosody and CWT features into the cache");
  auto* train = app.add_subcommand("train", "train one MPM strategy");
  auto* probe = app.add_subcommand("probe", "run the probe grid over the configured representations");
  auto* sweep = app.add_subcommand("sweep", "train every strategy and probe them on shared folds and seeds");
  auto* report = app.add_subcommand("report", "render tables and plots from a report");
  auto* synth = app.add_subcommand("synth", "write the synthetic corpus as a feature cache plus labels");
  for (auto* cmd : {features, train, probe, sweep, synth}) add_common(cmd, common);
  train->add_option("--strategy", strategy, "corruption strategy: a mask size or \"random\"")->required();
  report->add_option("report", report_path, "report TSV (default: <output_dir>/sweep_report.tsv or report.tsv)");
  report->add_option("--config", common.config, "experiment config locating the default report");
  report->add_option("--out", common.out, "directory for tables and plots (default: <output_dir>/view)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    if (print_config) {
      std::cout << mpm::Json(mpm::ExperimentConfig::desk()).dump(2) << '\n';
      return 0;
    }
    if (*features) {
      const auto cfg = resolve(common);
      const auto o = mpm::cmd_features(cfg);
      std::printf("features: %d computed, %d cached, %zu failed -> %s\n", o.computed, o.skipped, o.failed.size(),
                  cfg.output_dir.c_str());
      for (const auto& f : o.failed) std::printf("  unreadable: %s\n", f.c_str());
      return o.exit_code();
    }
    if (*train) {
      const auto cfg = resolve(common);
      const auto r = mpm::cmd_train(cfg, strategy);
      std::printf("train %s: %d steps, final loss %.4f -> %s\n", strategy.c_str(), r.checkpoint.metadata.steps_completed,
                  r.checkpoint.metadata.final_loss, mpm::checkpoint_path(cfg, strategy).c_str());
      return 0;
    }
    if (*probe) {
      const auto cfg = resolve(common);
      const auto r = mpm::cmd_probe(cfg);
      std::cout << r.summary_table();
      return r.absent_cells() == 0 ? 0 : 2;
    }
    if (*sweep) {
      const auto cfg = resolve(common);
      const auto s = mpm::cmd_sweep(cfg);
      std::cout << s.report.summary_table();
      for (const auto& f : s.failed_strategies) std::printf("failed strategy: %s\n", f.c_str());
      return s.exit_code();
    }
    if (*report) {
      mpm::ExperimentConfig cfg =
          common.config.empty() ? mpm::ExperimentConfig::desk() : mpm::load_experiment_config(common.config);
      fs::path path = report_path;
      if (path.empty()) {
        path = cfg.out() / "sweep_report.tsv";
        if (!fs::exists(path)) path = cfg.out() / "report.tsv";
      }
      const fs::path out = common.out.empty() ? path.parent_path() / "view" : fs::path(common.out);
      const auto t0 = std::chrono::steady_clock::now();
      const auto written = mpm::cmd_report(path, out, path.parent_path() / "checkpoints");
      for (const auto& p : written) std::printf("wrote %s\n", p.c_str());
      mpm::record_report_artifacts(cfg, written,
                                   std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
      return 0;
    }
    if (*synth) {
      const auto cfg = resolve(common);
      const fs::path out = common.out.empty() ? cfg.out() / "synth" : fs::path(common.out);
      mpm::cmd_synth(cfg, out);
      std::printf("synth: %d utterances (seed %llu) -> %s\n", cfg.corpus.synthetic.num_utterances,
                  static_cast<unsigned long long>(cfg.corpus.synthetic.seed), out.c_str());
      return 0;
    }
    std::cout << app.help();
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
