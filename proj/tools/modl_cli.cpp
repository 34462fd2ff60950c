// SPDX-License-Identifier: Apache-2.0
// modl command-line entry point: validate, run, report, sweep-k.

#include <CLI11.hpp>

#include <iostream>

#include "modl/modl.hpp"

namespace {

struct Options {
  std::string config;
  std::string out;
  std::vector<std::uint64_t> seeds;
  std::vector<std::size_t> ks;
  std::size_t workers = 1;
  bool quiet = false;
};

modl::ExperimentConfig load(const Options& o) {
  modl::ExperimentConfig cfg = modl::load_config(o.config);
  if (!o.out.empty()) cfg.output_dir = o.out;
  if (!o.seeds.empty()) cfg.eval.seeds = o.seeds;
  return cfg;
}

int report_config_errors(const modl::ConfigErrors& e, const std::string& path) {
  std::cerr << path << ": invalid configuration\n";
  for (const auto& i : e.issues) std::cerr << "  " << i.to_string() << "\n";
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Many-to-one distribution learning with K-nearest-neighbor smoothing"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&](CLI::App* sub, bool need_config) {
    auto* c = sub->add_option("--config", o.config, "experiment config file");
    if (need_config) c->required()->check(CLI::ExistingFile);
    sub->add_option("--out", o.out, "output directory (overrides output.dir)");
    sub->add_option("--seeds", o.seeds, "comma-separated seeds (overrides eval.seeds)")->delimiter(',');
    sub->add_option("--workers", o.workers, "concurrent training jobs")->check(CLI::PositiveNumber);
    sub->add_flag("--quiet", o.quiet, "only print warnings and errors");
  };

  auto* validate = app.add_subcommand("validate", "check a config file without running anything");
  add_common(validate, true);
  auto* run = app.add_subcommand("run", "train references and all ablation arms, write artifacts");
  add_common(run, true);
  auto* report = app.add_subcommand("report", "summarize an output directory");
  add_common(report, false);
  auto* sweep = app.add_subcommand("sweep-k", "B+MODL+KNNS improvement over B for several K");
  add_common(sweep, true);
  sweep->add_option("--k", o.ks, "comma-separated K values (overrides eval.k_sweep)")->delimiter(',');

  CLI11_PARSE(app, argc, argv);
  modl::log_threshold() = o.quiet ? modl::LogLevel::Warn : modl::LogLevel::Info;

  try {
    if (*validate) {
      const auto cfg = load(o);
      std::cout << o.config << ": ok (" << cfg.eval.seeds.size() << " seeds, " << cfg.eval.arms.size()
                << " arms, output " << cfg.output_dir.string() << ")\n";
      return 0;
    }
    if (*run) {
      const auto cfg = load(o);
      const auto res = modl::run_experiment(cfg, o.workers);
      std::cout << "wrote " << cfg.output_dir.string() << " (" << res.seeds.size() << " seeds)\n";
      return 0;
    }
    if (*sweep) {
      const auto cfg = load(o);
      const auto ks = o.ks.empty() ? cfg.eval.k_sweep : o.ks;
      const auto rows = modl::k_sweep(cfg, ks, o.workers);
      std::cout << modl::k_sweep_csv(rows);
      return 0;
    }
    if (*report) {
      std::filesystem::path dir = o.out;
      if (dir.empty()) {
        if (o.config.empty()) {
          std::cerr << "report: pass --out <dir> or --config <file>\n";
          return 2;
        }
        dir = load(o).output_dir;
      }
      std::cout << modl::report(dir);
      return 0;
    }
  } catch (const modl::ConfigErrors& e) {
    return report_config_errors(e, o.config);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
